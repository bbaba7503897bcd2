"""
Synthetic scoresheet generation
"""

from .dataset import DatasetSpec, SampleManifest, build_templates, derive_seed, generate_dataset, load_manifests, sample_codes
from .glyphs import GlyphBank, GlyphStyle, make_style_pool, render_glyph
from .sequences import SequenceSource, sample_sequence
from .sheet import SheetLayout, compose_sheet
