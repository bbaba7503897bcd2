"""
Attention encoder-decoder model
"""

from .batch import Batch, pad_targets
from .checkpoint import load_checkpoint, save_checkpoint
from .config import GridGeometry, ModelConfig
from .network import AttentionRecord, DecodeResult, FeatureGrid, ScoresheetModel
