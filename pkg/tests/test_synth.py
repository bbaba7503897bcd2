import tempfile
import unittest
from dataclasses import replace

import numpy as np

from scoresheet_reader.core.image_processor import ImageProcessor
from scoresheet_reader.core.notation import load_pgn_file
from scoresheet_reader.core.vocabulary import NUM_SPECIALS, PAD_CODE, build_vocabulary
from scoresheet_reader.errors import CompositionError, ConfigError, DataError, RenderError
from scoresheet_reader.synth import (DatasetSpec, GlyphBank, GlyphStyle, SequenceSource, SheetLayout,
                                     build_templates, compose_sheet, generate_dataset, load_manifests,
                                     make_style_pool, render_glyph, sample_codes, sample_sequence)
from scoresheet_reader.synth.sheet import blank_sheet
from scoresheet_reader.utils.paths import get_data_dir

CORPUS = load_pgn_file(get_data_dir() / "openings.pgn")
VOCAB = build_vocabulary(CORPUS, positions=16)
TEMPLATES = build_templates(CORPUS, VOCAB, 16)
DESK = SheetLayout.preset("desk")


def small_spec(**overrides):
    values = dict(size=4, length=8, layout="desk", style_count=3, glyphs_per_token=1, seed=11)
    values.update(overrides)
    return DatasetSpec(**values)


def boxes_overlap(a, b):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


class GlyphTestCase(unittest.TestCase):

    def test_same_style_same_pixels(self):
        style = GlyphStyle(slant=0.1, stroke_width=1, baseline_wobble=1.0, seed=4)
        a = render_glyph("Nf3", style, DESK.cell_size)
        b = render_glyph("Nf3", style, DESK.cell_size)
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = render_glyph("Nf3", GlyphStyle(seed=1), DESK.cell_size)
        b = render_glyph("Nf3", GlyphStyle(seed=2), DESK.cell_size)
        self.assertTrue(a.shape != b.shape or np.any(a != b))

    def test_every_token_fits_its_cell(self):
        width, height = DESK.cell_size
        for style in make_style_pool(range(3), (1, 2), 1.0):
            for token in VOCAB.moves:
                glyph = render_glyph(token, style, DESK.cell_size)
                self.assertLessEqual(glyph.shape[0], height, token)
                self.assertLessEqual(glyph.shape[1], width, token)
                self.assertLess(glyph.min(), 1.0, token)

    def test_undrawable_character(self):
        with self.assertRaises(RenderError):
            render_glyph("Nf3?", GlyphStyle(), DESK.cell_size)
        with self.assertRaises(RenderError):
            GlyphStyle(stroke_width=0)


class SequenceSourceTestCase(unittest.TestCase):

    def test_zero_mutation_returns_template(self):
        src = SequenceSource.from_templates([TEMPLATES[0]], len(VOCAB), 0.0)
        self.assertEqual(sample_sequence(src, 16, seed=5), list(TEMPLATES[0]))

    def test_deterministic(self):
        src = SequenceSource.from_templates(TEMPLATES, len(VOCAB), 0.2)
        self.assertEqual(sample_sequence(src, 12, 9), sample_sequence(src, 12, 9))

    def test_uniform_draws_are_uniform(self):
        src = SequenceSource.uniform(len(VOCAB))
        counts = np.zeros(len(VOCAB), dtype=np.int64)
        for seed in range(1000):
            for code in sample_sequence(src, 100, seed):
                counts[code] += 1
        self.assertEqual(counts[:NUM_SPECIALS].sum(), 0)
        moves = counts[NUM_SPECIALS:]
        expected = moves.sum() / len(moves)
        chi2 = float(((moves - expected) ** 2 / expected).sum())
        dof = len(moves) - 1
        self.assertLess(chi2, dof + 5 * np.sqrt(2 * dof))

    def test_invalid_sources(self):
        with self.assertRaises(ConfigError):
            SequenceSource.from_templates([], len(VOCAB), 0.2)
        with self.assertRaises(ConfigError):
            SequenceSource.from_templates(TEMPLATES, len(VOCAB), 1.5)
        src = SequenceSource.from_templates([TEMPLATES[0][:4]], len(VOCAB), 0.0)
        with self.assertRaises(ConfigError):
            sample_sequence(src, 8, 0)


class ComposeSheetTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.bank = GlyphBank.build(VOCAB, make_style_pool(range(3), (1, 2), 1.0), 2, DESK.cell_size, seed=0)

    def test_boxes_disjoint_and_inside_cells(self):
        codes = list(TEMPLATES[0][:8])
        image, boxes = compose_sheet(codes, DESK, self.bank, seed=3)
        self.assertEqual(image.shape, (88, 160))
        self.assertEqual(len(boxes), 8)
        for i, box in enumerate(boxes):
            cx, cy, cw, ch = DESK.cell_boxes[i]
            x, y, w, h = box
            self.assertTrue(cx <= x and cy <= y and x + w <= cx + cw and y + h <= cy + ch)
            for other in boxes[i + 1:]:
                self.assertFalse(boxes_overlap(box, other))

    def test_all_pad_leaves_cells_blank(self):
        image, boxes = compose_sheet([PAD_CODE] * 8, DESK, self.bank, seed=0)
        np.testing.assert_array_equal(image, blank_sheet(DESK))
        for x, y, w, h in boxes:
            self.assertTrue(np.all(image[y:y + h, x:x + w] == 1.0))

    def test_rejects_too_many_codes(self):
        with self.assertRaises(CompositionError):
            compose_sheet(list(TEMPLATES[0][:9]), DESK, self.bank, seed=0)

    def test_bank_holds_every_move(self):
        for code in VOCAB.move_codes:
            self.assertIn(code, self.bank)
            self.assertEqual(len(self.bank.instances(code)), 2)
        self.assertNotIn(PAD_CODE, self.bank)
        self.assertEqual(self.bank.instances(PAD_CODE), [])

    def test_missing_glyph(self):
        with self.assertRaises(CompositionError):
            compose_sheet([len(VOCAB) + 3], DESK, self.bank, seed=0)


class GenerateDatasetTestCase(unittest.TestCase):

    def test_regeneration_is_bit_identical(self):
        spec = small_spec()
        a = generate_dataset(spec, VOCAB, TEMPLATES)
        b = generate_dataset(spec, VOCAB, TEMPLATES, jobs=3)
        self.assertEqual([m.codes for m in a], [m.codes for m in b])
        self.assertEqual([m.bboxes for m in a], [m.bboxes for m in b])
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.pixels, y.pixels)

    def test_manifest_invariants(self):
        for m in generate_dataset(small_spec(size=3, source="uniform"), VOCAB, TEMPLATES):
            self.assertEqual(len(m.codes), 8)
            self.assertEqual(len(m.bboxes), 8)
            self.assertEqual(m.source, "random")

    def test_sample_codes_match_rendered_targets(self):
        spec = small_spec()
        rendered = generate_dataset(spec, VOCAB, TEMPLATES)
        self.assertEqual(sample_codes(spec, VOCAB, TEMPLATES), [m.codes for m in rendered])

    def test_half_resolution_scales_boxes(self):
        full = generate_dataset(small_spec(size=2), VOCAB, TEMPLATES)
        half = generate_dataset(small_spec(size=2, half_resolution=True), VOCAB, TEMPLATES)
        self.assertEqual(half[0].pixels.shape, (44, 80))
        for f, h in zip(full, half):
            self.assertEqual(h.bboxes, [[v * 0.5 for v in box] for box in f.bboxes])
        with self.assertRaises(DataError):
            ImageProcessor.downsample_half(np.ones((3, 4)))

    def test_paper_layout_size(self):
        spec = small_spec(size=1, length=16, layout="paper", stroke_min=2, stroke_max=4)
        sample = generate_dataset(spec, VOCAB, TEMPLATES)[0]
        self.assertEqual(sample.pixels.shape, (862, 800))
        self.assertEqual(len(sample.bboxes), 16)
        half = generate_dataset(replace(spec, half_resolution=True), VOCAB, TEMPLATES)[0]
        self.assertEqual(half.pixels.shape, (431, 400))

    def test_written_manifest_reloads(self):
        spec = small_spec(size=3)
        with tempfile.TemporaryDirectory() as tmp:
            written = generate_dataset(spec, VOCAB, TEMPLATES, out_dir=tmp)
            loaded = load_manifests(tmp)
        self.assertEqual([m.codes for m in loaded], [m.codes for m in written])
        for x, y in zip(written, loaded):
            np.testing.assert_array_equal(x.pixels, y.pixels)

    def test_held_out_styles_change_pixels(self):
        a = generate_dataset(small_spec(size=1), VOCAB, TEMPLATES)[0]
        b = generate_dataset(small_spec(size=1, style_seed_start=1000), VOCAB, TEMPLATES)[0]
        self.assertEqual(a.codes, b.codes)
        self.assertTrue(np.any(a.pixels != b.pixels))

    def test_invalid_spec(self):
        with self.assertRaises(ConfigError):
            small_spec(size=0)
        with self.assertRaises(ConfigError):
            small_spec(source="shuffled")
        with self.assertRaises(ConfigError):
            DatasetSpec.from_dict({"size": 3, "colour": "blue"})
        with self.assertRaises(ConfigError):
            generate_dataset(small_spec(length=9), VOCAB, TEMPLATES)


if __name__ == '__main__':
    unittest.main()
