import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np

from scoresheet_reader.config import ABLATION_FACTORS, get_preset
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.experiments import (AblationSuite, DecoderOnlyModel, ablation_config, config_diff,
                                           evaluate_directions, recognition_lift, run_ablation, run_incremental,
                                           run_training)
from scoresheet_reader.experiments.ablation import ABLATION_FILE, DIRECTIONS_FILE, DirectionCheck
from scoresheet_reader.experiments.baseline import (BaselineConfig, BaselineSpec, held_out_sequences, score_baseline,
                                                   train_baseline)
from scoresheet_reader.experiments.common import (CHECKPOINT_FILE, METRICS_FILE, VOCABULARY_FILE, RunContext,
                                                  RunSummary, run_many)
from scoresheet_reader.experiments.sweep import (SWEEP_FILE, SweepRow, SweepSpec, gap_by_length, run_length_sweep,
                                                 sweep_config)
from scoresheet_reader.model.checkpoint import load_checkpoint
from scoresheet_reader.core.vocabulary import Vocabulary
from scoresheet_reader.synth.dataset import SampleManifest, sample_codes
from scoresheet_reader.training import TrainConfig
from scoresheet_reader.utils import FileManager

BASELINE_TRAIN = dict(batch_size=8, lr=0.05, dropout=0.0, val_fraction=0.0, clip_norm=5.0, seed=0)


def tiny_run_config(**train):
    """Desk sheets with a very small network, so a full run takes seconds."""
    cfg = get_preset('desk')
    cfg['dataset'].update(size=8, style_count=2, glyphs_per_token=1)
    cfg['eval'].update(test_size=4)
    cfg['model'].update(backbone_channels=[2, 2, 2, 2], hidden_dim=4, attention_dim=4, embed_dim=4)
    cfg['train'].update({'max_epochs': 1, 'batch_size': 4, **train})
    cfg['baseline'].update(epochs=1, hidden_dim=4, embed_dim=4)
    return cfg


class AblationConfigTestCase(unittest.TestCase):

    def setUp(self):
        self.base = get_preset('desk')
        self.suite = AblationSuite()

    def test_reference_is_unchanged(self):
        self.assertEqual(config_diff(self.base, ablation_config(self.base, 'a', self.suite)), {})

    def test_each_config_changes_only_its_factors(self):
        for name, factors in ABLATION_FACTORS.items():
            diff = config_diff(self.base, ablation_config(self.base, name, self.suite))
            self.assertEqual(set(diff), set(factors), name)

    def test_reduced_size(self):
        cfg = ablation_config(self.base, 'c', self.suite)
        self.assertEqual(cfg['dataset']['size'], 800)
        self.assertEqual(ablation_config(self.base, 'd', self.suite)['dataset']['source'], 'uniform')

    def test_invalid_suite(self):
        with self.assertRaises(ConfigError):
            AblationSuite(configs='az')
        with self.assertRaises(ConfigError):
            AblationSuite(seeds=[])
        with self.assertRaises(ConfigError):
            ablation_config(self.base, 'g', self.suite)


class DirectionTestCase(unittest.TestCase):

    def test_majority_vote(self):
        check = DirectionCheck("b_slower", "b", "a", "epochs_to_converge", ">")
        rows = [RunSummary('a', 0, epochs_to_converge=5), RunSummary('b', 0, epochs_to_converge=9),
                RunSummary('a', 1, epochs_to_converge=5), RunSummary('b', 1, epochs_to_converge=4),
                RunSummary('a', 2, epochs_to_converge=5), RunSummary('b', 2, epochs_to_converge=51)]
        result = evaluate_directions(rows, [check])[0]
        self.assertEqual((result.votes, result.compared), (2, 3))
        self.assertTrue(result.passed)

    def test_failed_runs_are_skipped(self):
        check = DirectionCheck("c_gap", "c", "a", "max_gap", ">")
        rows = [RunSummary('a', 0, max_gap=0.1), RunSummary.failed('c', 0, 'NumericError: boom'),
                RunSummary('a', 1, max_gap=0.1), RunSummary('c', 1, max_gap=0.05)]
        result = evaluate_directions(rows, [check])[0]
        self.assertEqual((result.votes, result.compared), (0, 1))
        self.assertFalse(result.passed)

    def test_tie_does_not_pass(self):
        check = DirectionCheck("x", "b", "a", "hit_rate", ">")
        rows = [RunSummary('a', 0, hit_rate=0.5), RunSummary('b', 0, hit_rate=0.6),
                RunSummary('a', 1, hit_rate=0.5), RunSummary('b', 1, hit_rate=0.4)]
        self.assertFalse(evaluate_directions(rows, [check])[0].passed)


class BaselineTestCase(unittest.TestCase):

    def test_collate_never_reads_pixels(self):
        model = DecoderOnlyModel(BaselineConfig(vocab_size=8, max_decode_len=4))
        sample = SampleManifest('missing.pgm', [4, 5, 6], [], 'random', 0)
        batch = model.collate([sample, [7]])
        self.assertIsNone(batch.images)
        self.assertIsNone(sample.pixels)
        np.testing.assert_array_equal(batch.targets[1], [7, 1, 2, 2])
        with self.assertRaises(ConfigError):
            model.predict(batch, max_len=0)

    def test_predictable_source_is_learned_without_images(self):
        sequences = [[4, 5, 6, 7]] * 16
        spec = BaselineSpec(sizes=[16], epochs=40, hidden_dim=16, embed_dim=8)
        cfg = TrainConfig(max_epochs=1, **BASELINE_TRAIN)
        model = train_baseline(sequences, 8, spec, cfg)
        scores = score_baseline(model, sequences[:4], cfg)
        self.assertGreaterEqual(scores['free_running_accuracy'], 0.99)

    def test_held_out_sequences_follow_the_training_source(self):
        context = RunContext(get_preset('desk'))
        train = replace(context.dataset_spec, source='uniform')
        test = context.test_spec
        self.assertEqual(test.source, 'template')
        sequences = held_out_sequences(train, test, context.vocabulary, context.templates)
        self.assertEqual(len(sequences), test.size)
        self.assertEqual(sequences, sample_codes(replace(test, source='uniform'), context.vocabulary,
                                                 context.templates))
        self.assertNotEqual(sequences, sample_codes(test, context.vocabulary, context.templates))

    def test_lift(self):
        self.assertAlmostEqual(recognition_lift(0.92, 0.35), 0.57)


class SweepTestCase(unittest.TestCase):

    def test_config_per_cell(self):
        spec = SweepSpec(lengths=[4, 16], sizes=[10], seeds=[0])
        cfg = sweep_config(get_preset('desk'), spec, 4, 10, 2)
        self.assertEqual(cfg['dataset']['length'], 4)
        self.assertEqual(cfg['dataset']['rows'], 8)
        self.assertEqual(cfg['corpus']['positions'], 16)
        self.assertEqual(cfg['seed'], 2)

    def test_length_must_fit_the_sheet(self):
        with self.assertRaises(ConfigError):
            SweepSpec(lengths=[20], rows=8)

    def test_gap_by_length(self):
        rows = [SweepRow(4, 10, RunSummary('x', 0, max_gap=0.1)), SweepRow(4, 10, RunSummary('x', 1, max_gap=0.3)),
                SweepRow(8, 10, RunSummary('x', 0, max_gap=0.5)), SweepRow(8, 20, RunSummary('x', 0, max_gap=0.9)),
                SweepRow(8, 10, RunSummary.failed('x', 1, 'boom'))]
        gaps = gap_by_length(rows, 10)
        self.assertAlmostEqual(gaps[4], 0.2)
        self.assertAlmostEqual(gaps[8], 0.5)


class RunTestCase(unittest.TestCase):

    def test_training_run_writes_artifacts(self):
        cfg = tiny_run_config()
        with tempfile.TemporaryDirectory() as tmp:
            summary = run_training(cfg, tmp, 'tiny')
            out = Path(tmp)
            for name in (CHECKPOINT_FILE, VOCABULARY_FILE, METRICS_FILE, 'curves.csv', 'run_header.txt',
                         'resolved_config.json'):
                self.assertTrue((out / name).exists(), name)
            vocabulary = Vocabulary.load(out / VOCABULARY_FILE)
            model, _ = load_checkpoint(out / CHECKPOINT_FILE, vocabulary.digest())
            self.assertEqual(model.config.vocab_size, len(vocabulary))
            self.assertTrue((out / 'attention' / 'attention.csv').exists())
        self.assertEqual(summary.status, 'ok')
        self.assertEqual(summary.epochs_run, 1)
        self.assertTrue(0.0 <= summary.test_accuracy <= 1.0)

    def test_same_seed_same_run(self):
        a = run_training(tiny_run_config(), None, 'a')
        b = run_training(tiny_run_config(), None, 'b')
        self.assertEqual(a.final_train_loss, b.final_train_loss)
        self.assertEqual(a.test_accuracy, b.test_accuracy)

    def test_resolved_config_reproduces_the_curves(self):
        def curves(path):
            return [{k: v for k, v in row.items() if k != 'seconds'} for row in FileManager.load_csv(path)]

        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            run_training(tiny_run_config(max_epochs=2), first, 'first')
            resolved = FileManager.load_json(Path(first) / 'resolved_config.json')
            run_training(resolved, second, 'second')
            self.assertEqual(curves(Path(first) / 'curves.csv'), curves(Path(second) / 'curves.csv'))

    def test_failed_run_becomes_a_row(self):
        bad = tiny_run_config()
        bad['eval']['test_source'] = 'shuffled'
        rows = run_many([('good', tiny_run_config(), None), ('bad', bad, None)])
        self.assertEqual([r.status for r in rows], ['ok', 'failed'])
        self.assertIn('ConfigError', rows[1].error)

    def test_ablation_tables(self):
        cfg = tiny_run_config()
        with tempfile.TemporaryDirectory() as tmp:
            result = run_ablation(cfg, AblationSuite(configs='ab', seeds=[0]), tmp)
            table = FileManager.load_csv(Path(tmp) / ABLATION_FILE)
            checks = FileManager.load_csv(Path(tmp) / DIRECTIONS_FILE)
        self.assertEqual([(r['config'], r['seed']) for r in table], [('a', '0'), ('b', '0')])
        self.assertNotEqual(table[0]['recognition_lift'], '')
        self.assertEqual(table[1]['recognition_lift'], '')
        self.assertEqual(len(checks), 8)
        self.assertIn(0, result.lifts)
        self.assertEqual(result.direction('b_converges_slower_than_a').compared, 1)

    def test_length_sweep_table(self):
        spec = SweepSpec(lengths=[2, 4], sizes=[6], seeds=[0], rows=4)
        with tempfile.TemporaryDirectory() as tmp:
            rows = run_length_sweep(tiny_run_config(), spec, tmp)
            table = FileManager.load_csv(Path(tmp) / SWEEP_FILE)
            self.assertTrue((Path(tmp) / 'len2_size6_seed0' / 'curves.csv').exists())
        self.assertEqual([(r.length, r.size, r.summary.status) for r in rows], [(2, 6, 'ok'), (4, 6, 'ok')])
        self.assertEqual([t['length'] for t in table], ['2', '4'])
        self.assertEqual(set(gap_by_length(rows, 6)), {2, 4})

    def test_incremental_schedule(self):
        cfg = tiny_run_config()
        cfg['schedule'] = {'steps': [{'note': 'first', 'epochs': 1, 'dataset': {'size': 4}},
                                     {'note': 'second', 'epochs': 1, 'dataset': {'style_seed_start': 500}}]}
        with tempfile.TemporaryDirectory() as tmp:
            results = run_incremental(cfg, tmp)
            steps = FileManager.load_csv(Path(tmp) / 'steps.csv')
            self.assertTrue((Path(tmp) / 'step_2' / 'curves.csv').exists())
        self.assertEqual([r.note for r in results], ['first', 'second'])
        self.assertEqual([s['step'] for s in steps], ['1', '2'])


if __name__ == '__main__':
    unittest.main()
