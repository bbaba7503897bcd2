"""
Desk-scale end-to-end runs. They train real models for minutes, so they only
run with SCORESHEET_SLOW_TESTS=1.
"""

import math
import os
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

from scoresheet_reader.config import get_preset
from scoresheet_reader.core.vocabulary import NUM_SPECIALS, Vocabulary
from scoresheet_reader.experiments import AblationSuite, RunContext, run_ablation, run_incremental, run_training
from scoresheet_reader.experiments.baseline import BaselineSpec, run_predictability_baseline
from scoresheet_reader.experiments.common import CHECKPOINT_FILE, VOCABULARY_FILE
from scoresheet_reader.experiments.sweep import SweepSpec, run_length_sweep
from scoresheet_reader.model.checkpoint import load_checkpoint

SLOW = os.environ.get('SCORESHEET_SLOW_TESTS') == '1'


@unittest.skipUnless(SLOW, 'set SCORESHEET_SLOW_TESTS=1 to run desk-scale training')
class DeskTrainingTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.summary = run_training(get_preset('desk'), cls.tmp.name, 'desk')

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_converges_within_budget(self):
        self.assertTrue(self.summary.converged)
        self.assertLessEqual(self.summary.epochs_to_converge, 50)

    def test_reads_held_out_writers(self):
        self.assertGreaterEqual(self.summary.test_accuracy, 0.90)

    def test_attention_lands_on_the_moves(self):
        self.assertGreaterEqual(self.summary.hit_rate, 0.80)
        self.assertLess(self.summary.chance_hit_rate, 0.5)

    def test_free_running_follows_teacher_forcing(self):
        run_dir = Path(self.tmp.name)
        vocabulary = Vocabulary.load(run_dir / VOCABULARY_FILE)
        model, _ = load_checkpoint(run_dir / CHECKPOINT_FILE, vocabulary.digest())
        context = RunContext(get_preset('desk'))
        batch = model.collate(context.generate(replace(context.dataset_spec, size=64)))
        forced = model.forward_teacher_forced(batch.images, batch.targets)[0].value.argmax(axis=-1)
        free = model.forward_free_running(batch.images, batch.steps, run_all_steps=True).logits.value.argmax(axis=-1)
        agreement = float(((forced == free) * batch.mask).sum() / batch.mask.sum())
        self.assertGreaterEqual(agreement, 0.90)


@unittest.skipUnless(SLOW, 'set SCORESHEET_SLOW_TESTS=1 to run desk-scale training')
class PredictabilityTestCase(unittest.TestCase):

    def setUp(self):
        self.context = RunContext(get_preset('desk'))
        self.cfg = self.context.train_config()
        self.spec = BaselineSpec(sizes=[2000], epochs=30)

    def baseline(self, **dataset):
        train = replace(self.context.dataset_spec, **dataset)
        test = replace(self.context.test_spec, **dataset)
        return run_predictability_baseline(train, test, self.context.vocabulary, self.context.templates,
                                           self.spec, self.cfg, self.context.seeds.init)[0]

    def test_single_template_is_fully_predictable(self):
        row = self.baseline(num_templates=1, mutation_prob=0.0)
        self.assertGreaterEqual(row.free_running_accuracy, 0.99)

    def test_uniform_source_stays_at_chance(self):
        row = self.baseline(source='uniform')
        moves = len(self.context.vocabulary) - NUM_SPECIALS
        positions = self.context.test_spec.size * self.context.dataset_spec.sequence_length
        sigma = math.sqrt(row.chance * (1 - row.chance) / positions)
        self.assertAlmostEqual(row.chance, 1 / moves)
        self.assertLessEqual(abs(row.free_running_accuracy - row.chance), 3 * sigma)


@unittest.skipUnless(SLOW, 'set SCORESHEET_SLOW_TESTS=1 to run desk-scale training')
class AblationSuiteTestCase(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.result = run_ablation(get_preset('desk'), AblationSuite())

    def test_every_direction_holds_by_seed_majority(self):
        self.assertFalse(self.result.failures)
        for direction in self.result.directions:
            self.assertTrue(direction.passed, f"{direction.name}: {direction.votes}/{direction.compared}")

    def test_images_beat_the_sequence_statistics(self):
        lifts = list(self.result.lifts.values())
        self.assertEqual(len(lifts), 3)
        self.assertGreaterEqual(sum(lift >= 0.10 for lift in lifts), 2)


@unittest.skipUnless(SLOW, 'set SCORESHEET_SLOW_TESTS=1 to run desk-scale training')
class LengthSweepTestCase(unittest.TestCase):

    def test_short_sequences_are_read_reliably(self):
        rows = run_length_sweep(get_preset('desk'), SweepSpec(lengths=[4], sizes=[2000], seeds=[0]))
        self.assertEqual(rows[0].summary.status, 'ok')
        self.assertGreaterEqual(rows[0].summary.test_accuracy, 0.95)


@unittest.skipUnless(SLOW, 'set SCORESHEET_SLOW_TESTS=1 to run desk-scale training')
class IncrementalScheduleTestCase(unittest.TestCase):

    def test_each_step_improves_the_reader(self):
        results = run_incremental(get_preset('desk'))
        accuracies = [r.test_accuracy for r in results]
        self.assertEqual(len(accuracies), 3)
        self.assertGreaterEqual(accuracies[-1], accuracies[0] + 0.05)
        for before, after in zip(accuracies, accuracies[1:]):
            self.assertGreaterEqual(after, before - 0.01)


if __name__ == '__main__':
    unittest.main()
