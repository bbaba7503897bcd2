import json
import tempfile
import unittest
from pathlib import Path

from scoresheet_reader.config import PAPER_PRESET, get_optimal_jobs, get_preset
from scoresheet_reader.errors import ConfigError
from scoresheet_reader.experiments.common import RunContext, RunSeeds, held_out_spec, model_config
from scoresheet_reader.services.managers import CURVES_FILE, RUN_HEADER_FILE, CurveHistory, RunConfigManager
from scoresheet_reader.training.trainer import EpochStats, TrainConfig
from scoresheet_reader.utils import FileManager


class PresetTestCase(unittest.TestCase):

    def test_full_size_recipe(self):
        train = PAPER_PRESET['train']
        self.assertEqual(train['batch_size'], 16)
        self.assertEqual(train['lr'], 0.0005)
        self.assertEqual(train['dropout'], 0.2)
        self.assertEqual((train['convergence_loss'], train['convergence_acc']), (0.25, 0.9))
        self.assertEqual(PAPER_PRESET['model']['hidden_dim'], 512)
        self.assertEqual(PAPER_PRESET['model']['embed_dim'], 256)
        self.assertEqual(PAPER_PRESET['dataset']['layout'], 'paper')

    def test_presets_build_valid_sections(self):
        for name in ('desk', 'paper'):
            cfg = get_preset(name)
            TrainConfig.from_dict(cfg['train'])
            self.assertNotIn('seed', cfg['dataset'])

    def test_get_preset_returns_a_copy(self):
        get_preset('desk')['train']['lr'] = 1.0
        self.assertEqual(get_preset('desk')['train']['lr'], 0.003)
        with self.assertRaises(ConfigError):
            get_preset('poster')

    def test_jobs_are_clamped(self):
        self.assertEqual(get_optimal_jobs(1), 1)
        self.assertEqual(get_optimal_jobs(0), 1)
        self.assertGreaterEqual(get_optimal_jobs(10000), 1)


class RunConfigManagerTestCase(unittest.TestCase):

    def test_precedence(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.json'
            path.write_text(json.dumps({'train': {'lr': 0.01, 'batch_size': 8}}), encoding='utf-8')
            manager = RunConfigManager.resolve(config_path=path, environ={'READER_TRAIN__LR': '0.02'},
                                               overrides=['train.batch_size=4'], seed=7)
        self.assertEqual(manager.get('train.lr'), 0.02)
        self.assertEqual(manager.get('train.batch_size'), 4)
        self.assertEqual(manager.get('seed'), 7)

    def test_environment_ignores_other_variables(self):
        manager = RunConfigManager.resolve(environ={'HOME': '/root', 'READER_SEED': '3'})
        self.assertEqual(manager.get('seed'), 3)

    def test_file_selects_preset(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.json'
            path.write_text(json.dumps({'preset': 'paper'}), encoding='utf-8')
            manager = RunConfigManager.resolve(config_path=path, environ={})
        self.assertEqual(manager.get('model.hidden_dim'), 512)

    def test_values_take_the_default_type(self):
        manager = RunConfigManager.resolve(environ={}, overrides=['train.teacher_forcing=false',
                                                                  'dataset.size=300', 'train.lr=1e-3'])
        self.assertIs(manager.get('train.teacher_forcing'), False)
        self.assertEqual(manager.get('dataset.size'), 300)
        self.assertIsInstance(manager.get('train.lr'), float)

    def test_rejects_unknown_or_mistyped_keys(self):
        with self.assertRaises(ConfigError):
            RunConfigManager.resolve(environ={}, overrides=['train.learning_rate=0.1'])
        with self.assertRaises(ConfigError):
            RunConfigManager.resolve(environ={}, overrides=['train'])
        with self.assertRaises(ConfigError):
            RunConfigManager.resolve(environ={}, overrides=['dataset.size=many'])
        with self.assertRaises(ConfigError):
            RunConfigManager.resolve(environ={'READER_TRAIN__MOMENTUM': '0.9'})
        with self.assertRaises(ConfigError):
            RunConfigManager.resolve(config_path='/nonexistent/run.json', environ={})

    def test_save_resolved(self):
        manager = RunConfigManager.resolve(environ={}, seed=5)
        with tempfile.TemporaryDirectory() as tmp:
            path = manager.save_resolved(tmp)
            self.assertEqual(FileManager.load_json(path)['seed'], 5)


class CurveHistoryTestCase(unittest.TestCase):

    def test_writes_curves_and_header(self):
        with tempfile.TemporaryDirectory() as tmp:
            history = CurveHistory(tmp)
            header = history.write_header({'seed': 0}, {'init': 12}, 'abc')
            history.add_entry(EpochStats(1, 2.0, 2.5, 0.1, 0.1))
            history.add_entry(EpochStats(2, 1.0, 1.2, 0.4, 0.3))
            rows = FileManager.load_csv(Path(tmp) / CURVES_FILE)
            text = header.read_text(encoding='utf-8')
            self.assertEqual(header.name, RUN_HEADER_FILE)
        self.assertEqual([r['epoch'] for r in rows], ['1', '2'])
        self.assertIn('# seed.init 12', text)
        self.assertIn('# dataset_spec_sha256 abc', text)
        self.assertAlmostEqual(history.max_gap(), 0.5)
        self.assertEqual(history.get_stats()['best_val_loss'], 1.2)

    def test_without_validation(self):
        history = CurveHistory()
        history.add_entry(EpochStats(1, 2.0, None, 0.1, None))
        self.assertEqual(history.max_gap(), 0.0)
        self.assertIsNone(history.get_stats()['best_val_loss'])
        self.assertIsNone(history.write_header({}, {}, ''))


class RunContextTestCase(unittest.TestCase):

    def test_desk_context(self):
        cfg = get_preset('desk')
        context = RunContext(cfg)
        self.assertEqual(len(context.vocabulary), 54)
        self.assertEqual(context.dataset_spec.sequence_length, 8)
        self.assertEqual(context.dataset_spec.seed, RunSeeds.from_master(0).train_data)
        config = context.model_config()
        self.assertEqual(config.image_size, (160, 88))
        self.assertEqual(config.max_decode_len, 9)
        self.assertEqual(config.dropout_rate, 0.2)

    def test_held_out_writers(self):
        cfg = get_preset('desk')
        context = RunContext(cfg)
        spec = held_out_spec(cfg, context.dataset_spec, 99)
        self.assertEqual(spec.style_seed_start, 1000)
        self.assertEqual(spec.size, 200)
        self.assertEqual(spec.seed, 99)
        self.assertFalse(set(spec.style_seeds) & set(context.dataset_spec.style_seeds))

    def test_half_resolution_model(self):
        cfg = get_preset('desk')
        cfg['dataset']['half_resolution'] = True
        context = RunContext(cfg)
        config = model_config(cfg, context.dataset_spec, context.vocabulary, 0)
        self.assertEqual(config.image_size, (80, 44))

    def test_seed_streams_differ(self):
        seeds = RunSeeds.from_master(0)
        values = [seeds.train_data, seeds.test_data, seeds.init, seeds.order, seeds.split]
        self.assertEqual(len(set(values)), 5)
        self.assertNotEqual(RunSeeds.from_master(1).init, seeds.init)


if __name__ == '__main__':
    unittest.main()
