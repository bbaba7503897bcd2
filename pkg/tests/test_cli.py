import contextlib
import io
import json
import tempfile
import unittest
from pathlib import Path

from scoresheet_reader.core.vocabulary import Vocabulary
from scoresheet_reader.main import EXIT_USAGE, main
from scoresheet_reader.utils.paths import get_data_dir

CORPUS = str(get_data_dir() / 'openings.pgn')


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue()


class PgnCommandTestCase(unittest.TestCase):

    def test_parse_prints_one_line_per_game(self):
        code, out = run(['pgn', 'parse', CORPUS])
        lines = out.splitlines()
        self.assertEqual(code, 0)
        self.assertEqual(len(lines), 24)
        self.assertTrue(lines[0].startswith('e4 e5 Nf3 Nc6 Bb5'))

    def test_translate_to_portuguese(self):
        code, out = run(['pgn', 'translate', CORPUS])
        self.assertEqual(code, 0)
        self.assertTrue(out.splitlines()[0].startswith('e4 e5 Cf3 Cc6 Bb5'))

    def test_vocab_output_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'vocabulary.tsv'
            code, _ = run(['pgn', 'vocab', CORPUS, '--positions', '8', '--output', str(path)])
            vocabulary = Vocabulary.load(path)
        self.assertEqual(code, 0)
        self.assertEqual(len(vocabulary), 54)
        self.assertIn('Nf3', vocabulary)

    def test_missing_file_is_a_data_error(self):
        code, _ = run(['pgn', 'parse', '/nonexistent/games.pgn'])
        self.assertEqual(code, 2)


class CommandLineTestCase(unittest.TestCase):

    def test_usage_errors_exit_1(self):
        for argv in (['fly'], ['pgn'], ['train', '--preset', 'poster']):
            with contextlib.redirect_stderr(io.StringIO()):
                with self.assertRaises(SystemExit) as ctx:
                    main(argv)
            self.assertEqual(ctx.exception.code, EXIT_USAGE)

    def test_bad_override_is_a_config_error(self):
        code, _ = run(['synth', '--set', 'train.learning_rate=0.1'])
        self.assertEqual(code, 2)

    def test_gradcheck(self):
        code, out = run(['gradcheck', '--points', '2'])
        report = json.loads(out)
        self.assertEqual(code, 0)
        self.assertTrue(report['passed'])
        self.assertTrue(report['checks'])

    def test_synth_writes_a_dataset(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, out = run(['synth', '--size', '2', '--out-dir', tmp, '--set', 'dataset.glyphs_per_token=1'])
            report = json.loads(out)
            self.assertTrue((Path(tmp) / 'resolved_config.json').exists())
            self.assertTrue((Path(tmp) / 'vocabulary.tsv').exists())
        self.assertEqual(code, 0)
        self.assertEqual(report['samples'], 2)
        self.assertEqual(report['image_size'], [160, 88])
        self.assertEqual(report['sequence_length'], 8)
        self.assertEqual(report['vocabulary_size'], 54)


class TrainedRunTestCase(unittest.TestCase):
    """train, then eval, attn-map and baseline against the run directory."""

    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        root = Path(cls.tmp.name)
        cls.config = root / 'tiny.json'
        cls.config.write_text(json.dumps({
            'dataset': {'size': 6, 'style_count': 2, 'glyphs_per_token': 1},
            'model': {'backbone_channels': [2, 2, 2, 2], 'hidden_dim': 4, 'attention_dim': 4, 'embed_dim': 4},
            'train': {'max_epochs': 1, 'batch_size': 4},
            'eval': {'test_size': 3},
            'baseline': {'sizes': [6], 'epochs': 1, 'hidden_dim': 4, 'embed_dim': 4},
        }), encoding='utf-8')
        cls.run_dir = root / 'run'
        cls.train_code, out = run(['train', '--config', str(cls.config), '--out-dir', str(cls.run_dir)])
        cls.summary = json.loads(out)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_train_reports_a_summary(self):
        self.assertEqual(self.train_code, 0)
        self.assertEqual(self.summary['status'], 'ok')
        self.assertTrue((self.run_dir / 'checkpoint.bin').exists())

    def test_eval_uses_the_resolved_config(self):
        code, out = run(['eval', '--run-dir', str(self.run_dir)])
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)['position_accuracy'], self.summary['test_accuracy'])

    def test_attention_map_for_a_manifest_sample(self):
        data_dir = Path(self.tmp.name) / 'data'
        out_dir = Path(self.tmp.name) / 'maps'
        code, _ = run(['synth', '--config', str(self.config), '--split', 'test', '--out-dir', str(data_dir)])
        self.assertEqual(code, 0)
        code, out = run(['attn-map', '--run-dir', str(self.run_dir), '--data', str(data_dir),
                         '--out-dir', str(out_dir)])
        self.assertEqual(code, 0)
        self.assertTrue((out_dir / 'attention.csv').exists())
        self.assertGreaterEqual(json.loads(out)['steps'], 1)

    def test_attention_map_needs_an_input(self):
        code, _ = run(['attn-map', '--run-dir', str(self.run_dir)])
        self.assertEqual(code, 2)

    def test_baseline_reports_the_lift(self):
        code, out = run(['baseline', '--config', str(self.config), '--run-dir', str(self.run_dir)])
        report = json.loads(out)
        self.assertEqual(code, 0)
        self.assertEqual(len(report['rows']), 1)
        self.assertAlmostEqual(report['recognition_lift'],
                               report['full_accuracy'] - report['rows'][0]['free_running_accuracy'])


if __name__ == '__main__':
    unittest.main()
