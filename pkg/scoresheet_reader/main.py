"""
Scoresheet Reader - command line
Entry point for every command; stdout carries JSON summaries, stderr diagnostics.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from scoresheet_reader.autodiff.gradcheck import TOLERANCE, raise_on_failure
from scoresheet_reader.config.presets import PRESETS, get_optimal_jobs
from scoresheet_reader.core.notation import LangMap, SanMove, load_pgn_file, translate_moves
from scoresheet_reader.core.reader_engine import ScoresheetReader
from scoresheet_reader.core.vocabulary import build_vocabulary
from scoresheet_reader.errors import DataError, ReaderError
from scoresheet_reader.evaluation.evaluate import evaluate_model
from scoresheet_reader.evaluation.export import export_attention_map
from scoresheet_reader.experiments.ablation import AblationSuite, run_ablation
from scoresheet_reader.experiments.baseline import BaselineSpec, recognition_lift, run_predictability_baseline
from scoresheet_reader.experiments.common import (CHECKPOINT_FILE, METRICS_FILE, VOCABULARY_FILE, RunContext,
                                                  run_training)
from scoresheet_reader.experiments.incremental import run_incremental
from scoresheet_reader.experiments.sweep import SweepSpec, run_length_sweep
from scoresheet_reader.model.selfcheck import run_gradcheck_suite
from scoresheet_reader.services.managers import RESOLVED_CONFIG_FILE, RunConfigManager
from scoresheet_reader.synth.dataset import load_manifests
from scoresheet_reader.utils import FileManager, Logger
from scoresheet_reader.utils.paths import ensure_dir

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 1


class ReaderArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _emit(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True, default=_json_default))


def _json_default(value):
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _resolve(args):
    manager = RunConfigManager.resolve(args.preset, args.config, overrides=args.set, seed=args.seed,
                                       jobs=args.jobs)
    jobs = get_optimal_jobs(manager.get('jobs', 1))
    if jobs != manager.get('jobs'):
        Logger.warning(f"--jobs clamped to {jobs} physical core(s)")
        manager.set('jobs', jobs)
    if args.out_dir:
        manager.save_resolved(args.out_dir)
    return manager


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    manager = _resolve(args)
    context = RunContext(manager.get_all_settings())
    spec = context.test_spec if args.split == 'test' else context.dataset_spec
    if args.size:
        spec = dataclasses.replace(spec, size=args.size)
    out_dir = ensure_dir(args.out_dir or 'synth_out')
    manifests = context.generate(spec, manager.get('jobs'), out_dir)
    context.vocabulary.save(out_dir / VOCABULARY_FILE)
    height, width = manifests[0].pixels.shape
    _emit({'samples': len(manifests), 'image_size': [width, height], 'rows': spec.build_layout().rows,
           'sequence_length': spec.sequence_length, 'vocabulary_size': len(context.vocabulary),
           'dataset_spec_sha256': spec.content_hash(), 'out_dir': out_dir})
    return EXIT_OK


def cmd_train(args) -> int:
    manager = _resolve(args)
    summary = run_training(manager.get_all_settings(), args.out_dir, 'train', manager.get('jobs'))
    _emit(summary.to_dict())
    return EXIT_OK


def cmd_eval(args) -> int:
    run_dir = Path(args.run_dir)
    if args.config is None and (run_dir / RESOLVED_CONFIG_FILE).exists():
        args.config = run_dir / RESOLVED_CONFIG_FILE
    manager = _resolve(args)
    cfg = manager.get_all_settings()
    reader = ScoresheetReader.from_files(run_dir / CHECKPOINT_FILE, run_dir / VOCABULARY_FILE)
    if args.data:
        samples = load_manifests(args.data)
    else:
        context = RunContext(cfg)
        samples = context.generate(context.test_spec, manager.get('jobs'))
    result = evaluate_model(reader.model, samples, reader.vocabulary, float(cfg['eval']['tolerance_px']),
                            int(cfg['train']['batch_size']))
    data = result.to_dict()
    if args.out_dir:
        FileManager.save_json(data, ensure_dir(args.out_dir) / METRICS_FILE)
    _emit(data)
    return EXIT_OK


def cmd_ablate(args) -> int:
    manager = _resolve(args)
    cfg = manager.get_all_settings()
    suite = AblationSuite.from_dict(cfg['suite'])
    result = run_ablation(cfg, suite, args.out_dir, manager.get('jobs'), with_lift=not args.no_lift)
    _emit({'rows': [r.to_dict() for r in result.rows],
           'directions': [d.to_dict() for d in result.directions],
           'recognition_lift': {str(k): v for k, v in result.lifts.items()}})
    return EXIT_OK


def cmd_sweep(args) -> int:
    manager = _resolve(args)
    cfg = manager.get_all_settings()
    rows = run_length_sweep(cfg, SweepSpec.from_dict(cfg['sweep']), args.out_dir, manager.get('jobs'))
    _emit([{'length': r.length, 'size': r.size, **r.summary.to_dict()} for r in rows])
    return EXIT_OK


def cmd_incremental(args) -> int:
    manager = _resolve(args)
    results = run_incremental(manager.get_all_settings(), args.out_dir, manager.get('jobs'))
    _emit([r.to_dict() for r in results])
    return EXIT_OK


def cmd_baseline(args) -> int:
    manager = _resolve(args)
    cfg = manager.get_all_settings()
    context = RunContext(cfg)
    rows = run_predictability_baseline(context.dataset_spec, context.test_spec, context.vocabulary,
                                       context.templates, BaselineSpec.from_dict(cfg['baseline']),
                                       context.train_config(), context.seeds.init)
    data = {'rows': [r.to_dict() for r in rows]}
    if args.run_dir:
        metrics = FileManager.load_json(Path(args.run_dir) / METRICS_FILE)
        if not metrics or 'position_accuracy' not in metrics:
            raise DataError(f"no metrics found in {args.run_dir}")
        full = float(metrics['position_accuracy'])
        data['full_accuracy'] = full
        data['recognition_lift'] = recognition_lift(full, rows[-1].free_running_accuracy)
    _emit(data)
    return EXIT_OK


def cmd_attn_map(args) -> int:
    run_dir = Path(args.run_dir)
    reader = ScoresheetReader.from_files(run_dir / CHECKPOINT_FILE, run_dir / VOCABULARY_FILE)
    if args.image:
        image = args.image
    elif args.data:
        manifests = load_manifests(args.data)
        if not 0 <= args.index < len(manifests):
            raise DataError(f"sample index {args.index} out of range (0..{len(manifests) - 1})")
        image = manifests[args.index].pixels
    else:
        raise DataError("attn-map needs --image or --data")
    pixels = reader.prepare(image)
    result = reader.read(pixels)
    out_dir = ensure_dir(args.out_dir or 'attention_out')
    export_attention_map(result.attention.sample(0), reader.model.config.grid, pixels, out_dir)
    _emit({'tokens': result.tokens, 'steps': result.attention.steps, 'out_dir': out_dir})
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_gradcheck_suite(seed=args.seed or 0, points=args.points)
    for r in results:
        level = Logger.debug if r.passed else Logger.error
        level(f"gradcheck {r.name}: max relative error {r.max_rel_error:.3e} over {r.checked} entries")
    _emit({'tolerance': TOLERANCE, 'passed': all(r.passed for r in results),
           'checks': [r.to_dict() for r in results]})
    raise_on_failure(results)
    return EXIT_OK


def cmd_pgn(args) -> int:
    games = load_pgn_file(args.file, args.language)
    if args.pgn_command == 'parse':
        for game in games:
            print(" ".join(game.tokens))
    elif args.pgn_command == 'translate':
        lang_map = LangMap.default()
        if args.language == 'en':
            lang_map = lang_map.inverted()
        for game in games:
            moves = [SanMove(t, args.language) for t in game.tokens]
            print(" ".join(m.text for m in translate_moves(moves, lang_map)))
    else:
        vocabulary = build_vocabulary(games, args.positions, args.cap or None)
        if args.output:
            vocabulary.save(args.output)
            Logger.info(f"Vocabulary of {len(vocabulary)} codes written to {args.output}")
        else:
            sys.stdout.write(vocabulary.to_text())
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON run config (a resolved_config.json reproduces its run)')
    common.add_argument('--preset', choices=sorted(PRESETS), help='preset defaults (default: desk)')
    common.add_argument('--seed', type=int, help='master seed')
    common.add_argument('--out-dir', help='artifact directory')
    common.add_argument('--jobs', type=int, help='worker count (default 1)')
    common.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help='override one config value (repeatable)')
    common.add_argument('--verbose', '-v', action='store_true', help='debug logging')

    parser = ReaderArgumentParser(prog='scoresheet-reader', description='Chess scoresheet reader toolkit')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ReaderArgumentParser)

    p = sub.add_parser('synth', parents=[common], help='render a synthetic dataset')
    p.add_argument('--split', choices=('train', 'test'), default='train')
    p.add_argument('--size', type=int, help='override the number of samples')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('train', parents=[common], help='train and evaluate one model')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', parents=[common], help='evaluate a trained run')
    p.add_argument('--run-dir', required=True)
    p.add_argument('--data', help='manifest to evaluate (default: regenerate the held-out test set)')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('ablate', parents=[common], help='run the factor ablation suite')
    p.add_argument('--no-lift', action='store_true', help='skip the baseline used for recognition lift')
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser('sweep', parents=[common], help='run the length x size sweep')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('incremental', parents=[common], help='run the incremental schedule')
    p.set_defaults(func=cmd_incremental)

    p = sub.add_parser('baseline', parents=[common], help='train the decoder-only predictability baseline')
    p.add_argument('--run-dir', help='trained run whose metrics.json gives the full-model accuracy')
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser('attn-map', parents=[common], help='export attention maps for one image')
    p.add_argument('--run-dir', required=True)
    p.add_argument('--image', help='PGM image to read')
    p.add_argument('--data', help='manifest to take the image from')
    p.add_argument('--index', type=int, default=0)
    p.set_defaults(func=cmd_attn_map)

    p = sub.add_parser('gradcheck', parents=[common], help='finite-difference gradient checks')
    p.add_argument('--points', type=int, default=10, help='entries checked per input')
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser('pgn', help='PGN utilities')
    pgn_sub = p.add_subparsers(dest='pgn_command', required=True, parser_class=ReaderArgumentParser)
    for name, text in (('parse', 'print SAN tokens per game'),
                       ('translate', 'translate piece letters (pt <-> en)'),
                       ('vocab', 'build a vocabulary')):
        q = pgn_sub.add_parser(name, parents=[common], help=text)
        q.add_argument('file')
        q.add_argument('--language', choices=('en', 'pt'), default='en', help='notation of the input file')
        if name == 'vocab':
            q.add_argument('--positions', type=int, default=16)
            q.add_argument('--cap', type=int, default=0, help='maximum move tokens (0 = no cap)')
            q.add_argument('--output', help='write code<TAB>token here instead of stdout')
        q.set_defaults(func=cmd_pgn)
    return parser


def main(argv=None) -> int:
    """Main entry point for the command line"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, 'verbose', False):
        Logger.set_level('DEBUG')
    try:
        return args.func(args)
    except ReaderError as e:
        Logger.error(str(e))
        return e.exit_code
    except OSError as e:
        Logger.error(f"I/O error: {e}")
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
