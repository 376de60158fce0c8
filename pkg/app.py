"""
Command-line entry point for the vortex laboratory
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from config import Config
from errors import CheckFailed, ConfigInvalid, SolveFailed
from experiment_loader import ExperimentLoader, load_experiment
from experiment_runner import ExperimentRunner, run_beta, run_shoot
from results_recorder import ResultsRecorder

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_INVALID = 2
EXIT_SOLVE_FAILED = 3


def _csv_floats(text):
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("sweep values must be a non-empty list of positive numbers")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog='vortexlab', description='Self-dual Chern-Simons vortex laboratory')
    parser.add_argument('--seed', type=int, default=None, help='global seed (overrides the experiment file)')
    parser.add_argument('--log-level', default=Config.LOG_LEVEL)
    sub = parser.add_subparsers(dest='command', required=True)

    for name, text in (('solve', 'solve an experiment and run its checks'),
                       ('spectrum', 'smallest eigenvalue of -L at the solution'),
                       ('construct', 'perturbative construction from a planar profile'),
                       ('check', 'diagnostics only, on saved dumps')):
        p = sub.add_parser(name, help=text)
        p.add_argument('--config', required=True)

    p = sub.add_parser('sweep', help='parameter sweep over eps or vortex separation (in units of eps)')
    p.add_argument('--config', required=True)
    p.add_argument('--param', required=True, choices=['epsilon', 'separation'])
    p.add_argument('--values', required=True, type=_csv_floats)

    p = sub.add_parser('list', help='validate and list the experiment files in a directory')
    p.add_argument('--dir', default=Config.EXPERIMENTS_DIRECTORY)
    p.add_argument('--solver', choices=['monotone', 'newton', 'perturbative'], default=None)
    p.add_argument('--name', default=None, help='print one validated experiment in full')

    p = sub.add_parser('shoot', help='radial shot from the series start')
    p.add_argument('--alpha', type=float, required=True)
    p.add_argument('--s', type=float, required=True)
    p.add_argument('--rmax', type=float, required=True)
    p.add_argument('--threshold', action='store_true', help='bisect for the topological threshold s* first')
    p.add_argument('--output', default=None)

    p = sub.add_parser('beta', help='bubble flux beta(s) on an s grid')
    p.add_argument('--smin', type=float, required=True)
    p.add_argument('--smax', type=float, required=True)
    p.add_argument('--count', type=int, required=True)
    p.add_argument('--output', default=None)
    return parser


def list_experiments(directory, solver=None, name=None):
    """
    Validate every experiment file under directory

    Returns:
        statistics plus one row per experiment, or the full experiment when name is given

    Raises:
        ConfigInvalid: missing directory, an invalid file, or an unknown name
    """
    if not Path(directory).is_dir():
        raise ConfigInvalid(f"experiments directory not found: {directory}")
    loader = ExperimentLoader(directory)
    loader.load_all()
    if loader.invalid:
        raise ConfigInvalid(f"{len(loader.invalid)} invalid experiment file(s): {loader.invalid}",
                            {'invalid': loader.invalid})
    if name is not None:
        exp = loader.get_by_name(name)
        if exp is None:
            raise ConfigInvalid(f"no experiment named '{name}' under {directory}")
        return {**exp.model_dump(mode='json'), 'config_sha256': exp.config_hash()}
    selected = loader.get_by_solver(solver) if solver else loader.experiments
    rows = [{'name': e.name, 'solver': e.solver, 'vortices': len(e.vortices), 'epsilon': e.epsilons,
             'n': e.grid.n, 'config_sha256': e.config_hash()} for e in selected]
    return {'statistics': loader.get_statistics(), 'experiments': rows}


def _dispatch(args, argv):
    command = ' '.join(argv)
    if args.command == 'shoot':
        recorder = ResultsRecorder(args.output or Path(Config.OUTPUT_DIR) / 'shoot')
        return run_shoot(args.alpha, args.s, args.rmax, recorder, threshold=args.threshold)
    if args.command == 'list':
        return list_experiments(args.dir, args.solver, args.name)
    if args.command == 'beta':
        if args.count < 2 or args.smax >= 0 or args.smin >= args.smax:
            raise ConfigInvalid("beta needs smin < smax < 0 and count >= 2")
        recorder = ResultsRecorder(args.output or Path(Config.OUTPUT_DIR) / 'beta')
        return run_beta(args.smin, args.smax, args.count, recorder)

    experiment = load_experiment(args.config, seed=args.seed)
    runner = ExperimentRunner(experiment, command=command)
    if args.command == 'solve':
        return runner.run()
    if args.command == 'sweep':
        return runner.sweep(args.param, args.values)
    if args.command == 'spectrum':
        return runner.spectrum()
    if args.command == 'construct':
        return runner.construct()
    return runner.check()


def main(argv=None) -> int:
    """
    Run one subcommand

    Returns:
        0 when every requested check passes, 1 on a failed check,
        2 on an invalid configuration, 3 when a solver fails
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG_INVALID if e.code else EXIT_OK

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        summary = _dispatch(args, argv)
    except ConfigInvalid as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_INVALID
    except SolveFailed as e:
        logger.error(f"Solve failed ({type(e).__name__}): {e}")
        return EXIT_SOLVE_FAILED
    except CheckFailed as e:
        logger.error(f"Check failed: {e}")
        return EXIT_CHECK_FAILED
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG_INVALID

    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
