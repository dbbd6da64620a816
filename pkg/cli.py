"""
exonet command line
Simulate datasets, learn graphs, compute Bayesian-vs-residual divergences and
run the simulation studies. Every command writes its files plus manifest.json
into one run directory and appends the run to ledger.json beside it.

    python cli.py simulate --example1 --n 5 --upsilon 0.001 --seed 42
    python cli.py learn --x runs/simulate/X.csv --q runs/simulate/Q.csv --metric residual
    python cli.py diverge --x X.csv --q Q.csv --upsilon-grid 0.001:100:20
    python cli.py experiment --study ex1 --replicates 100
    python cli.py analyze --x X.csv --q Q.csv
    python cli.py verify runs/simulate
"""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

import config
from config import DEFAULTS, OUTPUT_DIR, VERSION, resolve, setup_logging
from divergence import MIN_MC_SAMPLES
from errors import ExonetError, UsageError
from experiments import EXAMPLE2_GRID, divergence_grid, kl_check, parse_grid, run_example1, run_example2
from manifest import Ledger, RunManifest, verify_run
from model import Hyper, check_ordering, standardize
from posterior import assemble_sigma, fit_network
from scores import MetricKind
from search import SearchConfig, hill_climb
from simgen import (EXAMPLE1_SIZES, EXAMPLE1_UPSILONS, EXAMPLE2_V, example1_spec, example2_spec,
                    grape_like_spec, simulate)
import storage

logger = logging.getLogger(__name__)

DEFAULT_DIVERGE_GRID = '0.001:100:20'


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(message)


class Run:
    """Run directory, manifest and ledger for one command"""

    def __init__(self, args, command, settings):
        self.dir = storage.ensure_dir(Path(args.out) if args.out else OUTPUT_DIR / command)
        self.manifest = RunManifest(command, settings, seed=settings.get('seed'),
                                    config_file=args.config)

    def wrote(self, path):
        self.manifest.record(path, self.dir)
        print(f"✓ wrote {path}")

    def close(self):
        self.manifest.finish()
        self.manifest.save(self.dir)
        ledger = Ledger.open(self.dir.parent)
        ledger.add_manifest(self.manifest, self.dir.resolve())
        print(f"✓ run recorded in {ledger.path} ({len(ledger.chain)} record(s))")


def _settings(args):
    flags = {key: getattr(args, key, None) for key in DEFAULTS}
    settings = resolve(DEFAULTS, args.config, flags)
    seed = settings['seed']
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise UsageError(f"seed must be a non-negative integer, got {seed!r}")
    return settings


def _hyper(settings, V=None, upsilon=None):
    return Hyper(tau=float(settings['tau']), delta=float(settings['delta']), V=V, upsilon=upsilon)


def _load(args):
    return standardize(storage.load_dataset(args.x, args.q))


def _ordering(text, names):
    if text is None:
        return None
    tokens = [t.strip() for t in text.split(',') if t.strip()]
    index = {name: k for k, name in enumerate(names)}
    try:
        ordering = [index[t] if t in index else int(t) for t in tokens]
    except ValueError:
        raise UsageError(f"--ordering '{text}' must list variable names or indices")
    return check_ordering(ordering, len(names))


def cmd_simulate(args):
    settings = _settings(args)
    seed = int(settings['seed'])
    chosen = [flag for flag in ('example1', 'example2', 'grape') if getattr(args, flag)]
    if len(chosen) != 1:
        raise UsageError("choose exactly one of --example1, --example2, --grape")
    if args.example1:
        upsilon = args.upsilon if args.upsilon is not None else settings['upsilon']
        if upsilon is None:
            raise UsageError("--example1 needs --upsilon")
        spec = example1_spec(args.n, float(upsilon), seed)
    elif args.example2:
        spec = example2_spec(args.v_choice, seed)
    else:
        upsilon = args.upsilon if args.upsilon is not None else (settings['upsilon'] or 1.0)
        spec = grape_like_spec(args.grape, seed, float(upsilon))
    settings.update(spec.describe())
    run = Run(args, 'simulate', settings)
    out = simulate(spec)
    for path in storage.save_sim_output(run.dir, out):
        run.wrote(path)
    run.close()
    return 0


def cmd_learn(args):
    settings = _settings(args)
    metric = MetricKind.parse(args.metric)
    if metric is MetricKind.BAYES and args.q is None:
        raise UsageError("metric 'bayes' needs the exogenous design: pass --q Q.csv")
    V = None
    if args.v is not None:
        V, _ = storage.read_matrix_csv(args.v, 'V')
    upsilon = settings['upsilon']
    if metric is MetricKind.BAYES and V is None and upsilon is None:
        raise UsageError("metric 'bayes' needs --upsilon or --v V.csv")
    ds = _load(args)
    if metric is MetricKind.RESIDUAL and ds.m == 0:
        logger.warning("metric 'residual' without --q: no exogenous columns, scores equal BGe")
    h = _hyper(settings, V=V, upsilon=None if V is not None else upsilon)
    cfg = SearchConfig(metric=metric, max_in_degree=int(settings['max_in_degree']),
                       restarts=int(settings['restarts']), seed=int(settings['seed']),
                       workers=int(settings['workers']))
    settings['metric'] = metric.value
    run = Run(args, 'learn', settings)
    result = hill_climb(ds, h, cfg)
    names = ds.variable_names
    run.wrote(storage.save_graph(run.dir / 'graph.json', result.best, names))
    trace = pd.DataFrame([entry._asdict() for entry in result.trace])
    run.wrote(storage.write_table(run.dir / 'scores.csv', trace))
    net = fit_network(metric, result.best, ds, h)
    run.wrote(storage.save_posterior(run.dir / 'posterior.json', net, names))
    run.wrote(storage.save_sigma(run.dir / 'sigma.csv', assemble_sigma(net), names))
    print(f"✓ best graph: {result.best.describe()}, log score {result.score:.6f}")
    run.close()
    return 0


def cmd_diverge(args):
    settings = _settings(args)
    if args.validate_mc is not None and args.validate_mc < MIN_MC_SAMPLES:
        raise UsageError(f"--validate-mc needs at least {MIN_MC_SAMPLES} draws")
    grid = parse_grid(args.upsilon_grid)
    ds = _load(args)
    ordering = _ordering(args.ordering, ds.variable_names)
    graph = storage.load_graph(args.graph, ds.variable_names) if args.graph else None
    settings.update({'upsilon_grid': args.upsilon_grid, 'ordering': ordering,
                     'graph': args.graph, 'validate_mc': args.validate_mc})
    run = Run(args, 'diverge', settings)
    table = divergence_grid(ds, grid, float(settings['tau']), float(settings['delta']),
                            ordering=ordering, graph=graph)
    run.wrote(storage.write_table(run.dir / 'divergence.csv', table))
    if args.validate_mc:
        check = kl_check(ds, grid, args.validate_mc, int(settings['seed']),
                         float(settings['tau']), float(settings['delta']), graph=graph)
        run.wrote(storage.write_table(run.dir / 'kl_check.csv', check))
    run.close()
    return 0


def _float_list(text, flag):
    try:
        return [float(t) for t in text.split(',') if t.strip()]
    except ValueError:
        raise UsageError(f"{flag} must be a comma-separated list of numbers, got '{text}'")


def cmd_experiment(args):
    settings = _settings(args)
    seed, workers = int(settings['seed']), int(settings['workers'])
    tau, delta = float(settings['tau']), float(settings['delta'])
    if args.study == 'ex1':
        sizes = [int(v) for v in _float_list(args.sizes, '--sizes')] if args.sizes else EXAMPLE1_SIZES
        upsilons = _float_list(args.upsilons, '--upsilons') if args.upsilons else EXAMPLE1_UPSILONS
        settings.update({'study': 'ex1', 'replicates': args.replicates,
                         'sizes': list(sizes), 'upsilons': list(upsilons)})
        run = Run(args, 'experiment', settings)
        raw, summary = run_example1(sizes, upsilons, args.replicates, seed, tau, delta, workers)
        run.wrote(storage.write_table(run.dir / 'ex1_replicates.csv', raw))
        run.wrote(storage.write_table(run.dir / 'ex1_summary.csv', summary))
    elif args.study == 'ex2':
        grid_text = args.upsilon_grid or EXAMPLE2_GRID
        choices = [c.strip() for c in args.v_choices.split(',')] if args.v_choices else list(EXAMPLE2_V)
        unknown = [c for c in choices if c not in EXAMPLE2_V]
        if unknown:
            raise UsageError(f"unknown V choices: {', '.join(unknown)}")
        settings.update({'study': 'ex2', 'replicates': args.replicates,
                         'upsilon_grid': grid_text, 'v_choices': choices})
        run = Run(args, 'experiment', settings)
        raw, summary = run_example2(choices, parse_grid(grid_text), args.replicates,
                                    seed, tau, delta, workers)
        run.wrote(storage.write_table(run.dir / 'ex2_replicates.csv', raw))
        run.wrote(storage.write_table(run.dir / 'ex2_summary.csv', summary))
    else:
        raise UsageError(f"unknown study '{args.study}' (choose ex1 or ex2)")
    run.close()
    return 0


def cmd_analyze(args):
    """Validate, standardize, learn a residual-metric graph, then tabulate the divergence bounds"""
    settings = _settings(args)
    if args.q is None:
        raise UsageError("analyze needs the exogenous design: pass --q Q.csv")
    grid = parse_grid(args.upsilon_grid)
    ds = _load(args)
    settings.update({'upsilon_grid': args.upsilon_grid, 'metric': MetricKind.RESIDUAL.value})
    run = Run(args, 'analyze', settings)
    h = _hyper(settings)
    cfg = SearchConfig(metric=MetricKind.RESIDUAL, max_in_degree=int(settings['max_in_degree']),
                       restarts=int(settings['restarts']), seed=int(settings['seed']),
                       workers=int(settings['workers']))
    result = hill_climb(ds, h, cfg)
    run.wrote(storage.save_graph(run.dir / 'graph.json', result.best, ds.variable_names))
    table = divergence_grid(ds, grid, float(settings['tau']), float(settings['delta']),
                            graph=result.best)
    run.wrote(storage.write_table(run.dir / 'divergence.csv', table))
    print(f"✓ learned {result.best.describe()} (n={ds.n}, p={ds.p}, m={ds.m})")
    run.close()
    return 0


def cmd_verify(args):
    run_dir = Path(args.run_dir).resolve()
    ledger_path = run_dir.parent / 'ledger.json'
    ledger = Ledger.open(run_dir.parent) if ledger_path.exists() else None
    problems = verify_run(run_dir, ledger)
    if problems:
        for problem in problems:
            print(f"✗ {problem}", file=sys.stderr)
        return 1
    print(f"✓ {run_dir} matches its manifest")
    return 0


def _add_hyper_flags(parser):
    parser.add_argument('--tau', type=float, help='prior precision scale')
    parser.add_argument('--delta', type=float, help='prior degrees of freedom')
    parser.add_argument('--seed', type=int)


def _add_data_flags(parser, q_help='exogenous design CSV'):
    parser.add_argument('--x', required=True, help='response CSV, header = variable names')
    parser.add_argument('--q', help=q_help)


def _add_search_flags(parser):
    parser.add_argument('--restarts', type=int)
    parser.add_argument('--max-in-degree', dest='max_in_degree', type=int)


def build_parser():
    parser = ArgumentParser(prog='exonet', description=__doc__.strip().splitlines()[0])
    parser.add_argument('--version', action='version', version=f"exonet {VERSION}")
    parser.add_argument('--config', help='JSON file of settings (flags override it)')
    parser.add_argument('--log-level', dest='log_level', help='DEBUG, INFO, WARNING, ...')
    parser.add_argument('--out', help='run directory (default: $EXONET_OUTPUT_DIR/<command>)')
    parser.add_argument('--workers', type=int, help='parallel workers for grids and restarts')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='generate a dataset')
    p.add_argument('--example1', action='store_true')
    p.add_argument('--example2', action='store_true')
    p.add_argument('--grape', choices=('vineyard', 'temperature'))
    p.add_argument('--n', type=int, default=5, help='samples per group (example1)')
    p.add_argument('--upsilon', type=float)
    p.add_argument('--v-choice', dest='v_choice', default='V0', choices=tuple(EXAMPLE2_V))
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('learn', help='hill-climb a graph and fit its posterior')
    _add_data_flags(p)
    p.add_argument('--metric', default='bge', choices=[k.value for k in MetricKind])
    p.add_argument('--upsilon', type=float)
    p.add_argument('--v', help='m x m prior covariance CSV for the bayes metric')
    _add_hyper_flags(p)
    _add_search_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser('diverge', help='divergence bounds over an upsilon grid')
    _add_data_flags(p)
    p.add_argument('--upsilon-grid', dest='upsilon_grid', default=DEFAULT_DIVERGE_GRID)
    p.add_argument('--graph', help='graph.json whose divergence is added as D_graph')
    p.add_argument('--ordering', help='comma-separated variable order for the full graph')
    p.add_argument('--validate-mc', dest='validate_mc', type=int, metavar='N',
                   help='also write kl_check.csv with N Monte-Carlo draws per node')
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_diverge)

    p = sub.add_parser('experiment', help='replicate grids of the simulation studies')
    p.add_argument('--study', required=True, choices=('ex1', 'ex2'))
    p.add_argument('--replicates', type=int, default=100)
    p.add_argument('--sizes', help='ex1 samples per group, e.g. 5,10,20,50,100')
    p.add_argument('--upsilons', help='ex1 upsilon values, e.g. 0.001,0.01,0.1,1,10,100')
    p.add_argument('--upsilon-grid', dest='upsilon_grid', help=f"ex2 grid (default {EXAMPLE2_GRID})")
    p.add_argument('--v-choices', dest='v_choices', help='ex2 subset of V0,V1,V2,V3')
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser('analyze', help='learn with the residual metric and bound the divergence')
    _add_data_flags(p)
    p.add_argument('--upsilon-grid', dest='upsilon_grid', default=DEFAULT_DIVERGE_GRID)
    _add_hyper_flags(p)
    _add_search_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser('verify', help="re-hash a run's outputs and check the ledger")
    p.add_argument('run_dir')
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    """Run one command; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level or config.LOG_LEVEL)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except ExonetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
