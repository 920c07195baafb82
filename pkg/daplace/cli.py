'''
Command line interface.

    daplace forward           forward solve of the first training pair, writes state snapshots
    daplace assimilate        4D-VAR reconstruction of the first training pair at a fixed placement
    daplace place             two-stage placement optimization over the configured sweep
    daplace experiment ID     one of the studies 1a, 1b, 2, 3, 4
    daplace check-gradients   finite difference and duality checks on a small grid
    daplace coeffs            cubic bridge coefficients of the sparsity penalty

place and experiment write CSV tables and DAT files, plus PNG figures with --plots.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
'''

import argparse
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np

from daplace import __version__
from daplace.assimilation import DAProblem, assimilate
from daplace.checks import run_checks
from daplace.constants import __experiments__
from daplace.exceptions import ConfigError, NumericalError
from daplace.experiments.config import ExperimentConfig, experiment_config, load_config
from daplace.experiments.export import export_report, export_snapshots
from daplace.experiments.metrics import error_metrics
from daplace.experiments.plots import plot_report
from daplace.experiments.study import PlacementStudy, run_experiment
from daplace.experiments.training import build_training_set
from daplace.sparsity import pi_coefficients

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _floats(text: str) -> List[float]:
    return [float(item) for item in text.split(',') if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='daplace',
                                     description='Optimal sensor and observation window placement for 4D-VAR.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress, -vv for solver iterations')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', help='key = value configuration file')
    common.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='override a configuration key, may be repeated')

    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('forward', parents=[common], help='solve the state equation of the first training pair')
    p.add_argument('--times', type=_floats, default=[0.0, 0.5, 1.0], help='comma separated snapshot times')
    p.add_argument('-o', '--out', default='forward_out')

    p = sub.add_parser('assimilate', parents=[common], help='reconstruct the first training pair at a fixed placement')
    p.add_argument('--w', type=float, default=1.0, help='uniform sensor weight')
    p.add_argument('--sigma', type=float, default=1.0, help='uniform time window weight')

    p = sub.add_parser('place', parents=[common], help='optimize the placement over the configured sweep')
    p.add_argument('-o', '--out', default='placement_out')
    p.add_argument('--plots', action='store_true', help='also render PNG figures of every row')

    p = sub.add_parser('experiment', parents=[common], help='run one of the placement studies')
    p.add_argument('id', choices=__experiments__)
    p.add_argument('-o', '--out', default=None, help='output directory, default experiment_<id>')
    p.add_argument('--plots', action='store_true', help='also render PNG figures of every row')

    p = sub.add_parser('check-gradients', help='finite difference and duality checks')
    p.add_argument('--m', type=int, default=6)
    p.add_argument('--n', type=int, default=4)
    p.add_argument('--seed', type=int, default=0)

    p = sub.add_parser('coeffs', help='cubic bridge coefficients of the sparsity penalty')
    p.add_argument('eps', type=float, nargs='+')

    return parser


def resolve_config(args: argparse.Namespace, base: Optional[ExperimentConfig]=None) -> ExperimentConfig:
    '''base (or defaults), then the config file, then --set overrides'''
    cfg = base if base is not None else ExperimentConfig()
    if getattr(args, 'config', None):
        cfg = load_config(args.config, base=cfg)
    pairs = {}
    for item in getattr(args, 'overrides', []):
        if '=' not in item:
            raise ConfigError(f'override {item!r} is not of the form key=value')
        key, value = item.split('=', 1)
        pairs[key.strip()] = value
    return cfg.override(**pairs) if pairs else cfg


def cmd_forward(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    model = cfg.model()
    pair = build_training_set(cfg.preset, cfg.n_pairs, cfg.seed, model, sd=cfg.noise_sd, jump=cfg.jump,
                              background=cfg.background, forcing=cfg.forcing)[0]
    paths = export_snapshots(model, pair.y_dag, args.times, args.out)
    print(f'max |y| = {np.max(np.abs(pair.y_dag)):.6e}, {len(paths)} snapshots written to {args.out}')
    return EXIT_OK


def cmd_assimilate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    model = cfg.model()
    training = build_training_set(cfg.preset, cfg.n_pairs, cfg.seed, model, sd=cfg.noise_sd, jump=cfg.jump,
                                  background=cfg.background, forcing=cfg.forcing)
    pair = training[0]
    prob = DAProblem(model=model, u_b=pair.u_b, z_o=pair.z_o,
                     w=np.full(model.grid.n_s, args.w), sigma=np.full(model.tg.n_T, args.sigma),
                     forcing=pair.forcing, theta=cfg.theta, alpha=cfg.alpha)
    sol = assimilate(prob, opts=cfg.upper_config().lower)
    error_abs, error_rel = error_metrics([sol], [pair], model)
    print(f'cost {sol.cost:.6e}, gradient norm {sol.grad_norm:.3e}, iterations {sol.iterations}')
    print(f'||u - u_dag|| = {model.norm_h(sol.u - pair.u_dag):.6e}, '
          f'state error abs {error_abs:.6e}, rel {error_rel:.6e}')
    return EXIT_OK


def _print_rows(report) -> None:
    for row in report.rows:
        print(f'{report.config.sweep_key}={row.value:g} sd={row.sd:g} status={row.status} '
              f'|w|={row.norm_w:.4g} |sigma|={row.norm_sigma:.4g} J0={row.J0:.6e} J_end={row.J_end:.6e} '
              f'iter={row.iterations}')


def cmd_place(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    report = PlacementStudy(cfg).run()
    export_report(report, args.out)
    if args.plots:
        plot_report(report, args.out)
    _print_rows(report)
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = resolve_config(args, base=experiment_config(args.id))
    out = args.out if args.out is not None else f'experiment_{args.id}'
    report = run_experiment(args.id, cfg, out_dir=out)
    if args.plots:
        plot_report(report, out)
    _print_rows(report)
    print(f'results written to {out}')
    return EXIT_OK


def cmd_check_gradients(args: argparse.Namespace) -> int:
    for name, err in run_checks(args.m, args.n, args.seed).items():
        print(f'{name:<26} {err:.3e}')
    return EXIT_OK


def cmd_coeffs(args: argparse.Namespace) -> int:
    for eps in args.eps:
        a, b, c, e = pi_coefficients(eps)
        print(f'eps={eps:g}: a={a:.12g} b={b:.12g} c={c:.12g} e={e:.12g}')
    return EXIT_OK


COMMANDS = {'forward': cmd_forward,
            'assimilate': cmd_assimilate,
            'place': cmd_place,
            'experiment': cmd_experiment,
            'check-gradients': cmd_check_gradients,
            'coeffs': cmd_coeffs}


def main(argv: Optional[Sequence[str]]=None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        return COMMANDS[args.command](args)
    except NumericalError as err:
        logger.error('%s', err)
        print(f'numerical failure: {err}', file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, FileNotFoundError) as err:
        print(f'invalid input: {err}', file=sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
