"""
Command line for the convergence study.

    layerpot run --surface torus --n 64 --delta-ratio 2 --mode both --out data/results.csv
    layerpot sweep --surface torus --n 64 128 --delta-ratio 1 2 3 --out data/results.csv
    layerpot rates --csv data/results.csv --column einf_irreg
    layerpot nodes --surface cassini --n 256
"""

import os
import sys
import math
import logging
import argparse
from itertools import product

import pandas as pd

from .errors import LayerPotError
from .settings import load_config, setup_logging, resolve_path
from .surfaces import load_surface_definitions, make_surface
from .surface_quadrature import generate_nodes, integrate_smooth, dump_nodes
from .level_surface import resolution_limit
from .corrections import discretization_factor
from .harness import MODES, CaseConfig, run_case
from .summation import BACKENDS
from .reporting import append_csv, summary_table, bins_table, nodes_table, convergence_rates, rates_table, ERROR_COLUMNS

logger = logging.getLogger(__name__)


def _surface_ids():
    return sorted(load_surface_definitions())


def _add_common(parser):
    parser.add_argument("--config", help="Path to config.ini (default: config.ini in the repository root)")
    parser.add_argument("--verbose", action="store_true", help="Also log to the console")
    parser.add_argument("--theta", type=float, help="Partition of unity angle in degrees")
    parser.add_argument("--surface", required=True, choices=_surface_ids(), help="Surface id from surfaces.json")


def _add_case_flags(parser):
    parser.add_argument("--mode", choices=MODES, default="both", help="Evaluate near the surface, on it, or both")
    parser.add_argument("--sum", dest="backend", choices=BACKENDS, help="Summation backend")
    parser.add_argument("--out", help="CSV file to append results to")
    parser.add_argument("--dump-nodes", help="Write the quadrature nodes to this file")
    parser.add_argument("--no-table", action="store_true", help="Do not print the summary table")
    parser.add_argument("--bins", action="store_true", help="Print near-surface errors binned by |b|/h")


def build_parser():
    parser = argparse.ArgumentParser(prog="layerpot", description="Layer potentials on and near implicit surfaces")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run one case of the convergence study")
    _add_common(run)
    run.add_argument("--n", type=int, required=True, help="Grid cells per side")
    run.add_argument("--delta-ratio", type=float, help="delta/h")
    _add_case_flags(run)

    sweep = commands.add_parser("sweep", help="Run every (N, delta/h) combination")
    _add_common(sweep)
    sweep.add_argument("--n", type=int, nargs="+", required=True, help="Grid cells per side")
    sweep.add_argument("--delta-ratio", type=float, nargs="+", help="delta/h values")
    _add_case_flags(sweep)

    rates = commands.add_parser("rates", help="Observed convergence orders from a results CSV")
    rates.add_argument("--csv", required=True, help="Results CSV written by run or sweep")
    rates.add_argument("--column", default="einf_irreg", choices=ERROR_COLUMNS, help="Error column")
    rates.add_argument("--config", help="Path to config.ini")
    rates.add_argument("--verbose", action="store_true", help="Also log to the console")

    nodes = commands.add_parser("nodes", help="Quadrature node counts, area and resolution diagnostics")
    _add_common(nodes)
    nodes.add_argument("--n", type=int, required=True, help="Grid cells per side")
    nodes.add_argument("--delta-ratio", type=float, help="delta/h for the discretization diagnostic")
    nodes.add_argument("--dump-nodes", help="Write the quadrature nodes to this file")
    return parser


def _default_ratio(config, mode):
    section = config["regularization"]
    if mode == "on":
        return section.getfloat("on_surface_delta_ratio")
    return section.getfloat("delta_ratio")


def _theta(args, config):
    return args.theta if args.theta is not None else config["quadrature"].getfloat("theta_degrees")


def _case(args, config, n, ratio):
    return CaseConfig(
        surface=args.surface,
        n=n,
        delta_ratio=ratio if ratio is not None else _default_ratio(config, args.mode),
        theta_degrees=_theta(args, config),
        mode=args.mode,
        backend=args.backend or config["summation"]["backend"],
        half_width=config["grid"].getfloat("half_width"),
        output=args.out,
        dump_nodes=args.dump_nodes,
    )


def _report(result, args):
    if args.out:
        append_csv(result, args.out)
    if not args.no_table:
        print(summary_table(result))
    if args.bins and result.bins:
        print(bins_table(result.bins))


def cmd_run(args, config):
    result = run_case(_case(args, config, args.n, args.delta_ratio), config)
    _report(result, args)


def cmd_sweep(args, config):
    ratios = args.delta_ratio or [None]
    for n, ratio in product(args.n, ratios):
        result = run_case(_case(args, config, n, ratio), config)
        _report(result, args)


def cmd_rates(args, config):
    frame = pd.read_csv(args.csv)
    rates = convergence_rates(frame, args.column)
    print(rates_table(rates, args.column))


def cmd_nodes(args, config):
    surface = make_surface(args.surface)
    half_width = config["grid"].getfloat("half_width")
    h = 2.0 * half_width / args.n
    theta = math.radians(_theta(args, config))
    nodes = generate_nodes(surface, h, theta, half_width,
                           root_tolerance=config["quadrature"].getfloat("root_tolerance"))
    if args.dump_nodes:
        dump_nodes(nodes, args.dump_nodes)
    area = integrate_smooth(nodes, lambda x: 1.0)
    _, _, h0 = resolution_limit(surface, nodes.pos, theta)
    ratio = args.delta_ratio if args.delta_ratio is not None else config["regularization"].getfloat("delta_ratio")
    reference = None
    if args.n == 256:
        reference = load_surface_definitions()[args.surface].get("reference_nodes_256")
    print(nodes_table(args.surface, nodes.counts, area, h, h0, reference, discretization_factor(theta, ratio)))


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "rates": cmd_rates, "nodes": cmd_nodes}


def main(argv=None):
    args = build_parser().parse_args(argv)
    config = load_config(args.config)
    log_file_path = setup_logging(config, verbose=args.verbose)
    if getattr(args, "out", None) and not os.path.isabs(args.out) and os.path.dirname(args.out) == "":
        args.out = os.path.join(resolve_path(config, "output_dir"), args.out)
    try:
        COMMANDS[args.command](args, config)
    except LayerPotError as e:
        logger.exception(f"layerpot {args.command} failed: {e}")
        print(f"Error: {e} (details in {log_file_path})", file=sys.stderr)
        return 1
    return 0
