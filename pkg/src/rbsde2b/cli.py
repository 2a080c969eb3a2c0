"""Command line entry point.

Exit status: 0 success, 1 input or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .expr import ExprDomainError, ExprError
from .model import SCHEME_NAMES, make_scheme, validate
from .oracle import MAX_COMPARE_N, compare_with_recombining
from .schemes import NumericalError, ValidationError, root_value, solve_backward
from .sim import convergence_table, fmt, sample_path, write_csv, write_paths_csv

ORACLE_TOLERANCE = 1e-10

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _number_list(kind):
    def convert(text):
        items = [s for s in text.split(",") if s.strip()]
        if not items:
            raise argparse.ArgumentTypeError("list must not be empty")
        try:
            return [kind(float(s)) if kind is int else kind(s) for s in items]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return convert


def _name_list(text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise argparse.ArgumentTypeError("list must not be empty")
    for s in items:
        if s not in SCHEME_NAMES:
            raise argparse.ArgumentTypeError(f"unknown scheme {s!r}")
    return items


def _checked(problem, n, scheme):
    report = validate(problem, n, scheme)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not report.ok:
        raise ValidationError(report)


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.problem()
    scheme = cfg.scheme(args.scheme, args.p)
    n = args.n or cfg.n
    keep = args.grid_out is not None
    _checked(problem, n, scheme)
    sol = solve_backward(problem, n, scheme, keep_grid=keep)
    if keep:
        write_csv(sol, args.grid_out)
    print(fmt(root_value(sol)))
    return EXIT_OK


def cmd_table(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.problem()
    n_list = args.n_list or [cfg.n]
    names = args.schemes or [cfg.defaults.get("scheme", "explicit-reflected")]
    p_list = args.p_list or ([cfg.defaults["p"]] if cfg.defaults.get("p") else [])
    schemes = []
    for name in names:
        if name.endswith("-pen"):
            if not p_list:
                raise UsageError(f"scheme {name} needs --p-list")
            schemes += [make_scheme(name, p) for p in p_list]
        else:
            schemes.append(make_scheme(name))
    table = convergence_table(problem, n_list, schemes)
    write_csv(table, args.out or sys.stdout)
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.problem()
    scheme = cfg.scheme(args.scheme, args.p)
    n = args.n or cfg.n
    _checked(problem, n, scheme)
    sol = solve_backward(problem, n, scheme)
    samples = [sample_path(sol, args.seed + i) for i in range(args.paths)]
    write_paths_csv(samples, args.out or sys.stdout)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.problem()
    scheme = cfg.scheme(args.scheme, args.p)
    n = args.n or cfg.n
    if n > MAX_COMPARE_N:
        raise UsageError(f"n={n} is too large for the full-tree oracle (limit {MAX_COMPARE_N})")
    gap = compare_with_recombining(problem, n, scheme)
    print(fmt(gap))
    return EXIT_OK if gap <= ORACLE_TOLERANCE else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rbsde2b", description="Doubly reflected BSDE solver on a binomial lattice")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, scheme=True):
        p.add_argument("config", help="config file or preset name")
        p.add_argument("--n", type=int, help="number of time steps")
        if scheme:
            p.add_argument("--scheme", choices=SCHEME_NAMES)
            p.add_argument("--p", type=float, help="penalization parameter")

    p = sub.add_parser("solve", help="print y at the root")
    common(p)
    p.add_argument("--grid-out", metavar="FILE", help="write every node as CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table", help="root values over n, scheme and p")
    p.add_argument("config")
    p.add_argument("--n-list", type=_number_list(int))
    p.add_argument("--p-list", type=_number_list(float))
    p.add_argument("--schemes", type=_name_list)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sample", help="sample walk paths through the solved grid")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("oracle-check", help="compare lattice and full-tree solutions")
    common(p)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "paths", 0) < 0:
        print("error: --paths must be nonnegative", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ValidationError as exc:
        for e in exc.report.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ExprDomainError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ConfigError, ExprError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
