"""Command-line front end: ``slscreen gen | screen | solve | bench``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

from .bench import SCHEMA_VERSION, SafetyTripwire, SweepConfig, aggregate, format_table, run_sweep, write_outputs
from .bnb import BnbConfig, Branching, MipStatus, integrality_gap, solve_bnb, solve_screened
from .data import (
    CsvOptions,
    SyntheticConfig,
    add_intercept_column,
    gen_synthetic,
    load_dense_csv,
    load_sparse_text,
    standardize_columns,
    write_dense_csv,
)
from .errors import (
    BoundViolation,
    ConfigError,
    InternalContradiction,
    NonConvergedRelaxation,
    SlsError,
)
from .loss import LossConvention
from .relaxations import ProblemSpec, SolverConfig, choose_bigm, solve_bigm_relaxation, solve_relaxation
from .screening import apply_rules, dual_certificate, round_upper_bound

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default; 2 is reserved for numerical failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_data_args(p):
    p.add_argument("data", help="dataset file (dense CSV or sparse text)")
    p.add_argument("--format", choices=["auto", "csv", "sparse"], default="auto")
    p.add_argument("--label-column", type=int, default=0, help="0-based label column (CSV)")
    p.add_argument("--n-features", type=int, default=None, help="feature count (sparse text)")
    p.add_argument("--standardize", action="store_true", help="scale columns to unit variance")
    p.add_argument("--intercept", action="store_true", help="append a constant column")


def _add_problem_args(p):
    p.add_argument("--gamma", type=_positive_float, required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--mu", type=_positive_float, help="l0 penalty (REG)")
    grp.add_argument("--k", type=_positive_int, help="cardinality bound (CARD)")
    p.add_argument("--convention", choices=[c.value for c in LossConvention],
                   default=LossConvention.UNNORMALIZED.value)
    p.add_argument("--tol", type=_positive_float, default=SolverConfig.tol)
    p.add_argument("--max-iters", type=_positive_int, default=SolverConfig.max_iters)
    p.add_argument("-o", "--output", default=None, help="write JSON here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slscreen", description="Safe screening and exact solves for sparse logistic regression.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--m", type=_positive_int, required=True)
    g.add_argument("--k", type=_positive_int, required=True)
    g.add_argument("--s", type=float, required=True)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--no-header", action="store_true")
    g.add_argument("-o", "--output", required=True)

    s = sub.add_parser("screen", help="screening report for one dataset")
    _add_data_args(s)
    _add_problem_args(s)

    v = sub.add_parser("solve", help="exact solve with or without screening")
    _add_data_args(v)
    _add_problem_args(v)
    v.add_argument("--screen", choices=["on", "off"], default="on")
    v.add_argument("--time-limit", type=_positive_float, default=math.inf)
    v.add_argument("--node-limit", type=_positive_int, default=None)
    v.add_argument("--branching", choices=[b.value for b in Branching],
                   default=Branching.MOST_FRACTIONAL.value)

    b = sub.add_parser("bench", help="run a synthetic sweep from a JSON config")
    b.add_argument("config")
    b.add_argument("--out", default=None, help="output directory (overrides the config)")
    b.add_argument("--threads", type=_positive_int, default=None, help="worker count (default SLS_THREADS or cores)")
    b.add_argument("--quiet", action="store_true")
    return parser


# --------------------------------------------------------------------------- #


def _load(args):
    fmt = args.format
    if fmt == "auto":
        fmt = "csv" if Path(args.data).suffix.lower() == ".csv" or _is_csv(args.data) else "sparse"
    if fmt == "csv":
        d = load_dense_csv(args.data, CsvOptions(label_column=args.label_column))
    else:
        d = load_sparse_text(args.data, n_features=args.n_features)
    if args.standardize:
        d = standardize_columns(d)
    if args.intercept:
        d = add_intercept_column(d)
    return d


def _is_csv(path) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return "," in line and ":" not in line
    return True


def _spec(args) -> ProblemSpec:
    conv = LossConvention(args.convention)
    if args.mu is not None:
        return ProblemSpec.reg(args.gamma, args.mu, conv)
    return ProblemSpec.card(args.gamma, args.k, conv)


def _emit(doc: dict, output: Optional[str]):
    text = json.dumps(doc, indent=1, allow_nan=False)
    if output:
        Path(output).write_text(text + "\n")
    else:
        print(text)


def cmd_gen(args) -> int:
    if args.k > args.n:
        raise UsageError(f"--k {args.k} exceeds --n {args.n}")
    cfg = SyntheticConfig(n=args.n, m=args.m, k=args.k, s=args.s, seed=args.seed)
    d = gen_synthetic(cfg)
    out = Path(args.output)
    write_dense_csv(d, out, header=not args.no_header)
    sidecar = out.with_name(out.name + ".support.json")
    sidecar.write_text(json.dumps({
        "schema_version": SCHEMA_VERSION,
        "n": args.n, "m": args.m, "k": args.k, "s": args.s, "seed": args.seed,
        "true_support": sorted(d.true_support),
    }, indent=1) + "\n")
    print(f"seed {args.seed}")
    return EXIT_OK


def cmd_screen(args) -> int:
    d = _load(args)
    spec = _spec(args)
    spec.check(d)
    cfg = SolverConfig(tol=args.tol, max_iters=args.max_iters)
    relax = solve_relaxation(d, spec, cfg=cfg)
    doc = {"schema_version": SCHEMA_VERSION, "problem": spec.as_dict(), "n": d.n, "m": d.m,
           "relax_converged": relax.converged, "relax_iterations": relax.iterations,
           "kkt_residual": relax.kkt_residual, "eta_relax_primal": relax.objective}
    if not relax.converged:
        # partial report: no feature statuses without a converged relaxation
        _emit(doc, args.output)
        print(f"relaxation did not converge after {relax.iterations} iterations", file=sys.stderr)
        return EXIT_NUMERICAL
    cert = dual_certificate(relax, d, spec)
    ub = round_upper_bound(relax, d, spec)
    result = apply_rules(cert, ub, spec)
    doc.update(result.as_dict())
    doc.update({
        "eta_relax_dual": cert.dual_value,
        "tightness_gap": cert.tightness_gap,
        "upper_support": ub.support.tolist(),
        "delta": cert.delta.tolist(),
    })
    _emit(doc, args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    d = _load(args)
    spec = _spec(args)
    spec.check(d)
    relax_cfg = SolverConfig(tol=args.tol, max_iters=args.max_iters)
    cfg = BnbConfig(time_limit=args.time_limit, node_limit=args.node_limit,
                    branching=Branching(args.branching), relax=relax_cfg)
    sol = solve_screened(d, spec, cfg) if args.screen == "on" else solve_bnb(d, spec, cfg=cfg)

    root = sol.screen.relax if sol.screen is not None else solve_relaxation(d, spec, cfg=relax_cfg)
    bigm = choose_bigm(d, spec)
    eta_bigm = solve_bigm_relaxation(d, spec, bigm, cfg=relax_cfg).objective
    doc = {"schema_version": SCHEMA_VERSION, "problem": spec.as_dict(), "n": d.n, "m": d.m,
           "screen": args.screen}
    doc.update(sol.as_dict())
    doc.update({
        "eta_relax_perspective": root.objective,
        "eta_relax_bigm": eta_bigm,
        "bigm": bigm,
        "gap_perspective": None,
        "gap_bigm": None,
    })
    if sol.status is MipStatus.OPTIMAL:
        doc["gap_perspective"] = integrality_gap(sol.objective, min(root.objective, sol.objective))
        try:
            doc["gap_bigm"] = integrality_gap(sol.objective, eta_bigm)
        except BoundViolation:
            pass
    if sol.screen is not None:
        doc.update({
            "percent_screened": sol.screen.result.percent_screened,
            "fixed_zero": sol.screen.result.n_fixed_zero,
            "fixed_one": sol.screen.result.n_fixed_one,
        })
    _emit(doc, args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    out = args.out or cfg.output
    if not out:
        raise UsageError("no output directory: pass --out or set 'output' in the config")
    records = run_sweep(cfg, workers=args.threads)
    paths = write_outputs(cfg, records, out)
    if not args.quiet:
        rows = aggregate(cfg, records)
        for metric in ("percent_screened", "gap_perspective", "gap_bigm"):
            print(format_table(cfg, rows, metric))
            print()
        for name, p in paths.items():
            print(f"{name}: {p}")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "screen": cmd_screen, "solve": cmd_solve, "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as err:
        print(f"slscreen: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SafetyTripwire as err:
        print(f"slscreen: safety tripwire: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (NonConvergedRelaxation, InternalContradiction, BoundViolation) as err:
        print(f"slscreen: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, SlsError) as err:
        # bad input files and invalid problem data are usage errors
        print(f"slscreen: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
