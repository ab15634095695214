"""Command-line interface: ``marked-renewal <command> [options]``.

Verification commands (verify-eq, stationarity) exit nonzero when their
expectation fails. Statistical commands only do so under ``--strict``.
Outputs never depend on ``--threads``.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import analytics
from .characterization import CaseDescriptor, classification_json, make_case_laws
from .laws import LawError, LawSyntaxError, parse_law_expr
from .renewal_sim import (
    EpochCSVError,
    SimConfig,
    batch_sample_epoch_pairs,
    read_epoch_pairs_csv,
    write_epoch_pairs_csv,
)
from .stats import (
    DEFAULT_ALPHA,
    DEFAULT_BINS,
    DEFAULT_PERMUTATIONS,
    chi2_independence_test,
    hpp_decision,
    NOT_HPP,
    permutation_dcov_test,
)
from .transforms import GridSpec, SubstitutionUndefined, grid_scan

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _config(args: argparse.Namespace) -> dict:
    skip = {"func", "output", "threads", "summary"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --------------------------------------------------------------------------
# law arguments


def _add_law_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("laws (either --t1/--t2 or --case)")
    g.add_argument("--t1", help="law expression for the first inter-arrival time")
    g.add_argument("--t2", help="law expression for later inter-arrival times")
    g.add_argument("--case", choices=list("abcde"), help="canonical independence case")
    g.add_argument("--kappa", type=float, default=0.0, help="deterministic delay (cases b-e)")
    g.add_argument("--theta", type=float, default=1.0, help="exponential rate (case d)")
    g.add_argument("--q0", type=float, default=0.5, help="P(T2 > 0) (cases c, e)")
    g.add_argument("--alpha", type=float, default=1.0, help="lattice scale (case e)")


def _case_descriptor(args) -> CaseDescriptor:
    c = args.case.upper()
    params = {
        "A": {},
        "B": {"kappa": args.kappa},
        "C": {"kappa": args.kappa, "q0": args.q0},
        "D": {"kappa": args.kappa, "theta": args.theta},
        "E": {"kappa": args.kappa, "q0": args.q0, "alpha": args.alpha},
    }[c]
    return CaseDescriptor(c, **params)


def _laws(args, required: bool = True):
    if args.case:
        if args.t1 or args.t2:
            raise UsageError("give either --case or --t1/--t2, not both")
        try:
            return make_case_laws(_case_descriptor(args))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.t1 is None and args.t2 is None and not required:
        return None, None
    if args.t1 is None:
        raise UsageError("--t1 is required (or use --case)")
    t1 = parse_law_expr(args.t1)
    t2 = parse_law_expr(args.t2) if args.t2 is not None else t1
    return t1, t2


def _law_config(t1, t2) -> dict:
    return {"t1": t1.to_expr(), "t2": t2.to_expr()} if t1 is not None else {"t1": None, "t2": None}


def _check_p(p: float) -> None:
    if not 0 < p < 1:
        raise UsageError(f"--p must lie strictly inside (0, 1), got {p}")


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    _check_p(args.p)
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    t1, t2 = _laws(args)
    cfg = SimConfig(t1, t2, args.p, horizon=args.horizon, arrival_cap=args.cap, seed=args.seed)
    pairs = batch_sample_epoch_pairs(cfg, args.n, threads=args.threads)
    buf = io.StringIO()
    write_epoch_pairs_csv(pairs, buf)
    _emit(buf.getvalue(), args.output)
    o0, o1 = pairs.observed()
    summary = {
        "config": {**_config(args), **cfg.resolved()},
        "n": len(pairs),
        "censoring": pairs.censoring_fractions(),
        "mean_r0_observed": float(np.mean(pairs.r0[o0])) if o0.any() else None,
        "mean_r1_observed": float(np.mean(pairs.r1[o1])) if o1.any() else None,
    }
    stream = sys.stderr if args.output in (None, "-") else sys.stdout
    stream.write(_dump(summary))
    return EXIT_OK


def cmd_verify_eq(args) -> int:
    t1, t2 = _laws(args)
    if args.eq == "eq1":
        _check_p(args.p)
    grid = GridSpec(args.lo, args.hi, args.points, args.diag_points)
    try:
        values, summary = grid_scan(t1, t2, grid, args.eq, args.p if args.eq == "eq1" else None)
    except SubstitutionUndefined as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL
    summary["config"] = {**_config(args), **_law_config(t1, t2)}
    if args.expect == "zero":
        ok = summary["max_abs"] <= args.tol
    elif args.expect == "nonzero":
        ok = summary["max_abs"] >= args.margin
    else:
        ok = True
    summary["expectation"] = args.expect
    summary["passed"] = ok
    if args.format == "csv":
        _emit(values.to_csv(), args.output)
        if args.summary:
            _emit(_dump(summary), args.summary)
    else:
        _emit(_dump(summary), args.output)
        if args.summary:
            _emit(values.to_csv(), args.summary)
    return EXIT_OK if ok else EXIT_FAIL


def _read_pairs(path: str):
    try:
        return read_epoch_pairs_csv(path)
    except FileNotFoundError:
        raise UsageError(f"input file not found: {path}") from None
    except EpochCSVError as exc:
        raise UsageError(f"malformed epoch CSV: {exc}") from None


def cmd_test_independence(args) -> int:
    pairs = _read_pairs(args.input_path)
    reports = []
    try:
        if args.method in ("chi2", "both"):
            reports.append(chi2_independence_test(pairs, args.bins, args.level))
        if args.method in ("permDcov", "both"):
            reports.append(permutation_dcov_test(pairs, args.permutations, args.level, args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = {"config": _config(args), "reports": [r.to_dict() for r in reports]}
    _emit(_dump(out), args.output)
    if args.strict and any(r.decision for r in reports):
        return EXIT_FAIL
    return EXIT_OK


def cmd_hpp_test(args) -> int:
    t1, t2 = _laws(args, required=False)
    if args.input_path:
        pairs = _read_pairs(args.input_path)
    else:
        if t1 is None:
            raise UsageError("without --input, declare laws to simulate from")
        _check_p(args.p)
        cfg = SimConfig(t1, t2, args.p, horizon=args.horizon, arrival_cap=args.cap, seed=args.seed)
        pairs = batch_sample_epoch_pairs(cfg, args.n, threads=args.threads)
    verdict = hpp_decision(t1, t2, pairs, args.level, args.seed, args.permutations, args.bins)
    out = {"config": {**_config(args), **_law_config(t1, t2)}, "n": len(pairs), **verdict.to_dict()}
    _emit(_dump(out), args.output)
    if args.strict and verdict.verdict == NOT_HPP:
        return EXIT_FAIL
    return EXIT_OK


def cmd_remark_checks(args) -> int:
    _check_p(args.p)
    cases = ["E", "C"] if args.case == "both" else [args.case.upper()]
    rows = []
    for c in cases:
        for row in analytics.remark3_monte_carlo(args.q0, args.p, args.n, args.seed, case=c, kappa=args.kappa,
                                                 alpha=args.alpha, threads=args.threads):
            rows.append({"case": c, **row})
    c1, c2 = analytics.remark3_incompatibility(args.q0, args.p)
    if args.format == "csv":
        lines = ["case,quantity,closed_form,mc_estimate,mc_stderr,z_score"]
        lines += [
            f"{r['case']},{r['quantity']},{r['closed_form']!r},{r['mc_estimate']!r},{r['mc_stderr']!r},{r['z_score']!r}"
            for r in rows
        ]
        _emit("\n".join(lines) + "\n", args.output)
    else:
        _emit(_dump({"config": _config(args), "rows": rows, "c1_residual": c1, "c2_residual": c2}), args.output)
    if args.strict and any(abs(r["z_score"]) > 3 for r in rows):
        return EXIT_FAIL
    return EXIT_OK


def cmd_stationarity(args) -> int:
    v = analytics.discrete_renewal_mass(args.q0, args.n_max)
    target = analytics.stationary_mass(args.q0)
    dev = float(np.max(np.abs(v - target)))
    tail = analytics.summed_tail_residual(args.q0, args.k_max)
    ok = dev <= args.tol and tail <= args.tail_tol
    if args.format == "csv":
        lines = ["n,v_n,deviation"] + [f"{i},{x!r},{x - target!r}" for i, x in enumerate(v.tolist())]
        _emit("\n".join(lines) + "\n", args.output)
    else:
        _emit(_dump({
            "config": _config(args),
            "stationary_value": target,
            "max_deviation": dev,
            "summed_tail_residual": tail,
            "passed": ok,
        }), args.output)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_classify(args) -> int:
    t1, t2 = _laws(args)
    out = classification_json(t1, t2)
    out["config"] = {**_config(args), **_law_config(t1, t2)}
    _emit(_dump(out), args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("-o", "--output", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=["csv", "json"], default=None, help="output format where both exist")

    parser = argparse.ArgumentParser(
        prog="marked-renewal",
        description="Simulate Bernoulli-marked renewal processes and test independence of first epochs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate epoch pairs to CSV")
    _add_law_args(p)
    p.add_argument("--p", type=float, default=0.5, help="marking probability")
    p.add_argument("--n", type=int, default=1000, help="replications")
    p.add_argument("--horizon", type=float, default=1e6)
    p.add_argument("--cap", type=int, default=10**6, help="maximum arrivals per replication")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-eq", parents=[common], help="scan a functional-equation residual on a grid")
    _add_law_args(p)
    p.add_argument("--eq", choices=["eq1", "eq2", "eq3"], default="eq2")
    p.add_argument("--p", type=float, default=0.5, help="marking probability (eq1 only)")
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=5.0)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--diag-points", type=int, default=101)
    p.add_argument("--expect", choices=["zero", "nonzero", "none"], default="none")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--margin", type=float, default=0.01)
    p.add_argument("--summary", help="secondary output: grid CSV for json format, summary JSON for csv format")
    p.set_defaults(func=cmd_verify_eq)

    def _test_args(p):
        p.add_argument("--level", type=float, default=DEFAULT_ALPHA, help="significance level")
        p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="quantile bins per axis (chi2)")
        p.add_argument("--permutations", type=int, default=DEFAULT_PERMUTATIONS)
        p.add_argument("--strict", action="store_true", help="exit 1 when the decision is a rejection")

    p = sub.add_parser("test-independence", parents=[common], help="independence tests on an epoch CSV")
    p.add_argument("--input", dest="input_path", required=True)
    p.add_argument("--method", choices=["chi2", "permDcov", "both"], default="both")
    _test_args(p)
    p.set_defaults(func=cmd_test_independence)

    p = sub.add_parser("hpp-test", parents=[common], help="HPP decision from first epochs")
    _add_law_args(p)
    p.add_argument("--input", dest="input_path", default=None, help="epoch CSV; simulated from the laws if absent")
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--horizon", type=float, default=1e6)
    p.add_argument("--cap", type=int, default=10**6)
    _test_args(p)
    p.set_defaults(func=cmd_hpp_test)

    p = sub.add_parser("remark-checks", parents=[common], help="event probabilities at the delay epoch vs Monte Carlo")
    p.add_argument("--q0", type=float, default=0.5)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--n", type=int, default=10**6)
    p.add_argument("--case", choices=["e", "c", "both"], default="both")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--strict", action="store_true", help="exit 1 if any |z| > 3")
    p.set_defaults(func=cmd_remark_checks)

    p = sub.add_parser("stationarity", parents=[common], help="flat renewal mass of the lattice case")
    p.add_argument("--q0", type=float, default=0.5)
    p.add_argument("--n-max", type=int, default=500)
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--tail-tol", type=float, default=1e-14)
    p.set_defaults(func=cmd_stationarity)

    p = sub.add_parser("classify", parents=[common], help="match a law pair against the independence cases")
    _add_law_args(p)
    p.set_defaults(func=cmd_classify)
    return parser


_DEFAULT_FORMAT = {"verify-eq": "json", "remark-checks": "csv", "stationarity": "json"}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = _DEFAULT_FORMAT.get(args.command, "json")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except (LawSyntaxError, LawError, UsageError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
