"""Acceptance criteria, one test per criterion.

Each test appends a ``PASS``/``FAIL`` line to the summary printed at the
end of the pytest run and then asserts. Run alone with
``pytest tests/test_acceptance.py -s``.
"""
import hashlib
import math
import time

import numpy as np
import pytest

import conftest
from conftest import case_sweep
from marked_renewal.analytics import (
    c2_roots,
    discrete_renewal_mass,
    independence_gap,
    remark3_incompatibility,
    remark3_monte_carlo,
    remark3_probs,
    summed_tail_residual,
)
from marked_renewal.characterization import CaseDescriptor, make_case_laws
from marked_renewal.cli import main
from marked_renewal.laws import parse_law_expr
from marked_renewal.renewal_sim import SimConfig, batch_counts_at_time, batch_sample_epoch_pairs
from marked_renewal.stats import (
    HPP_CONSISTENT,
    INAPPLICABLE,
    hpp_decision,
    mc_laplace_estimate,
    rejection_rates,
)
from marked_renewal.transforms import joint_lt, residual_eq1, residual_eq2

GRID = np.linspace(0.0, 5.0, 21)
LAM, MU = GRID[:, None], GRID[None, :]
POINT1 = ("point(1)", "point(1)")
ERLANG = ("erlang(k=2,rate=1)", "erlang(k=2,rate=1)")
HPP0 = make_case_laws(CaseDescriptor("D", kappa=0.0, theta=1.0))
TRIALS = 200


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def _laws_for_sweep():
    return [(d, *make_case_laws(d)) for d in case_sweep()]


# -- shared calibration runs ------------------------------------------------


@pytest.fixture(scope="module")
def case_d_rates():
    """Both tests at alpha and the combined decision on the same case (d) samples."""
    start = time.perf_counter()
    rates = rejection_rates(*HPP0, 0.5, 2000, TRIALS, methods=("chi2", "permDcov", "hpp"), seed0=1000)
    return rates, time.perf_counter() - start


@pytest.fixture(scope="module")
def power_table():
    table = {}
    for name, laws in (("point(1)^2", POINT1), ("erlang(2,1)^2", ERLANG)):
        for n in (500, 2000, 8000):
            methods = ("chi2", "permDcov", "hpp") if n == 2000 else ("chi2", "permDcov")
            table[name, n] = rejection_rates(*laws, 0.5, n, TRIALS, methods=methods, seed0=5000)
    return table


# -- criteria ---------------------------------------------------------------


def test_criterion_01_identity_on_every_case():
    start = time.perf_counter()
    worst = max(float(np.max(np.abs(residual_eq2(t1, t2, LAM, MU)))) for _, t1, t2 in _laws_for_sweep())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    record(1, ok, f"max |eq2| over {len(case_sweep())} case settings = {worst:.2e} (<= 1e-12), {elapsed:.3f} s")
    assert ok


def test_criterion_02_necessity_witnesses():
    e1 = math.exp(-1.0)
    point_exact = e1 ** 2 * (2 * e1 - e1 ** 2) - e1 ** 2
    point_max = float(np.max(np.abs(residual_eq2(*POINT1, LAM, MU))))
    erlang_max = float(np.max(np.abs(residual_eq2(*ERLANG, LAM, MU))))
    point_spot = residual_eq2(*POINT1, 1.0, 1.0)
    erlang_spot = residual_eq2(*ERLANG, 1.0, 1.0)
    ok = (
        point_max >= 0.01 and erlang_max >= 0.01
        and abs(point_spot - point_exact) <= 1e-9 and abs(erlang_spot - (-1 / 72)) <= 1e-9
        # quoted decimals are display approximations of the closed forms above
        and abs(point_spot - (-0.054076)) <= 1e-6 and abs(erlang_spot - (-0.0138889)) <= 1e-7
    )
    record(2, ok, f"max |eq2| point {point_max:.4f}, erlang {erlang_max:.4f}; "
                  f"spots {point_spot:.6f}, {erlang_spot:.7f}")
    assert ok


def test_criterion_03_p_factorization():
    pairs = [(t1, t2) for _, t1, t2 in _laws_for_sweep()] + [
        tuple(parse_law_expr(x) for x in POINT1), tuple(parse_law_expr(x) for x in ERLANG),
    ]
    start = time.perf_counter()
    worst = 0.0
    for t1, t2 in pairs:
        a, b = t2.laplace(LAM), t2.laplace(MU)
        eq2 = residual_eq2(t1, t2, LAM, MU)
        for p in (0.1, 0.5, 0.9):
            predicted = p * (1 - p) * eq2 / ((1 - (1 - p) * a) * (1 - p * b))
            worst = max(worst, float(np.max(np.abs(residual_eq1(t1, t2, p, LAM, MU) - predicted))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    record(3, ok, f"max factorization gap {worst:.2e} (<= 1e-12) over {len(pairs)} pairs, {elapsed:.3f} s")
    assert ok


def test_criterion_04_monte_carlo_agreement():
    cases = [
        CaseDescriptor("A"),
        CaseDescriptor("B", kappa=0.5),
        CaseDescriptor("C", kappa=0.5, q0=0.5),
        CaseDescriptor("D", kappa=0.5, theta=1.0),
        CaseDescriptor("E", kappa=0.5, q0=0.5, alpha=1.0),
    ]
    start = time.perf_counter()
    worst_z, failures = 0.0, []
    for desc in cases:
        t1, t2 = make_case_laws(desc)
        for seed in (1, 2, 3):
            pairs = batch_sample_epoch_pairs(SimConfig(t1, t2, 0.5, horizon=1e4, arrival_cap=10**4, seed=seed),
                                             10**6)
            for lam in (0.5, 1.0, 2.0):
                for mu in (0.5, 1.0, 2.0):
                    est, se = mc_laplace_estimate(pairs, lam, mu)
                    diff = abs(est - joint_lt(t1, t2, 0.5, lam, mu))
                    if se > 0:
                        worst_z = max(worst_z, diff / se)
                        bad = diff > 3 * se
                    else:
                        bad = diff > 1e-12
                    if bad:
                        failures.append((desc.case, seed, lam, mu))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60.0
    record(4, ok, f"135 comparisons, max |z| = {worst_z:.2f} (<= 3), failures {failures}, {elapsed:.1f} s")
    assert ok


def test_criterion_05_event_probabilities():
    start = time.perf_counter()
    probs = remark3_probs(0.5, 0.5)
    got = (probs.pB0, probs.pB1, probs.pB0B1, probs.pA0, probs.pA0B1)
    want = (1 / 3, 1 / 3, 3 / 32, 1 / 2, 3 / 16)
    exact_ok = all(abs(g - w) <= 1e-12 for g, w in zip(got, want))
    z = [abs(r["z_score"]) for case in ("E", "C") for r in remark3_monte_carlo(0.5, 0.5, 10**6, seed=1, case=case)]
    t1, t2 = make_case_laws(CaseDescriptor("E", kappa=0.0, q0=0.5, alpha=1.0))
    n0, n1 = batch_counts_at_time(SimConfig(t1, t2, 0.5, horizon=1.0, arrival_cap=10**4, seed=2), 10**6, 0.0)
    gap, se = independence_gap(0.5, 0.5, n0, n1)
    elapsed = time.perf_counter() - start
    ok = exact_ok and max(z) <= 3 and abs(gap) >= 5 * se and elapsed < 30.0
    record(5, ok, f"closed forms exact={exact_ok}, max MC |z| = {max(z):.2f}, "
                  f"gap {gap:.4f} = {abs(gap) / se:.1f} SE, {elapsed:.1f} s")
    assert ok


def test_criterion_06_incompatibility():
    grid = np.round(np.arange(0.05, 0.951, 0.05), 10)
    floor = min(max(abs(c) for c in remark3_incompatibility(q, p)) for q in grid for p in grid)
    worst = 0.0
    for q0 in np.linspace(0.05, 0.95, 10):
        # c2 = 0 has the roots p = 0 and p = 1 only; both give the same c1
        p = c2_roots(q0)[0]
        c1, c2 = remark3_incompatibility(q0, p)
        worst = max(worst, abs(c2), abs(c1 - (q0 * (1 + q0) - 2 * q0 * q0)))
    ok = floor > 0 and worst <= 1e-9
    record(6, ok, f"min over grid of max(|c1|,|c2|) = {floor:.3e} (> 0); substitution error {worst:.1e}")
    assert ok


def test_criterion_07_stationarity():
    start = time.perf_counter()
    dev = max(float(np.max(np.abs(discrete_renewal_mass(q, 500) - (1 - q * q) / q))) for q in (0.2, 0.5, 0.8))
    tail = max(summed_tail_residual(q, 50) for q in (0.2, 0.5, 0.8))
    elapsed = time.perf_counter() - start
    ok = dev <= 1e-10 and tail <= 1e-14 and elapsed < 1.0
    record(7, ok, f"max |v_n - (1-q0^2)/q0| = {dev:.1e}, summed tail {tail:.1e}, {elapsed:.3f} s")
    assert ok


@pytest.mark.slow
def test_criterion_08_size(case_d_rates):
    rates, elapsed = case_d_rates
    ok = rates["chi2"] <= 0.07 and rates["permDcov"] <= 0.07 and elapsed < 300
    record(8, ok, f"case (d) n=2000, {TRIALS} seeds: chi2 {rates['chi2']:.3f}, permDcov {rates['permDcov']:.3f} "
                  f"(<= 0.07), {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_criterion_09_power(power_table):
    ok = all(power_table["point(1)^2", 2000][m] >= 0.95 for m in ("chi2", "permDcov"))
    # erlang threshold frozen from the pilot: power >= 0.95 once n >= 1000
    ok &= all(power_table["erlang(2,1)^2", n][m] >= 0.95 for n in (2000, 8000) for m in ("chi2", "permDcov"))
    for name in ("point(1)^2", "erlang(2,1)^2"):
        for m in ("chi2", "permDcov"):
            curve = [power_table[name, n][m] for n in (500, 2000, 8000)]
            ok &= all(a <= b for a, b in zip(curve, curve[1:]))
    detail = "; ".join(
        f"{name} {m} " + "/".join(f"{power_table[name, n][m]:.2f}" for n in (500, 2000, 8000))
        for name in ("point(1)^2", "erlang(2,1)^2") for m in ("chi2", "permDcov")
    )
    record(9, ok, f"power at n=500/2000/8000: {detail}")
    assert ok


@pytest.mark.slow
def test_criterion_10_hpp_decision(case_d_rates, power_table):
    rates, _ = case_d_rates
    consistent = 1.0 - rates["hpp"]
    pairs = batch_sample_epoch_pairs(SimConfig(*HPP0, 0.5, seed=1), 500)
    delayed = make_case_laws(CaseDescriptor("D", kappa=1.0, theta=1.0))
    lattice = make_case_laws(CaseDescriptor("E", kappa=0.0, q0=0.5, alpha=1.0))
    v_delay = hpp_decision(*delayed, batch_sample_epoch_pairs(SimConfig(*delayed, 0.5, seed=1), 500))
    v_lattice = hpp_decision(*lattice, batch_sample_epoch_pairs(SimConfig(*lattice, 0.5, arrival_cap=10**4), 500))
    erlang_power = power_table["erlang(2,1)^2", 2000]["hpp"]
    ok = (
        consistent >= 0.93
        and v_delay.verdict == INAPPLICABLE and v_lattice.verdict == INAPPLICABLE
        and erlang_power >= 0.95
        and hpp_decision(*HPP0, pairs).verdict in (HPP_CONSISTENT, "not HPP")
    )
    record(10, ok, f"'HPP consistent' on case (d) in {consistent:.3f} of {TRIALS} seeds (>= 0.93); "
                   f"kappa=1: {v_delay.verdict!r}; case (e): {v_lattice.verdict!r}; "
                   f"'not HPP' on erlang n=2000: {erlang_power:.3f}")
    assert ok


def test_criterion_11_determinism(tmp_path):
    csv_path = tmp_path / "pairs.csv"
    main(["simulate", "--case", "d", "--n", "3000", "--seed", "4", "-o", str(csv_path)])
    commands = [
        ["simulate", "--case", "d", "--n", "70000", "--seed", "9"],
        ["simulate", "--case", "e", "--n", "70000", "--cap", "10000", "--seed", "2"],
        ["verify-eq", "--t1", "erlang(k=2,rate=1)", "--t2", "erlang(k=2,rate=1)"],
        ["verify-eq", "--case", "e", "--eq", "eq3", "--hi", "3", "--format", "csv"],
        ["test-independence", "--input", str(csv_path), "--seed", "3"],
        ["hpp-test", "--case", "d", "--n", "70000", "--seed", "4", "--permutations", "199"],
        ["remark-checks", "--n", "70000", "--seed", "1"],
        ["stationarity", "--q0", "0.2"],
        ["classify", "--case", "c", "--kappa", "2"],
    ]
    unstable = []
    for argv in commands:
        digests = set()
        for i, threads in enumerate((1, 1, 4)):
            out = tmp_path / f"{argv[0]}-{i}"
            main([*argv, "--threads", str(threads), "-o", str(out)])
            digests.add(hashlib.sha256(out.read_bytes()).hexdigest())
        if len(digests) != 1:
            unstable.append(argv[0])
    ok = not unstable
    record(11, ok, f"{len(commands)} commands x (2 runs at 1 thread, 1 at 4 threads): "
                   f"{'identical hashes' if ok else 'differences in ' + ', '.join(unstable)}")
    assert ok
