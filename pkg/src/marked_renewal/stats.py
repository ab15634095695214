"""Independence tests for samples of (R0, R1) and the HPP decision built on them."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sps

from ._dcov import DcovPermutationKernel
from .characterization import theorem1_report
from .laws import as_law
from .renewal_sim import EpochPairs, EpochStatus, SimConfig, batch_sample_epoch_pairs

DEFAULT_ALPHA = 0.05
DEFAULT_PERMUTATIONS = 499
DEFAULT_BINS = 4
MIN_EXPECTED = 5.0

HPP_CONSISTENT = "HPP consistent"
NOT_HPP = "not HPP"
INAPPLICABLE = "Theorem 1 inapplicable"
INDEPENDENCE_NOT_REJECTED = "independence not rejected"
INDEPENDENCE_REJECTED = "independence rejected"
UNTESTABLE_NOTE = "untestable: trivially independent"


@dataclass
class TestReport:
    method: str
    statistic: float
    p_value: float
    alpha: float
    decision: bool
    n: int
    seed: Optional[int] = None
    df: Optional[int] = None
    permutations: Optional[int] = None
    untestable: bool = False
    note: str = ""

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _as_pairs(pairs) -> EpochPairs:
    if isinstance(pairs, EpochPairs):
        return pairs
    return EpochPairs.from_pairs(pairs)


def mc_laplace_estimate(pairs, lam: float, mu: float) -> tuple[float, float]:
    """Sample mean of exp(-lam r1 - mu r0) over doubly observed pairs (0 elsewhere).

    Horizon-censored pairs count as 0, which biases the estimate down by at
    most exp(-min(lam, mu) * horizon).
    """
    pairs = _as_pairs(pairs)
    n = len(pairs)
    if n == 0:
        raise ValueError("no epoch pairs")
    o0, o1 = pairs.observed()
    both = o0 & o1
    w = np.zeros(n)
    w[both] = np.exp(-lam * pairs.r1[both] - mu * pairs.r0[both])
    if np.all(w == w[0]):
        # summation round-off would otherwise give a spurious positive stderr
        return float(w[0]), 0.0
    return float(np.mean(w)), float(np.std(w, ddof=1) / math.sqrt(n))


# --------------------------------------------------------------------------
# binned chi-square


@dataclass
class ContingencyTable:
    row_edges: np.ndarray
    col_edges: np.ndarray
    counts: np.ndarray  # last row and column: not observed


def _categorize(values: np.ndarray, observed: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    obs = values[observed]
    if obs.size:
        qs = np.quantile(obs, np.arange(1, k) / k)
        edges = np.unique(qs)
    else:
        edges = np.empty(0)
    cat = np.full(values.shape, k, dtype=np.int64)
    cat[observed] = np.searchsorted(edges, obs, side="left")
    return edges, cat


def contingency_table(pairs, k: int = DEFAULT_BINS) -> ContingencyTable:
    """(k+1) x (k+1) table: quantile bins of observed r0 (rows) and r1 (cols),
    plus a not-observed category on each axis."""
    pairs = _as_pairs(pairs)
    o0, o1 = pairs.observed()
    e0, c0 = _categorize(pairs.r0, o0, k)
    e1, c1 = _categorize(pairs.r1, o1, k)
    counts = np.zeros((k + 1, k + 1), dtype=np.int64)
    np.add.at(counts, (c0, c1), 1)
    return ContingencyTable(e0, e1, counts)


def _merge_sparse(table: np.ndarray) -> np.ndarray:
    """Merge adjacent rows/columns until every expected count reaches MIN_EXPECTED."""
    t = table.astype(float)
    t = t[t.sum(axis=1) > 0][:, t.sum(axis=0) > 0]
    while t.shape[0] > 1 and t.shape[1] > 1:
        rows, cols = t.sum(axis=1), t.sum(axis=0)
        expected = np.outer(rows, cols) / t.sum()
        i, j = np.unravel_index(np.argmin(expected), expected.shape)
        if expected[i, j] >= MIN_EXPECTED:
            break
        if rows[i] <= cols[j]:
            t = _merge_line(t, i, rows)
        else:
            t = _merge_line(t.T, j, cols).T
    return t


def _merge_line(t: np.ndarray, i: int, margins: np.ndarray) -> np.ndarray:
    if i == 0:
        nb = 1
    elif i == len(margins) - 1:
        nb = i - 1
    else:
        nb = i - 1 if margins[i - 1] <= margins[i + 1] else i + 1
    t = t.copy()
    t[nb] += t[i]
    return np.delete(t, i, axis=0)


def _untestable(method: str, n: int, alpha: float, seed=None, **kw) -> TestReport:
    return TestReport(method, 0.0, 1.0, alpha, False, n, seed, untestable=True, note=UNTESTABLE_NOTE, **kw)


def chi2_independence_test(pairs, k: int = DEFAULT_BINS, alpha: float = DEFAULT_ALPHA) -> TestReport:
    pairs = _as_pairs(pairs)
    n = len(pairs)
    if n < 100:
        raise ValueError(f"chi-square test needs at least 100 pairs, got {n}")
    if k < 2:
        raise ValueError("need at least 2 bins per axis")
    table = _merge_sparse(contingency_table(pairs, k).counts)
    if table.shape[0] < 2 or table.shape[1] < 2:
        return _untestable("chi2", n, alpha)
    stat, p_value, dof, _ = sps.chi2_contingency(table, correction=False)
    return TestReport("chi2", float(stat), float(p_value), alpha, bool(p_value < alpha), n, df=int(dof))


# --------------------------------------------------------------------------
# rank distance covariance with permutations


def _ranks(values: np.ndarray, observed: np.ndarray) -> np.ndarray:
    v = np.where(observed, values, np.inf)
    return sps.rankdata(v, method="average")


def permutation_dcov_test(pairs, permutations: int = DEFAULT_PERMUTATIONS, alpha: float = DEFAULT_ALPHA,
                          seed: int = 0) -> TestReport:
    """Permutation test of distance covariance between the rank-transformed epochs.

    Not-observed outcomes take the top rank. The r1 column is reshuffled;
    p = (1 + #{permuted >= observed}) / (B + 1).
    """
    pairs = _as_pairs(pairs)
    n = len(pairs)
    if n < 50:
        raise ValueError(f"permutation test needs at least 50 pairs, got {n}")
    if permutations < 199:
        raise ValueError("use at least 199 permutations")
    o0, o1 = pairs.observed()
    x, y = _ranks(pairs.r0, o0), _ranks(pairs.r1, o1)
    if np.all(x == x[0]) or np.all(y == y[0]):
        return _untestable("permDcov", n, alpha, seed, permutations=permutations)
    kernel = DcovPermutationKernel(x, y)
    observed = kernel.statistic()
    rng = np.random.default_rng(seed)
    tol = 1e-9 * abs(observed)
    exceed = 0
    for _ in range(permutations):
        if kernel.statistic(rng.permutation(n)) >= observed - tol:
            exceed += 1
    p_value = (1 + exceed) / (permutations + 1)
    return TestReport("permDcov", float(observed), p_value, alpha, bool(p_value < alpha), n, seed,
                      permutations=permutations)


# --------------------------------------------------------------------------
# HPP decision


@dataclass
class HPPVerdict:
    verdict: str
    reports: list = field(default_factory=list)
    theorem1: Optional[dict] = None
    failing_conditions: list = field(default_factory=list)
    caveat: str = ""
    alpha: float = DEFAULT_ALPHA

    def to_dict(self) -> dict:
        out = asdict(self)
        out["reports"] = [r.to_dict() for r in self.reports]
        return out


def _run_tests(pairs: EpochPairs, alpha: float, seed: int, permutations: int, k: int) -> list[TestReport]:
    return [
        chi2_independence_test(pairs, k, alpha),
        permutation_dcov_test(pairs, permutations, alpha, seed),
    ]


def hpp_decision(t1_law, t2_law, pairs, alpha: float = DEFAULT_ALPHA, seed: int = 0,
                 permutations: int = DEFAULT_PERMUTATIONS, k: int = DEFAULT_BINS) -> HPPVerdict:
    """Decide HPP-ness from first-epoch samples.

    ``t1_law``/``t2_law`` may be None when the laws are unknown. Each of
    the two tests runs at level alpha/2 so that the combined rule
    ("either rejects") keeps overall size alpha.
    """
    pairs = _as_pairs(pairs)
    if len(pairs) == 0:
        raise ValueError("no epoch pairs")
    declared = t1_law is not None and t2_law is not None
    if declared:
        report = theorem1_report(as_law(t1_law), as_law(t2_law))
        if not report.theorem_applies:
            return HPPVerdict(INAPPLICABLE, [], report.to_dict(), report.failing_conditions(), alpha=alpha)
    reports = _run_tests(pairs, alpha / 2, seed, permutations, k)
    rejected = any(r.decision for r in reports)
    if declared:
        return HPPVerdict(NOT_HPP if rejected else HPP_CONSISTENT, reports, report.to_dict(), alpha=alpha)
    return HPPVerdict(
        INDEPENDENCE_REJECTED if rejected else INDEPENDENCE_NOT_REJECTED,
        reports,
        caveat="laws not declared: the side conditions linking independence to the HPP are unverified",
        alpha=alpha,
    )


# --------------------------------------------------------------------------
# calibration over independent trials


METHODS = ("chi2", "permDcov", "hpp")


def rejection_rates(t1_law, t2_law, p: float, n: int, trials: int, methods=("chi2", "permDcov"),
                    alpha: float = DEFAULT_ALPHA, seed0: int = 0, horizon: float = 1e6,
                    permutations: int = DEFAULT_PERMUTATIONS, k: int = DEFAULT_BINS) -> dict:
    """Rejection frequency of each method over ``trials`` independent samples.

    Trial ``i`` simulates ``n`` pairs with seed ``seed0 + i``; every method
    sees the same samples. For ``"hpp"`` a rejection is a "not HPP" verdict.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown method(s) {sorted(unknown)}")
    hits = dict.fromkeys(methods, 0)
    for i in range(trials):
        cfg = SimConfig(t1_law, t2_law, p, horizon=horizon, seed=seed0 + i)
        pairs = batch_sample_epoch_pairs(cfg, n)
        for m in methods:
            if m == "chi2":
                hits[m] += chi2_independence_test(pairs, k, alpha).decision
            elif m == "permDcov":
                hits[m] += permutation_dcov_test(pairs, permutations, alpha, seed=seed0 + i).decision
            else:
                verdict = hpp_decision(t1_law, t2_law, pairs, alpha, seed0 + i, permutations, k)
                hits[m] += verdict.verdict == NOT_HPP
    return {m: h / trials for m, h in hits.items()}


def rejection_rate(t1_law, t2_law, p: float, n: int, trials: int, method: str = "chi2", **kw) -> float:
    """Single-method form of :func:`rejection_rates`."""
    return rejection_rates(t1_law, t2_law, p, n, trials, (method,), **kw)[method]


__all__ = [
    "TestReport", "ContingencyTable", "HPPVerdict", "mc_laplace_estimate", "contingency_table",
    "chi2_independence_test", "permutation_dcov_test", "hpp_decision", "rejection_rate", "rejection_rates",
    "EpochStatus",
]
