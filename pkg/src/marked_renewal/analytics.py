"""Exact event probabilities at the delay epoch for the geometric and
atomic cases, and the flat renewal mass of the embedded discrete-time
geometric renewal process.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .characterization import CaseDescriptor, make_case_laws
from .laws import ExtendedLaw, LatticeGeometric, PointMass
from .renewal_sim import SimConfig, batch_counts_at_time


def _interior(name: str, x: float) -> None:
    if not 0 < x < 1:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {x}")


@dataclass(frozen=True)
class RemarkProbs:
    """Probabilities of B_i = {N^i at kappa equals 1} and A0 = {N^0 at kappa equals 0}."""

    pB0: float
    pB1: float
    pB0B1: float
    pA0: float
    pA0B1: float

    def as_dict(self) -> dict:
        return asdict(self)


def remark3_probs(q0: float, p: float) -> RemarkProbs:
    _interior("q0", q0)
    _interior("p", p)
    r = 1.0 - q0 * q0
    return RemarkProbs(
        pB0=q0 * r * (1 - p) / (1 - (1 - q0) * p) ** 2,
        pB1=q0 * r * p / (1 - (1 - q0) * (1 - p)) ** 2,
        pB0B1=2 * r * (1 - q0) * q0 * p * (1 - p),
        pA0=q0 * (q0 + p - p * q0) / (1 - p + p * q0),
        pA0B1=r * p * q0,
    )


def remark3_incompatibility(q0: float, p: float) -> tuple[float, float]:
    """Residuals of the two factorization conditions.

    ``c1`` vanishes iff P(B0 and B1) = P(B0) P(B1); ``c2`` vanishes iff
    P(A0 and B1) = P(A0) P(B1).
    """
    u = q0 + p - p * q0
    v = 1 - p + q0 * p
    c1 = q0 * (1 + q0) - 2 * u * u * v * v
    c2 = u * v - q0
    return c1, c2


def c2_roots(q0: float) -> np.ndarray:
    """Values of p solving c2 = 0 for fixed q0.

    Expanding gives -(1-q0)^2 p^2 + (1-q0)^2 p = 0.
    """
    a = (1 - q0) ** 2
    return np.sort(np.roots([-a, a, 0.0]).real)


def case_e_step_laws(q0: float) -> tuple[ExtendedLaw, ExtendedLaw]:
    """Laws of U1 ~ geom_N0(1-q0^2) and U2 ~ (1-q0) delta_0 + q0 geom_N(1-q0^2)."""
    _interior("q0", q0)
    s = 1 - q0 * q0
    u1 = ExtendedLaw.single(LatticeGeometric(s, 1.0, 0.0, 0))
    u2 = ExtendedLaw.mix((1 - q0, PointMass(0.0)), (q0, LatticeGeometric(s, 1.0, 0.0, 1)))
    return u1, u2


def discrete_renewal_mass(q0: float, n_max: int) -> np.ndarray:
    """Expected number of renewals at each lattice point 0..n_max.

    Solves v_n = f1(n) + sum_{m=0..n} f(m) v_{n-m}, moving the m = 0 term
    to the left-hand side.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    u1, u2 = case_e_step_laws(q0)
    f1 = np.array([u1.mass_at(float(k)) for k in range(n_max + 1)])
    f = np.array([u2.mass_at(float(k)) for k in range(n_max + 1)])
    denom = 1.0 - f[0]
    v = np.empty(n_max + 1)
    for n in range(n_max + 1):
        v[n] = (f1[n] + np.dot(f[1:n + 1], v[n - 1::-1][:n])) / denom
    return v


def stationary_mass(q0: float) -> float:
    _interior("q0", q0)
    return (1 - q0 * q0) / q0


def summed_tail_residual(q0: float, k_max: int) -> float:
    """max_k |P(U1 = k) - P(U2 > k) / E U2| over 0 <= k <= k_max."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    u1, u2 = case_e_step_laws(q0)
    mean_u2 = u2.mean_finite_part()
    return max(abs(u1.mass_at(float(k)) - u2.survival(float(k)) / mean_u2) for k in range(k_max + 1))


# --------------------------------------------------------------------------
# Monte Carlo counterpart


REMARK_FIELDS = ("pB0", "pB1", "pB0B1", "pA0", "pA0B1")


def remark3_events(n0: np.ndarray, n1: np.ndarray) -> dict:
    b0, b1, a0 = n0 == 1, n1 == 1, n0 == 0
    return {"pB0": b0, "pB1": b1, "pB0B1": b0 & b1, "pA0": a0, "pA0B1": a0 & b1}


def remark3_monte_carlo(q0: float, p: float, n: int, seed: int, case: str = "E",
                        kappa: float = 0.0, alpha: float = 1.0, arrival_cap: int = 10**4,
                        threads: int = 1) -> list[dict]:
    """Closed forms next to Monte Carlo estimates from counts at ``t = kappa``.

    Rows carry ``quantity, closed_form, mc_estimate, mc_stderr, z_score``.
    """
    if case.upper() == "E":
        desc = CaseDescriptor("E", kappa=kappa, q0=q0, alpha=alpha)
    elif case.upper() == "C":
        desc = CaseDescriptor("C", kappa=kappa, q0=q0)
    else:
        raise ValueError("event probabilities are defined for cases C and E")
    t1, t2 = make_case_laws(desc)
    cfg = SimConfig(t1, t2, p, horizon=max(kappa, 1.0), arrival_cap=arrival_cap, seed=seed)
    n0, n1 = batch_counts_at_time(cfg, n, kappa, threads=threads)
    events = remark3_events(n0, n1)
    exact = remark3_probs(q0, p).as_dict()
    rows = []
    for name in REMARK_FIELDS:
        est = float(np.mean(events[name]))
        se = math.sqrt(exact[name] * (1 - exact[name]) / n)
        rows.append({
            "quantity": name,
            "closed_form": exact[name],
            "mc_estimate": est,
            "mc_stderr": se,
            "z_score": (est - exact[name]) / se if se > 0 else 0.0,
        })
    return rows


def independence_gap(q0: float, p: float, n0: np.ndarray, n1: np.ndarray) -> tuple[float, float]:
    """Empirical P(B0 and B1) - P(B0) P(B1) and its delta-method standard error."""
    ev = remark3_events(n0, n1)
    n = len(n0)
    b0, b1, b01 = (np.mean(ev[k]) for k in ("pB0", "pB1", "pB0B1"))
    gap = b01 - b0 * b1
    # influence function of (b01 - b0*b1)
    infl = ev["pB0B1"].astype(float) - b1 * ev["pB0"] - b0 * ev["pB1"]
    return float(gap), float(np.std(infl) / math.sqrt(n))
