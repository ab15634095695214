"""Closed-form Laplace transforms of the first epochs (R0, R1) and the
functional-equation residuals that vanish exactly under independence.

Notation: ``phi1`` is the transform of the first inter-arrival law and
``phi2`` that of the later inter-arrival laws. All functions broadcast
over numpy arrays of ``lam`` and ``mu``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .laws import ExtendedLaw, as_law

Equation = Literal["eq1", "eq2", "eq3"]


class SubstitutionUndefined(ValueError):
    """The reciprocal substitution behind eq3 needs ``q0 > 0`` and ``P(T2 = inf) < q0``."""


def _check_p(p: float) -> None:
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def marginal_lt_r1(t1_law, t2_law, p, lam):
    """E[exp(-lam R1); R1 < inf]."""
    _check_p(p)
    t1, t2 = as_law(t1_law), as_law(t2_law)
    return p * t1.laplace(lam) / (1.0 - (1.0 - p) * t2.laplace(lam))


def marginal_lt_r0(t1_law, t2_law, p, mu):
    """E[exp(-mu R0); R0 < inf]."""
    _check_p(p)
    t1, t2 = as_law(t1_law), as_law(t2_law)
    return (1.0 - p) * t1.laplace(mu) / (1.0 - p * t2.laplace(mu))


def joint_lt(t1_law, t2_law, p, lam, mu):
    """E[exp(-lam R1 - mu R0); R1 < inf, R0 < inf]."""
    _check_p(p)
    t1, t2 = as_law(t1_law), as_law(t2_law)
    lam, mu = np.asarray(lam, dtype=float), np.asarray(mu, dtype=float)
    a, b = t2.laplace(lam), t2.laplace(mu)
    out = (
        t1.laplace(lam + mu) * p * (1.0 - p) * (a + b - a * b)
        / ((1.0 - (1.0 - p) * a) * (1.0 - p * b))
    )
    return float(out) if np.ndim(out) == 0 else out


def residual_eq1(t1_law, t2_law, p, lam, mu):
    """Joint transform minus the product of the marginals (signed)."""
    out = joint_lt(t1_law, t2_law, p, lam, mu) - marginal_lt_r1(t1_law, t2_law, p, lam) * marginal_lt_r0(
        t1_law, t2_law, p, mu
    )
    return float(out) if np.ndim(out) == 0 else out


def residual_eq2(t1_law, t2_law, lam, mu):
    """p-free form: phi1(lam+mu)[phi2(lam)+phi2(mu)-phi2(lam)phi2(mu)] - phi1(lam)phi1(mu)."""
    t1, t2 = as_law(t1_law), as_law(t2_law)
    lam, mu = np.asarray(lam, dtype=float), np.asarray(mu, dtype=float)
    a, b = t2.laplace(lam), t2.laplace(mu)
    out = t1.laplace(lam + mu) * (a + b - a * b) - t1.laplace(lam) * t1.laplace(mu)
    return float(out) if np.ndim(out) == 0 else out


def eq3_substitution(t2_law, lam):
    """``(q0, psi(lam))`` with ``xi = (phi2 - (1 - q0)) / q0`` and ``psi = 1/xi - 1``.

    The numerator of ``xi`` is evaluated as the transform of the law
    restricted to (0, inf), so no cancellation against the atom at 0.
    """
    t2 = as_law(t2_law)
    q0 = 1.0 - t2.mass_at(0.0)
    if not (q0 > 0 and t2.mass_at_infinity() < q0):
        raise SubstitutionUndefined(
            f"q0 = {q0:g}, P(T2 = inf) = {t2.mass_at_infinity():g}: need q0 > 0 and P(T2 = inf) < q0"
        )
    xi = np.asarray(t2.laplace(lam, positive_only=True)) / q0
    return q0, 1.0 / xi - 1.0


def residual_eq3(t2_law, lam, mu):
    """psi(lam+mu) - psi(lam) - psi(mu) - psi(lam) psi(mu) (1 - q0**2)."""
    lam, mu = np.asarray(lam, dtype=float), np.asarray(mu, dtype=float)
    q0, s = eq3_substitution(t2_law, lam + mu)
    _, a = eq3_substitution(t2_law, lam)
    _, b = eq3_substitution(t2_law, mu)
    out = s - a - b - a * b * (1.0 - q0 * q0)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# grid scans


@dataclass(frozen=True)
class GridSpec:
    lo: float = 0.0
    hi: float = 5.0
    points: int = 21
    diagonal_points: int = 101

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.hi > self.lo >= 0):
            raise ValueError(f"grid bounds must be finite with 0 <= lo < hi, got [{self.lo}, {self.hi}]")
        if self.points < 2 or (self.diagonal_points and self.diagonal_points < 2):
            raise ValueError("a grid needs at least 2 points per axis")

    def axis(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    def as_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "points": self.points, "diagonal_points": self.diagonal_points}


@dataclass(frozen=True)
class LTGrid:
    lambdas: np.ndarray
    mus: np.ndarray
    values: np.ndarray  # values[i, j] is the residual at (lambdas[i], mus[j])

    def __post_init__(self):
        if self.values.shape != (len(self.lambdas), len(self.mus)):
            raise ValueError("grid values do not match the axes")

    def rows(self):
        for i, lam in enumerate(self.lambdas):
            for j, mu in enumerate(self.mus):
                yield float(lam), float(mu), float(self.values[i, j])

    def to_csv(self) -> str:
        lines = ["lambda,mu,residual"]
        lines += [f"{lam!r},{mu!r},{r!r}" for lam, mu, r in self.rows()]
        return "\n".join(lines) + "\n"


def _residual_fn(t1, t2, which: Equation, p: Optional[float]):
    if which == "eq1":
        if p is None:
            raise ValueError("eq1 needs the marking probability p")
        return lambda lam, mu: residual_eq1(t1, t2, p, lam, mu)
    if which == "eq2":
        return lambda lam, mu: residual_eq2(t1, t2, lam, mu)
    if which == "eq3":
        return lambda lam, mu: residual_eq3(t2, lam, mu)
    raise ValueError(f"unknown equation {which!r}")


def grid_scan(t1_law, t2_law, grid: GridSpec = GridSpec(), which: Equation = "eq2",
              p: Optional[float] = None) -> tuple[LTGrid, dict]:
    """Residual on the square grid plus the refined diagonal.

    The summary reports the signed residual's largest magnitude over both
    and where it occurs.
    """
    t1, t2 = as_law(t1_law), as_law(t2_law)
    fn = _residual_fn(t1, t2, which, p)
    ax = grid.axis()
    values = np.asarray(fn(ax[:, None], ax[None, :]), dtype=float)
    result = LTGrid(ax, ax.copy(), values)
    i, j = np.unravel_index(np.argmax(np.abs(values)), values.shape)
    max_abs, argmax = float(abs(values[i, j])), [float(ax[i]), float(ax[j])]
    diag_max = None
    if grid.diagonal_points:
        d = np.linspace(grid.lo, grid.hi, grid.diagonal_points)
        dv = np.abs(np.asarray(fn(d, d), dtype=float))
        k = int(np.argmax(dv))
        diag_max = float(dv[k])
        if diag_max > max_abs:
            max_abs, argmax = diag_max, [float(d[k]), float(d[k])]
    summary = {
        "equation": which,
        "max_abs": max_abs,
        "argmax": argmax,
        "diagonal_max_abs": diag_max,
        "grid": grid.as_dict(),
        "t1": t1.to_expr(),
        "t2": t2.to_expr(),
    }
    if which == "eq1":
        summary["p"] = p
    return result, summary


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True)
