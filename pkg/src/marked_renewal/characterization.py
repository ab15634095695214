"""The five law pairs giving independent first epochs, a structural
classifier for them, and the side conditions of the HPP characterization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .laws import (
    INF,
    Exponential,
    ExtendedLaw,
    LatticeGeometric,
    PointMass,
    as_law,
    is_arithmetic_on_lattice,
    laws_equal,
)

PARAM_TOL = 1e-9

_REQUIRED = {
    "A": (),
    "B": ("kappa",),
    "C": ("kappa", "q0"),
    "D": ("kappa", "theta"),
    "E": ("kappa", "q0", "alpha"),
    "none": (),
}


@dataclass(frozen=True)
class CaseDescriptor:
    case: str
    kappa: Optional[float] = None
    theta: Optional[float] = None
    q0: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        case = "none" if self.case in (None, "None", "none") else str(self.case).upper()
        object.__setattr__(self, "case", case)
        if case not in _REQUIRED:
            raise ValueError(f"unknown case {self.case!r}")
        need = _REQUIRED[case]
        for name in ("kappa", "theta", "q0", "alpha"):
            value = getattr(self, name)
            if name in need and value is None:
                raise ValueError(f"case {case} requires {name}")
            if name not in need and value is not None:
                raise ValueError(f"case {case} takes no {name}")
        if self.kappa is not None and not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError(f"kappa must lie in [0, inf), got {self.kappa}")
        if self.theta is not None and not (math.isfinite(self.theta) and self.theta > 0):
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.q0 is not None and not 0 < self.q0 < 1:
            raise ValueError(f"q0 must lie in (0, 1), got {self.q0}")
        if self.alpha is not None and not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def params(self) -> dict:
        return {k: getattr(self, k) for k in _REQUIRED[self.case]}

    def matches(self, other: "CaseDescriptor", tol: float = PARAM_TOL) -> bool:
        if self.case != other.case:
            return False
        return all(abs(self.params[k] - other.params[k]) <= tol * max(1.0, abs(self.params[k])) for k in self.params)

    def to_dict(self) -> dict:
        return {"case": self.case, "params": self.params}


NONE = CaseDescriptor("none")


def make_case_laws(desc: CaseDescriptor) -> tuple[ExtendedLaw, ExtendedLaw]:
    """Canonical ``(T1 law, T2 law)`` for a case; case A defaults T2 to a point at infinity."""
    c = desc.case
    if c == "A":
        return ExtendedLaw.single(PointMass(INF)), ExtendedLaw.single(PointMass(INF))
    if c == "B":
        return ExtendedLaw.single(PointMass(desc.kappa)), ExtendedLaw.single(PointMass(0.0))
    if c == "C":
        q = desc.q0
        t1 = ExtendedLaw.mix((1 - q * q, PointMass(desc.kappa)), (q * q, PointMass(INF)))
        t2 = ExtendedLaw.mix((1 - q, PointMass(0.0)), (q, PointMass(INF)))
        return t1, t2
    if c == "D":
        return (
            ExtendedLaw.single(Exponential(desc.theta, desc.kappa)),
            ExtendedLaw.single(Exponential(desc.theta)),
        )
    if c == "E":
        q, a = desc.q0, desc.alpha
        t1 = ExtendedLaw.single(LatticeGeometric(1 - q * q, a, desc.kappa, 0))
        t2 = ExtendedLaw.mix((1 - q, PointMass(0.0)), (q, LatticeGeometric(1 - q * q, a, 0.0, 1)))
        return t1, t2
    raise ValueError("no laws for case 'none'")


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= PARAM_TOL * max(1.0, abs(a), abs(b))


def _only(law: ExtendedLaw, kind) -> Optional[object]:
    comps = law.components
    if len(comps) == 1 and isinstance(comps[0][1], kind):
        return comps[0][1]
    return None


def _split_points(law: ExtendedLaw):
    """Point-mass weights keyed by location, plus the non-point components."""
    pts, rest = {}, []
    for w, c in law.components:
        if isinstance(c, PointMass):
            pts[c.x] = pts.get(c.x, 0.0) + w
        else:
            rest.append((w, c))
    return pts, rest


def classify_pair(t1_law, t2_law) -> CaseDescriptor:
    """Match a law pair against the five independence cases.

    Laws outside the exact parametric shapes (within 1e-9 on parameters)
    are classified ``none``.
    """
    t1 = as_law(t1_law).normalized()
    t2 = as_law(t2_law).normalized()
    if t1.mass_at_infinity() >= 1 - PARAM_TOL:
        return CaseDescriptor("A")

    p1, rest1 = _split_points(t1)
    p2, rest2 = _split_points(t2)

    # B: T2 = 0 and T1 = kappa almost surely
    if not rest1 and not rest2 and len(p1) == 1 and set(p2) == {0.0}:
        (kappa,) = p1
        if math.isfinite(kappa):
            return CaseDescriptor("B", kappa=kappa)

    # C: atoms at {kappa, inf} and {0, inf}
    if not rest1 and not rest2 and set(p2) == {0.0, INF} and len(p1) == 2 and INF in p1:
        q0 = p2[INF]
        kappa = next(x for x in p1 if math.isfinite(x))
        if _close(p1[INF], q0 * q0):
            return CaseDescriptor("C", kappa=kappa, q0=q0)

    # D: shifted exponential followed by an unshifted one with the same rate
    e1, e2 = _only(t1, Exponential), _only(t2, Exponential)
    if e1 is not None and e2 is not None and e2.shift == 0 and _close(e1.rate, e2.rate):
        return CaseDescriptor("D", kappa=e1.shift, theta=e2.rate)

    # E: geometric lattice; T2 = (1-q0) point(0) + q0 geomN(1-q0^2, alpha)
    g1 = _only(t1, LatticeGeometric)
    if g1 is not None and set(p2) == {0.0} and len(rest2) == 1 and isinstance(rest2[0][1], LatticeGeometric):
        w, g2 = rest2[0]
        alpha = g2.scale
        # normalized geomN(s, alpha) is geomN0(s, alpha, shift=alpha)
        if _close(g2.shift, alpha) and _close(w, 1 - p2[0.0]) and _close(g1.scale, alpha):
            q0 = w
            s = 1 - q0 * q0
            if 0 < q0 < 1 and _close(g2.s, s) and _close(g1.s, s):
                return CaseDescriptor("E", kappa=g1.shift, q0=q0, alpha=alpha)
    return NONE


def predict_independence(t1_law, t2_law) -> bool:
    return classify_pair(t1_law, t2_law).case != "none"


# --------------------------------------------------------------------------
# side conditions of the HPP characterization


def _support_reaches_zero(law: ExtendedLaw) -> bool:
    return any(c.reaches_zero() for _, c in law.components)


@dataclass(frozen=True)
class Theorem1Report:
    support_near_zero: bool
    t2_non_arithmetic: bool
    t1_no_atom_at_zero: bool
    ordinary: bool
    theorem_applies: bool
    t2_lattice_span: Optional[float]
    notes: tuple = field(default_factory=tuple)

    def failing_conditions(self) -> list[str]:
        if self.theorem_applies:
            return []
        out = []
        if not self.support_near_zero:
            out.append("P(T1 < eps) > 0 for all eps > 0")
        if not (self.t2_non_arithmetic or self.t1_no_atom_at_zero):
            out.append("T2 non-arithmetic or P(T1 = 0) = 0")
        out.append("ordinary renewal process (no delay, defect or simultaneous arrivals)")
        return out

    def to_dict(self) -> dict:
        return {
            "support_near_zero": self.support_near_zero,
            "t2_non_arithmetic": self.t2_non_arithmetic,
            "t1_no_atom_at_zero": self.t1_no_atom_at_zero,
            "ordinary": self.ordinary,
            "theorem_applies": self.theorem_applies,
            "t2_lattice_span": self.t2_lattice_span,
            "notes": list(self.notes),
        }


def theorem1_report(t1_law, t2_law) -> Theorem1Report:
    t1, t2 = as_law(t1_law), as_law(t2_law)
    near_zero = _support_reaches_zero(t1)
    span = is_arithmetic_on_lattice(t2)
    non_arith = span is None
    no_atom = t1.mass_at(0.0) == 0
    ordinary = (
        laws_equal(t1, t2)
        and t1.mass_at_infinity() == 0
        and t2.mass_at_infinity() == 0
        and t2.mass_at(0.0) == 0
    )
    main_branch = near_zero and (non_arith or no_atom)
    applies = main_branch or ordinary
    notes = []
    if ordinary and not near_zero:
        notes.append(
            "applies through the ordinary-process branch only: 0 is not in the support of T1, "
            "a hypothesis the ordinary branch does not restate"
        )
    return Theorem1Report(
        support_near_zero=near_zero,
        t2_non_arithmetic=non_arith,
        t1_no_atom_at_zero=no_atom,
        ordinary=ordinary,
        theorem_applies=applies,
        t2_lattice_span=None if span is None or math.isinf(span) else span,
        notes=tuple(notes),
    )


def classification_json(t1_law, t2_law) -> dict:
    desc = classify_pair(t1_law, t2_law)
    return {"case": desc.case, "params": desc.params, "theorem1": theorem1_report(t1_law, t2_law).to_dict()}


__all__ = [
    "CaseDescriptor", "make_case_laws", "classify_pair", "predict_independence",
    "Theorem1Report", "theorem1_report", "classification_json",
]
