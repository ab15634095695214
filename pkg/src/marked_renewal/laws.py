"""Probability laws on the extended half-line [0, inf].

A law is a finite mixture of parametric components. Mass at infinity
(a defect) is carried by ``PointMass(inf)``; atoms at zero are ordinary
point masses or lattice components starting at zero.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Optional, Union

import numpy as np
from scipy import special

from .rng import RandomStream

INF = math.inf
WEIGHT_TOL = 1e-12
LATTICE_DENOMINATOR_BOUND = 10**6
_LATTICE_MATCH_TOL = 1e-9
_RATIO_TOL = 1e-14

ArrayLike = Union[float, np.ndarray]


class LawError(ValueError):
    """Semantic error: parameters out of range or weights not summing to 1."""


class LawSyntaxError(ValueError):
    """Malformed law expression; ``pos`` is the offending character offset."""

    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.text = text
        self.pos = pos


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise LawError(message)


def _is_finite_nonneg(x: float) -> bool:
    return math.isfinite(x) and x >= 0


# --------------------------------------------------------------------------
# components


@dataclass(frozen=True)
class PointMass:
    x: float

    def __post_init__(self):
        _check(not math.isnan(self.x) and self.x >= 0, f"point mass location must be in [0, inf], got {self.x}")

    def laplace(self, lam, positive_only=False):
        lam = np.asarray(lam, dtype=float)
        if math.isinf(self.x) or (positive_only and self.x == 0):
            return np.zeros_like(lam)
        if self.x == 0:
            return np.ones_like(lam)
        return np.exp(-lam * self.x)

    def mass_at(self, x):
        return 1.0 if x == self.x else 0.0

    def survival(self, x):
        return 1.0 if self.x > x else 0.0

    def mean(self):
        return 0.0 if math.isinf(self.x) else self.x

    def finite_mass(self):
        return 0.0 if math.isinf(self.x) else 1.0

    def quantile(self, u):
        return np.full(np.shape(u), self.x, dtype=float)

    def reaches_zero(self):
        return self.x == 0

    def lattice_points(self):
        # finite nonzero locations that a lattice must contain
        return [] if (self.x == 0 or math.isinf(self.x)) else [self.x]

    def to_expr(self):
        return f"point({_fmt(self.x)})"


@dataclass(frozen=True)
class Exponential:
    rate: float
    shift: float = 0.0

    def __post_init__(self):
        _check(math.isfinite(self.rate) and self.rate > 0, f"rate must be positive, got {self.rate}")
        _check(_is_finite_nonneg(self.shift), f"shift must be nonnegative, got {self.shift}")

    def laplace(self, lam, positive_only=False):
        lam = np.asarray(lam, dtype=float)
        return np.exp(-lam * self.shift) * self.rate / (self.rate + lam)

    def mass_at(self, x):
        return 0.0

    def survival(self, x):
        return 1.0 if x < self.shift else math.exp(-self.rate * (x - self.shift))

    def mean(self):
        return self.shift + 1.0 / self.rate

    def finite_mass(self):
        return 1.0

    def quantile(self, u):
        return self.shift - np.log(u) / self.rate

    def reaches_zero(self):
        return self.shift == 0

    def lattice_points(self):
        return None

    def to_expr(self):
        tail = f",shift={_fmt(self.shift)}" if self.shift else ""
        return f"exp(rate={_fmt(self.rate)}{tail})"


@dataclass(frozen=True)
class Erlang:
    k: int
    rate: float
    shift: float = 0.0

    def __post_init__(self):
        _check(isinstance(self.k, (int, np.integer)) and self.k >= 1, f"Erlang shape must be a positive integer, got {self.k}")
        _check(math.isfinite(self.rate) and self.rate > 0, f"rate must be positive, got {self.rate}")
        _check(_is_finite_nonneg(self.shift), f"shift must be nonnegative, got {self.shift}")

    def laplace(self, lam, positive_only=False):
        lam = np.asarray(lam, dtype=float)
        return np.exp(-lam * self.shift) * (self.rate / (self.rate + lam)) ** self.k

    def mass_at(self, x):
        return 0.0

    def survival(self, x):
        if x < self.shift:
            return 1.0
        return float(special.gammaincc(self.k, self.rate * (x - self.shift)))

    def mean(self):
        return self.shift + self.k / self.rate

    def finite_mass(self):
        return 1.0

    def quantile(self, u):
        return self.shift + special.gammaincinv(self.k, u) / self.rate

    def reaches_zero(self):
        return self.shift == 0

    def lattice_points(self):
        return None

    def to_expr(self):
        tail = f",shift={_fmt(self.shift)}" if self.shift else ""
        return f"erlang(k={int(self.k)},rate={_fmt(self.rate)}{tail})"


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        _check(_is_finite_nonneg(self.a), f"uniform lower bound must be nonnegative, got {self.a}")
        _check(math.isfinite(self.b) and self.b > self.a, f"uniform needs b > a, got ({self.a}, {self.b})")

    def laplace(self, lam, positive_only=False):
        lam = np.asarray(lam, dtype=float)
        width = self.b - self.a
        z = lam * width
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(z > 0, -np.expm1(-z) / np.where(z > 0, z, 1.0), 1.0)
        return np.exp(-lam * self.a) * ratio

    def mass_at(self, x):
        return 0.0

    def survival(self, x):
        if x < self.a:
            return 1.0
        if x >= self.b:
            return 0.0
        return (self.b - x) / (self.b - self.a)

    def mean(self):
        return 0.5 * (self.a + self.b)

    def finite_mass(self):
        return 1.0

    def quantile(self, u):
        return self.a + (self.b - self.a) * np.asarray(u)

    def reaches_zero(self):
        return self.a == 0

    def lattice_points(self):
        return None

    def to_expr(self):
        return f"unif({_fmt(self.a)},{_fmt(self.b)})"


@dataclass(frozen=True)
class LatticeGeometric:
    """Geometric law on ``shift + scale * {start, start+1, ...}``.

    ``P(X = shift + scale*k) = s (1-s)**(k - start)`` for ``k >= start``.
    """

    s: float
    scale: float
    shift: float = 0.0
    start: int = 0

    def __post_init__(self):
        _check(0 < self.s < 1, f"success parameter must lie in (0, 1), got {self.s}")
        _check(math.isfinite(self.scale) and self.scale > 0, f"scale must be positive, got {self.scale}")
        _check(_is_finite_nonneg(self.shift), f"shift must be nonnegative, got {self.shift}")
        _check(self.start in (0, 1), f"support start must be 0 or 1, got {self.start}")

    def laplace(self, lam, positive_only=False):
        lam = np.asarray(lam, dtype=float)
        e = np.exp(-lam * self.scale)
        q = 1.0 - self.s
        num = self.s * e**self.start
        if positive_only and self.shift == 0 and self.start == 0:
            num = self.s * q * e
        return np.exp(-lam * self.shift) * num / (1.0 - q * e)

    def _index(self, x):
        if math.isinf(x) or x < self.shift:
            return None
        k = (x - self.shift) / self.scale
        kr = round(k)
        if abs(k - kr) > _LATTICE_MATCH_TOL * max(1.0, abs(k)):
            return None
        return int(kr)

    def mass_at(self, x):
        k = self._index(x)
        if k is None or k < self.start:
            return 0.0
        return self.s * (1.0 - self.s) ** (k - self.start)

    def survival(self, x):
        if x < self.shift + self.start * self.scale:
            return 1.0
        k = math.floor((x - self.shift) / self.scale + _LATTICE_MATCH_TOL)
        return (1.0 - self.s) ** (k - self.start + 1)

    def mean(self):
        return self.shift + self.scale * (self.start + (1.0 - self.s) / self.s)

    def finite_mass(self):
        return 1.0

    def quantile(self, u):
        k = np.floor(np.log(u) / math.log1p(-self.s))
        return self.shift + self.scale * (k + self.start)

    def reaches_zero(self):
        return self.shift == 0 and self.start == 0

    def lattice_points(self):
        # support shift + scale*k, k >= start: generated by its first point and the step
        first = self.shift + self.start * self.scale
        return [v for v in (first, self.scale) if v > 0]

    def to_expr(self):
        name = "geomN0" if self.start == 0 else "geomN"
        tail = f",shift={_fmt(self.shift)}" if self.shift else ""
        return f"{name}(s={_fmt(self.s)},scale={_fmt(self.scale)}{tail})"


LawComponent = Union[PointMass, Exponential, Erlang, Uniform, LatticeGeometric]


def _canonical_component(c: LawComponent) -> LawComponent:
    if isinstance(c, Erlang) and c.k == 1:
        return Exponential(c.rate, c.shift)
    if isinstance(c, LatticeGeometric) and c.start == 1:
        return LatticeGeometric(c.s, c.scale, c.shift + c.scale, 0)
    return c


def _sort_key(c: LawComponent):
    order = (PointMass, Exponential, Erlang, Uniform, LatticeGeometric)
    return (order.index(type(c)), tuple(float(v) for v in vars(c).values()))


# --------------------------------------------------------------------------
# mixtures


@dataclass(frozen=True)
class ExtendedLaw:
    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), c) for w, c in self.components)
        _check(len(comps) > 0, "a law needs at least one component")
        for w, _ in comps:
            _check(0 < w <= 1, f"weights must lie in (0, 1], got {w}")
        total = math.fsum(w for w, _ in comps)
        _check(abs(total - 1.0) <= WEIGHT_TOL, f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, component: LawComponent) -> "ExtendedLaw":
        return cls(((1.0, component),))

    @classmethod
    def mix(cls, *pairs) -> "ExtendedLaw":
        return cls(tuple(pairs))

    # -- transforms and masses
    def laplace(self, lam: ArrayLike, positive_only: bool = False) -> ArrayLike:
        """Laplace transform over [0, inf); mass at infinity contributes 0.

        With ``positive_only`` the atom at zero is excluded as well, which
        avoids cancellation when that atom is later subtracted.
        """
        lam_arr = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam_arr)
        for w, c in self.components:
            out = out + w * c.laplace(lam_arr, positive_only)
        return float(out) if np.ndim(lam) == 0 else out

    def mass_at(self, x: float) -> float:
        return math.fsum(w * c.mass_at(x) for w, c in self.components)

    def mass_at_infinity(self) -> float:
        return self.mass_at(INF)

    def survival(self, x: float) -> float:
        """P(X > x) for finite ``x``, mass at infinity included."""
        return math.fsum(w * c.survival(x) for w, c in self.components)

    def mean_finite_part(self) -> float:
        return math.fsum(w * c.mean() for w, c in self.components)

    # -- sampling
    def sample_from_uniforms(self, u_choice: np.ndarray, u_value: np.ndarray) -> np.ndarray:
        """Inverse-transform sampling: one uniform picks the component,
        a second one is pushed through that component's quantile."""
        u_choice = np.asarray(u_choice, dtype=float)
        u_value = np.asarray(u_value, dtype=float)
        if len(self.components) == 1:
            return np.broadcast_to(self.components[0][1].quantile(u_value), u_value.shape).astype(float)
        cum = np.cumsum([w for w, _ in self.components])
        idx = np.minimum(np.searchsorted(cum, u_choice * cum[-1], side="right"), len(cum) - 1)
        out = np.empty(u_value.shape, dtype=float)
        for j, (_, c) in enumerate(self.components):
            sel = idx == j
            if np.any(sel):
                out[sel] = c.quantile(u_value[sel])
        return out

    def sample(self, rng: RandomStream, size: Optional[int] = None):
        m = 1 if size is None else size
        u = rng.uniforms(2 * m)
        vals = self.sample_from_uniforms(u[0::2], u[1::2])
        return float(vals[0]) if size is None else vals

    # -- structure
    def normalized(self) -> "ExtendedLaw":
        """Merge equal components after canonicalizing their parametrization."""
        merged: dict = {}
        for w, c in self.components:
            c = _canonical_component(c)
            merged[c] = merged.get(c, 0.0) + w
        items = sorted(merged.items(), key=lambda kv: _sort_key(kv[0]))
        total = math.fsum(w for _, w in items)
        return ExtendedLaw(tuple((w / total, c) for c, w in items))

    def has_continuous_part(self) -> bool:
        return any(c.lattice_points() is None for _, c in self.components)

    def to_expr(self) -> str:
        if len(self.components) == 1:
            return self.components[0][1].to_expr()
        body = ", ".join(f"{_fmt(w)}: {c.to_expr()}" for w, c in self.components)
        return f"mix({body})"

    def __str__(self) -> str:
        return self.to_expr()


def point(x: float) -> ExtendedLaw:
    return ExtendedLaw.single(PointMass(float(x)))


def exponential(rate: float, shift: float = 0.0) -> ExtendedLaw:
    return ExtendedLaw.single(Exponential(float(rate), float(shift)))


def erlang(k: int, rate: float, shift: float = 0.0) -> ExtendedLaw:
    return ExtendedLaw.single(Erlang(int(k), float(rate), float(shift)))


# --------------------------------------------------------------------------
# module-level operations


def sample(law: ExtendedLaw, rng: RandomStream) -> float:
    return law.sample(rng)


def laplace(law: ExtendedLaw, lam: ArrayLike) -> ArrayLike:
    if np.any(np.asarray(lam) < 0):
        raise ValueError("Laplace argument must be nonnegative")
    return law.laplace(lam)


def mass_at(law: ExtendedLaw, x: float) -> float:
    return law.mass_at(x)


def mean_finite_part(law: ExtendedLaw) -> float:
    return law.mean_finite_part()


def _as_fraction(x: float) -> Optional[Fraction]:
    f = Fraction(x).limit_denominator(LATTICE_DENOMINATOR_BOUND)
    if abs(float(f) - x) > _RATIO_TOL * max(1.0, abs(x)):
        return None
    return f


def is_arithmetic_on_lattice(law: ExtendedLaw) -> Optional[float]:
    """Largest span ``a`` with all finite support inside ``a * N0``.

    Support locations are reduced as rational multiples of the first one
    (denominators up to 1e6). Returns None for non-arithmetic laws: a
    continuous part, or a ratio that does not reduce. A law whose finite
    support is at most ``{0}`` lies on every lattice; ``inf`` is returned.
    """
    points: list = []
    for _, c in law.components:
        pts = c.lattice_points()
        if pts is None:
            return None
        points.extend(pts)
    if not points:
        return INF
    base = points[0]
    fracs = [_as_fraction(x / base) for x in points]
    if any(f is None for f in fracs):
        return None
    denom = reduce(math.lcm, (f.denominator for f in fracs))
    g = reduce(math.gcd, (f.numerator * (denom // f.denominator) for f in fracs))
    return base * g / denom


# --------------------------------------------------------------------------
# expression grammar

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|inf)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[(),:=]))"
)

_SPECS = {
    # name: (positional params, keyword params as (name, required))
    "point": (["x"], []),
    "unif": (["a", "b"], []),
    "exp": ([], [("rate", True), ("shift", False)]),
    "erlang": ([], [("k", True), ("rate", True), ("shift", False)]),
    "geomN": ([], [("s", True), ("scale", True), ("shift", False)]),
    "geomN0": ([], [("s", True), ("scale", True), ("shift", False)]),
}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise LawSyntaxError("unexpected character", text, start)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def _next(self):
        tok = self._peek()
        self.i += 1
        return tok

    def _expect(self, value: str):
        kind, val, pos = self._next()
        if val != value or kind == "end":
            raise LawSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", self.text, pos)

    def _number(self) -> float:
        kind, val, pos = self._next()
        if kind != "num":
            raise LawSyntaxError(f"expected a number, found {val or 'end of input'!r}", self.text, pos)
        return float(val)

    def parse(self) -> ExtendedLaw:
        kind, val, pos = self._peek()
        if kind == "name" and val == "mix":
            self._next()
            self._expect("(")
            pairs = [self._weighted()]
            while self._peek()[1] == ",":
                self._next()
                pairs.append(self._weighted())
            self._expect(")")
            law = ExtendedLaw(tuple(pairs))
        else:
            law = ExtendedLaw.single(self._component())
        kind, val, pos = self._peek()
        if kind != "end":
            raise LawSyntaxError(f"trailing input {val!r}", self.text, pos)
        return law

    def _weighted(self):
        w = self._number()
        self._expect(":")
        return (w, self._component())

    def _component(self) -> LawComponent:
        kind, name, pos = self._next()
        if kind != "name" or name not in _SPECS:
            raise LawSyntaxError(f"unknown component {name or 'end of input'!r}", self.text, pos)
        positional, keywords = _SPECS[name]
        self._expect("(")
        args: dict = {}
        for j, pname in enumerate(positional):
            if j:
                self._expect(",")
            args[pname] = self._number()
        for j, (kname, _) in enumerate(keywords):
            if self._peek()[1] == ")":
                break
            if j:
                self._expect(",")
            k2, got, p2 = self._next()
            allowed = [n for n, _ in keywords]
            if got not in allowed or got in args:
                raise LawSyntaxError(f"unexpected parameter {got!r} for {name}", self.text, p2)
            self._expect("=")
            args[got] = self._number()
        self._expect(")")
        for kname, required in keywords:
            if required and kname not in args:
                raise LawSyntaxError(f"{name} requires parameter {kname!r}", self.text, pos)
        return _build(name, args)


def _build(name: str, a: dict) -> LawComponent:
    shift = a.get("shift", 0.0)
    if name == "point":
        return PointMass(a["x"])
    if name == "unif":
        return Uniform(a["a"], a["b"])
    if name == "exp":
        return Exponential(a["rate"], shift)
    if name == "erlang":
        k = a["k"]
        _check(float(k).is_integer(), f"Erlang shape must be an integer, got {k}")
        return Erlang(int(k), a["rate"], shift)
    return LatticeGeometric(a["s"], a["scale"], shift, 0 if name == "geomN0" else 1)


def parse_law_expr(text: str) -> ExtendedLaw:
    """Parse a law expression such as ``mix(0.75: point(0), 0.25: point(inf))``."""
    return _Parser(text).parse()


def format_law(law: ExtendedLaw) -> str:
    return law.to_expr()


def as_law(value: Union[str, ExtendedLaw, LawComponent]) -> ExtendedLaw:
    if isinstance(value, ExtendedLaw):
        return value
    if isinstance(value, str):
        return parse_law_expr(value)
    return ExtendedLaw.single(value)


def laws_equal(a: ExtendedLaw, b: ExtendedLaw, tol: float = 1e-12) -> bool:
    """Structural equality after normalization, weights compared within ``tol``."""
    na, nb = a.normalized().components, b.normalized().components
    if len(na) != len(nb):
        return False
    return all(ca == cb and abs(wa - wb) <= tol for (wa, ca), (wb, cb) in zip(na, nb))


__all__ = [
    "INF", "LawError", "LawSyntaxError", "PointMass", "Exponential", "Erlang", "Uniform",
    "LatticeGeometric", "ExtendedLaw", "point", "exponential", "erlang", "sample", "laplace",
    "mass_at", "mean_finite_part", "is_arithmetic_on_lattice", "parse_law_expr", "format_law",
    "as_law", "laws_equal",
]
