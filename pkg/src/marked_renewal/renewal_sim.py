"""Bernoulli-marked renewal trajectories and first epochs of the marked processes.

Arrival ``n`` (1-based) of replication ``j`` consumes the uniforms at
counters ``3(n-1)``, ``3(n-1)+1`` and ``3(n-1)+2`` of stream ``(seed, j)``:
the mark, the mixture component and the inter-arrival value, in that
order. The sequential path generator and the vectorized batch engines
share this layout, so a batch replication equals the corresponding
single-path simulation exactly.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, TextIO, Union

import numpy as np

from .laws import ExtendedLaw, as_law
from .rng import RandomStream, stream_keys, uniforms_at

DEFAULT_ARRIVAL_CAP = 10**6
DRAWS_PER_ARRIVAL = 3
_CHUNK = 1 << 16


class Termination(enum.Enum):
    HORIZON_REACHED = "HorizonReached"
    INFINITY_REACHED = "InfinityReached"
    CAP_REACHED = "CapReached"


class EpochStatus(enum.IntEnum):
    OBSERVED = 0
    INFINITE_EXACT = 1
    HORIZON_CENSORED = 2

    @property
    def label(self) -> str:
        return _STATUS_LABELS[self]


_STATUS_LABELS = {
    EpochStatus.OBSERVED: "Observed",
    EpochStatus.INFINITE_EXACT: "InfiniteExact",
    EpochStatus.HORIZON_CENSORED: "HorizonCensored",
}
_LABEL_STATUS = {v: k for k, v in _STATUS_LABELS.items()}


@dataclass(frozen=True)
class SimConfig:
    t1_law: ExtendedLaw
    t2_law: ExtendedLaw
    p: float
    horizon: float = 1e6
    arrival_cap: int = DEFAULT_ARRIVAL_CAP
    seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "t1_law", as_law(self.t1_law))
        object.__setattr__(self, "t2_law", as_law(self.t2_law))
        if not 0 < self.p < 1:
            raise ValueError(f"marking probability must lie strictly inside (0, 1), got {self.p}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.arrival_cap) < 1:
            raise ValueError(f"arrival cap must be at least 1, got {self.arrival_cap}")

    def stream(self) -> RandomStream:
        return RandomStream(self.seed, self.stream_index)

    def resolved(self) -> dict:
        return {
            "t1": self.t1_law.to_expr(),
            "t2": self.t2_law.to_expr(),
            "p": self.p,
            "horizon": self.horizon,
            "arrival_cap": int(self.arrival_cap),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class MarkedArrivalSequence:
    epochs: np.ndarray
    marks: np.ndarray
    terminated: Termination
    horizon: float

    def __len__(self) -> int:
        return len(self.epochs)


@dataclass(frozen=True)
class EpochPair:
    r0: float
    r1: float
    r0_status: EpochStatus
    r1_status: EpochStatus


def _draw_inter_arrivals(cfg: SimConfig, first_arrival: int, u: np.ndarray) -> np.ndarray:
    """Inter-arrival times for consecutive arrivals given their uniforms.

    ``u`` has shape (m, 3); row ``i`` belongs to arrival ``first_arrival + i``.
    """
    t = cfg.t2_law.sample_from_uniforms(u[:, 1], u[:, 2])
    if first_arrival == 1:
        t[0] = cfg.t1_law.sample_from_uniforms(u[:1, 1], u[:1, 2])[0]
    return t


def simulate_marked_arrivals(cfg: SimConfig, block: int = 1024) -> MarkedArrivalSequence:
    """Generate one marked trajectory up to the horizon, a defect or the cap.

    Draws are consumed in blocks but the result is identical to an
    arrival-by-arrival loop.
    """
    stream = cfg.stream()
    cap = int(cfg.arrival_cap)
    epochs, marks = [], []
    s = 0.0
    n = 1
    terminated = Termination.CAP_REACHED
    while n <= cap:
        m = min(block, cap - n + 1)
        u = stream.uniforms(DRAWS_PER_ARRIVAL * m).reshape(m, DRAWS_PER_ARRIVAL)
        t = _draw_inter_arrivals(cfg, n, u)
        partial = np.add.accumulate(np.concatenate(([s], t)))[1:]
        mk = (u[:, 0] < cfg.p).astype(np.int8)
        stop = np.flatnonzero(np.isinf(t) | (partial > cfg.horizon))
        if stop.size:
            k = stop[0]
            epochs.append(partial[:k])
            marks.append(mk[:k])
            terminated = Termination.INFINITY_REACHED if math.isinf(t[k]) else Termination.HORIZON_REACHED
            break
        epochs.append(partial)
        marks.append(mk)
        s = float(partial[-1])
        n += m
    ep = np.concatenate(epochs) if epochs else np.empty(0)
    mk = np.concatenate(marks) if marks else np.empty(0, dtype=np.int8)
    return MarkedArrivalSequence(ep, mk, terminated, cfg.horizon)


def first_epochs(seq: MarkedArrivalSequence) -> EpochPair:
    """First epoch of each marked process, in draw order."""
    missing = (
        EpochStatus.INFINITE_EXACT
        if seq.terminated is Termination.INFINITY_REACHED
        else EpochStatus.HORIZON_CENSORED
    )
    out = {}
    for i in (0, 1):
        hit = np.flatnonzero(seq.marks == i)
        if hit.size:
            out[i] = (float(seq.epochs[hit[0]]), EpochStatus.OBSERVED)
        else:
            out[i] = (math.inf, missing)
    return EpochPair(out[0][0], out[1][0], out[0][1], out[1][1])


def counts_at_time(seq: MarkedArrivalSequence, t: float) -> tuple[int, int]:
    """Numbers of 0-marked and 1-marked arrivals with epoch <= t."""
    if t > seq.horizon:
        raise ValueError("counts requested beyond the simulated horizon")
    upto = seq.epochs <= t
    n1 = int(np.count_nonzero(seq.marks[upto] == 1))
    return int(np.count_nonzero(upto)) - n1, n1


# --------------------------------------------------------------------------
# batches


@dataclass(frozen=True)
class EpochPairs:
    """Columnar batch of epoch pairs; iterates as :class:`EpochPair`."""

    r0: np.ndarray
    r1: np.ndarray
    r0_status: np.ndarray
    r1_status: np.ndarray

    def __len__(self) -> int:
        return len(self.r0)

    def __getitem__(self, i: int) -> EpochPair:
        return EpochPair(
            float(self.r0[i]), float(self.r1[i]),
            EpochStatus(int(self.r0_status[i])), EpochStatus(int(self.r1_status[i])),
        )

    def __iter__(self) -> Iterator[EpochPair]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_pairs(cls, pairs) -> "EpochPairs":
        pairs = list(pairs)
        return cls(
            np.array([q.r0 for q in pairs], dtype=float),
            np.array([q.r1 for q in pairs], dtype=float),
            np.array([int(q.r0_status) for q in pairs], dtype=np.int8),
            np.array([int(q.r1_status) for q in pairs], dtype=np.int8),
        )

    @classmethod
    def concat(cls, parts) -> "EpochPairs":
        parts = list(parts)
        return cls(*(np.concatenate([getattr(q, f) for q in parts]) for f in ("r0", "r1", "r0_status", "r1_status")))

    def observed(self) -> tuple[np.ndarray, np.ndarray]:
        return self.r0_status == EpochStatus.OBSERVED, self.r1_status == EpochStatus.OBSERVED

    def censoring_fractions(self) -> dict:
        out = {}
        for name, st in (("r0", self.r0_status), ("r1", self.r1_status)):
            for status in EpochStatus:
                out[f"{name}_{status.label}"] = float(np.mean(st == status)) if len(st) else 0.0
        return out


def _round_draws(cfg: SimConfig, keys: np.ndarray, arrival: int):
    base = DRAWS_PER_ARRIVAL * (arrival - 1)
    um = uniforms_at(keys, base)
    uc = uniforms_at(keys, base + 1)
    uv = uniforms_at(keys, base + 2)
    law = cfg.t1_law if arrival == 1 else cfg.t2_law
    return um < cfg.p, law.sample_from_uniforms(uc, uv)


def _epoch_block(cfg: SimConfig, start: int, n: int) -> EpochPairs:
    keys_all = stream_keys(cfg.seed, np.arange(start, start + n, dtype=np.uint64))
    r = {0: np.full(n, math.inf), 1: np.full(n, math.inf)}
    st = {i: np.full(n, EpochStatus.HORIZON_CENSORED, dtype=np.int8) for i in (0, 1)}
    s = np.zeros(n)
    active = np.arange(n)
    arrival = 1
    while active.size and arrival <= cfg.arrival_cap:
        mark1, t = _round_draws(cfg, keys_all[active], arrival)
        defect = np.isinf(t)
        s_new = s[active] + t
        stop = defect | (s_new > cfg.horizon)
        # defect: every still-missing mark becomes an exact infinity
        dead = active[defect]
        for i in (0, 1):
            missing = dead[np.isinf(r[i][dead])]
            st[i][missing] = EpochStatus.INFINITE_EXACT
        keep = ~stop
        live, s_live, m_live = active[keep], s_new[keep], mark1[keep]
        s[live] = s_live
        for i, sel in ((1, m_live), (0, ~m_live)):
            hit = live[sel]
            fresh = np.isinf(r[i][hit])
            r[i][hit[fresh]] = s_live[sel][fresh]
            st[i][hit[fresh]] = EpochStatus.OBSERVED
        both = np.isfinite(r[0][live]) & np.isfinite(r[1][live])
        active = live[~both]
        arrival += 1
    return EpochPairs(r[0], r[1], st[0], st[1])


def _count_block(cfg: SimConfig, start: int, n: int, t_obs: float) -> tuple[np.ndarray, np.ndarray]:
    keys_all = stream_keys(cfg.seed, np.arange(start, start + n, dtype=np.uint64))
    counts = {0: np.zeros(n, dtype=np.int64), 1: np.zeros(n, dtype=np.int64)}
    s = np.zeros(n)
    active = np.arange(n)
    arrival = 1
    while active.size and arrival <= cfg.arrival_cap:
        mark1, t = _round_draws(cfg, keys_all[active], arrival)
        s_new = s[active] + t
        keep = s_new <= t_obs
        live = active[keep]
        s[live] = s_new[keep]
        counts[1][live[mark1[keep]]] += 1
        counts[0][live[~mark1[keep]]] += 1
        active = live
        arrival += 1
    return counts[0], counts[1]


def _blocks(n: int):
    return [(a, min(_CHUNK, n - a)) for a in range(0, n, _CHUNK)]


def _map(fn, blocks, threads: int):
    if threads <= 1 or len(blocks) <= 1:
        return [fn(*b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def batch_sample_epoch_pairs(cfg: SimConfig, n: int, threads: int = 1) -> EpochPairs:
    """``n`` independent replications of (R0, R1); replication ``j`` uses stream ``(seed, j)``."""
    if n < 1:
        raise ValueError("need at least one replication")
    parts = _map(lambda a, m: _epoch_block(cfg, a, m), _blocks(n), threads)
    return EpochPairs.concat(parts)


def batch_counts_at_time(cfg: SimConfig, n: int, t: float, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Per-replication ``(N0_t, N1_t)`` arrays, consistent with :func:`counts_at_time`."""
    if n < 1:
        raise ValueError("need at least one replication")
    if t > cfg.horizon:
        raise ValueError("counts requested beyond the simulated horizon")
    parts = _map(lambda a, m: _count_block(cfg, a, m, t), _blocks(n), threads)
    return np.concatenate([q[0] for q in parts]), np.concatenate([q[1] for q in parts])


# --------------------------------------------------------------------------
# CSV

CSV_HEADER = ["r0", "r0_status", "r1", "r1_status"]


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def write_epoch_pairs_csv(pairs: EpochPairs, dest: Union[str, TextIO]) -> None:
    if isinstance(dest, str):
        with open(dest, "w", newline="") as fh:
            return write_epoch_pairs_csv(pairs, fh)
    labels = [EpochStatus(k).label for k in range(3)]
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for a, sa, b, sb in zip(pairs.r0.tolist(), pairs.r0_status.tolist(), pairs.r1.tolist(), pairs.r1_status.tolist()):
        buf.write(f"{_fmt(a)},{labels[sa]},{_fmt(b)},{labels[sb]}\n")
    dest.write(buf.getvalue())


class EpochCSVError(ValueError):
    pass


def read_epoch_pairs_csv(src: Union[str, TextIO]) -> EpochPairs:
    if isinstance(src, str):
        with open(src, newline="") as fh:
            return read_epoch_pairs_csv(fh)
    reader = csv.reader(src)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != CSV_HEADER:
        raise EpochCSVError(f"expected header {','.join(CSV_HEADER)}, got {header}")
    r0, s0, r1, s1 = [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise EpochCSVError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            a, b = float(row[0]), float(row[2])
            sa, sb = _LABEL_STATUS[row[1].strip()], _LABEL_STATUS[row[3].strip()]
        except (ValueError, KeyError) as exc:
            raise EpochCSVError(f"line {lineno}: {exc}") from None
        r0.append(a); s0.append(int(sa)); r1.append(b); s1.append(int(sb))
    if not r0:
        raise EpochCSVError("no epoch pairs in input")
    return EpochPairs(np.array(r0), np.array(r1), np.array(s0, dtype=np.int8), np.array(s1, dtype=np.int8))
