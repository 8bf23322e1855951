"""(tau, eps)-closeness of a-traces, plain and action-sensitive.

Both traces are flattened to time-sorted point lists ``(t, j, values)``.
A point of one trace is matched if the other trace has a point within
``tau`` in time whose distance is at most ``eps``.  The distance is the
Euclidean norm extended to ``inf``-valued action variables: a component that
is ``inf`` on exactly one side makes the distance ``inf``; ``inf - inf = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numba
import numpy as np

from .core import INF, ATrace, DomainError


@dataclass(frozen=True)
class ClosenessParams:
    """``tau``/``eps`` bounds, test duration ``T`` and jump bound ``J``.

    Only points with ``t <= T`` and ``j <= J`` must be matched.  With
    ``scope_targets`` the out-of-scope points are also unusable as matches.
    """

    tau: float
    eps: float
    T: float = INF
    J: int = 2 ** 31
    scope_targets: bool = False

    def __post_init__(self):
        if not (self.tau > 0 and self.eps > 0 and self.T > 0):
            raise ValueError("tau, eps and T must be positive")
        if self.J < 0:
            raise ValueError("J must be non-negative")

    def with_(self, **kw) -> "ClosenessParams":
        return ClosenessParams(**{**self.__dict__, **kw})


@dataclass(frozen=True)
class PointMismatch:
    """A point with no admissible match: ``direction`` 1 means a point of the
    first trace, 2 a point of the second.  ``distance`` is the best distance
    reachable inside the time window (``inf`` if the window is empty)."""

    direction: int
    t: float
    j: int
    distance: float
    best_t: float | None = None
    best_j: int | None = None


@dataclass(frozen=True, eq=False)
class Matching:
    """Per-point best matches for one direction."""

    src_t: np.ndarray
    src_j: np.ndarray
    tgt_t: np.ndarray
    tgt_j: np.ndarray
    distance: np.ndarray

    def __len__(self):
        return len(self.src_t)


@dataclass(frozen=True, eq=False)
class ClosenessVerdict:
    """``counterexample`` is the unmatched point with the largest best distance;
    ``worst`` is that point over all in-scope points, matched or not."""

    close: bool
    params: ClosenessParams
    mode: str
    witness: tuple[Matching, Matching] | None = None
    counterexample: PointMismatch | None = None
    worst: PointMismatch | None = None
    sampling_step: float = 0.0

    def __bool__(self):
        return self.close

    @property
    def direction(self) -> int | None:
        return None if self.counterexample is None else self.counterexample.direction


def ext_norm(v1: Mapping[str, float], v2: Mapping[str, float]) -> float:
    """Extended Euclidean distance between two valuations over the same variables."""
    if list(v1) != list(v2):
        raise DomainError(f"variable sets differ: {list(v1)} vs {list(v2)}")
    return _norm([v1[k] for k in v1], [v2[k] for k in v1])


def _norm(a, b) -> float:
    acc = 0.0
    for x, y in zip(a, b):
        if x == INF or y == INF:
            if x != y:
                return INF
            continue
        d = x - y
        acc = acc + d * d
    return math.sqrt(acc)


@numba.njit(cache=True)
def _scan_windows(src_t, src_v, tgt_t, tgt_v, tau, lo, hi, best, arg):
    # Same operation order as _norm, so results are bit-identical to it.
    for i in range(len(src_t)):
        best_sq = INF
        best_q = -1
        first = -1
        for q in range(lo[i], hi[i]):
            if abs(src_t[i] - tgt_t[q]) > tau:
                continue
            if first < 0:
                first = q
            acc = 0.0
            mismatch = False
            for c in range(src_v.shape[1]):
                x = src_v[i, c]
                y = tgt_v[q, c]
                if x == INF or y == INF:
                    if x != y:
                        mismatch = True
                        break
                    continue
                d = x - y
                acc = acc + d * d
            if not mismatch and acc < best_sq:
                best_sq = acc
                best_q = q
        best[i] = math.sqrt(best_sq)
        arg[i] = best_q if best_q >= 0 else first


def best_matches(src_t, src_v, tgt_t, tgt_v, tau: float):
    """For every source point the smallest distance to a target within ``tau``.

    ``tgt_t`` must be sorted.  Returns ``(distance, index)``; the index is
    ``-1`` where the time window holds no target at all.
    """
    src_t = np.ascontiguousarray(src_t, dtype=float)
    tgt_t = np.ascontiguousarray(tgt_t, dtype=float)
    src_v = np.ascontiguousarray(src_v, dtype=float)
    tgt_v = np.ascontiguousarray(tgt_v, dtype=float)
    if src_v.ndim == 1:
        src_v, tgt_v = src_v.reshape(-1, 1), tgt_v.reshape(-1, 1)
    best = np.full(len(src_t), INF)
    arg = np.full(len(src_t), -1, dtype=np.int64)
    if len(src_t) == 0 or len(tgt_t) == 0:
        return best, arg
    # the window is widened slightly; the exact |t - s| <= tau test is in the scan
    pad = 1e-9 * max(tau, 1.0)
    lo = np.searchsorted(tgt_t, src_t - tau - pad, "left").astype(np.int64)
    hi = np.searchsorted(tgt_t, src_t + tau + pad, "right").astype(np.int64)
    _scan_windows(src_t, src_v, tgt_t, tgt_v, float(tau), lo, hi, best, arg)
    return best, arg


def _check_vars(y1: ATrace, y2: ATrace) -> None:
    if y1.variables != y2.variables:
        raise DomainError(f"variable sets differ: {y1.variables} vs {y2.variables}")


def _scope(y: ATrace, p: ClosenessParams) -> np.ndarray:
    return (y.t <= p.T) & (y.j <= p.J)


def _sampling_step(*traces: ATrace) -> float:
    gaps = [float(np.diff(s.times).max()) for y in traces for s in y.segments if len(s) > 1]
    return max(gaps, default=0.0)


def _direction(src: ATrace, tgt: ATrace, p: ClosenessParams):
    src_mask = _scope(src, p)
    tgt_mask = _scope(tgt, p) if p.scope_targets else np.ones(len(tgt.t), dtype=bool)
    s_idx = np.flatnonzero(src_mask)
    t_idx = np.flatnonzero(tgt_mask)
    best, arg = best_matches(src.t[s_idx], src.values[s_idx], tgt.t[t_idx],
                             tgt.values[t_idx], p.tau)
    tgt_pos = np.where(arg >= 0, t_idx[np.maximum(arg, 0)], -1)
    return s_idx, best, tgt_pos


def _mismatch(direction, src: ATrace, tgt: ATrace, k: int, d: float, pos: int):
    if pos < 0:
        return PointMismatch(direction, float(src.t[k]), int(src.j[k]), d)
    return PointMismatch(direction, float(src.t[k]), int(src.j[k]), d,
                         float(tgt.t[pos]), int(tgt.j[pos]))


def _check(y1: ATrace, y2: ATrace, p: ClosenessParams, mode: str) -> ClosenessVerdict:
    _check_vars(y1, y2)
    if mode == "plain":
        y1, y2 = y1.strip_actions(), y2.strip_actions()
    results = [(1, y1, y2, *_direction(y1, y2, p)), (2, y2, y1, *_direction(y2, y1, p))]
    counterexample = worst = None
    for direction, src, tgt, s_idx, best, pos in results:
        if len(best) == 0:
            continue
        k = int(np.argmax(best))
        if worst is None or best[k] > worst.distance:
            worst = _mismatch(direction, src, tgt, s_idx[k], best[k], pos[k])
    if worst is not None and worst.distance > p.eps:
        counterexample = worst
    step = _sampling_step(y1, y2)
    if counterexample is not None:
        return ClosenessVerdict(False, p, mode, None, counterexample, worst, step)
    witness = tuple(
        Matching(src.t[s_idx], src.j[s_idx], tgt.t[pos], tgt.j[pos], best)
        for _, src, tgt, s_idx, best, pos in results)
    return ClosenessVerdict(True, p, mode, witness, None, worst, step)


def close_plain(y1: ATrace, y2: ATrace, p: ClosenessParams) -> ClosenessVerdict:
    """Closeness on the continuous variables only; action variables are dropped."""
    return _check(y1, y2, p, "plain")


def close_ext(y1: ATrace, y2: ATrace, p: ClosenessParams) -> ClosenessVerdict:
    """Action-sensitive closeness: every action point must meet the same action."""
    return _check(y1, y2, p, "extended")


def close(y1: ATrace, y2: ATrace, p: ClosenessParams, mode: str = "extended"):
    if mode not in ("plain", "extended"):
        raise ValueError(f"unknown mode {mode!r}")
    return _check(y1, y2, p, mode)


def min_epsilon(y1: ATrace, y2: ATrace, tau: float, T: float = INF, J: int = 2 ** 31,
                mode: str = "extended", scope_targets: bool = False) -> float:
    """Smallest ``eps`` for which the traces are close at ``tau``."""
    _check_vars(y1, y2)
    if mode == "plain":
        y1, y2 = y1.strip_actions(), y2.strip_actions()
    p = ClosenessParams(tau, 1.0, T, J, scope_targets)
    worst = 0.0
    for src, tgt in ((y1, y2), (y2, y1)):
        _, best, _ = _direction(src, tgt, p)
        if len(best):
            worst = max(worst, float(best.max()))
    return worst


def close_naive(y1: ATrace, y2: ATrace, p: ClosenessParams,
                mode: str = "extended") -> ClosenessVerdict:
    """Literal double loop over all point pairs; the reference for the fast path.

    The counterexample, as in :func:`close`, is the unmatched point with the
    largest best distance (earliest on ties, first direction first).
    """
    _check_vars(y1, y2)
    if mode == "plain":
        y1, y2 = y1.strip_actions(), y2.strip_actions()

    def points(y):
        return [(float(t), int(j), [float(x) for x in row])
                for t, j, row in zip(y.t, y.j, y.values)]

    def in_scope(t, j):
        return t <= p.T and j <= p.J

    matchings = []
    worst = None
    for direction, src, tgt in ((1, points(y1), points(y2)), (2, points(y2), points(y1))):
        rows = []
        for t, i, v in src:
            if not in_scope(t, i):
                continue
            best, where = INF, None
            for s, j, w in tgt:
                if p.scope_targets and not in_scope(s, j):
                    continue
                if abs(t - s) <= p.tau:
                    d = _norm(v, w)
                    if where is None or d < best:
                        best, where = d, (s, j)
            if worst is None or best > worst.distance:
                worst = PointMismatch(direction, t, i, best, *(where or (None, None)))
            rows.append((t, i, *(where or (math.nan, -1)), best))
        cols = list(zip(*rows)) if rows else [(), (), (), (), ()]
        matchings.append(Matching(*(np.array(c) for c in cols)))
    step = _sampling_step(y1, y2)
    if worst is not None and worst.distance > p.eps:
        return ClosenessVerdict(False, p, mode, None, worst, worst, step)
    return ClosenessVerdict(True, p, mode, tuple(matchings), None, worst, step)

