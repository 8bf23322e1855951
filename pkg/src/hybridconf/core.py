"""Sampled trajectories, hybrid time domains, a-traces and hybrid sequences.

Values live in the reals extended with a single ``inf`` (``math.inf``).
Action occurrences are encoded as extra variables named ``act:<NAME>`` that
are ``0`` everywhere except at the closing point of the segment that ends
with the action, where they are ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

INF = math.inf
MERGE_TOL = 1e-9
ACTION_PREFIX = "act:"

Valuation = dict  # ordered str -> float


class DomainError(ValueError):
    """Variable sets or domains do not fit the requested operation."""


class ConcatenationError(ValueError):
    pass


class StateMismatchError(ConcatenationError):
    pass


class IllFormedTraceError(ValueError):
    pass


def action_var(name: str) -> str:
    return ACTION_PREFIX + name


def is_action_var(var: str) -> bool:
    return var.startswith(ACTION_PREFIX)


def action_name(var: str) -> str:
    return var[len(ACTION_PREFIX):]


def ext_diff(a: float, b: float) -> float:
    """Absolute difference with ``inf - inf = 0``."""
    if a == INF and b == INF:
        return 0.0
    return abs(a - b)


def ext_absdiff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised :func:`ext_diff`."""
    both = np.isinf(a) & np.isinf(b)
    with np.errstate(invalid="ignore"):
        d = np.abs(a - b)
    return np.where(both, 0.0, d)


def _check_values(values: np.ndarray) -> None:
    if np.isnan(values).any():
        raise DomainError("NaN is not an extended real")
    if np.isneginf(values).any():
        raise DomainError("-inf is not an extended real")


def restrict(val: Mapping[str, float], variables: Iterable[str]) -> Valuation:
    """Restriction of a valuation to ``variables`` (declared order kept)."""
    wanted = set(variables)
    unknown = wanted - set(val)
    if unknown:
        raise DomainError(f"unknown variables {sorted(unknown)}")
    return {k: v for k, v in val.items() if k in wanted}


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A trajectory sampled at strictly increasing times.

    ``values[k, i]`` is the value of ``variables[i]`` at ``times[k]``.
    Off-sample queries interpolate linearly; an ``inf`` sample is treated as
    instantaneous, so between samples it yields the finite neighbour.
    ``closed`` is False for a trajectory whose right end is not attained.
    """

    variables: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray
    closed: bool = True

    def __post_init__(self):
        variables = tuple(self.variables)
        times = np.array(self.times, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(len(times), len(variables))
        if len(set(variables)) != len(variables):
            raise DomainError(f"duplicate variable names in {variables}")
        if len(times) == 0:
            raise DomainError("a trajectory needs at least one sample")
        if not np.isfinite(times).all():
            raise DomainError("sample times must be finite")
        if len(times) > 1 and not (np.diff(times) > 0).all():
            raise DomainError("sample times must be strictly increasing")
        _check_values(values)
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(cls, samples: Sequence[tuple[float, Mapping[str, float]]],
                     variables: Sequence[str] | None = None) -> "Trajectory":
        if variables is None:
            variables = tuple(samples[0][1])
        rows = []
        for t, val in samples:
            if set(val) != set(variables):
                raise DomainError(f"valuation at t={t} does not cover {variables}")
            rows.append([val[v] for v in variables])
        return cls(tuple(variables), [t for t, _ in samples], rows)

    @classmethod
    def constant(cls, val: Mapping[str, float], start: float, end: float,
                 n: int = 2) -> "Trajectory":
        variables = tuple(val)
        times = [start] if end == start else np.linspace(start, end, max(n, 2))
        return cls(variables, times, np.tile([val[v] for v in variables], (len(times), 1)))

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.variables == other.variables and self.closed == other.closed
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self):
        return (f"Trajectory({list(self.variables)}, [{self.start:g}, {self.end:g}], "
                f"{len(self)} samples)")

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def fval(self) -> Valuation:
        return self._row(0)

    @property
    def lval(self) -> Valuation:
        return self._row(len(self) - 1)

    def _row(self, k: int) -> Valuation:
        return {v: float(x) for v, x in zip(self.variables, self.values[k])}

    def column(self, var: str) -> np.ndarray:
        try:
            return self.values[:, self.variables.index(var)]
        except ValueError:
            raise DomainError(f"unknown variable {var!r}") from None

    def values_at(self, t: float) -> np.ndarray:
        if not self.start - MERGE_TOL <= t <= self.end + MERGE_TOL:
            raise DomainError(f"t={t} outside [{self.start}, {self.end}]")
        k = int(np.searchsorted(self.times, t))
        if k < len(self) and self.times[k] == t:
            return self.values[k].copy()
        if k == 0:
            return self.values[0].copy()
        if k == len(self):
            return self.values[-1].copy()
        t0, t1 = self.times[k - 1], self.times[k]
        a, b = self.values[k - 1], self.values[k]
        w = (t - t0) / (t1 - t0)
        with np.errstate(invalid="ignore"):
            lin = a + (b - a) * w
        out = np.where(np.isinf(a), b, np.where(np.isinf(b), a, lin))
        return np.where(np.isinf(a) & np.isinf(b), INF, out)

    def at(self, t: float) -> Valuation:
        return {v: float(x) for v, x in zip(self.variables, self.values_at(t))}


def restrict_traj(sigma: Trajectory, variables: Iterable[str]) -> Trajectory:
    wanted = set(variables)
    unknown = wanted - set(sigma.variables)
    if unknown:
        raise DomainError(f"unknown variables {sorted(unknown)}")
    idx = [i for i, v in enumerate(sigma.variables) if v in wanted]
    return Trajectory(tuple(sigma.variables[i] for i in idx), sigma.times,
                      sigma.values[:, idx], sigma.closed)


def shift(sigma: Trajectory, t: float) -> Trajectory:
    """``sigma + t``: the same values ``t`` seconds later."""
    if t < 0:
        raise DomainError("shift amount must be non-negative")
    if t == 0:
        return sigma
    return Trajectory(sigma.variables, sigma.times + t, sigma.values, sigma.closed)


def restrict_time(sigma: Trajectory, lo: float, hi: float) -> Trajectory:
    """``sigma`` restricted to ``[lo, hi]``; cut points get interpolated samples."""
    lo = max(lo, sigma.start)
    hi = min(hi, sigma.end)
    if lo > hi:
        raise DomainError(f"[{lo}, {hi}] does not meet dom(sigma)")
    inside = (sigma.times > lo) & (sigma.times < hi)
    times = [lo, *sigma.times[inside]]
    rows = [sigma.values_at(lo), *sigma.values[inside]]
    if hi > lo:
        times.append(hi)
        rows.append(sigma.values_at(hi))
    closed = sigma.closed or hi < sigma.end
    return Trajectory(sigma.variables, times, np.array(rows), closed)


def prefix(sigma: Trajectory, t: float) -> Trajectory:
    return restrict_time(sigma, sigma.start, t)


def suffix(sigma: Trajectory, t: float) -> Trajectory:
    """``sigma`` restricted to ``[t, inf)`` and moved to start at 0."""
    if not sigma.start <= t <= sigma.end:
        raise DomainError(f"t={t} not in dom(sigma)")
    part = restrict_time(sigma, t, sigma.end)
    return Trajectory(part.variables, part.times - t, part.values, part.closed)


def concat(sigma: Trajectory, other: Trajectory, tol: float = MERGE_TOL) -> Trajectory:
    """``sigma`` followed by ``other``; the shared boundary keeps ``sigma``'s sample."""
    if sigma.variables != other.variables:
        raise DomainError("cannot concatenate trajectories over different variables")
    if not sigma.closed:
        raise ConcatenationError("left operand must be closed")
    gap = other.start - sigma.end
    if abs(gap) > tol:
        kind = "gap" if gap > 0 else "overlap"
        raise ConcatenationError(f"{kind} of {abs(gap):g}s between trajectories")
    mismatch = ext_absdiff(sigma.values[-1], other.values[0])
    if (mismatch > tol).any():
        raise StateMismatchError(
            f"boundary valuations differ by {float(mismatch.max()):g}")
    times = np.concatenate([sigma.times, other.times[1:] - other.start + sigma.end])
    values = np.concatenate([sigma.values, other.values[1:]])
    return Trajectory(sigma.variables, times, values, other.closed)


def is_prefix(sigma: Trajectory, other: Trajectory, tol: float = MERGE_TOL) -> bool:
    """True iff ``sigma`` equals ``other`` restricted to ``dom(sigma)``."""
    if sigma.variables != other.variables:
        return False
    if abs(sigma.start - other.start) > tol or sigma.end > other.end + tol:
        return False
    for t, row in zip(sigma.times, sigma.values):
        if (ext_absdiff(row, other.values_at(min(t, other.end))) > tol).any():
            return False
    inside = other.times[(other.times >= sigma.start) & (other.times <= sigma.end)]
    for t, row in zip(inside, other.values[np.isin(other.times, inside)]):
        if (ext_absdiff(row, sigma.values_at(t)) > tol).any():
            return False
    return True


@dataclass(frozen=True)
class HybridTimeDomain:
    """Jump times ``t_0 <= ... <= t_J``; segment ``j`` spans ``[t_j, t_{j+1}]``."""

    times: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise DomainError("a hybrid time domain needs t_0")
        if times[0] < 0 or any(b < a for a, b in zip(times, times[1:])):
            raise DomainError(f"jump times must be non-negative and monotone: {times}")
        object.__setattr__(self, "times", times)

    @property
    def J(self) -> int:
        return len(self.times) - 1

    def segment(self, j: int) -> tuple[float, float]:
        return self.times[j], self.times[j + 1]

    def __contains__(self, point) -> bool:
        t, j = point
        return 0 <= j < self.J and self.times[j] <= t <= self.times[j + 1]

    def close_to(self, other: "HybridTimeDomain", tol: float = MERGE_TOL) -> bool:
        return (self.J == other.J
                and all(abs(a - b) <= tol for a, b in zip(self.times, other.times)))


@dataclass(frozen=True, eq=False)
class ATrace:
    """A sampled function over a hybrid time domain (one trajectory per segment)."""

    segments: tuple[Trajectory, ...]
    variables: tuple[str, ...] = ()

    def __post_init__(self):
        segments = tuple(self.segments)
        variables = segments[0].variables if segments else tuple(self.variables)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "variables", variables)
        for j, seg in enumerate(segments):
            if seg.variables != variables:
                raise DomainError(f"segment {j} has variables {seg.variables}")
            if j + 1 < len(segments) and seg.end != segments[j + 1].start:
                raise IllFormedTraceError(
                    f"segment {j} ends at {seg.end} but segment {j + 1} "
                    f"starts at {segments[j + 1].start}")
        if segments and segments[0].start < 0:
            raise IllFormedTraceError("hybrid time starts at a negative time")
        acts = [i for i, v in enumerate(variables) if is_action_var(v)]
        for j, seg in enumerate(segments):
            col = seg.values[:, acts]
            if not np.isin(col, (0.0, INF)).all():
                raise IllFormedTraceError(f"action variable not in {{0, inf}} in segment {j}")
            if np.isinf(col[:-1]).any():
                raise IllFormedTraceError(
                    f"action fires before the closing point of segment {j}")
            if np.isinf(col[-1]).sum() > 1:
                raise IllFormedTraceError(f"two actions fire together closing segment {j}")

    def __eq__(self, other):
        if not isinstance(other, ATrace):
            return NotImplemented
        return self.variables == other.variables and self.segments == other.segments

    __hash__ = None

    def __repr__(self):
        return f"ATrace({list(self.variables)}, J={len(self.segments)}, {len(self.t)} points)"

    @cached_property
    def domain(self) -> HybridTimeDomain:
        if not self.segments:
            return HybridTimeDomain((0.0,))
        return HybridTimeDomain((self.segments[0].start, *(s.end for s in self.segments)))

    @property
    def continuous_variables(self) -> tuple[str, ...]:
        return tuple(v for v in self.variables if not is_action_var(v))

    @property
    def action_variables(self) -> tuple[str, ...]:
        return tuple(v for v in self.variables if is_action_var(v))

    @cached_property
    def _flat(self):
        if not self.segments:
            return (np.empty(0), np.empty(0, dtype=int),
                    np.empty((0, len(self.variables))))
        t = np.concatenate([s.times for s in self.segments])
        j = np.concatenate([np.full(len(s), k) for k, s in enumerate(self.segments)])
        v = np.concatenate([s.values for s in self.segments])
        for a in (t, j, v):
            a.setflags(write=False)
        return t, j, v

    @property
    def t(self) -> np.ndarray:
        """Flattened sample times, sorted by ``(j, t)``."""
        return self._flat[0]

    @property
    def j(self) -> np.ndarray:
        return self._flat[1]

    @property
    def values(self) -> np.ndarray:
        return self._flat[2]

    def restrict(self, variables: Iterable[str]) -> "ATrace":
        variables = list(variables)
        if not self.segments:
            return ATrace((), tuple(v for v in self.variables if v in set(variables)))
        return ATrace(tuple(restrict_traj(s, variables) for s in self.segments))

    def strip_actions(self) -> "ATrace":
        return self.restrict(self.continuous_variables)

    def action_points(self) -> list[tuple[float, int, str]]:
        """``(t, j, action)`` for every action occurrence."""
        out = []
        for var in self.action_variables:
            col = self.values[:, self.variables.index(var)]
            for k in np.flatnonzero(np.isinf(col)):
                out.append((float(self.t[k]), int(self.j[k]), action_name(var)))
        return sorted(out)

    @classmethod
    def from_flat(cls, variables: Sequence[str], t, j, values) -> "ATrace":
        t = np.asarray(t, dtype=float)
        j = np.asarray(j, dtype=int)
        values = np.asarray(values, dtype=float).reshape(len(t), len(variables))
        if len(j) and (j[0] != 0 or (np.diff(j) < 0).any() or (np.diff(j) > 1).any()):
            raise IllFormedTraceError("segment indices must run 0, 1, 2, ... in order")
        segments = []
        for k in range(int(j.max()) + 1 if len(j) else 0):
            mask = j == k
            segments.append(Trajectory(tuple(variables), t[mask], values[mask]))
        return cls(tuple(segments), tuple(variables))


@dataclass(frozen=True)
class HybridSequence:
    """``tau_0, a_1, tau_1, ...`` (finite, ending with a trajectory)."""

    trajectories: tuple[Trajectory, ...]
    actions: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.trajectories:
            raise IllFormedTraceError("a hybrid sequence ends with a trajectory")
        if len(self.actions) != len(self.trajectories) - 1:
            raise IllFormedTraceError("trajectories and actions must alternate")
        variables = self.trajectories[0].variables
        for k, tr in enumerate(self.trajectories):
            if tr.variables != variables:
                raise DomainError(f"trajectory {k} has variables {tr.variables}")
            if k < len(self.actions) and not tr.closed:
                raise IllFormedTraceError(f"non-final trajectory {k} is not closed")

    @property
    def variables(self) -> tuple[str, ...]:
        return self.trajectories[0].variables

    @property
    def duration(self) -> float:
        return sum(tr.duration for tr in self.trajectories)

    def restrict(self, variables: Iterable[str], actions: Iterable[str],
                 tol: float = MERGE_TOL) -> "HybridSequence":
        """The ``(actions, variables)``-restriction; dropped actions merge trajectories."""
        variables = list(variables)
        keep = set(actions)
        trajs = [restrict_traj(self.trajectories[0], variables)]
        acts = []
        for a, tr in zip(self.actions, self.trajectories[1:]):
            tr = restrict_traj(tr, variables)
            if a in keep:
                acts.append(a)
                trajs.append(tr)
            else:
                trajs[-1] = concat(trajs[-1], tr, tol)
        return HybridSequence(tuple(trajs), tuple(acts))


@dataclass(frozen=True)
class Execution(HybridSequence):
    """A hybrid sequence produced by an automaton, with the location of every
    trajectory; ``state_variables`` are the internal variables X."""

    locations: tuple[str, ...] = ()
    state_variables: tuple[str, ...] = ()

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "state_variables", tuple(self.state_variables))
        if len(self.locations) != len(self.trajectories):
            raise IllFormedTraceError("one location per trajectory is required")

    def fstate(self, k: int = 0) -> tuple[str, Valuation]:
        return self.locations[k], restrict(self.trajectories[k].fval, self.state_variables)

    def lstate(self, k: int = -1) -> tuple[str, Valuation]:
        return self.locations[k], restrict(self.trajectories[k].lval, self.state_variables)

    def prefix(self, n: int) -> "Execution":
        """The first ``n`` trajectories and the actions between them."""
        if not 1 <= n <= len(self.trajectories):
            raise DomainError(f"prefix length {n} out of range")
        return Execution(self.trajectories[:n], self.actions[:n - 1],
                         self.locations[:n], self.state_variables)


def trace_to_atrace(tr: HybridSequence, action_names: Sequence[str] | None = None) -> ATrace:
    """Re-index ``tr`` onto a hybrid time domain and encode actions as variables.

    Segment ``j`` starts where segment ``j - 1`` ended, so global time runs on
    across jumps.  ``act:a`` is ``inf`` at the closing point of segment ``j``
    exactly when ``a_{j+1} = a``.
    """
    if action_names is None:
        action_names = list(dict.fromkeys(tr.actions))
    action_names = list(action_names)
    stray = set(tr.actions) - set(action_names)
    if stray:
        raise DomainError(f"actions {sorted(stray)} not among {action_names}")
    for k, sigma in enumerate(tr.trajectories[:-1]):
        if not sigma.closed:
            raise IllFormedTraceError(f"non-final trajectory {k} is not closed")
    variables = tr.variables + tuple(action_var(a) for a in action_names)
    segments = []
    t_j = tr.trajectories[0].start
    for k, sigma in enumerate(tr.trajectories):
        times = sigma.times - sigma.start + t_j
        times[0] = t_j
        acts = np.zeros((len(sigma), len(action_names)))
        if k < len(tr.actions):
            acts[-1, action_names.index(tr.actions[k])] = INF
        segments.append(Trajectory(variables, times, np.hstack([sigma.values, acts])))
        t_j = float(times[-1])
    return ATrace(tuple(segments), variables)


@dataclass(frozen=True)
class SolutionPair:
    """Input a-trace ``u`` and output a-trace ``y`` over the same domain."""

    u: ATrace
    y: ATrace

    def __post_init__(self):
        if not self.u.domain.close_to(self.y.domain):
            raise DomainError("dom(u) and dom(y) differ")
