"""Fixed-step RK4 execution of hybrid I/O automata with event bisection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .automata import HIOA, ModelError, State, discrete_step, matching_rule
from .core import (ATrace, Execution, HybridSequence, SolutionPair, Trajectory,
                   action_var, trace_to_atrace)
from .expr import NumericError

URGENT = "urgent"
SCHEDULED = "scheduled"


class SimulationError(RuntimeError):
    """Raised when an execution cannot be continued; ``partial`` holds what ran."""

    def __init__(self, message: str, partial: Execution | None = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SimConfig:
    step: float = 1e-3
    event_tol: float = 1e-9
    policy: str = URGENT
    # Guarded input transitions are fired by a built-in environment as soon
    # as their guard holds (closes the thermostat loop on ON).
    reactive_inputs: bool = True
    max_instant_jumps: int = 100

    def __post_init__(self):
        if not self.step > 0 or not self.event_tol > 0:
            raise ValueError("step and event_tol must be positive")
        if self.policy not in (URGENT, SCHEDULED):
            raise ValueError(f"unknown urgency policy {self.policy!r}")


@dataclass(frozen=True)
class Stimulus:
    """Scheduled actions and piecewise-linear input signals up to ``horizon``."""

    horizon: float
    actions: tuple[tuple[float, str], ...] = ()
    signals: Mapping[str, tuple[tuple[float, ...], tuple[float, ...]]] = field(default_factory=dict)

    def __post_init__(self):
        actions = tuple((float(t), a) for t, a in self.actions)
        object.__setattr__(self, "actions", actions)
        times = [t for t, _ in actions]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("scheduled action times must be non-decreasing")
        if times and (times[0] < 0 or times[-1] > self.horizon):
            raise ValueError("scheduled actions must lie in [0, horizon]")
        for name, (ts, _) in self.signals.items():
            if ts[0] > 0 or ts[-1] < self.horizon:
                raise ValueError(f"signal {name!r} does not cover [0, {self.horizon}]")

    def inputs_at(self, names: Sequence[str], t: float) -> tuple[float, ...]:
        try:
            return tuple(float(np.interp(t, *self.signals[n])) for n in names)
        except KeyError as exc:
            raise SimulationError(f"no signal for input variable {exc.args[0]!r}") from None


@dataclass(frozen=True)
class StopReason:
    kind: str  # "horizon" | "guard" | "invariant"
    action: str | None = None

    def __str__(self):
        return f"guard({self.action})" if self.kind == "guard" else self.kind


def urgent_actions(A: HIOA, cfg: SimConfig) -> tuple[str, ...]:
    acts = A.locally_controlled if cfg.policy == URGENT else ()
    return acts + (A.input_actions if cfg.reactive_inputs else ())


class _Flow:
    """Evaluates one location's dynamics on plain tuples (fast for small models)."""

    def __init__(self, A: HIOA, location: str, stim: Stimulus | None, urgent: Sequence[str]):
        self.A = A
        comp = A.compiled[location]
        self.f = comp["flow"]
        self.out = comp["output"]
        self.inv = comp["invariant"]
        self.stim = stim
        rules = [r for r in A.rules_from(location) if r.action in urgent]
        self.guards = [(r.action, A.compiled[r]["guard"]) for r in rules]

    def w(self, t: float) -> tuple:
        if not self.A.inputs:
            return ()
        if self.stim is None:
            return (0.0,) * len(self.A.inputs)
        return self.stim.inputs_at(self.A.inputs, t)

    def rk4(self, x: tuple, t: float, h: float) -> tuple:
        f = self.f
        w0, wm, w1 = self.w(t), self.w(t + 0.5 * h), self.w(t + h)
        k1 = f(*x, *w0)
        k2 = f(*(xi + 0.5 * h * ki for xi, ki in zip(x, k1)), *wm)
        k3 = f(*(xi + 0.5 * h * ki for xi, ki in zip(x, k2)), *wm)
        k4 = f(*(xi + h * ki for xi, ki in zip(x, k3)), *w1)
        return tuple(xi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
                     for xi, a, b, c, d in zip(x, k1, k2, k3, k4))

    def fired(self, x: tuple, t: float) -> str | None:
        w = self.w(t)
        for action, guard in self.guards:
            if guard(*x, *w):
                return action
        return None

    def valid(self, x: tuple, t: float) -> bool:
        return self.inv(*x, *self.w(t))

    def row(self, x: tuple, t: float) -> list:
        w = self.w(t)
        return [*w, *self.out(*x, *w), *x]


def integrate_flow(A: HIOA, s: State, duration: float, cfg: SimConfig = SimConfig(),
                   stim: Stimulus | None = None, t0: float = 0.0) -> tuple[Trajectory, StopReason]:
    """Integrate the flow of ``s.location`` from ``s`` for at most ``duration``.

    Stops early when an urgent guard becomes true (stopping at the first time
    it holds) or when the invariant would become false (stopping at the last
    time it holds).  Event times are bisected to within ``cfg.event_tol``.
    Trajectory variables are ``W_I, W_O, X`` in declaration order.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    flow = _Flow(A, s.location, stim, urgent_actions(A, cfg))
    x = tuple(s[v] for v in A.internal)
    t_end = t0 + duration
    try:
        times, rows = [t0], [flow.row(x, t0)]
        action = flow.fired(x, t0)
        if action is not None:
            return _traj(A, times, rows), StopReason("guard", action)
        n_steps = math.ceil(duration / cfg.step - 1e-9) if duration > 0 else 0
        t = t0
        for k in range(1, n_steps + 1):
            t_next = t_end if k == n_steps else t0 + k * cfg.step
            x_next = flow.rk4(x, t, t_next - t)
            if flow.fired(x_next, t_next) is not None or not flow.valid(x_next, t_next):
                return _locate_event(A, flow, x, t, t_next - t, cfg, times, rows)
            x, t = x_next, t_next
            times.append(t)
            rows.append(flow.row(x, t))
    except (ZeroDivisionError, OverflowError, NumericError) as exc:
        raise NumericError(f"flow evaluation failed in {s.location}: {exc}") from None
    return _traj(A, times, rows), StopReason("horizon")


def _locate_event(A, flow: _Flow, x, t, h, cfg, times, rows):
    def event(dt):
        xe = flow.rk4(x, t, dt)
        return flow.fired(xe, t + dt) is not None or not flow.valid(xe, t + dt)

    lo, hi = 0.0, h
    while hi - lo > cfg.event_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if event(mid):
            hi = mid
        else:
            lo = mid
    x_hi = flow.rk4(x, t, hi)
    if flow.valid(x_hi, t + hi):
        action = flow.fired(x_hi, t + hi)
        times.append(t + hi)
        rows.append(flow.row(x_hi, t + hi))
        return _traj(A, times, rows), StopReason("guard", action)
    if lo > 0:
        x_lo = flow.rk4(x, t, lo)
        times.append(t + lo)
        rows.append(flow.row(x_lo, t + lo))
    return _traj(A, times, rows), StopReason("invariant")


def _traj(A: HIOA, times, rows) -> Trajectory:
    return Trajectory(A.variables, times, rows)


def _end_state(A: HIOA, location: str, traj: Trajectory) -> State:
    last = traj.lval
    return State.of(location, {v: last[v] for v in A.internal})


def run(A: HIOA, stim: Stimulus, cfg: SimConfig = SimConfig()) -> Execution:
    """Simulate one execution of ``A`` over ``[0, stim.horizon]``."""
    if len(A.start) != 1:
        raise ModelError("simulation needs exactly one start state")
    s = A.start[0]
    trajs: list[Trajectory] = []
    acts: list[str] = []
    locs: list[str] = []
    pending = list(stim.actions)
    t = 0.0
    instant_jumps = 0

    def partial():
        return Execution(tuple(trajs), tuple(acts[:len(trajs) - 1]), tuple(locs), A.internal)

    def w_at(t):
        return dict(zip(A.inputs, stim.inputs_at(A.inputs, t))) if A.inputs else {}

    while True:
        until = pending[0][0] if pending else stim.horizon
        traj, reason = integrate_flow(A, s, max(until - t, 0.0), cfg, stim, t)
        trajs.append(traj)
        locs.append(s.location)
        t = traj.end
        s = _end_state(A, s.location, traj)
        if reason.kind == "invariant":
            raise SimulationError(
                f"invariant of {s.location} blocks time at t={t:.9g}", partial())
        if reason.kind == "guard":
            action = reason.action
        elif pending:
            action = pending.pop(0)[1]
        else:
            break
        instant_jumps = instant_jumps + 1 if traj.duration == 0 else 0
        if instant_jumps > cfg.max_instant_jumps:
            raise SimulationError(f"more than {cfg.max_instant_jumps} jumps at t={t:.9g}",
                                  partial())
        try:
            s = discrete_step(A, s, action, w_at(t))
        except ModelError as exc:
            raise SimulationError(f"at t={t:.9g}: {exc}", partial()) from exc
        acts.append(action)
    return Execution(tuple(trajs), tuple(acts), tuple(locs), A.internal)


def trace(A: HIOA, e: HybridSequence) -> HybridSequence:
    """The (E, W)-restriction of an execution."""
    return e.restrict(A.external, A.external_actions)


def solution_pair(A: HIOA, e: HybridSequence) -> SolutionPair:
    at = trace_to_atrace(trace(A, e), A.external_actions)
    u = at.restrict(list(A.inputs) + [action_var(a) for a in A.input_actions])
    y = at.restrict(list(A.outputs) + [action_var(a) for a in A.output_actions])
    return SolutionPair(u, y)


def execution_atrace(A: HIOA, e: Execution) -> ATrace:
    """All variables of an execution (internal ones too) as an a-trace; for plots."""
    return trace_to_atrace(e, A.actions)
