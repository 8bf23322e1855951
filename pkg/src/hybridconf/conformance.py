"""Conformance relations between automata: approximate (plain / extended) over
finite suites of solution pairs, and exact hioco over a finite trace suite."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .automata import HIOA, XI, ModelError, State, discrete_step, enabled_actions, is_agile
from .closeness import ClosenessParams, ClosenessVerdict, close, min_epsilon
from .core import (MERGE_TOL, ATrace, HybridSequence, SolutionPair, Trajectory,
                   is_action_var, is_prefix, restrict_traj)
from .simulate import SimConfig, Stimulus, _Flow, integrate_flow, run, solution_pair

REPLAY_TOL = 1e-6


class SuiteError(ValueError):
    """A trace in a hioco suite is not a trace of the specification."""


@dataclass(frozen=True)
class PairSuite:
    """Finite stand-in for all solution pairs of an automaton."""

    pairs: tuple[SolutionPair, ...]
    provenance: str = "simulated"

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if not self.pairs:
            raise ValueError("a pair suite must not be empty")
        if self.provenance not in ("simulated", "recorded"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        u_vars, y_vars = self.pairs[0].u.variables, self.pairs[0].y.variables
        for k, pair in enumerate(self.pairs):
            if pair.u.variables != u_vars or pair.y.variables != y_vars:
                raise ValueError(f"pair {k} does not share the suite's variables")

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def simulate_suite(A: HIOA, stimuli: Iterable[Stimulus], cfg: SimConfig = SimConfig()) -> PairSuite:
    return PairSuite(tuple(solution_pair(A, run(A, stim, cfg)) for stim in stimuli))


def inputs_equal(u1: ATrace, u2: ATrace, tol: float = MERGE_TOL,
                 timing_tol: float | None = None) -> bool:
    """Same input stimulus: continuous inputs agree within ``tol`` as functions
    of time, and the same input actions occur in the same order with times
    within ``timing_tol`` (``tol`` when not given)."""
    timing_tol = tol if timing_tol is None else timing_tol
    if u1.variables != u2.variables:
        return False
    d1, d2 = u1.domain.times, u2.domain.times
    if abs(d1[0] - d2[0]) > timing_tol or abs(d1[-1] - d2[-1]) > timing_tol:
        return False
    p1, p2 = u1.action_points(), u2.action_points()
    if [a for *_, a in p1] != [a for *_, a in p2]:
        return False
    if any(abs(a[0] - b[0]) > timing_tol for a, b in zip(p1, p2)):
        return False
    lo, hi = max(d1[0], d2[0]), min(d1[-1], d2[-1])
    for var in u1.continuous_variables:
        c = u1.variables.index(var)
        for src, other in ((u1, u2), (u2, u1)):
            mask = (src.t >= lo) & (src.t <= hi)
            ref = np.interp(src.t[mask], other.t, other.values[:, c])
            if (np.abs(src.values[mask, c] - ref) > tol).any():
                return False
    return True


@dataclass(frozen=True)
class PairResult:
    spec_index: int
    status: str  # "matched" | "not-close" | "input-coverage"
    impl_index: int | None = None
    verdict: ClosenessVerdict | None = None
    best_epsilon: float | None = None


@dataclass(frozen=True)
class ConformanceReport:
    conforms: bool
    params: ClosenessParams
    mode: str
    results: tuple[PairResult, ...] = field(default=())

    def __bool__(self):
        return self.conforms

    @property
    def failures(self) -> list[PairResult]:
        return [r for r in self.results if r.status != "matched"]


def _match_one(k: int, pair: SolutionPair, impl: PairSuite, p: ClosenessParams, mode: str,
               timing_tol: float) -> PairResult:
    candidates = [i for i, q in enumerate(impl.pairs)
                  if inputs_equal(pair.u, q.u, MERGE_TOL, timing_tol)]
    if not candidates:
        return PairResult(k, "input-coverage")
    best = None
    for i in candidates:
        verdict = close(pair.y, impl.pairs[i].y, p, mode)
        if verdict.close:
            return PairResult(k, "matched", i, verdict)
        eps = min_epsilon(pair.y, impl.pairs[i].y, p.tau, p.T, p.J, mode, p.scope_targets)
        if best is None or eps < best[0]:
            best = (eps, i, verdict)
    return PairResult(k, "not-close", best[1], best[2], best[0])


def conforms(spec: PairSuite, impl: PairSuite, p: ClosenessParams, mode: str = "extended",
             input_timing: str = "exact", parallel: bool = False) -> ConformanceReport:
    """Every pair ``(u, y1)`` of ``spec`` needs a pair ``(u', y2)`` of ``impl``
    with ``u' = u`` and ``y1``, ``y2`` close.

    ``input_timing="tau"`` lets input actions occur up to ``p.tau`` apart,
    which retimed implementations of closed-loop models need.
    """
    if input_timing not in ("exact", "tau"):
        raise ValueError(f"unknown input timing {input_timing!r}")
    timing_tol = p.tau if input_timing == "tau" else MERGE_TOL
    jobs = [(k, pair) for k, pair in enumerate(spec.pairs)]

    def one(job):
        return _match_one(*job, impl, p, mode, timing_tol)

    if parallel:
        with ThreadPoolExecutor() as pool:
            results = tuple(pool.map(one, jobs))
    else:
        results = tuple(map(one, jobs))
    return ConformanceReport(all(r.status == "matched" for r in results), p, mode, results)


# --- hioco ---------------------------------------------------------------


class _TraceInputs:
    """Feeds a recorded trajectory's input columns to the integrator."""

    def __init__(self, traj: Trajectory, names: Sequence[str]):
        self.traj = traj
        self.cols = {n: traj.column(n) for n in names}

    def inputs_at(self, names, t):
        return tuple(float(np.interp(t, self.traj.times, self.cols[n])) for n in names)


def _replay(A: HIOA, s: State, traj: Trajectory, cfg: SimConfig, tol: float) -> State | None:
    """Integrate from ``s`` along ``traj``'s sample times; None if it diverges."""
    stim = _TraceInputs(traj, A.inputs)
    flow = _Flow(A, s.location, stim, ())
    order = [traj.variables.index(v) for v in A.external]
    x = tuple(s[v] for v in A.internal)
    t = traj.start
    for k, t_next in enumerate(traj.times):
        if t_next > t:
            n = max(1, int(np.ceil((t_next - t) / cfg.step - 1e-9)))
            grid = [t + (t_next - t) * i / n for i in range(1, n)] + [float(t_next)]
            for tb in grid:
                x = flow.rk4(x, t, tb - t)
                t = tb
        if not flow.inv(*x, *flow.w(t), slack=tol):
            return None
        row = flow.row(x, t)[:len(A.external)]
        if any(abs(a - traj.values[k, c]) > tol for a, c in zip(row, order)):
            return None
    return State.of(s.location, dict(zip(A.internal, x)))


def after(A: HIOA, tr: HybridSequence, cfg: SimConfig = SimConfig(),
          tol: float = REPLAY_TOL) -> frozenset[State]:
    """States reached by replaying ``tr`` from the start states.

    Trajectories are re-integrated on the trace's own sample times and must
    reproduce its external variables within ``tol``; actions are replayed
    with :func:`discrete_step` (guards get the same slack).
    """
    if set(tr.variables) != set(A.external):
        raise ValueError(f"trace variables {tr.variables} are not W = {A.external}")
    reached = set()
    for s in A.start:
        w0 = dict(zip(A.inputs, (tr.trajectories[0].fval[v] for v in A.inputs)))
        if not A.invariant_holds(s, w0, tol):
            continue
        for k, traj in enumerate(tr.trajectories):
            s = _replay(A, s, traj, cfg, tol)
            if s is None:
                break
            if k < len(tr.actions):
                w = {v: traj.lval[v] for v in A.inputs}
                try:
                    s = discrete_step(A, s, tr.actions[k], w, slack=tol)
                except ModelError:
                    s = None
                    break
        if s is not None:
            reached.add(s)
    return frozenset(reached)


def out_set(A: HIOA, states: Iterable[State], slack: float = 0.0,
            include_xi: bool = True) -> set[str]:
    """Enabled output actions of ``states``, plus ``xi`` for agile states."""
    out: set[str] = set()
    for s in states:
        out |= enabled_actions(A, s, None, slack) & set(A.output_actions)
        if include_xi and is_agile(A, s):
            out.add(XI)
    return out


def traj_set(A: HIOA, s: State, probes: Sequence[float],
             cfg: SimConfig = SimConfig()) -> list[Trajectory]:
    """One maximal simulated trajectory from ``s`` per probe duration."""
    return [integrate_flow(A, s, d, cfg)[0] for d in probes]


def trajectories_equal(a: Trajectory, b: Trajectory, tol: float = MERGE_TOL) -> bool:
    return is_prefix(a, b, tol) and is_prefix(b, a, tol)


def infilter(sigma_i: Sequence[Trajectory], sigma_s: Sequence[Trajectory],
             input_vars: Iterable[str], tol: float = MERGE_TOL) -> list[Trajectory]:
    """Members of ``sigma_i`` whose input restriction matches some member of ``sigma_s``."""
    input_vars = list(input_vars)
    spec_inputs = [restrict_traj(s, input_vars) for s in sigma_s]
    out = []
    for sigma in sigma_i:
        mine = restrict_traj(sigma, input_vars)
        if any(_inputs_agree(mine, other, tol) for other in spec_inputs):
            out.append(sigma)
    return out


def _inputs_agree(a: Trajectory, b: Trajectory, tol: float) -> bool:
    if not a.variables:
        return True
    hi = min(a.end, b.end)
    if abs(a.start - b.start) > tol:
        return False
    return trajectories_equal(_clip(a, hi), _clip(b, hi), tol)


def _clip(sigma: Trajectory, hi: float) -> Trajectory:
    from .core import prefix
    return sigma if sigma.end <= hi else prefix(sigma, hi)


@dataclass(frozen=True)
class HiocoCounterexample:
    trace_index: int
    kind: str  # "out" | "traj"
    extra_outputs: frozenset[str] = frozenset()
    trajectory: Trajectory | None = None
    probe: float | None = None


@dataclass(frozen=True)
class HiocoVerdict:
    conforms: bool
    counterexample: HiocoCounterexample | None = None

    def __bool__(self):
        return self.conforms


def hioco(I: HIOA, S: HIOA, suite: Sequence[HybridSequence], probes: Sequence[float],
          cfg: SimConfig = SimConfig(), include_xi: bool = False,
          replay_tol: float = REPLAY_TOL, tol: float = MERGE_TOL) -> HiocoVerdict:
    """Check ``out`` inclusion and input-filtered trajectory inclusion after every
    trace of ``suite``; the first violation is returned as counterexample."""
    if set(I.external) != set(S.external):
        raise ValueError("implementation and specification have different interfaces")
    W = list(S.external)
    for k, tr in enumerate(suite):
        s_after = after(S, tr, cfg, replay_tol)
        if not s_after:
            raise SuiteError(f"suite trace {k} is not a trace of {S.name}")
        i_after = after(I, tr, cfg, replay_tol)
        extra = (out_set(I, i_after, replay_tol, include_xi)
                 - out_set(S, s_after, replay_tol, include_xi))
        if extra:
            return HiocoVerdict(False, HiocoCounterexample(k, "out", frozenset(extra)))
        traj_s = [restrict_traj(x, W) for s in s_after for x in traj_set(S, s, probes, cfg)]
        traj_i = [(d, restrict_traj(x, W)) for s in i_after
                  for d, x in zip(probes, traj_set(I, s, probes, cfg))]
        kept = {id(x) for x in infilter([x for _, x in traj_i], traj_s, S.inputs, tol)}
        for d, sigma in traj_i:
            if id(sigma) in kept and not any(trajectories_equal(sigma, o, tol) for o in traj_s):
                return HiocoVerdict(False, HiocoCounterexample(k, "traj", trajectory=sigma,
                                                               probe=d))
    return HiocoVerdict(True)


def trace_prefixes(A: HIOA, stim: Stimulus, cfg: SimConfig = SimConfig()) -> list[HybridSequence]:
    """The point trace at the start plus every k-trajectory prefix of one run."""
    from .simulate import trace
    e = run(A, stim, cfg)
    point = HybridSequence((restrict_traj(
        Trajectory(e.variables, e.trajectories[0].times[:1], e.trajectories[0].values[:1]),
        A.external),))
    return [point] + [trace(A, e.prefix(n)) for n in range(1, len(e.trajectories) + 1)]


def output_only(y: ATrace) -> ATrace:
    return y.restrict([v for v in y.variables if not is_action_var(v)])
