import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridconf.core import (INF, ATrace, ConcatenationError, DomainError, HybridSequence,
                             HybridTimeDomain, IllFormedTraceError, SolutionPair,
                             StateMismatchError, Trajectory, concat, ext_diff, is_prefix,
                             prefix, restrict, restrict_traj, shift, suffix, trace_to_atrace)
from hybridconf.simulate import SimConfig, integrate_flow, trace

from conftest import LN9, LN75


def ramp(lo=0.0, hi=1.0, n=11, k=1.0):
    t = np.linspace(lo, hi, n)
    return Trajectory(("x", "y"), t, np.column_stack([k * t, 2 * k * t]))


# valuations


def test_restrict_projection():
    assert restrict({"x": 5, "y": 5}, {"y"}) == {"y": 5}
    assert restrict({"x": 3}, {"x"}) == {"x": 3}
    assert restrict({"x": 5, "y": 2, "z": INF}, {"y", "z"}) == {"y": 2, "z": INF}


def test_restrict_unknown_variable():
    with pytest.raises(DomainError):
        restrict({"x": 1}, {"q"})


def test_ext_diff_rules():
    assert ext_diff(INF, INF) == 0
    assert ext_diff(INF, 3.0) == INF
    assert ext_diff(3.0, INF) == INF
    assert ext_diff(2.0, 5.0) == ext_diff(5.0, 2.0) == 3.0
    assert INF > 1e308


# trajectories


def test_trajectory_validation():
    with pytest.raises(DomainError):
        Trajectory(("x",), [0.0, 0.0], [[1], [2]])
    with pytest.raises(DomainError):
        Trajectory(("x",), [], [])
    with pytest.raises(DomainError):
        Trajectory(("x",), [0.0], [[math.nan]])
    with pytest.raises(DomainError):
        Trajectory(("x", "x"), [0.0], [[1, 2]])


def test_fval_lval_and_interpolation():
    s = ramp()
    assert s.fval == {"x": 0.0, "y": 0.0}
    assert s.lval == {"x": 1.0, "y": 2.0}
    assert s.at(0.25) == pytest.approx({"x": 0.25, "y": 0.5})


def test_inf_sample_is_instantaneous():
    s = Trajectory(("a",), [0.0, 1.0], [[0.0], [INF]])
    assert s.at(0.5)["a"] == 0.0
    assert s.at(1.0)["a"] == INF


def test_restrict_traj():
    c = Trajectory.constant({"x": 1.0, "y": 2.0}, 0.0, 1.0)
    assert restrict_traj(c, {"x"}) == Trajectory.constant({"x": 1.0}, 0.0, 1.0)
    assert restrict_traj(c, {"x", "y"}) == c


def test_shift():
    s = Trajectory.constant({"x": 5.0}, 0.0, 1.0)
    assert shift(s, 0) == s
    moved = shift(s, 2)
    assert (moved.start, moved.end) == (2.0, 3.0)
    assert moved.fval == {"x": 5.0}
    r = ramp()
    assert shift(shift(r, 1), 2) == shift(r, 3)


def test_suffix():
    r = ramp(0, 2, 21)
    assert suffix(r, 0.0) == r
    tail = suffix(r, 2.0)
    assert len(tail) == 1 and tail.start == 0.0 and tail.fval == r.lval
    mid = suffix(r, 0.55)
    assert mid.start == 0.0
    assert mid.fval["x"] == pytest.approx(0.55)


def test_suffix_of_thermostat_flow(thermostat):
    tau0, _ = integrate_flow(thermostat, thermostat.start[0], 2.0, SimConfig(policy="scheduled",
                                                                          reactive_inputs=False))
    # x(1) = 20 - 15 e^-1
    assert suffix(tau0, 1.0).fval["x"] == pytest.approx(20 - 15 * math.exp(-1), abs=1e-9)


def test_concat_and_prefix_law():
    a, b = ramp(0, 1, 11), ramp(1, 2, 11)
    joined = concat(a, b)
    assert (joined.start, joined.end) == (0.0, 2.0)
    assert len(joined) == 21
    assert prefix(joined, 1.0) == a


def test_concat_errors():
    a = ramp(0, 1)
    with pytest.raises(ConcatenationError):
        concat(a, ramp(1.5, 2.5))
    with pytest.raises(ConcatenationError):
        concat(a, ramp(0.5, 2))
    shifted = Trajectory(("x", "y"), [1.0, 2.0], [[1.0 + 1e-6, 2.0], [1.0, 2.0]])
    with pytest.raises(StateMismatchError):
        concat(a, shifted)


def test_concat_rejects_thermostat_jump_image(thermostat):
    cfg = SimConfig()
    tau0, _ = integrate_flow(thermostat, thermostat.start[0], 3.0, cfg)
    jumped = Trajectory(tau0.variables, [tau0.end, tau0.end + 1],
                        [[17.0, 17.0], [17.0, 17.0]])
    with pytest.raises(StateMismatchError):
        concat(tau0, jumped)


def test_is_prefix():
    r = ramp(0, 2, 21)
    assert is_prefix(r, r)
    assert is_prefix(prefix(r, 1.0), r)
    five = Trajectory.constant({"x": 5.0}, 0.0, 1.0)
    six = Trajectory.constant({"x": 6.0}, 0.0, 2.0)
    assert not is_prefix(five, six)
    assert not is_prefix(r, prefix(r, 1.0))


@given(st.floats(0.0, 2.0), st.floats(0.0, 5.0))
def test_suffix_shift_inverse(t_cut, t_shift):
    r = ramp(0, 2, 21)
    s = suffix(shift(r, t_shift), t_shift)
    assert np.allclose(s.times, r.times, atol=1e-12)
    assert np.allclose(s.values, r.values)
    p = prefix(r, t_cut)
    assert is_prefix(p, r)
    q = suffix(r, t_cut)
    assert q.start == 0.0 and q.end == pytest.approx(2.0 - t_cut)


# hybrid time domains and a-traces


def test_domain():
    d = HybridTimeDomain((0.0, 1.0, 1.0, 3.0))
    assert d.J == 3
    assert (0.5, 0) in d and (1.0, 1) in d and (2.0, 2) in d
    assert (2.0, 0) not in d
    with pytest.raises(DomainError):
        HybridTimeDomain((0.0, 2.0, 1.0))


def test_atrace_action_invariants():
    v = ("y", "act:OFF", "act:ON")
    good = Trajectory(v, [0.0, 1.0], [[0, 0, 0], [1, INF, 0]])
    tail = Trajectory(v, [1.0, 2.0], [[1, 0, 0], [2, 0, 0]])
    y = ATrace((good, tail))
    assert y.action_points() == [(1.0, 0, "OFF")]
    with pytest.raises(IllFormedTraceError):
        ATrace((Trajectory(v, [0.0, 1.0], [[0, INF, 0], [1, 0, 0]]), tail))
    with pytest.raises(IllFormedTraceError):
        ATrace((Trajectory(v, [0.0, 1.0], [[0, 0, 0], [1, INF, INF]]), tail))
    with pytest.raises(IllFormedTraceError):
        ATrace((Trajectory(v, [0.0, 1.0], [[0, 0, 0], [1, 2.0, 0]]), tail))
    with pytest.raises(IllFormedTraceError):
        ATrace((good, Trajectory(v, [1.5, 2.0], [[1, 0, 0], [2, 0, 0]])))


def test_trace_to_atrace_single():
    tr = HybridSequence((ramp(),))
    y = trace_to_atrace(tr, ["ON", "OFF"])
    assert y.domain.J == 1
    assert not np.isinf(y.values).any()


def test_trace_to_atrace_example_trace(thermostat, run10):
    tr = trace(thermostat, run10.prefix(2))
    y = trace_to_atrace(tr, thermostat.external_actions)
    assert y.domain.J == 2
    off = y.values[:, y.variables.index("act:OFF")]
    on = y.values[:, y.variables.index("act:ON")]
    assert not np.isinf(on).any()
    (k,) = np.flatnonzero(np.isinf(off))
    assert y.j[k] == 0 and y.t[k] == pytest.approx(LN75, abs=1e-6)


def test_trace_to_atrace_three_segments(thermostat, run10):
    y = trace_to_atrace(trace(thermostat, run10.prefix(3)), thermostat.external_actions)
    t = y.domain.times
    assert t[1] == pytest.approx(LN75, abs=1e-6)
    assert t[2] == pytest.approx(LN75 + LN9, abs=1e-6)


def test_trace_to_atrace_duration(run10, thermostat):
    tr = trace(thermostat, run10)
    y = trace_to_atrace(tr)
    d = y.domain.times
    assert d[-1] - d[0] == pytest.approx(tr.duration, abs=1e-12)


def test_trace_to_atrace_rejects_open(thermostat):
    a = Trajectory(("x",), [0.0, 1.0], [[0], [1]], closed=False)
    with pytest.raises(IllFormedTraceError):
        HybridSequence((a, ramp(1, 2)), ("OFF",))


def test_solution_pair_requires_equal_domains():
    u = ATrace((Trajectory((), [0.0, 1.0], np.empty((2, 0))),))
    y = ATrace((Trajectory(("y",), [0.0, 2.0], [[0], [1]]),))
    with pytest.raises(DomainError):
        SolutionPair(u, y)
