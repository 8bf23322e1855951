import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridconf.automata import HIOA, XI, Location, State, TransitionRule, build_thermostat
from hybridconf.closeness import ClosenessParams
from hybridconf.conformance import (PairSuite, SuiteError, after, conforms, hioco, infilter,
                                    inputs_equal, out_set, simulate_suite, traj_set,
                                    trace_prefixes)
from hybridconf.core import ATrace, HybridSequence, SolutionPair, Trajectory
from hybridconf.expr import parse_expr as e
from hybridconf.expr import parse_predicate as p
from hybridconf.simulate import SimConfig, Stimulus, integrate_flow, run, solution_pair, trace

from conftest import LN9, LN75, shifted_copy


def variant(flow_on="-x + 20", offset="", extra_rules=(), out_actions=("OFF",),
            in_actions=("ON",), name="variant"):
    y = e("x" + offset)
    locs = (Location("mode_ON", (("x", e(flow_on)),), p("x <= 20"), (("y", y),)),
            Location("mode_OFF", (("x", e("-x")),), p("x >= 0"), (("y", y),)))
    rules = (TransitionRule("mode_ON", "mode_OFF", "OFF", p("x >= 18")),
             TransitionRule("mode_OFF", "mode_ON", "ON", p("x <= 2"))) + tuple(extra_rules)
    return HIOA(name, (), ("y",), ("x",), in_actions, out_actions, (), locs, rules,
                (State.of("mode_ON", {"x": 5.0}),))


STIMULI = [Stimulus(10.0), Stimulus(6.0), Stimulus(10.0, ((1.0, "ON"),))]


@pytest.fixture(scope="module")
def suite(thermostat):
    return simulate_suite(thermostat, STIMULI)


@pytest.fixture(scope="module")
def alpha(thermostat, run10):
    return trace(thermostat, run10.prefix(3))


# solution-pair suites


def test_suite_invariants(suite, thermostat):
    assert len(suite) == 3 and suite.provenance == "simulated"
    with pytest.raises(ValueError):
        PairSuite(())
    with pytest.raises(ValueError):
        PairSuite(suite.pairs, "guessed")
    other = solution_pair(variant(out_actions=("OFF", "ON"), in_actions=()),
                          run(variant(out_actions=("OFF", "ON"), in_actions=()), Stimulus(1.0)))
    with pytest.raises(ValueError):
        PairSuite(suite.pairs + (other,))


def test_inputs_equal(suite):
    a, b, c = (pair.u for pair in suite)
    assert inputs_equal(a, a)
    assert not inputs_equal(a, b)  # horizons differ
    assert not inputs_equal(a, c)  # extra ON at t = 1


def test_reflexive(suite):
    for mode in ("plain", "extended"):
        r = conforms(suite, suite, ClosenessParams(1e-3, 1e-9), mode)
        assert r.conforms and not r.failures
        assert [x.impl_index for x in r.results] == [0, 1, 2]


def test_input_coverage_failure(suite, thermostat):
    impl = simulate_suite(thermostat, [Stimulus(10.0)])
    r = conforms(suite, impl, ClosenessParams(0.1, 0.1))
    assert not r
    assert [x.status for x in r.results] == ["matched", "input-coverage", "input-coverage"]


def test_output_offset(thermostat):
    spec = simulate_suite(thermostat, [Stimulus(10.0)])
    impl = simulate_suite(variant(offset=" - 0.5"), [Stimulus(10.0)])
    assert conforms(spec, impl, ClosenessParams(0.01, 0.5))
    r = conforms(spec, impl, ClosenessParams(0.01, 0.4))
    assert not r
    assert r.results[0].status == "not-close"
    assert r.results[0].best_epsilon == pytest.approx(0.5)


def _retimed_pair(pair: SolutionPair, dt: float, dv: float) -> SolutionPair:
    return SolutionPair(shifted_copy(pair.u, dt, 0.0), shifted_copy(pair.y, dt, dv))


def test_retimed_implementation(suite):
    spec = PairSuite(suite.pairs[:1])
    impl = PairSuite((_retimed_pair(spec.pairs[0], 0.5, -1.0),), "recorded")
    # ON occurs 0.5 s later in the retimed run, so exact input matching finds nothing
    assert conforms(spec, impl, ClosenessParams(0.8, 1.0)).results[0].status == "input-coverage"
    p = ClosenessParams(0.8, 1.0)
    assert conforms(spec, impl, p, "extended", input_timing="tau")
    assert not conforms(spec, impl, p.with_(eps=0.4), "extended", input_timing="tau")


def test_dropped_action_separation(suite):
    spec = PairSuite(suite.pairs[:1])
    y = spec.pairs[0].y
    col = y.variables.index("act:OFF")
    segs = [Trajectory(s.variables, s.times, np.where(np.arange(2) == col, 0.0, s.values))
            for s in y.segments]
    impl = PairSuite((SolutionPair(spec.pairs[0].u, ATrace(tuple(segs))),), "recorded")
    p = ClosenessParams(0.8, 1.0)
    assert conforms(spec, impl, p, "plain")
    assert not conforms(spec, impl, p, "extended")


def test_parallel_gives_same_report(suite):
    p = ClosenessParams(0.01, 0.01)
    a = conforms(suite, suite, p, parallel=True)
    b = conforms(suite, suite, p)
    assert [r.status for r in a.results] == [r.status for r in b.results]


def test_semitransitive_on_suites(thermostat):
    s1 = simulate_suite(thermostat, STIMULI)
    s2 = simulate_suite(variant(offset=" + 0.3"), STIMULI)
    s3 = simulate_suite(variant(offset=" - 0.2"), STIMULI)
    p1, p2 = ClosenessParams(0.01, 0.31), ClosenessParams(0.02, 0.51)
    assert conforms(s1, s2, p1) and conforms(s2, s3, p2)
    assert conforms(s1, s3, ClosenessParams(p1.tau + p2.tau, p1.eps + p2.eps))


# hioco operators


def test_after_empty_trace(thermostat, run10):
    point = trace_prefixes(thermostat, Stimulus(10.0))[0]
    assert after(thermostat, point) == {State.of("mode_ON", {"x": 5.0})}


def test_after_alpha(thermostat, alpha):
    (s,) = after(thermostat, alpha)
    assert s.location == "mode_ON"
    # alpha stops where the urgent OFF guard first holds
    assert s["x"] == pytest.approx(18.0, abs=1e-6)
    assert alpha.trajectories[-1].duration == pytest.approx(LN9, abs=1e-6)


def test_after_rejects_diverging_trace(thermostat):
    tau0, _ = integrate_flow(thermostat, thermostat.start[0], 1.0, SimConfig())
    bent = Trajectory(("y",), tau0.times, tau0.column("y") + 1e-3 * tau0.times)
    assert after(thermostat, HybridSequence((bent,))) == frozenset()


def test_after_rejects_disabled_action(thermostat):
    tau0, _ = integrate_flow(thermostat, thermostat.start[0], 1.0, SimConfig())
    y = Trajectory(("y",), tau0.times, tau0.column("y").reshape(-1, 1))
    tail = Trajectory(("y",), [0.0, 0.5], [[y.lval["y"]], [y.lval["y"]]])
    assert after(thermostat, HybridSequence((y, tail), ("OFF",))) == frozenset()


def test_out_set(thermostat, alpha):
    states = after(thermostat, alpha)
    assert out_set(thermostat, states, 1e-6) == {"OFF", XI}
    assert out_set(thermostat, states, 1e-6, include_xi=False) == {"OFF"}
    assert out_set(thermostat, []) == set()
    stuck = HIOA("stuck", (), (), ("x",), (), ("go",), (),
                 (Location("L", (("x", e("1")),), p("x <= 0")),),
                 (TransitionRule("L", "L", "go", p("x <= -1")),), (State.of("L", {"x": 0.0}),))
    assert out_set(stuck, stuck.start) == set()


def test_traj_set(thermostat):
    start = thermostat.start[0]
    (one,) = traj_set(thermostat, start, [1.0])
    assert one.lval["x"] == pytest.approx(20 - 15 * math.exp(-1), abs=1e-9)
    (point,) = traj_set(thermostat, start, [0.0])
    assert len(point) == 1
    (cut,) = traj_set(thermostat, start, [5.0])
    assert cut.end == pytest.approx(LN75, abs=1e-6)


def _tracker(gain):
    return HIOA("track", ("u",), ("y",), ("x",), (), (), (),
                (Location("L", (("x", e(f"{gain} * u")),), output_map=(("y", e("x")),)),), (),
                (State.of("L", {"x": 0.0}),))


def test_infilter():
    A = _tracker(1)
    ramp = run(A, Stimulus(1.0, signals={"u": ((0.0, 1.0), (0.0, 1.0))})).trajectories[0]
    flat = run(A, Stimulus(1.0, signals={"u": ((0.0, 1.0), (1.0, 1.0))})).trajectories[0]
    assert infilter([ramp, flat], [ramp], ["u"]) == [ramp]
    assert infilter([ramp, flat], [], ["u"]) == []
    assert infilter([ramp, flat], [ramp], []) == [ramp, flat]


def test_hioco_reflexive(thermostat):
    suite = trace_prefixes(thermostat, Stimulus(10.0))
    assert hioco(thermostat, thermostat, suite, [0.5, 1.0])


def test_hioco_extra_output(thermostat, alpha):
    impl = variant(out_actions=("OFF", "ON"), in_actions=(),
                   extra_rules=(TransitionRule("mode_ON", "mode_ON", "ON", p("x >= 18")),))
    v = hioco(impl, thermostat, [alpha], [0.5])
    assert not v
    assert v.counterexample.kind == "out" and v.counterexample.extra_outputs == {"ON"}


def test_hioco_perturbed_flow(thermostat):
    impl = variant(flow_on="-x + 19")
    suite = trace_prefixes(thermostat, Stimulus(10.0))[:1]
    v = hioco(impl, thermostat, suite, [1.0])
    assert not v and v.counterexample.kind == "traj"
    # 20 - 15/e vs 19 - 14/e differ by 1 - 1/e at t = 1
    assert v.counterexample.trajectory.lval["y"] == pytest.approx(19 - 14 * math.exp(-1), abs=1e-9)
    assert hioco(impl, thermostat, suite, [0.0])


def test_hioco_with_inputs_filters_by_input():
    spec, impl = _tracker(1), _tracker(2)
    stim = Stimulus(1.0, signals={"u": ((0.0, 1.0), (0.0, 0.0))})
    suite = trace_prefixes(spec, stim)
    # with u = 0 neither model moves, so the flows cannot be told apart
    assert hioco(impl, spec, suite, [0.5])


def test_hioco_suite_error(thermostat):
    bogus = HybridSequence((Trajectory(("y",), [0.0], [[7.0]]),))
    with pytest.raises(SuiteError):
        hioco(thermostat, thermostat, [bogus], [1.0])


@given(st.floats(4.0, 10.0), st.lists(st.floats(0.0, 3.0), min_size=1, max_size=3))
def test_hioco_reflexive_property(horizon, probes):
    A = build_thermostat()
    suite = trace_prefixes(A, Stimulus(horizon), SimConfig(step=1e-2))
    assert hioco(A, A, suite, probes, SimConfig(step=1e-2))
