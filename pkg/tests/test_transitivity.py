import numpy as np
import pytest

from hybridconf.closeness import ClosenessParams, close_ext
from hybridconf.core import INF, ATrace, Trajectory
from hybridconf.transitivity import GeneratorConfig, perturb, random_base, semitrans_check


def test_small_run_has_no_violations():
    r = semitrans_check(50, seed=11)
    assert r.passed and r.trials == 50 and r.redrawn >= 0


def test_seeded_runs_repeat():
    a, b = semitrans_check(20, seed=5), semitrans_check(20, seed=5)
    assert a.redrawn == b.redrawn and a.violations == b.violations


def test_parallel_equals_serial():
    a = semitrans_check(16, seed=2)
    b = semitrans_check(16, seed=2, parallel=True)
    assert a.redrawn == b.redrawn and a.passed == b.passed


def test_random_base_shape():
    rng = np.random.default_rng(0)
    cfg = GeneratorConfig()
    for _ in range(20):
        y = random_base(rng, cfg)
        assert y.variables == ("y0", "y1", "act:ON", "act:OFF")
        assert np.all(np.diff(y.t) >= 0)
        assert np.all(y.values[:, :2] >= 0) and np.all(y.values[:, :2] <= 20)


def test_perturb_stays_within_bounds():
    rng = np.random.default_rng(1)
    cfg = GeneratorConfig()
    for _ in range(30):
        y = random_base(rng, cfg)
        z = perturb(y, 0.3, 0.5, rng, drop=0.0)
        assert len(z.t) == len(y.t)
        assert np.all(np.abs(z.t - y.t) <= 0.95 * 0.3 + 1e-12)
        d = np.linalg.norm(z.values[:, :2] - y.values[:, :2], axis=1)
        assert np.all(d <= 0.95 * 0.5 + 1e-12)
        # action points stay put relative to the samples they sit on
        assert np.array_equal(np.isinf(z.values[:, 2:]), np.isinf(y.values[:, 2:]))
        assert close_ext(y, z, ClosenessParams(0.3, 0.5))


def test_degenerate_triple():
    y = random_base(np.random.default_rng(3), GeneratorConfig())
    for tau, eps in ((0.05, 0.05), (1.0, 2.0)):
        assert close_ext(y, y, ClosenessParams(2 * tau, 2 * eps))


def _act(times, values, offs):
    v = ("y", "act:a")
    segs, start = [], 0
    for stop in list(offs) + [len(times) - 1]:
        rows = [[values[k], INF if (k == stop and stop != len(times) - 1) else 0.0]
                for k in range(start, stop + 1)]
        segs.append(Trajectory(v, times[start:stop + 1], rows))
        start = stop
    return ATrace(tuple(segs), v)


def test_action_triple_composes():
    t = np.arange(0, 4.01, 0.25)
    y1 = _act(t, np.zeros(len(t)), [8])
    y2 = _act(t + 0.25, np.full(len(t), 0.5), [8])
    y3 = _act(t + 0.5, np.full(len(t), 1.0), [8])
    p1, p2 = ClosenessParams(0.25, 0.5), ClosenessParams(0.25, 0.5)
    assert close_ext(y1, y2, p1) and close_ext(y2, y3, p2)
    assert close_ext(y1, y3, ClosenessParams(0.5, 1.0))
    assert not close_ext(y1, y3, ClosenessParams(0.25, 1.0))


def test_redraw_limit():
    cfg = GeneratorConfig(eps=(1e-9, 2e-9), tau=(1e-9, 2e-9), drop=0.9, max_redraws=2,
                          step=(0.01, 0.02))
    with pytest.raises(RuntimeError):
        semitrans_check(5, seed=0, cfg=cfg)
