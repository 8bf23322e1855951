"""Randomized check that closeness composes: (tau1, eps1) then (tau2, eps2)
gives (tau1 + tau2, eps1 + eps2).

Each trial draws a thermostat-shaped base trace ``y2`` with actions, then
derives ``y1`` and ``y3`` from it by a monotone retiming, a bounded value
perturbation and random sample drops.  Trials whose premises do not hold
(dropped samples can leave a point unmatched) are redrawn and counted.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .closeness import ClosenessParams, close_ext
from .core import INF, ATrace, Trajectory, action_var


@dataclass(frozen=True)
class GeneratorConfig:
    segments: tuple[int, int] = (1, 5)
    duration: tuple[float, float] = (0.5, 2.5)
    step: tuple[float, float] = (0.05, 0.2)
    continuous: int = 2
    actions: tuple[str, ...] = ("ON", "OFF")
    tau: tuple[float, float] = (0.05, 1.0)
    eps: tuple[float, float] = (0.05, 2.0)
    drop: float = 0.1
    max_redraws: int = 100


@dataclass(frozen=True, eq=False)
class Violation:
    trial: int
    params: tuple[float, float, float, float]
    y1: ATrace
    y2: ATrace
    y3: ATrace


@dataclass(frozen=True)
class SemitransReport:
    trials: int
    seed: int
    redrawn: int
    violations: tuple[Violation, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.violations


def random_base(rng: np.random.Generator, cfg: GeneratorConfig) -> ATrace:
    """Exponential approach toward 20 or 0, alternating per segment."""
    n_seg = int(rng.integers(cfg.segments[0], cfg.segments[1] + 1))
    names = [f"y{k}" for k in range(cfg.continuous)]
    variables = tuple(names) + tuple(action_var(a) for a in cfg.actions)
    x = rng.uniform(0.0, 20.0, size=cfg.continuous)
    parity = int(rng.integers(2))
    segments, t0 = [], 0.0
    for k in range(n_seg):
        dur = rng.uniform(*cfg.duration)
        h = rng.uniform(*cfg.step)
        rel = np.append(np.arange(0.0, dur, h), dur)
        if len(rel) > 2 and rel[-1] - rel[-2] < 1e-3:
            rel = np.delete(rel, -2)
        target = 20.0 if (k + parity) % 2 == 0 else 0.0
        cont = target + np.outer(np.exp(-rel), x - target)
        acts = np.zeros((len(rel), len(cfg.actions)))
        if k + 1 < n_seg and cfg.actions and rng.random() < 0.8:
            acts[-1, rng.integers(len(cfg.actions))] = INF
        times = t0 + rel
        segments.append(Trajectory(variables, times, np.hstack([cont, acts])))
        x, t0 = cont[-1], float(times[-1])
    return ATrace(tuple(segments), variables)


def perturb(y: ATrace, tau: float, eps: float, rng: np.random.Generator,
            drop: float = 0.1) -> ATrace:
    """Retime by ``t + A sin(w t)`` (``|A| < tau``, ``A w < 1`` keeps it monotone
    and fixes 0), move continuous values by less than ``eps`` in Euclidean norm
    and drop interior samples at random."""
    amp = rng.uniform(-0.95, 0.95) * tau
    omega = min(10.0, 0.9 / max(abs(amp), 1e-12)) * rng.uniform(0.1, 1.0)
    cont = [y.variables.index(v) for v in y.continuous_variables]
    p_drop = rng.uniform(0.0, drop)
    segments = []
    for seg in y.segments:
        times = seg.times + amp * np.sin(omega * seg.times)
        values = seg.values.copy()
        if cont:
            direction = rng.normal(size=(len(times), len(cont)))
            norms = np.linalg.norm(direction, axis=1, keepdims=True)
            direction = direction / np.where(norms > 0, norms, 1.0)
            radius = rng.uniform(0.0, 0.95 * eps, size=(len(times), 1))
            values[:, cont] += direction * radius
        keep = np.ones(len(times), dtype=bool)
        if len(times) > 2:
            keep[1:-1] = rng.random(len(times) - 2) >= p_drop
        segments.append(Trajectory(seg.variables, times[keep], values[keep]))
    return ATrace(tuple(segments), y.variables)


def _trial(seed_seq: np.random.SeedSequence, k: int, cfg: GeneratorConfig):
    rng = np.random.default_rng(seed_seq)
    redrawn = 0
    while True:
        tau1, tau2 = rng.uniform(*cfg.tau, size=2)
        eps1, eps2 = rng.uniform(*cfg.eps, size=2)
        y2 = random_base(rng, cfg)
        y1 = perturb(y2, tau1, eps1, rng, cfg.drop)
        y3 = perturb(y2, tau2, eps2, rng, cfg.drop)
        if (close_ext(y1, y2, ClosenessParams(tau1, eps1))
                and close_ext(y2, y3, ClosenessParams(tau2, eps2))):
            break
        redrawn += 1
        if redrawn > cfg.max_redraws:
            raise RuntimeError(f"trial {k}: premises failed {redrawn} times")
    if close_ext(y1, y3, ClosenessParams(tau1 + tau2, eps1 + eps2)):
        return redrawn, None
    return redrawn, Violation(k, (tau1, eps1, tau2, eps2), y1, y2, y3)


def _chunk(args):
    seeds, start, cfg = args
    return [_trial(s, start + i, cfg) for i, s in enumerate(seeds)]


def semitrans_check(trials: int = 1000, seed: int = 0, cfg: GeneratorConfig = GeneratorConfig(),
                    parallel: bool = False) -> SemitransReport:
    """Run ``trials`` independent seeded trials; results do not depend on ``parallel``."""
    seeds = np.random.SeedSequence(seed).spawn(trials)
    if parallel and trials > 1:
        n = 8
        chunks = [(seeds[i * trials // n:(i + 1) * trials // n], i * trials // n, cfg)
                  for i in range(n)]
        with ProcessPoolExecutor() as pool:
            results = [r for part in pool.map(_chunk, chunks) for r in part]
    else:
        results = _chunk((seeds, 0, cfg))
    redrawn = sum(r for r, _ in results)
    violations = tuple(v for _, v in results if v is not None)
    return SemitransReport(trials, seed, redrawn, violations)
