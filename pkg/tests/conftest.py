import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hybridconf.automata import build_thermostat
from hybridconf.core import ATrace, Trajectory
from hybridconf.simulate import SimConfig, Stimulus, run, solution_pair

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

LN75 = math.log(7.5)
LN9 = math.log(9.0)


def thermostat_exact(t):
    """Closed-form x(t) for the urgent thermostat run from x = 5.

    Heating from x0 gives 20 - (20 - x0) e^-dt, cooling gives x0 e^-dt; the
    loop alternates 18 -> 2 (ln 9) and 2 -> 18 (ln 9) after the first ln 7.5.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    for k, s in enumerate(t.flat):
        if s <= LN75:
            out.flat[k] = 20.0 - 15.0 * math.exp(-s)
            continue
        n, r = divmod(s - LN75, LN9)
        if int(n) % 2 == 0:
            out.flat[k] = 18.0 * math.exp(-r)
        else:
            out.flat[k] = 20.0 - 18.0 * math.exp(-r)
    return out


def shifted_copy(y: ATrace, dt: float, dv: float) -> ATrace:
    """y2(t + dt) = y1(t) + dv on continuous columns; action columns kept."""
    segs = []
    for s in y.segments:
        vals = s.values.copy()
        cont = [y.variables.index(v) for v in y.continuous_variables]
        vals[:, cont] += dv
        segs.append(Trajectory(s.variables, s.times + dt, vals))
    return ATrace(tuple(segs), y.variables)


@pytest.fixture(scope="session")
def thermostat():
    return build_thermostat()


@pytest.fixture(scope="session")
def run10(thermostat):
    return run(thermostat, Stimulus(10.0), SimConfig())


@pytest.fixture(scope="session")
def y10(thermostat, run10):
    return solution_pair(thermostat, run10).y
