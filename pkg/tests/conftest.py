import math

import numpy as np
import pytest

from isonet import generators as gen


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def catenoid():
    return gen.discrete_catenoid(8, 20)


@pytest.fixture(scope="session")
def cylinder():
    return gen.discrete_cylinder(N=8, M=5, delta=0.3, alpha=0.5, closed=True)


@pytest.fixture(scope="session")
def cylinder_open():
    return gen.discrete_cylinder(N=8, M=6, delta=0.3, alpha=0.5, closed=False)


def random_concircular_quad(rng, planar_order=True):
    """Four points on a random circle in R^3, in cyclic order."""
    c = rng.normal(size=3)
    r = math.exp(rng.normal() * 0.5)
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    v = rng.normal(size=3)
    v -= (v @ u) * u
    v /= np.linalg.norm(v)
    th = np.sort(rng.uniform(0, 2 * math.pi, 4)) if planar_order else rng.uniform(0, 2 * math.pi, 4)
    return [c + r * (math.cos(t) * u + math.sin(t) * v) for t in th]


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the lines are repeated in the terminal summary."""
    log = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number, passed, text):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {text}"
        print(line)
        log.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log, key=lambda x: x[0]):
            terminalreporter.write_line(line)
