import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

from condcenter import coupling as cpl
from condcenter.ising import IsingModel
from condcenter.measure import make_discrete, make_rademacher


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture
def three_atom():
    return make_discrete([(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)])


def curie_weiss(n, beta, b, measure=None):
    return IsingModel(cpl.complete_graph(n), beta, b, measure or make_rademacher())


# acceptance outcomes: criterion number -> (passed, detail)
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
