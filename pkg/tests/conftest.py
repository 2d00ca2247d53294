from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ghconj.systems import (HyperbolicLinearField, HyperbolicLinearMap, MapSystem, OdeSystem,
                            Perturbation)

settings.register_profile("ci", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def e1_map(lam=1.0):
    return MapSystem(HyperbolicLinearMap([[2.0]], [[0.5]]), Perturbation.sine(0.05, SWAP), lam)


def e1_cos_map(lam=1.0):
    return MapSystem(HyperbolicLinearMap([[2.0]], [[0.5]]), Perturbation.cosine(0.05, SWAP), lam)


def e2_ode(lam=1.0):
    return OdeSystem(HyperbolicLinearField([[1.0]], [[-1.0]]), Perturbation.sine(0.05, SWAP), lam)


@pytest.fixture
def e1():
    return e1_map()


@pytest.fixture
def e1_cos():
    return e1_cos_map()


@pytest.fixture
def e2():
    return e2_ode()


@pytest.fixture
def linear_e1():
    return HyperbolicLinearMap([[2.0]], [[0.5]])


@pytest.fixture
def configs():
    return CONFIGS


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
