import pytest

from cavity_ising.dynamics import run_quench
from cavity_ising.stationary import find_bifurcations
from cavity_ising.tfim import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def bifurcation(params):
    return find_bifurcations(params)


@pytest.fixture(scope="session")
def quench(params):
    return run_quench(params)
