import numpy as np
import pytest

from rbsde2b.config import load_config
from rbsde2b.model import Absent, GeneratorSpec, Markovian, Problem


def zero_generator(mu=0.0):
    return GeneratorSpec(lambda t, y, z: np.zeros(np.broadcast(y, z).shape), mu)


def abs_generator():
    return GeneratorSpec(lambda t, y, z: -5.0 * np.abs(y + z) - 1.0, 5.0)


def martingale_problem(T=1.0):
    return Problem(T, zero_generator(), Markovian(lambda x: x), Absent(), Absent())


@pytest.fixture(scope="session")
def table5():
    return load_config("table5").problem()


@pytest.fixture(scope="session")
def fig1():
    return load_config("fig1").problem()
