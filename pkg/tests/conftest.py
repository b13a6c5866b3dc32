import numpy as np
import pytest

from asaopt.core import ParameterSpec, ProblemSpec


def quadratic(a, lower=-5.0, upper=5.0, initial=None):
    """``sum a_i x_i^2`` over a box; handy analytic oracle."""
    a = np.asarray(a, dtype=float)
    init = [1.0] * a.size if initial is None else initial
    params = tuple(ParameterSpec(f"x{i}", lower, upper, "real", init[i]) for i in range(a.size))
    return ProblemSpec(params, lambda x: float(np.dot(a, np.asarray(x) ** 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
