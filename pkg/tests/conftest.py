import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from localsgd import problems


@pytest.fixture(scope="session")
def small_dataset():
    """400-point, 5-feature dataset; big enough for gradient tests, fast."""
    return problems.generate_figure1_dataset(400, 5, seed=11)


@pytest.fixture(scope="session")
def small_logistic(small_dataset):
    return problems.logistic_objective(small_dataset)


@pytest.fixture(scope="session")
def unit_quadratic_1d():
    """F(x) = x^2/2 with +/-1 gradient noise, optimum at 0."""
    return problems.QuadraticProblem(np.array([[1.0]]), np.array([0.0]), 1.0)
