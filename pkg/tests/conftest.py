import numpy as np
import pytest

from orthant_ruin import build_reflection


@pytest.fixture
def sym_half():
    """Symmetric two-company treaty with proportions 0.5."""
    return build_reflection([[0.0, 0.5], [0.5, 0.0]])


@pytest.fixture
def scalar():
    return build_reflection([[0.0]])


def random_P(rng, d, density=2 / 3):
    if d == 1:
        return np.zeros((1, 1))
    P = rng.uniform(0.0, 0.9 / (d - 1), size=(d, d)) * (rng.random((d, d)) < density)
    np.fill_diagonal(P, 0.0)
    return P
