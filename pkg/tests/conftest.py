import numpy as np
import pytest

from covertlqr import DesignWeights, LinearSystem


@pytest.fixture
def double_integrator() -> LinearSystem:
    return LinearSystem(A=[[0.0, 1.0], [0.0, 0.0]], B=[[1.0], [1.0]], C=[[1.0, 0.0]])


@pytest.fixture
def di_weights():
    """Weight factory for the double-integrator benchmark config."""
    def make(lam: float = 0.1, epsilon: float = 1e-4, delta: float = 1e-3) -> DesignWeights:
        return DesignWeights(Q=0.2 * np.eye(2), R=[[1.0]], V=np.eye(2),
                             lam=lam, epsilon=epsilon, delta=delta)
    return make


@pytest.fixture
def scalar_system() -> LinearSystem:
    return LinearSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]])


@pytest.fixture
def scalar_weights() -> DesignWeights:
    return DesignWeights(Q=[[1.0]], R=[[1.0]], V=[[1.0]],
                         lam=1.0, epsilon=1e-4, delta=1e-3)


def random_hurwitz(rng: np.random.Generator, n: int, margin: float = 0.5) -> np.ndarray:
    """Random matrix shifted so every eigenvalue sits left of -margin."""
    G = rng.standard_normal((n, n))
    shift = np.linalg.eigvals(G).real.max() + margin
    return G - shift * np.eye(n)


def random_controllable(rng: np.random.Generator, n: int, m: int):
    """Random (A, B); controllable with probability one."""
    return rng.standard_normal((n, n)), rng.standard_normal((n, m))
