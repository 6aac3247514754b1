import numpy as np
import pytest

from qi_lab import qi_core


def random_product_state(rng, n_systems=None, max_dim=4):
    """Seeded random pure product state with per-system dimension <= max_dim."""
    n = n_systems if n_systems is not None else int(rng.integers(1, 4))
    systems = []
    for _ in range(n):
        dim = int(rng.integers(2, max_dim + 1))
        amps = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        amps /= np.linalg.norm(amps)
        systems.append(qi_core.SystemState(range(dim), amps.tolist()))
    return qi_core.ProductState(systems)


def matching_random_unitary(state, seed):
    windows = [list(s.labels) for s in state.systems]
    return qi_core.random_unitary_operator(windows, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
