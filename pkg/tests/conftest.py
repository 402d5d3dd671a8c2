import numpy as np
import pytest

from rsmor.hamsys import GridConfig, collect_snapshots, discretize_wave
from rsmor.sympbasis import embed_complex_basis


@pytest.fixture(scope='session')
def desk_system():
    return discretize_wave(GridConfig(100, 10))


@pytest.fixture(scope='session')
def desk_snapshots(desk_system):
    return collect_snapshots(desk_system, [1.0, 2.0], 200).matrix


@pytest.fixture(scope='session')
def small_system():
    return discretize_wave(GridConfig(20, 5))


@pytest.fixture(scope='session')
def small_snapshots(small_system):
    return collect_snapshots(small_system, [1.0, 2.0], 50).matrix


def random_orthonormal_complex(N, k, seed):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((N, k)) + 1j * rng.standard_normal((N, k))
    return np.linalg.qr(Z)[0]


def exact_rank_snapshots(N, r, n_s, seed):
    """Snapshots ``S C`` spanning the range of a known orthosymplectic ``S`` (2N x 2r)."""
    S = embed_complex_basis(random_orthonormal_complex(N, r, seed)).V
    C = np.random.default_rng(seed + 1).standard_normal((2 * r, n_s))
    return S, S @ C
