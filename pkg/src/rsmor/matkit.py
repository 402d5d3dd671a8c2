"""Dense linear-algebra building blocks.

Everything here works on plain :class:`numpy.ndarray` objects. Phase-space
matrices are stored with the ``q`` block in the first ``N`` rows and the ``p``
block in the last ``N`` rows, so the canonical Poisson matrix

    J = [[0, I], [-I, 0]]

never has to be formed explicitly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from rsmor.exceptions import DimensionError, ValidationError

#: relative threshold on sigma_i^2 / sigma_1^2 below which Schur blocks count as zero
SCHUR_RANK_TOL = 1e-12


def _check_finite(M, name='matrix'):
    if not np.all(np.isfinite(M)):
        raise ValidationError(f'{name} contains NaN or Inf entries')


# ---------------------------------------------------------------------------
# Poisson structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoissonStructure:
    """The canonical Poisson matrix ``J_{2N}`` of half dimension ``half_dim``."""

    half_dim: int

    def __post_init__(self):
        if self.half_dim < 1:
            raise ValidationError('half_dim must be positive')

    @property
    def dim(self):
        return 2 * self.half_dim

    def apply(self, M):
        return poisson_apply(M, self.half_dim)

    def apply_transpose(self, M):
        return poisson_apply(M, self.half_dim, transpose=True)

    def to_dense(self):
        return poisson_apply(np.eye(self.dim), self.half_dim)


def poisson_apply(M, half_dim=None, transpose=False):
    """Apply ``J_{2N}`` (or its transpose) to the rows of `M`.

    Parameters
    ----------
    M
        Array with ``2N`` rows (a 1d array is treated as a single column).
    half_dim
        ``N``. Inferred from the row count if omitted.
    transpose
        Apply ``J^T = -J`` instead of ``J``.

    Returns
    -------
    ``[M_p; -M_q]`` for ``J`` and ``[-M_p; M_q]`` for ``J^T``. The result is
    computed by a block swap and a negation only.
    """
    M = np.asarray(M)
    rows = M.shape[0]
    if rows % 2 != 0:
        raise DimensionError(f'Poisson matrix needs an even row count, got {rows}')
    if half_dim is None:
        half_dim = rows // 2
    elif rows != 2 * half_dim:
        raise DimensionError(f'expected {2 * half_dim} rows, got {rows}')
    q, p = M[:half_dim], M[half_dim:]
    if transpose:
        return np.concatenate([-p, q], axis=0)
    return np.concatenate([p, -q], axis=0)


def poisson_matrix(half_dim):
    """Dense ``J_{2N}``. Only meant for tests and tiny problems."""
    return PoissonStructure(half_dim).to_dense()


# ---------------------------------------------------------------------------
# Orthonormalization and SVD
# ---------------------------------------------------------------------------

def orthonormalize(M, rtol=None):
    """Orthonormal basis of ``range(M)`` via a column-pivoted thin QR.

    Columns whose pivot ``|R_ii|`` falls below ``rtol * |R_00|`` are dropped, so
    the result may have fewer columns than `M` when `M` is numerically rank
    deficient. An all-zero input yields an ``m x 0`` array.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise DimensionError(f'orthonormalize needs a non-empty 2d array, got shape {M.shape}')
    _check_finite(M)
    m, r = M.shape
    if rtol is None:
        rtol = max(m, r) * np.finfo(float).eps
    Q, R, _ = spla.qr(M, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return Q[:, :0]
    rank = int(np.count_nonzero(diag > rtol * diag[0]))
    return Q[:, :rank]


def truncated_svd(M, k):
    """Leading `k` singular triplets of `M` (real or complex).

    Returns
    -------
    U
        ``m x k`` left singular vectors.
    s
        The `k` largest singular values, nonincreasing.
    V
        ``l x k`` right singular vectors, so that ``M ~ U @ diag(s) @ V^H``.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionError('truncated_svd expects a matrix')
    _check_finite(M)
    m, l = M.shape
    if not 1 <= k <= min(m, l):
        raise ValidationError(f'k={k} outside [1, {min(m, l)}]')
    U, s, Vh = spla.svd(M, full_matrices=False, lapack_driver='gesdd')
    return U[:, :k], s[:k], Vh[:k].conj().T


# ---------------------------------------------------------------------------
# Random test matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SketchSpec:
    """Parameters of a randomized range finder.

    ``kind`` is ``'gaussian'`` or ``'srft'``. The sketch has
    ``target_rank + oversampling`` columns.
    """

    target_rank: int
    oversampling: int = 0
    power_iterations: int = 0
    kind: str = 'gaussian'
    seed: int = 0

    def __post_init__(self):
        if self.target_rank < 1:
            raise ValidationError('target_rank must be >= 1')
        if self.oversampling < 0 or self.power_iterations < 0:
            raise ValidationError('oversampling and power_iterations must be >= 0')
        if self.kind not in ('gaussian', 'srft'):
            raise ValidationError(f'unknown sketch kind {self.kind!r}')

    @property
    def width(self):
        return self.target_rank + self.oversampling


def make_rng(seed):
    """Counter-based generator (Philox) for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seeds(master_seed, count):
    """`count` independent 64-bit seeds split off `master_seed`."""
    ss = np.random.SeedSequence(int(master_seed))
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def gaussian_test_matrix(rows, cols, seed, complex_=False):
    """I.i.d. standard normal ``rows x cols`` matrix.

    With ``complex_=True`` the real and imaginary parts are independent with
    variance 1/2 each, so entries have unit variance.
    """
    if rows < 1 or cols < 1:
        raise DimensionError(f'invalid test matrix shape ({rows}, {cols})')
    rng = make_rng(seed)
    if complex_:
        G = rng.standard_normal((rows, 2 * cols))
        return (G[:, :cols] + 1j * G[:, cols:]) / np.sqrt(2)
    return rng.standard_normal((rows, cols))


def _srft_factors(rows, cols, seed):
    if rows < 1 or cols < 1:
        raise DimensionError(f'invalid test matrix shape ({rows}, {cols})')
    if cols > rows:
        raise ValidationError(f'SRFT needs cols <= rows, got {cols} > {rows}')
    rng = make_rng(seed)
    phases = np.exp(2j * np.pi * rng.random(rows))
    idx = rng.choice(rows, size=cols, replace=False)
    return phases, idx, np.sqrt(rows / cols)


def srft_test_matrix(rows, cols, seed):
    """Dense SRFT test matrix ``sqrt(l/c) * D F R`` of shape ``l x c``.

    ``D`` holds uniform unit-modulus phases, ``F`` is the unitary DFT of size
    ``l`` and ``R`` selects `cols` distinct columns uniformly at random.
    """
    phases, idx, scale = _srft_factors(rows, cols, seed)
    F_cols = np.exp(-2j * np.pi * np.outer(np.arange(rows), idx) / rows) / np.sqrt(rows)
    return scale * phases[:, None] * F_cols


def srft_sketch(B, cols, seed):
    """``B @ srft_test_matrix(B.shape[1], cols, seed)`` via one FFT per row."""
    B = np.asarray(B)
    phases, idx, scale = _srft_factors(B.shape[1], cols, seed)
    return scale * np.fft.fft(B * phases, axis=1, norm='ortho')[:, idx]


def sketch(B, spec):
    """Random sketch with the range of ``B (B^H B)^q Omega``.

    Between the factors of a power iteration the intermediate product is
    re-orthonormalized. This does not change the range but keeps directions
    whose singular values fall below ``eps^(1/(2q+1))`` from being lost.
    """
    B = np.asarray(B)
    _check_finite(B, 'B')
    m, l = B.shape
    if spec.width > min(m, l):
        raise ValidationError(f'sketch width {spec.width} exceeds min(m, l) = {min(m, l)}')
    if spec.kind == 'srft':
        Y = srft_sketch(B, spec.width, spec.seed)
    else:
        Y = B @ gaussian_test_matrix(l, spec.width, spec.seed)
    for _ in range(spec.power_iterations):
        Z = orthonormalize(B.conj().T @ orthonormalize(Y))
        Y = B @ Z
    return Y


def randomized_range(B, spec):
    """Orthonormal ``Q`` with ``B ~ Q Q^H B`` (random sampling range finder)."""
    return orthonormalize(sketch(B, spec))


# ---------------------------------------------------------------------------
# Real Schur form of skew-symmetric matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SkewSchurResult:
    """``K = U T U^T`` with ``T`` made of ``[[0, s], [-s, 0]]`` blocks, ``s`` descending."""

    U: np.ndarray
    T: np.ndarray
    sigma_squares: np.ndarray

    @property
    def rank(self):
        """Number of nonzero 2x2 blocks (half the numerical rank of ``K``)."""
        return len(self.sigma_squares)


def real_schur_skew(K, rtol=SCHUR_RANK_TOL):
    """Sorted, sign-normalized real Schur decomposition of a skew-symmetric matrix.

    LAPACK's real Schur form of a normal matrix is block diagonal. The 2x2
    blocks are oriented so that the superdiagonal entry is positive, sorted by
    decreasing magnitude and truncated at ``sigma^2 > rtol * sigma_1^2``. All
    remaining Schur vectors span the (numerical) kernel and follow the blocks.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f'real_schur_skew needs a square matrix, got {K.shape}')
    _check_finite(K, 'K')
    n = K.shape[0]
    nrm = np.linalg.norm(K)
    if nrm == 0:
        return SkewSchurResult(np.eye(n), np.zeros((n, n)), np.zeros(0))
    if np.linalg.norm(K + K.T) > 1e-8 * nrm:
        raise ValidationError('matrix is not skew-symmetric')
    K = 0.5 * (K - K.T)

    T, U = spla.schur(K, output='real')
    pairs = []  # (sigma^2, first column, second column)
    rest = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0:
            s2 = 0.5 * (T[i, i + 1] - T[i + 1, i])
            if s2 >= 0:
                pairs.append((s2, i, i + 1))
            else:
                pairs.append((-s2, i + 1, i))
            i += 2
        else:
            rest.append(i)
            i += 1

    pairs.sort(key=lambda t: -t[0])
    sigma1 = pairs[0][0] if pairs else 0.0
    kept = [t for t in pairs if t[0] > rtol * sigma1]
    rest += [c for t in pairs[len(kept):] for c in t[1:]]

    order = [c for t in kept for c in t[1:]] + rest
    U = U[:, order]
    s2 = np.array([t[0] for t in kept])
    T_std = np.zeros((n, n))
    for j, s in enumerate(s2):
        T_std[2 * j, 2 * j + 1] = s
        T_std[2 * j + 1, 2 * j] = -s
    return SkewSchurResult(U, T_std, s2)
