"""Symplectic reduced-order basis generation.

Two families are provided:

* complex SVD (cSVD) bases, built from the complexified snapshot matrix
  ``Xc = Q_s + i P_s`` and embedded into phase space; ``cSVDFull``,
  ``cSVDPartial`` and ``cSVDEig`` differ only in how the leading left singular
  vectors are obtained, ``rcSVD`` uses a random sketch.
* SVD-like bases, built from the real Schur form of ``K = Xs^T J Xs``;
  ``rSVDLike*`` replace the Schur form of ``K`` by that of a sketched
  ``Q^T K Q``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as spla
import scipy.sparse.linalg as spsla

from rsmor.exceptions import (DimensionError, RankDeficiencyError,
                              SymplecticityError, ValidationError)
from rsmor.matkit import (SketchSpec, gaussian_test_matrix, make_rng, orthonormalize,
                          poisson_apply, real_schur_skew, sketch,
                          truncated_svd)

METHOD_TAGS = ('cSVDFull', 'cSVDPartial', 'cSVDEig', 'rcSVD',
               'SVDLike', 'rSVDLikeK', 'rSVDLikeXs', 'rSVDLikeKXs')
RANDOMIZED_TAGS = ('rcSVD', 'rSVDLikeK', 'rSVDLikeXs', 'rSVDLikeKXs')
CSVD_TAGS = ('cSVDFull', 'cSVDPartial', 'cSVDEig', 'rcSVD')

#: symplecticity tolerance per unit of k for classical / sketched SVD-like bases
CLASSICAL_DEFECT_TOL = 1e-8
RANDOMIZED_DEFECT_TOL = 1e-6


def symplecticity_defect(V):
    """``||V^T J_2N V - J_2k||_F``."""
    k = V.shape[1] // 2
    return np.linalg.norm(V.T @ poisson_apply(V) - poisson_apply(np.eye(2 * k)))


def defect_tolerance(method_tag, k):
    if method_tag in ('rSVDLikeK', 'rSVDLikeXs', 'rSVDLikeKXs'):
        return RANDOMIZED_DEFECT_TOL * k
    return CLASSICAL_DEFECT_TOL * k


@dataclass
class SymplecticBasis:
    """Symplectic reduced-order basis ``V`` of shape ``2N x 2k``."""

    V: np.ndarray
    method_tag: str = 'custom'
    sketch: Optional[SketchSpec] = None
    _inverse: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        if self.V.ndim != 2 or self.V.shape[0] % 2 or self.V.shape[1] % 2:
            raise DimensionError(f'basis must be 2N x 2k, got {self.V.shape}')

    @property
    def half_rank(self):
        return self.V.shape[1] // 2

    @property
    def half_dim(self):
        return self.V.shape[0] // 2

    def defect(self):
        return symplecticity_defect(self.V)

    def symplectic_inverse(self, tol=None):
        if self._inverse is None:
            self._inverse = symplectic_inverse(self, tol=tol)
        return self._inverse


@dataclass
class SVDLikeFactors:
    """Symplectic singular values and the selected columns of ``P``."""

    sigmas: np.ndarray
    p: int
    P_cols: np.ndarray


def symplectic_inverse(V, tol=None):
    """``V^+ = J_2k V^T J_2N^T``, the left inverse of a symplectic ``V``.

    Raises :class:`SymplecticityError` if the defect of `V` exceeds `tol`
    (default: the tolerance of the basis' method).
    """
    basis = V if isinstance(V, SymplecticBasis) else SymplecticBasis(V)
    k = basis.half_rank
    if tol is None:
        tol = defect_tolerance(basis.method_tag, max(k, 1))
    d = basis.defect()
    if d > tol:
        raise SymplecticityError('basis is not symplectic', d)
    # J_2N^T = -J_2N, so V^T J_2N^T = (J_2N V)^T
    return poisson_apply(poisson_apply(basis.V).T)


# ---------------------------------------------------------------------------
# complex SVD family
# ---------------------------------------------------------------------------

def _matrix(Xs):
    return np.asarray(getattr(Xs, 'matrix', Xs), dtype=float)


def complexify(Xs):
    """``Xc = Xs[:N] + i Xs[N:]``."""
    Xs = _matrix(Xs)
    if Xs.shape[0] % 2:
        raise DimensionError(f'snapshot matrix needs an even row count, got {Xs.shape[0]}')
    N = Xs.shape[0] // 2
    return Xs[:N] + 1j * Xs[N:]


def embed_complex_basis(U_C, method_tag='custom', sketch_spec=None, tol=1e-8):
    """Map ``U_C = V_Q + i V_P`` with orthonormal columns to ``[[V_Q, -V_P], [V_P, V_Q]]``."""
    U_C = np.asarray(U_C, dtype=complex)
    if U_C.ndim != 2:
        raise DimensionError('U_C must be a matrix')
    k = U_C.shape[1]
    d = np.linalg.norm(U_C.conj().T @ U_C - np.eye(k))
    if d > tol:
        raise SymplecticityError('complex basis is not orthonormal', d)
    VQ, VP = U_C.real, U_C.imag
    V = np.block([[VQ, -VP], [VP, VQ]])
    return SymplecticBasis(V, method_tag, sketch_spec)


def _check_k(k, limit, what):
    if not 1 <= k <= limit:
        raise ValidationError(f'k={k} outside [1, {limit}] ({what})')


def csvd_basis(Xs, k, variant='Full'):
    """Classical cSVD basis of half rank `k`.

    ``variant`` selects how the leading left singular vectors of ``Xc`` are
    computed: ``'Full'`` truncates a complete thin SVD, ``'Partial'`` runs an
    iterative (ARPACK) partial SVD, ``'Eig'`` lifts eigenvectors of the
    ``n_s x n_s`` Gram matrix ``Xc^H Xc`` as ``Xc v_j / sqrt(lambda_j)``.
    """
    Xc = complexify(Xs)
    N, n_s = Xc.shape
    _check_k(k, min(N, n_s), 'min(N, n_s)')
    if variant == 'Full':
        U_C, _, _ = truncated_svd(Xc, k)
    elif variant == 'Partial':
        if k >= min(N, n_s):
            raise ValidationError('partial SVD needs k < min(N, n_s)')
        U, s, _ = spsla.svds(Xc, k=k, which='LM', random_state=0)
        U_C = U[:, np.argsort(s)[::-1]]
    elif variant == 'Eig':
        G = Xc.conj().T @ Xc
        lam, v = spla.eigh(G, subset_by_index=[n_s - k, n_s - 1])
        lam, v = lam[::-1], v[:, ::-1]
        if lam[-1] <= 1e-14 * lam[0]:
            raise RankDeficiencyError('Gram eigenvalue numerically zero',
                                      int(np.count_nonzero(lam > 1e-14 * lam[0])))
        U_C = Xc @ (v / np.sqrt(lam))
    else:
        raise ValidationError(f'unknown cSVD variant {variant!r}')
    return embed_complex_basis(U_C, 'cSVD' + variant)


def rcsvd_basis(Xs, k, spec=None):
    """Randomized complex SVD basis.

    The left singular vectors of the sketch ``Y = Xc (Xc^H Xc)^q Omega``
    directly serve as ``U_C``; the sketch's target rank is taken from `k`.
    """
    Xc = complexify(Xs)
    N, n_s = Xc.shape
    if spec is None:
        spec = SketchSpec(k, kind='srft')
    elif spec.target_rank != k:
        raise ValidationError(f'sketch target rank {spec.target_rank} differs from k={k}')
    if spec.width > min(N, n_s):
        raise ValidationError(f'sketch width {spec.width} exceeds min(N, n_s) = {min(N, n_s)}')
    Y = sketch(Xc, spec)
    U, s, _ = spla.svd(Y, full_matrices=False)
    rank = int(np.count_nonzero(s > max(Y.shape) * np.finfo(float).eps * s[0])) if s[0] > 0 else 0
    if rank < k:
        raise RankDeficiencyError(f'sketch has rank below k={k}', rank)
    return embed_complex_basis(U[:, :k], 'rcSVD', spec)


# ---------------------------------------------------------------------------
# SVD-like family
# ---------------------------------------------------------------------------

def apply_K(Xs, M):
    """``K M`` with ``K = Xs^T J Xs``, without forming ``K``."""
    return Xs.T @ poisson_apply(Xs @ M)


def form_K(Xs):
    """``K = Xs^T J Xs`` (skew-symmetric, ``n_s x n_s``)."""
    Xs = _matrix(Xs)
    return Xs.T @ poisson_apply(Xs)


def sketch_widths(width):
    """Split of the KXs sketch into ``(ceil(w/2), floor(w/2))`` columns."""
    return (width + 1) // 2, width // 2


def _K_power_sketch(Xs, Omega, q):
    Y = apply_K(Xs, Omega)
    for _ in range(2 * q):
        Y = apply_K(Xs, orthonormalize(Y))
    return Y


def _Xs_power_sketch(Xs, Omega, q):
    Y = Xs.T @ Omega
    for _ in range(q):
        Y = Xs.T @ orthonormalize(Xs @ orthonormalize(Y))
    return Y


def compute_sketch_range(variant, Xs, k, p_ovs=0, q_pow=0, seed=0):
    """Orthonormal ``Q`` (``n_s`` rows, up to ``k + p_ovs`` columns) for rSVD-like.

    ``'K'``: ``orth(K^(2q+1) Omega_K)``; ``'Xs'``: ``orth(Xs^T (Xs Xs^T)^q Omega_X)``;
    ``'KXs'``: both, with ``ceil`` / ``floor`` of half the width each. Here `k`
    is the target rank of the sketch itself. Power iterates are
    re-orthonormalized after every multiplication (same range, no loss of the
    small singular directions).
    """
    Xs = _matrix(Xs)
    two_n, n_s = Xs.shape
    width = k + p_ovs
    if k < 1 or p_ovs < 0 or q_pow < 0:
        raise ValidationError('need k >= 1, p_ovs >= 0, q_pow >= 0')
    if width > n_s:
        raise ValidationError(f'sketch width {width} exceeds n_s = {n_s}')
    if variant == 'K':
        Y = _K_power_sketch(Xs, gaussian_test_matrix(n_s, width, seed), q_pow)
    elif variant == 'Xs':
        Y = _Xs_power_sketch(Xs, gaussian_test_matrix(two_n, width, seed), q_pow)
    elif variant == 'KXs':
        wk, wx = sketch_widths(width)
        rng = make_rng(seed)
        Omega_K = rng.standard_normal((n_s, wk))
        Omega_X = rng.standard_normal((two_n, wx))
        # the two halves scale like sigma^2 and sigma; orthonormalize them
        # separately so the joint rank decision is not dominated by the K half
        parts = [orthonormalize(_K_power_sketch(Xs, Omega_K, q_pow))]
        if wx:
            parts.append(orthonormalize(_Xs_power_sketch(Xs, Omega_X, q_pow)))
        Y = np.hstack(parts)
    else:
        raise ValidationError(f'unknown computeQ variant {variant!r}')
    return orthonormalize(Y)


def _svd_like_from_schur(Xs, schur, k, Q=None):
    p = schur.rank
    if p < k:
        raise RankDeficiencyError(f'symplectic rank below k={k}', p)
    n = schur.U.shape[0]
    perm = list(range(0, 2 * p, 2)) + list(range(1, 2 * p, 2)) + list(range(2 * p, n))
    P = schur.U[:, perm]
    if Q is not None:
        P = Q @ P
    sigmas = np.sqrt(schur.sigma_squares)
    cols = np.hstack([P[:, :k], P[:, p:p + k]])
    V = Xs @ (cols / np.concatenate([sigmas[:k], sigmas[:k]]))
    return V, SVDLikeFactors(sigmas, p, cols)


def svd_like_basis(Xs, k):
    """Classical SVD-like basis of half rank `k` from the Schur form of ``K``."""
    Xs = _matrix(Xs)
    if k < 1:
        raise ValidationError('k must be >= 1')
    schur = real_schur_skew(form_K(Xs))
    V, factors = _svd_like_from_schur(Xs, schur, k)
    return SymplecticBasis(V, 'SVDLike'), factors


def rsvd_like_basis(Xs, k, p_ovs=0, q_pow=0, variant='KXs', seed=0):
    """Randomized SVD-like basis of half rank `k`.

    The sketch targets the rank ``2k`` of the basis, i.e. it has up to
    ``2k + p_ovs`` columns, enough to hold ``k`` Schur blocks of ``Q^T K Q``.
    The selected Schur vectors are lifted back with ``Q`` before multiplying
    by ``Xs``.
    """
    Xs = _matrix(Xs)
    if k < 1:
        raise ValidationError('k must be >= 1')
    Q = compute_sketch_range(variant, Xs, 2 * k, p_ovs, q_pow, seed)
    XQ = Xs @ Q
    K_s = XQ.T @ poisson_apply(XQ)
    schur = real_schur_skew(K_s)
    V, factors = _svd_like_from_schur(Xs, schur, k, Q=Q)
    spec = SketchSpec(2 * k, p_ovs, q_pow, 'gaussian', seed)
    return SymplecticBasis(V, 'rSVDLike' + variant, spec), factors


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def generate_basis(method_tag, Xs, k, p_ovs=0, q_pow=0, seed=0, sketch_kind='srft'):
    """Build a basis by method tag (see :data:`METHOD_TAGS`)."""
    if method_tag in ('cSVDFull', 'cSVDPartial', 'cSVDEig'):
        return csvd_basis(Xs, k, method_tag[4:])
    if method_tag == 'rcSVD':
        return rcsvd_basis(Xs, k, SketchSpec(k, p_ovs, q_pow, sketch_kind, seed))
    if method_tag == 'SVDLike':
        return svd_like_basis(Xs, k)[0]
    if method_tag.startswith('rSVDLike'):
        return rsvd_like_basis(Xs, k, p_ovs, q_pow, method_tag[len('rSVDLike'):], seed)[0]
    raise ValidationError(f'unknown method tag {method_tag!r}')


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

_HEADER = '# rsmor-basis'


def save_basis(path, basis):
    """Plain-text basis file.

    First line ``# rsmor-basis rows=<2N> cols=<2k> method=<tag> seed=<seed|none>``,
    then one matrix row per line with ``%.17g`` entries, so reading it back is
    exact.
    """
    seed = basis.sketch.seed if basis.sketch is not None else 'none'
    rows, cols = basis.V.shape
    header = f'rsmor-basis rows={rows} cols={cols} method={basis.method_tag} seed={seed}'
    np.savetxt(path, basis.V, fmt='%.17g', header=header, comments='# ')


def load_basis(path):
    """Read a file written by :func:`save_basis`. Returns ``(basis, seed)``."""
    with open(path) as f:
        first = f.readline().strip()
    if not first.startswith(_HEADER):
        raise ValidationError(f'{path} is not a basis file')
    meta = dict(item.split('=', 1) for item in first[len(_HEADER):].split())
    rows, cols = int(meta['rows']), int(meta['cols'])
    V = np.loadtxt(path, ndmin=2)
    if V.shape != (rows, cols):
        raise DimensionError(f'header says {rows}x{cols}, data is {V.shape[0]}x{V.shape[1]}')
    seed = None if meta['seed'] == 'none' else int(meta['seed'])
    return SymplecticBasis(V, meta['method']), seed
