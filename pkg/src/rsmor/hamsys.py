"""Linear Hamiltonian full-order models and implicit midpoint time stepping.

The 2D wave equation ``u_tt = mu^2 * Laplace(u)`` on a rectangle with
homogeneous Dirichlet boundary is discretized with three-point central
differences on the interior nodes of an equidistant grid. With ``q = u`` and
``p = u_t`` this gives the canonical system ``x' = J A(mu) x`` with

    A(mu) = [[mu^2 (D_11 + D_22), 0], [0, I]].

Unknowns are ordered xi_1-major (the xi_2 index runs fastest).
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
import scipy.linalg as spla
import scipy.sparse as sps
import scipy.sparse.linalg as spsla

from rsmor.exceptions import DimensionError, NumericalError, ValidationError
from rsmor.matkit import poisson_apply

#: per-step residual bound for the linear solves, relative to the right-hand side
SOLVE_RTOL = 1e-12


@dataclass(frozen=True)
class GridConfig:
    """Interior grid of ``n_x1 x n_x2`` nodes on ``(0, length_x1) x (0, length_x2)``."""

    n_x1: int = 1000
    n_x2: int = 20
    length_x1: float = 1.0
    length_x2: float = 0.2

    def __post_init__(self):
        if self.n_x1 < 3 or self.n_x2 < 3:
            raise ValidationError(f'grid needs at least 3 nodes per direction, got {self.n_x1}x{self.n_x2}')

    @property
    def N(self):
        return self.n_x1 * self.n_x2

    @property
    def spacing(self):
        return self.length_x1 / (self.n_x1 + 1), self.length_x2 / (self.n_x2 + 1)

    def nodes(self):
        """Coordinates of the ``N`` unknowns as an ``N x 2`` array."""
        h1, h2 = self.spacing
        x1 = h1 * np.arange(1, self.n_x1 + 1)
        x2 = h2 * np.arange(1, self.n_x2 + 1)
        X1, X2 = np.meshgrid(x1, x2, indexing='ij')
        return np.column_stack([X1.ravel(), X2.ravel()])


@dataclass
class LinearHamiltonianSystem:
    """Canonical linear Hamiltonian system ``x' = J A(mu) x``.

    ``A(mu) = sum_i coefficients[i](mu) * operators[i]`` with symmetric positive
    semidefinite (sparse or dense) terms. The affine split lets reduced
    operators be projected once, independently of ``mu``.
    """

    half_dim: int
    operators: Sequence
    coefficients: Sequence[Callable[[float], float]]
    initial_value: Callable[[float], np.ndarray]
    time_interval: Callable[[float], Tuple[float, float]]

    def __post_init__(self):
        if len(self.operators) != len(self.coefficients):
            raise ValidationError('need one coefficient function per operator term')
        for op in self.operators:
            if op.shape != (2 * self.half_dim, 2 * self.half_dim):
                raise DimensionError(f'operator term has shape {op.shape}, expected {2 * self.half_dim} square')

    @property
    def dim(self):
        return 2 * self.half_dim

    def operator(self, mu):
        terms = [c(mu) * op for c, op in zip(self.coefficients, self.operators)]
        A = terms[0]
        for t in terms[1:]:
            A = A + t
        return A

    def hamiltonian(self, x, mu):
        return hamiltonian(self, x, mu)


@dataclass
class Trajectory:
    """States ``x_0, ..., x_nt`` stored as the columns of ``states``."""

    states: np.ndarray
    times: np.ndarray
    mu: float

    @property
    def n_t(self):
        return self.states.shape[1] - 1

    def __len__(self):
        return self.states.shape[1]


@dataclass
class SnapshotMatrix:
    """Snapshot columns together with the ``(mu, step index)`` they came from."""

    matrix: np.ndarray
    provenance: List[Tuple[float, int]] = field(default_factory=list)

    @property
    def n_s(self):
        return self.matrix.shape[1]


# ---------------------------------------------------------------------------
# wave equation
# ---------------------------------------------------------------------------

def bump(s):
    """Cubic spline bump: 1 at ``s = 0``, supported on ``|s| <= 2``."""
    s = np.abs(np.asarray(s, dtype=float))
    return np.where(s <= 1, 1 - 1.5 * s**2 + 0.75 * s**3,
                    np.where(s <= 2, 0.25 * (2 - s)**3, 0.0))


def second_difference(n, h):
    """Positive definite 1D stencil ``(-1, 2, -1) / h^2`` with Dirichlet boundary."""
    return sps.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h**2


def discretize_wave(grid=None):
    """Finite-difference wave equation as a :class:`LinearHamiltonianSystem`.

    The wave speed ``mu`` enters as ``mu^2`` in front of the stiffness block,
    the final time is ``2 / mu`` and the initial displacement is the bump
    ``h(10 (xi_1 - 1/2))`` with zero initial velocity.
    """
    grid = GridConfig() if grid is None else grid
    h1, h2 = grid.spacing
    D11 = sps.kron(second_difference(grid.n_x1, h1), sps.identity(grid.n_x2))
    D22 = sps.kron(sps.identity(grid.n_x1), second_difference(grid.n_x2, h2))
    N = grid.N
    Z = sps.csr_matrix((N, N))
    stiffness = sps.bmat([[D11 + D22, None], [None, Z]], format='csc')
    mass = sps.bmat([[Z, None], [None, sps.identity(N)]], format='csc')

    u0 = bump(10 * (grid.nodes()[:, 0] - 0.5))
    x0 = np.concatenate([u0, np.zeros(N)])

    def initial_value(mu):
        return x0.copy()

    return LinearHamiltonianSystem(
        half_dim=N,
        operators=[stiffness, mass],
        coefficients=[lambda mu: mu**2, lambda mu: 1.0],
        initial_value=initial_value,
        time_interval=lambda mu: (0.0, 2.0 / mu),
    )


# ---------------------------------------------------------------------------
# Hamiltonian and time integration
# ---------------------------------------------------------------------------

def hamiltonian(sys, x, mu):
    """``H(x; mu) = x^T A(mu) x / 2``. Columns of a 2d `x` are evaluated separately."""
    x = np.asarray(x)
    if x.shape[0] != sys.dim:
        raise DimensionError(f'state has {x.shape[0]} entries, system dimension is {sys.dim}')
    Ax = sys.operator(mu) @ x
    return 0.5 * np.sum(x * Ax, axis=0)


class MidpointStepper:
    """Implicit midpoint map for ``x' = J A x`` with a fixed step size.

    The system matrix ``I - dt/2 J A`` is factorized once; every call to
    :meth:`step` costs one sparse (or dense) triangular solve pair.
    """

    def __init__(self, A, dt, check_residual=True):
        if A.shape[0] != A.shape[1] or A.shape[0] % 2:
            raise DimensionError(f'operator must be square with even size, got {A.shape}')
        self.dt = dt
        self.check_residual = check_residual
        self.sparse = sps.issparse(A)
        if self.sparse:
            JA = _sparse_poisson(A)
            I = sps.identity(A.shape[0], format='csc')
            self.lhs = (I - 0.5 * dt * JA).tocsc()
            self.rhs_op = (I + 0.5 * dt * JA).tocsr()
            try:
                self._lu = spsla.splu(self.lhs)
            except RuntimeError as e:
                raise NumericalError(f'midpoint system matrix is singular: {e}') from e
            self._solve = self._lu.solve
        else:
            JA = poisson_apply(np.asarray(A))
            I = np.eye(A.shape[0])
            self.lhs = I - 0.5 * dt * JA
            self.rhs_op = I + 0.5 * dt * JA
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', spla.LinAlgWarning)
                lu = spla.lu_factor(self.lhs, check_finite=True)
            if np.any(np.diag(lu[0]) == 0):
                raise NumericalError('midpoint system matrix is singular')
            self._solve = lambda b: spla.lu_solve(lu, b)

    def step(self, x):
        rhs = self.rhs_op @ x
        if not np.all(np.isfinite(rhs)):
            raise NumericalError('non-finite state in implicit midpoint step')
        x_new = self._solve(rhs)
        if not np.all(np.isfinite(x_new)):
            raise NumericalError('non-finite state in implicit midpoint step')
        if self.check_residual:
            res = np.linalg.norm(self.lhs @ x_new - rhs)
            if res > SOLVE_RTOL * max(np.linalg.norm(rhs), np.finfo(float).tiny):
                raise NumericalError(f'linear solve residual {res:.2e} too large')
        return x_new

    def matrix(self):
        """Dense one-step map ``(I - dt/2 JA)^{-1} (I + dt/2 JA)`` (small systems only)."""
        R = self.rhs_op.toarray() if self.sparse else self.rhs_op
        return np.column_stack([self._solve(R[:, j]) for j in range(R.shape[1])])


def _sparse_poisson(A):
    A = sps.csr_matrix(A)
    n = A.shape[0] // 2
    return sps.vstack([A[n:], -A[:n]])


def integrate_linear(A, x0, t0, t_end, n_t, mu=None, check_residual=True):
    """Implicit midpoint trajectory of ``x' = J A x`` with `n_t` uniform steps."""
    if n_t < 1:
        raise ValidationError('n_t must be >= 1')
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (A.shape[0],):
        raise DimensionError(f'initial value has shape {x0.shape}, expected ({A.shape[0]},)')
    dt = (t_end - t0) / n_t
    stepper = MidpointStepper(A, dt, check_residual=check_residual)
    X = np.empty((x0.size, n_t + 1))
    X[:, 0] = x0
    for i in range(n_t):
        X[:, i + 1] = stepper.step(X[:, i])
    return Trajectory(X, t0 + dt * np.arange(n_t + 1), mu)


def integrate_midpoint(sys, mu, n_t, check_residual=True):
    """Full-order trajectory for parameter `mu` on ``sys.time_interval(mu)``."""
    t0, t_end = sys.time_interval(mu)
    return integrate_linear(sys.operator(mu), sys.initial_value(mu), t0, t_end, n_t, mu,
                            check_residual=check_residual)


def collect_snapshots(sys, training_mus, n_t):
    """Stack the states ``x_1 ... x_nt`` of every training trajectory.

    The initial value is left out, so ``n_s = len(training_mus) * n_t``.
    """
    training_mus = list(training_mus)
    if not training_mus:
        raise ValidationError('need at least one training parameter')
    blocks, provenance = [], []
    for mu in training_mus:
        traj = integrate_midpoint(sys, mu, n_t)
        blocks.append(traj.states[:, 1:])
        provenance += [(mu, i) for i in range(1, n_t + 1)]
    return SnapshotMatrix(np.hstack(blocks), provenance)


def export_trajectory_csv(path, traj, energy, include_states=False):
    """Write ``t, H`` (and optionally the state entries) per time step."""
    H = energy(traj.states)
    with open(path, 'w') as f:
        header = ['t', 'H']
        if include_states:
            header += [f'x{j}' for j in range(traj.states.shape[0])]
        f.write(','.join(header) + '\n')
        for i, t in enumerate(traj.times):
            row = [repr(float(t)), repr(float(H[i]))]
            if include_states:
                row += [repr(float(v)) for v in traj.states[:, i]]
            f.write(','.join(row) + '\n')
