"""Symplectic Galerkin reduction of linear Hamiltonian systems."""

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from rsmor.exceptions import DimensionError, ValidationError
from rsmor.hamsys import Trajectory, integrate_linear, integrate_midpoint
from rsmor.matkit import PoissonStructure, poisson_apply
from rsmor.sympbasis import SymplecticBasis


@dataclass
class ReducedSystem:
    """Reduced canonical system ``x_r' = J_2k A_r(mu) x_r`` with ``A_r = V^T A V``."""

    operators: Sequence[np.ndarray]
    coefficients: Sequence[Callable[[float], float]]
    initial_value: Callable[[float], np.ndarray]
    time_interval: Callable
    basis: SymplecticBasis
    poisson: PoissonStructure = field(init=False)

    def __post_init__(self):
        self.poisson = PoissonStructure(self.basis.half_rank)

    @property
    def dim(self):
        return 2 * self.basis.half_rank

    def operator(self, mu):
        return sum(c(mu) * A for c, A in zip(self.coefficients, self.operators))

    def hamiltonian(self, x_r, mu):
        x_r = np.asarray(x_r)
        return 0.5 * np.sum(x_r * (self.operator(mu) @ x_r), axis=0)


def reduce_system(sys, basis):
    """Project `sys` onto the symplectic basis.

    Every affine operator term is projected once as ``V^T A_i V``; the reduced
    initial value is ``V^+ x0(mu)``.
    """
    if not isinstance(basis, SymplecticBasis):
        basis = SymplecticBasis(basis)
    if basis.V.shape[0] != sys.dim:
        raise DimensionError(f'basis has {basis.V.shape[0]} rows, system dimension is {sys.dim}')
    V = basis.V
    Vplus = basis.symplectic_inverse()
    ops = []
    for A in sys.operators:
        Ar = V.T @ np.asarray(A @ V)
        ops.append(0.5 * (Ar + Ar.T))

    def initial_value(mu):
        return Vplus @ sys.initial_value(mu)

    return ReducedSystem(ops, list(sys.coefficients), initial_value, sys.time_interval, basis)


def galerkin_operator_defect(sys, rsys, mu):
    """``||V^+ J A V - J_2k V^T A V||_F / ||A_r||_F``."""
    V = rsys.basis.V
    Vplus = rsys.basis.symplectic_inverse()
    AV = np.asarray(sys.operator(mu) @ V)
    lhs = Vplus @ poisson_apply(AV)
    Ar = rsys.operator(mu)
    return np.linalg.norm(lhs - poisson_apply(Ar)) / max(np.linalg.norm(Ar), np.finfo(float).tiny)


def integrate_reduced(rsys, mu, n_t):
    t0, t_end = rsys.time_interval(mu)
    return integrate_linear(rsys.operator(mu), rsys.initial_value(mu), t0, t_end, n_t, mu)


def reconstruct(basis, reduced):
    V = basis.V if isinstance(basis, SymplecticBasis) else np.asarray(basis)
    if V.shape[1] != reduced.states.shape[0]:
        raise DimensionError(f'basis has {V.shape[1]} columns, reduced states have {reduced.states.shape[0]} entries')
    return Trajectory(V @ reduced.states, reduced.times.copy(), reduced.mu)


def relative_error(full, basis, reduced):
    """Root-sum-square trajectory error over all ``n_t + 1`` states, relative to the FOM."""
    if len(full) != len(reduced):
        raise DimensionError(f'trajectory lengths differ: {len(full)} vs {len(reduced)}')
    lifted = reconstruct(basis, reduced).states
    denom = np.linalg.norm(full.states)
    if denom == 0:
        raise ValidationError('full trajectory is identically zero')
    return float(np.linalg.norm(full.states - lifted) / denom)


def hamiltonian_drift(traj, energy_fn):
    """``max_i |H(x_i) - H(x_0)|``; `energy_fn` maps a ``dim x m`` block to ``m`` energies."""
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj)
    if states.shape[1] == 0:
        raise ValidationError('empty trajectory')
    H = np.asarray(energy_fn(states))
    return float(np.max(np.abs(H - H[0])))


@dataclass
class ErrorReport:
    relerr: float
    hamiltonian_drift_full: float
    hamiltonian_drift_reduced: float
    basis_size: int
    basis_gen_seconds: float = float('nan')
    rom_solve_seconds: float = float('nan')

    def csv_row(self):
        return f'{self.basis_size},{self.basis_gen_seconds!r},{self.relerr!r}'


def evaluate(sys, basis, mu, n_t, full=None, basis_gen_seconds=float('nan')):
    """Reduce, solve, reconstruct and compare against the FOM at parameter `mu`."""
    if full is None:
        full = integrate_midpoint(sys, mu, n_t)
    rsys = reduce_system(sys, basis)
    tic = time.perf_counter()
    red = integrate_reduced(rsys, mu, n_t)
    rom_seconds = time.perf_counter() - tic
    return ErrorReport(
        relerr=relative_error(full, basis, red),
        hamiltonian_drift_full=hamiltonian_drift(full, lambda X: sys.hamiltonian(X, mu)),
        hamiltonian_drift_reduced=hamiltonian_drift(red, lambda X: rsys.hamiltonian(X, mu)),
        basis_size=basis.V.shape[1],
        basis_gen_seconds=basis_gen_seconds,
        rom_solve_seconds=rom_seconds,
    )
