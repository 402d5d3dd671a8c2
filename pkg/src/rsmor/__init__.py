"""Randomized symplectic model order reduction for linear Hamiltonian systems."""

from rsmor.hamsys import (GridConfig, LinearHamiltonianSystem, SnapshotMatrix, Trajectory,
                          collect_snapshots, discretize_wave, integrate_midpoint)
from rsmor.matkit import PoissonStructure, SketchSpec, poisson_apply
from rsmor.reduce import (ErrorReport, ReducedSystem, integrate_reduced, reduce_system,
                          relative_error)
from rsmor.sympbasis import (METHOD_TAGS, SymplecticBasis, csvd_basis, generate_basis,
                             rcsvd_basis, rsvd_like_basis, svd_like_basis, symplectic_inverse)

__version__ = '0.1.0'
