"""Exception types raised throughout :mod:`rsmor`."""


class DimensionError(ValueError):
    """Shapes of the inputs do not fit together."""


class ValidationError(ValueError):
    """Input values violate a precondition (NaN entries, bad ranks, ...)."""


class SymplecticityError(ValueError):
    """A matrix expected to be symplectic (or orthonormal) is not."""

    def __init__(self, message, defect):
        super().__init__(f'{message} (defect {defect:.3e})')
        self.defect = defect


class RankDeficiencyError(RuntimeError):
    """Fewer independent directions than requested were found."""

    def __init__(self, message, achieved_rank):
        super().__init__(f'{message} (achieved rank {achieved_rank})')
        self.achieved_rank = achieved_rank


class NumericalError(RuntimeError):
    """A numerical routine produced non-finite or inaccurate results."""
