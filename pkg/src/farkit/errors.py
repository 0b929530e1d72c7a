"""Exception types shared across the package."""


class GridError(ValueError):
    """Invalid grid construction or a grid/size mismatch between objects."""


class InsufficientDataError(ValueError):
    """Too few curves (or records) to carry out the requested computation."""


class DegenerateSpectrumError(ValueError):
    """An eigenvalue spectrum with no usable mass (all zero)."""


class NumericalError(RuntimeError):
    """A numerical routine failed or produced values outside tolerance."""


class SingularSystemError(NumericalError):
    """A linear system that the method requires to be invertible is singular."""
