"""Exception types raised across the package."""


class SpectriplesError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(SpectriplesError, ValueError):
    """A torus specification is malformed or degenerate."""


class UnsupportedDimensionError(SpectriplesError, ValueError):
    """The requested operation does not support this dimension."""


class AliasingError(SpectriplesError, ValueError):
    """A discrete product would not be resolvable on the mesh."""

    def __init__(self, message, max_safe=None):
        super().__init__(message)
        self.max_safe = max_safe


class SolverError(SpectriplesError, RuntimeError):
    """The eigensolver failed to reach the required residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CutoffMismatchError(SpectriplesError, ValueError):
    """Coefficient vectors and tensor disagree on the cutoff."""


class BlockMismatchError(SpectriplesError, ValueError):
    """A gauge assignment does not fit the eigenvalue block structure."""


class NotIsospectralError(SpectriplesError):
    """Two spectra disagree; carries the first offending index."""

    def __init__(self, index, a=None, b=None):
        super().__init__(f"spectra differ at index {index}: {a!r} vs {b!r}")
        self.index = index
        self.a = a
        self.b = b
