"""Exception types shared across the package.

The CLI maps ConservolastError subclasses to exit code 1 (numerical
failure); bad usage and I/O problems map to exit code 2.
"""


class ConservolastError(Exception):
    """Base class for numerical failures raised by this package."""


class DegenerateData(ConservolastError):
    """Training data cannot support the requested operation (e.g. zero RMS)."""


class DuplicateCenters(ConservolastError):
    """Two RBF centers coincide (pairwise distance <= 1e-9)."""


class IllConditioned(ConservolastError):
    """Normal-equation condition estimate exceeded the configured limit."""

    def __init__(self, estimate, limit):
        super().__init__(f"condition estimate {estimate:.3e} exceeds limit {limit:.3e}")
        self.estimate = estimate
        self.limit = limit


class AllIllConditioned(ConservolastError):
    """Every radius candidate (or every RBF count) was ill-conditioned."""


class MeshingFailed(ConservolastError):
    """Tile parameters produce a degenerate, disconnected or inverted mesh."""


class NonConverged(ConservolastError):
    """A Newton solve did not reach its gradient tolerance."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ElementInversion(ConservolastError):
    """A line-search-accepted state contains an inverted element."""


class SingularReducedHessian(ConservolastError):
    """Reduced equilibrium Hessian is not positive definite (buckling point)."""


class NoBracket(ConservolastError):
    """The orthogonal-stretch derivative does not change sign on the bracket."""


class NoMinimum(ConservolastError):
    """A 1D energy minimization diverged to the bracket boundary."""
