"""Exception hierarchy.

Every failure raised by the library derives from :class:`SpecMomentError`, so
callers (and the CLI exit-code mapping) can catch the whole family at once.
"""

from __future__ import annotations


class SpecMomentError(Exception):
    """Base class for all library errors."""


class InputError(SpecMomentError, ValueError):
    """Malformed or invalid input data (CLI exit code 2)."""


class NotPositiveDefinite(SpecMomentError):
    """A grid sample failed the Cholesky positivity test."""

    def __init__(self, index: int, theta: float, message: str | None = None):
        self.index = index
        self.theta = theta
        super().__init__(message or f"sample {index} (theta={theta:.6g}) is not positive definite")


class NotInDomain(NotPositiveDefinite):
    """The dual variable left the feasible cone (Q not positive definite)."""


class UnstableMatrix(InputError):
    """Spectral radius too close to (or beyond) the unit circle."""


class Unstable(UnstableMatrix):
    """Filter-bank state matrix A is not strictly stable."""


class Unreachable(InputError):
    """(A, B) is not a reachable pair."""


class RankDeficientB(InputError):
    """B does not have full column rank."""


class DuplicatePole(InputError):
    pass


class UnstablePole(InputError):
    pass


class NotSPD(InputError):
    """Matrix expected to be symmetric positive definite is not."""


class NonRealResult(SpecMomentError):
    """An integral expected to be real has a significant imaginary part."""


class Infeasible(SpecMomentError):
    """The covariance is not in the range of the moment operator (exit code 3)."""


class DegenerateKernel(SpecMomentError):
    pass


class NotCoercive(InputError):
    """Density is not bounded away from zero on the grid."""


class SingularDensity(InputError):
    pass


class SingularSigma(InputError):
    pass


class NotPositiveOnCircle(SpecMomentError):
    pass


class NotPD(InputError):
    """Toeplitz matrix of lags is not positive definite."""


class GridTooCoarse(SpecMomentError):
    """Integrals changed by more than the tolerance on grid refinement (exit code 5)."""

    def __init__(self, message: str, gap: float | None = None):
        self.gap = gap
        super().__init__(message)


class NotConverged(SpecMomentError):
    """Newton iteration stopped without meeting the tolerance (exit code 4).

    The partial :class:`~specmoment.solvers.SolveResult` is attached as
    ``result`` for diagnostics.
    """

    def __init__(self, message: str, result=None):
        self.result = result
        super().__init__(message)
