"""Exception hierarchy shared by every module."""


class SectorialError(Exception):
    """Base class for all library errors."""


class SingularShift(SectorialError):
    """A + zI is numerically singular."""


class SingularOperator(SectorialError):
    """0 lies (numerically) in the spectrum of the operator."""


class NotDiagonalizable(SectorialError):
    """Eigenvector matrix condition number exceeds the configured cap."""


class NoConvergence(SectorialError):
    """A contour tail cannot be bounded with the requested decay envelope."""


class NonFiniteIntegrand(SectorialError):
    """An integrand produced NaN or Inf at some quadrature node."""


class QuadratureFailure(SectorialError):
    """Panel refinement did not reach the requested tolerance."""


class SpectrumInSector(SectorialError):
    """Some z in the closed sector S_theta hits the spectrum of -A."""


class SpectrumInRegion(SectorialError):
    """Some z in the parabola region hits the spectrum of -A."""


class NotDecaying(SectorialError):
    """A sampled quantity failed the o(1) decay test."""


class AngleOutOfRange(SectorialError):
    """An angle or complex time lies outside the admissible range."""


class EnvelopeViolation(SectorialError):
    """A holomorphic family exceeds its declared decay envelope."""


class HypothesisViolation(SectorialError):
    """Sector angles of an operator pair violate the sum-theorem hypotheses."""


class CommutationViolation(SectorialError):
    """Two operators are not resolvent commuting."""


class PreconditionViolated(SectorialError):
    """Input data fails a documented precondition."""


class RegionViolation(SectorialError):
    """A point or operator lies outside the region where a formula is valid."""


class UsageError(SectorialError):
    """Invalid command-line usage or configuration."""

    def __init__(self, message: str, flag: str | None = None):
        super().__init__(message)
        self.flag = flag
