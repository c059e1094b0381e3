"""Exception types raised by striplab."""


class StriplabError(Exception):
    """Base class for all errors raised by this package."""


class NotASingularPoint(StriplabError):
    pass


class Degenerate(StriplabError):
    pass


class LoopThroughOrigin(StriplabError):
    pass


class TangentZero(StriplabError):
    pass


class SingularAngle(StriplabError):
    pass


class PositivityFailure(StriplabError):
    """ΩĴ failed to be positive definite; ``witness`` holds the offending point."""

    def __init__(self, message, witness=None, min_eigenvalue=None):
        super().__init__(message)
        self.witness = witness
        self.min_eigenvalue = min_eigenvalue


class OutsideDomain(StriplabError):
    pass


class ChartExceeded(StriplabError):
    pass


class NonMonotoneProfile(StriplabError):
    pass


class RangeTooCoarse(StriplabError):
    pass


class NotInSpectrum(StriplabError):
    pass


class NotSymmetric(StriplabError):
    pass


class NoGap(StriplabError):
    pass


class FrameDegenerate(StriplabError):
    pass


class GridMismatch(StriplabError):
    pass


class ZeroNorm(StriplabError):
    pass


class SingularOmega(StriplabError):
    pass


class GridTooShort(StriplabError):
    pass


class NoSpectrumMatch(StriplabError):
    pass


class MaxIterationsExceeded(StriplabError):
    """Raised when Gauss-Newton runs out of iterations.

    The best iterate and the convergence log are attached so callers can
    still inspect them.
    """

    def __init__(self, message, grid=None, log=None):
        super().__init__(message)
        self.grid = grid
        self.log = log


class SingularNormalEquations(StriplabError):
    pass


class ConfigError(StriplabError):
    pass


class IoFailure(StriplabError):
    pass
