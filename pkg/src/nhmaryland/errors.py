"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MarylandError(Exception):
    """Base class for every error raised by this package."""


class PoleProximity(MarylandError, ValueError):
    """Hermitian (epsilon = 0) potential evaluated too close to a tan pole."""


class BranchAmbiguity(MarylandError):
    pass


class ResolutionTooCoarse(MarylandError):
    pass


class OutOfPhase(MarylandError, ValueError):
    """Requested quantity only exists inside a window of epsilon."""


class SingularIntegrand(MarylandError, ValueError):
    pass


class NotExtended(MarylandError, ValueError):
    """Energy on the segment does not carry a normalisable extended state."""


class NearResonance(MarylandError):
    pass


class SmallDivisor(MarylandError):
    pass


class NonzeroWinding(MarylandError):
    """log g(x) has no continuous periodic branch."""


class ConvergenceFailure(MarylandError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ZeroVector(MarylandError, ValueError):
    pass


class LengthMismatch(MarylandError, ValueError):
    pass


class ResonantDenominator(MarylandError):
    pass


class BreakdownPivot(MarylandError):
    pass


class BaseOnSpectrum(MarylandError):
    """Base energy is (numerically) on the spectrum somewhere along the flux path."""


class MatchingAmbiguity(MarylandError):
    pass


class ConfigError(MarylandError, ValueError):
    pass
