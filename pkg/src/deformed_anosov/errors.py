"""Exception types raised by the toolkit."""
from __future__ import annotations


class DeformError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(DeformError, ValueError):
    pass


class ApertureInfinite(DeformError):
    """A cone-boundary vector was mapped onto the complementary plane."""


class NotVolumePreserving(DeformError):
    pass


class NotHyperbolic(DeformError):
    pass


class SurgeryMismatch(DeformError):
    """Local map does not agree with the base linearization where it must."""


class BoundInfeasible(DeformError):
    pass


class IntegrationFailure(DeformError):
    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved


class ScaleTooLarge(DeformError):
    pass


class ConstructionInconsistent(DeformError):
    pass


class ConeGapInfeasible(DeformError):
    pass


class RotationTooLarge(DeformError):
    pass


class BallsNotDisjoint(DeformError):
    def __init__(self, message: str, pair: tuple[int, int]):
        super().__init__(message)
        self.pair = pair


class AdjustmentBreaksOrder(DeformError):
    pass


class NotPeriodic(DeformError):
    pass


class Underflow(DeformError):
    pass


class Inconclusive(DeformError):
    def __init__(self, message: str, bound: float | None = None):
        super().__init__(message)
        self.bound = bound


class ConfigError(DeformError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class RefinementWarning(UserWarning):
    """Failure clouds at increasing horizons were not nested."""
