"""Exception types shared across the package."""


class StableQuadError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(StableQuadError):
    """Operands have incompatible or unexpected shapes."""


class NonSPD(StableQuadError):
    """A matrix required to be symmetric positive definite is not."""


class NotEnergyPreserving(StableQuadError):
    """A quadratic operator fails the energy-preservation test."""


class SolveFailed(StableQuadError):
    """A linear solve left a residual above tolerance."""


class NonFinite(StableQuadError):
    """A state or stage evaluation produced NaN or Inf."""


class NonFiniteLoss(StableQuadError):
    """The training loss became NaN or Inf.

    Attributes
    ----------
    step : int
        Update index at which the loss degenerated.
    """

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"loss became non-finite at step {step}")


class AllPruned(StableQuadError):
    """Sequential thresholding removed every coefficient."""


class NotStrictlyStable(StableQuadError):
    """A matrix required to be strictly stable is singular or indefinite."""


class RankTooLarge(StableQuadError):
    """Requested reduction rank exceeds what the snapshot data supports."""


class ZeroTruth(StableQuadError):
    """Relative error is undefined because the reference has zero norm."""


class ConfigError(StableQuadError):
    """A configuration value is missing, malformed, or out of range."""
