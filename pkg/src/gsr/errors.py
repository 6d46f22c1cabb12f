"""Exception types shared across the package."""


class GsrError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(GsrError):
    """Vector/matrix dimensions do not agree."""


class ShapeMismatch(GsrError):
    """Tensor shapes do not compose or do not match a contract."""


class DegenerateBandwidth(GsrError):
    """Adaptive kernel bandwidth collapsed to zero for some feature."""


class ConvergenceFailure(GsrError):
    """Iterative eigensolver did not reach tolerance within its budget."""


class StaleForwardState(GsrError):
    """backward() called without a cached forward pass."""


class NonFiniteLoss(GsrError):
    """Training objective became NaN or Inf."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class EmptyClass(GsrError):
    """A class label has no samples to average over."""


class InsufficientRuns(GsrError):
    """Too few replicate runs for the requested statistic."""


class BadMagic(GsrError):
    """IDX file magic number does not match the expected value."""


class TruncatedFile(GsrError):
    """Binary file ended before the declared payload."""


class ConfigError(GsrError):
    """Experiment config file is malformed or references missing paths."""
