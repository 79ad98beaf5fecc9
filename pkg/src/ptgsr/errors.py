"""Exception hierarchy shared across the package."""


class GsrError(Exception):
    """Base class for all ptgsr errors."""


class NonSquare(GsrError):
    """Weight matrix is not square."""


class AsymmetryBeyondTolerance(GsrError):
    """Weight matrix deviates from symmetry by more than the tolerance."""


class NegativeWeight(GsrError):
    """Weight matrix contains a negative entry."""


class DisconnectedResult(GsrError):
    """Graph construction produced a disconnected graph where one was required."""


class ConvergenceFailure(GsrError):
    """Eigensolver failed to converge."""


class DimensionMismatch(GsrError):
    """Operand shapes do not agree."""


class OutOfRange(GsrError):
    """A count or index parameter is outside its valid range."""


class UnknownSensor(GsrError):
    """Sensor id in a data file does not map to a graph node."""


class EmptySlot(GsrError):
    """A time slot has no readings for any sensor."""


class ZeroReference(GsrError):
    """NMSD reference signal has zero norm."""


class RaggedInput(GsrError):
    """Ensemble curves have unequal lengths."""


class NonFiniteState(GsrError):
    """A filter update produced NaN or Inf."""


class NonPositiveLambdaMax(GsrError):
    """Largest eigenvalue is not positive; step-size bound undefined."""


class SpectralRadiusGeOne(GsrError):
    """Spectral radius of the error propagation operator is >= 1."""


class TooLarge(GsrError):
    """Problem dimension exceeds the supported dense-solve cap."""


class ConfigError(GsrError):
    """Scenario configuration is invalid."""
