"""Exception types shared across the package."""


class GeodesicEcgError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(GeodesicEcgError, ValueError):
    """Matrix is not symmetric positive definite."""


class DimensionMismatch(GeodesicEcgError, ValueError):
    """Operands have incompatible dimensions."""


class ParameterOutOfRange(GeodesicEcgError, ValueError):
    """A scalar parameter lies outside its admissible interval."""


class DidNotConverge(GeodesicEcgError, RuntimeError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, max_iter, residual):
        super().__init__(f"no convergence after {max_iter} iterations (residual {residual:.3e})")
        self.max_iter = max_iter
        self.residual = residual


class WindowTooLarge(GeodesicEcgError, ValueError):
    """Alignment window exceeds the recording length."""


class EmptyRecording(GeodesicEcgError, ValueError):
    """Recording carries no usable samples."""


class DegenerateSignal(GeodesicEcgError, ValueError):
    """Signal covariance is not positive definite even after shrinkage."""


class SingularPooledCovariance(GeodesicEcgError, ValueError):
    """Pooled covariance stays singular after regularization."""


class TooFewClasses(GeodesicEcgError, ValueError):
    """Operation needs more distinct classes than were provided."""


class WrongChannelCount(GeodesicEcgError, ValueError):
    """Recording does not have the expected number of channels."""


class AngleOutOfRange(GeodesicEcgError, ValueError):
    """Rotation angle magnitude exceeds the supported range."""


class InvalidSpec(GeodesicEcgError, ValueError):
    """Cohort specification violates its invariants."""


class EmptyClass(GeodesicEcgError, ValueError):
    """A declared class has no samples."""

    def __init__(self, class_id):
        super().__init__(f"class {class_id!r} has no samples")
        self.class_id = class_id


class ClassTooSmall(GeodesicEcgError, ValueError):
    """A class has too few members for the requested operation."""

    def __init__(self, class_id, needed, present):
        super().__init__(f"class {class_id!r} has {present} member(s), needs at least {needed}")
        self.class_id = class_id


class InvalidConfig(GeodesicEcgError, ValueError):
    """Training configuration violates its invariants."""


class TooFewRepetitions(GeodesicEcgError, ValueError):
    """Statistical test needs at least two repetitions."""


class NoEvaluableClass(GeodesicEcgError, ValueError):
    """No class has both positive and negative examples."""


class EmptyInput(GeodesicEcgError, ValueError):
    """Metric received empty label/prediction sequences."""
