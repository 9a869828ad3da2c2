"""Exception hierarchy shared by all divlam modules."""


class DivlamError(Exception):
    """Base class for library errors."""


class DomainError(DivlamError, ValueError):
    """A scalar parameter is outside its admissible range."""


class ShapeError(DivlamError, ValueError):
    """Matrix or grid shapes are inconsistent."""


class SingularMatrixError(DivlamError, ValueError):
    """A matrix required to be invertible (or rank-deficient) is not."""


class DegenerateKernelError(DivlamError, ArithmeticError):
    """A lamination direction is not uniquely determined."""


class ExhaustionError(DivlamError, RuntimeError):
    """A randomized search ran out of attempts."""


class JumpConditionError(DivlamError, ValueError):
    """Two laminated matrices are not compatible across the given normal."""


class ResourceError(DivlamError, MemoryError):
    """A requested raster exceeds the configured memory cap."""


class FormatError(DivlamError, ValueError):
    """A field or label file is malformed."""
