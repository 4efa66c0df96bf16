"""Exception hierarchy shared by every module of the package."""


class BTRError(Exception):
    """Base class for all package errors."""


class PartitionError(BTRError, ValueError):
    """Mode partition is not an exact split of a tensor's modes."""


class ShapeError(BTRError, ValueError):
    """Array extents are inconsistent with the requested operation."""


class ContractionError(ShapeError):
    """Paired contraction modes have different extents."""


class NumericalError(BTRError, ArithmeticError):
    """A factorization failed (non-SPD system, SVD non-convergence)."""


class DivergenceError(NumericalError):
    """The solver produced non-finite values."""


class ParameterError(BTRError, ValueError):
    """A scalar parameter is outside its valid range."""


class InputError(BTRError, ValueError):
    """Input frames are inconsistent with each other or with the config."""


class RangeError(InputError):
    """A temporal window extends past the end of the sequence."""


class UndefinedPdError(BTRError, ValueError):
    """Ground truth holds no targets, so the detection probability is undefined."""


class FormatError(BTRError, ValueError):
    """A file on disk does not follow the expected format."""


class SceneError(BTRError, ValueError):
    """A synthetic scene description is invalid (e.g. a target leaves the frame)."""
