"""Exception types raised across the package."""


class NSTransitionError(Exception):
    """Base class for all package errors."""


class DomainError(NSTransitionError, ValueError):
    """An argument lies outside its admissible range."""


class ShapeError(NSTransitionError, ValueError):
    """Fields defined on different grids were combined."""


class FieldValidationError(NSTransitionError, ValueError):
    """A field holds non-finite values or has the wrong shape."""


class SnapshotFormatError(NSTransitionError):
    """A snapshot file does not start with the expected magic bytes."""


class CorruptFileError(NSTransitionError):
    """A snapshot file header disagrees with its payload."""


class ConfigError(NSTransitionError, ValueError):
    """A configuration document is malformed or violates an invariant."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InsufficientDataError(NSTransitionError, ValueError):
    pass


class UndefinedReferenceError(NSTransitionError, ValueError):
    """The reference (initial) H1 norm is zero, so ratios are undefined."""


class DegenerateDesignError(NSTransitionError, ValueError):
    pass


class BlowUpError(NSTransitionError, ArithmeticError):
    """Non-finite values appeared during time stepping.

    ``time`` is the simulation time at which the failure was detected and
    ``timeline`` holds whatever snapshots were recorded before it (may be None).
    """

    def __init__(self, time, timeline=None):
        super().__init__(f"non-finite values detected at t={time!r}")
        self.time = time
        self.timeline = timeline
