"""Exception hierarchy shared by all modules."""


class StateMergeError(Exception):
    """Base class for errors raised by this package."""


class LayoutError(StateMergeError, ValueError):
    """Subsystem labels or dimensions are inconsistent."""


class BadInputError(StateMergeError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionCapError(StateMergeError):
    """A simulation would exceed the dense-dimension cap."""


class TypicalityError(StateMergeError):
    """Typical-subspace truncation kept too little of the state."""
