"""Numerical laboratory for quantum state merging at desk scale."""

from statemerge.errors import (
    BadInputError,
    DimensionCapError,
    LayoutError,
    StateMergeError,
    TypicalityError,
)

__version__ = "0.1.0"

__all__ = [
    "BadInputError",
    "DimensionCapError",
    "LayoutError",
    "StateMergeError",
    "TypicalityError",
    "__version__",
]
