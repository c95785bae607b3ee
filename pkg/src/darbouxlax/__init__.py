"""Darboux-covariant Lax pairs: matrix fields, differential operators, dressing and checks."""
from .errors import (
    CapabilityError,
    ConstraintError,
    DegeneracyError,
    DomainError,
    LaxError,
    ShapeError,
    SingularityError,
)

__version__ = "0.1.0"
