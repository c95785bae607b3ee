"""Exception hierarchy shared by every module."""


class LaxError(Exception):
    """Base class for all library errors."""


class DomainError(LaxError, ValueError):
    """A field was evaluated outside the region it is defined on."""


class CapabilityError(LaxError):
    """A representation cannot provide the requested derivative or integral."""


class ShapeError(LaxError, ValueError):
    """Matrix dimensions, operator degrees or grids do not agree."""


class SingularityError(LaxError, ArithmeticError):
    """A matrix that must be inverted is singular at some sample point."""


class ConstraintError(LaxError, ValueError):
    """Lax pair parameters violate a covariance constraint."""


class DegeneracyError(LaxError, ArithmeticError):
    """A spectral construction degenerated (defective matrix, zero pairing)."""
