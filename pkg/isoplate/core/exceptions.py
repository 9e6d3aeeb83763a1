"""Exception hierarchy shared by the numerical modules, the scenario layer and the CLI."""

from typing import Any, Optional


class IsoplateError(Exception):
    """Base class for every error raised by isoplate."""


# --- nurbs ---


class NurbsDomainError(IsoplateError, ValueError):
    """Raised when a parameter value lies outside the knot vector range."""


class KnotVectorError(IsoplateError, ValueError):
    """Raised when a knot vector or control net violates its structural invariants."""


class DegenerateGeometryError(IsoplateError, ArithmeticError):
    """Raised when the geometric map has a non-positive Jacobian determinant."""

    def __init__(self, message: str, element: Optional[int] = None):
        super().__init__(message)
        self.element = element


class GeometryError(IsoplateError, ValueError):
    """Raised for inadmissible plate geometry: non-increasing interfaces, non-positive thickness, points off the plate."""


# --- laminate / thickness ---


class MaterialError(IsoplateError, ValueError):
    """Raised when lamina properties do not give a positive-definite stiffness."""


class LaminaIndexError(IsoplateError, IndexError):
    """Raised when a lamina index is outside the layup."""


class ParameterError(IsoplateError, ValueError):
    """Raised when thickness-builder parameters would produce non-positive thickness."""


class FittingError(IsoplateError, ArithmeticError):
    """Raised when the collocation system for a thickness field is singular."""


# --- plate_fem ---


class ElementError(IsoplateError, ArithmeticError):
    """Raised when an element has a singular Jacobian at a quadrature point."""

    def __init__(self, message: str, element: Optional[int] = None):
        super().__init__(message)
        self.element = element


class BoundaryConditionError(IsoplateError, ValueError):
    """Raised for unknown boundary kinds or edge labels."""


class ImperfectionError(IsoplateError, ValueError):
    """Raised when an imperfection mode has no transverse component."""


# --- solvers ---


class FactorizationError(IsoplateError, ArithmeticError):
    """Raised when a stiffness matrix is singular or indefinite."""

    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


class StabilityError(IsoplateError, ArithmeticError):
    """Raised when the buckling eigenproblem has no positive eigenvalue."""


class NonConvergenceError(IsoplateError, ArithmeticError):
    """Raised when Newton iterations exceed the iteration limit; carries the last iterate."""

    def __init__(self, message: str, last_state: Any = None, iterations: int = 0):
        super().__init__(message)
        self.last_state = last_state
        self.iterations = iterations


class PathTerminationError(IsoplateError, ArithmeticError):
    """Raised when the arc length underflows; carries the partial equilibrium path."""

    def __init__(self, message: str, path: Any = None):
        super().__init__(message)
        self.path = path


# --- scenario / CLI ---


class ConfigParseError(IsoplateError, ValueError):
    """Raised when a scenario document is not valid JSON or violates the schema."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class ConfigValidationError(IsoplateError, ValueError):
    """Raised when a well-formed scenario is physically inadmissible."""


class PresetError(IsoplateError, ValueError):
    """Raised for unknown benchmark presets or unsupported preset variants."""
