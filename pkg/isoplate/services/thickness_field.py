"""
Per-lamina thickness as a NURBS field over the plate patch.

The plate occupies [-a/2, a/2]^2 with the origin at its centre. Edge AD is
x = -a/2, BC is x = +a/2, AB is y = +a/2 and CD is y = -a/2. Top and bottom
surfaces are mirror images about the midplane, so a field fully determines the
interface coordinates at a point.
"""

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import linalg

from isoplate.core.exceptions import FittingError, GeometryError, LaminaIndexError, ParameterError
from isoplate.core.logging_config import get_logger
from isoplate.services.nurbs import (
    ParamPoint,
    Patch2D,
    element_quadrature,
    greville_abscissae,
    rational_basis_2d,
    surface_point,
)

logger = get_logger(__name__)

ThicknessFunction = Callable[[np.ndarray | float, np.ndarray | float], np.ndarray | float]


@dataclass(frozen=True, eq=False)
class ThicknessField:
    patch: Patch2D
    control: np.ndarray

    def __post_init__(self):
        control = np.array(self.control, dtype=float)
        if control.ndim == 2:
            control = control[None]
        if control.ndim != 3 or control.shape[1:] != self.patch.shape:
            raise GeometryError(
                f"control grids of shape {control.shape} do not match the control net {self.patch.shape}"
            )
        # Positive controls give a positive convex combination everywhere.
        if np.any(control <= 0):
            raise GeometryError("control thickness parameters must be positive")
        control.setflags(write=False)
        object.__setattr__(self, "control", control)

    @property
    def n_laminae(self) -> int:
        return self.control.shape[0]

    @property
    def flat_control(self) -> np.ndarray:
        """(n_laminae, n_control) in the patch's flat control-point order."""
        return self.control.reshape(self.n_laminae, -1)


@dataclass(frozen=True)
class InterfaceCoords:
    z: np.ndarray

    @property
    def thickness(self) -> float:
        return float(self.z[-1] - self.z[0])


def eval_lamina_thickness(field: ThicknessField, pt: ParamPoint, k: int) -> float:
    if not 0 <= k < field.n_laminae:
        raise LaminaIndexError(f"lamina index {k} outside 0..{field.n_laminae - 1}")
    basis = rational_basis_2d(field.patch, pt)
    return float(basis.values @ field.flat_control[k, basis.indices])


def total_thickness(field: ThicknessField, pt: ParamPoint) -> float:
    basis = rational_basis_2d(field.patch, pt)
    return float(basis.values @ field.flat_control.sum(axis=0)[basis.indices])


def stack_interfaces(lamina_thickness: np.ndarray) -> np.ndarray:
    """(..., n) lamina thicknesses -> (..., n+1) interfaces centred on the midplane."""
    t = np.asarray(lamina_thickness, dtype=float)
    if np.any(t <= 0):
        raise GeometryError("lamina thickness must be positive at every evaluation point")
    total = t.sum(axis=-1, keepdims=True)
    return np.concatenate((-0.5 * total, -0.5 * total + np.cumsum(t, axis=-1)), axis=-1)


def lamina_thickness_table(field: ThicknessField, indices: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Lamina thicknesses at tabulated points: indices (E, L), values (E, P, L) -> (E, P, n)."""
    local = field.flat_control[:, indices]
    return np.einsum("epl,kel->epk", values, local)


def interfaces_at(field: ThicknessField, pt: ParamPoint) -> InterfaceCoords:
    basis = rational_basis_2d(field.patch, pt)
    t = field.flat_control[:, basis.indices] @ basis.values
    return InterfaceCoords(stack_interfaces(t))


def fit_field(patch: Patch2D, analytic: ThicknessFunction, n_laminae: int) -> ThicknessField:
    """Interpolate `analytic` at the Greville points of the patch.

    A scalar result is the laminate thickness, shared equally by the laminae; a
    result of length `n_laminae` gives each lamina its own thickness.
    """
    if n_laminae < 1:
        raise GeometryError(f"need at least one lamina, got {n_laminae}")
    gx, gy = greville_abscissae(patch.xi), greville_abscissae(patch.eta)
    n, m = patch.shape
    collocation = np.zeros((n * m, n * m))
    rhs = np.zeros((n * m, n_laminae))
    for i, xi in enumerate(gx):
        for j, eta in enumerate(gy):
            row = i * m + j
            pt = ParamPoint(xi, eta)
            basis = rational_basis_2d(patch, pt)
            collocation[row, basis.indices] = basis.values
            (x, y), _ = surface_point(patch, pt)
            sample = np.atleast_1d(np.asarray(analytic(x, y), dtype=float))
            if sample.size == 1:
                rhs[row] = sample[0] / n_laminae
            elif sample.size == n_laminae:
                rhs[row] = sample
            else:
                raise FittingError(f"thickness function returned {sample.size} values for {n_laminae} laminae")
    try:
        control = linalg.solve(collocation, rhs)
    except linalg.LinAlgError as exc:
        raise FittingError(f"collocation system is singular: {exc}") from exc
    logger.debug("Fitted thickness field", extra={'control_points': n * m, 'laminae': n_laminae})
    return ThicknessField(patch, control.T.reshape(n_laminae, n, m))


def plate_volume(field: ThicknessField) -> float:
    """Integral of the laminate thickness over the plate."""
    p, q = field.patch.xi.degree, field.patch.eta.degree
    grid = element_quadrature(field.patch, p + 2, q + 2)
    h = lamina_thickness_table(field, grid.indices, grid.values).sum(axis=-1)
    return float(np.sum(h * grid.weights))


# --- analytic thickness builders ---


def uniform(h_bar: float) -> ThicknessFunction:
    if h_bar <= 0:
        raise ParameterError(f"thickness must be positive, got {h_bar}")

    def thickness(x, y):
        return h_bar + 0.0 * np.asarray(x, dtype=float)

    return thickness


def tapered_x(a: float, h_bar: float, alpha: float) -> ThicknessFunction:
    """h = h_bar - 2 alpha x; thickest along AD when alpha > 0."""
    if h_bar <= 0 or a <= 0:
        raise ParameterError(f"side and thickness must be positive, got a={a}, h_bar={h_bar}")
    if abs(alpha) * a >= h_bar:
        raise ParameterError(f"tapered ratio {alpha} gives non-positive thickness (|alpha| a >= h_bar)")

    def thickness(x, y):
        return h_bar - 2.0 * alpha * np.asarray(x, dtype=float) + 0.0 * np.asarray(y, dtype=float)

    return thickness


def tapered_diagonal(a: float, h_bar: float, alpha: float) -> ThicknessFunction:
    """h = h_bar - sqrt(2) alpha x + sqrt(2) alpha y; constant along y = x."""
    if h_bar <= 0 or a <= 0:
        raise ParameterError(f"side and thickness must be positive, got a={a}, h_bar={h_bar}")
    if np.sqrt(2.0) * abs(alpha) * a >= h_bar:
        raise ParameterError(f"tapered ratio {alpha} gives non-positive thickness (sqrt(2) |alpha| a >= h_bar)")
    slope = np.sqrt(2.0) * alpha

    def thickness(x, y):
        return h_bar - slope * np.asarray(x, dtype=float) + slope * np.asarray(y, dtype=float)

    return thickness


def sine_wave(
    a: float, h_bar: float, alpha: float, n: int, origin: Literal["center", "edge"] = "center"
) -> ThicknessFunction:
    """h = h_bar (1 + 2 alpha cos(2 pi n x' / a)).

    x' is measured from the plate centre ("center") or from edge AD ("edge").
    """
    if h_bar <= 0 or a <= 0:
        raise ParameterError(f"side and thickness must be positive, got a={a}, h_bar={h_bar}")
    if not 0 <= alpha < 0.5:
        raise ParameterError(f"sine-wave amplitude must lie in [0, 0.5), got {alpha}")
    if int(n) != n or n < 1:
        raise ParameterError(f"wavelength count must be a positive integer, got {n}")
    if origin not in ("center", "edge"):
        raise ParameterError(f"unknown sine-wave origin {origin!r}")
    shift = a / 2 if origin == "edge" else 0.0

    def thickness(x, y):
        xs = np.asarray(x, dtype=float) + shift
        return h_bar * (1.0 + 2.0 * alpha * np.cos(2.0 * np.pi * n * xs / a)) + 0.0 * np.asarray(y, dtype=float)

    return thickness
