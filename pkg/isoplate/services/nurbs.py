"""
B-spline and NURBS machinery for a single tensor-product patch.

Knot vectors are open, the parameter space is [0, 1] x [0, 1] and the physical
map lives entirely in the control net. Basis evaluation returns only the p+1
locally nonzero functions; callers combine them with the span index.

Control points are flattened row-major: c = i * m + j, with i running along
xi (physical x) and j along eta (physical y).
"""

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import linalg

from isoplate.core.exceptions import (
    DegenerateGeometryError,
    GeometryError,
    KnotVectorError,
    NurbsDomainError,
)
from isoplate.core.logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class KnotVector:
    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        p = int(self.degree)
        if p < 0:
            raise KnotVectorError(f"degree must be non-negative, got {p}")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise KnotVectorError(f"need at least {2 * (p + 1)} knots for degree {p}, got {knots.size}")
        if np.any(np.diff(knots) < 0):
            raise KnotVectorError("knots must be non-decreasing")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-(p + 1):] != knots[-1]):
            raise KnotVectorError(f"knot vector is not open: end knots must repeat {p + 1} times")
        if p + 1 < knots.size and (knots[p + 1] == knots[0] or knots[-(p + 2)] == knots[-1]):
            raise KnotVectorError(f"end knots repeat more than {p + 1} times")
        if knots[-1] <= knots[0]:
            raise KnotVectorError("knot vector spans an empty interval")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "degree", p)

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """Distinct knot values; consecutive pairs bound the nonzero spans."""
        return np.unique(self.knots)

    def __len__(self) -> int:
        return self.knots.size


class ParamPoint(NamedTuple):
    xi: float
    eta: float


@dataclass(frozen=True, eq=False)
class Patch2D:
    xi: KnotVector
    eta: KnotVector
    control_points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        points = np.array(self.control_points, dtype=float)
        shape = (self.xi.n, self.eta.n)
        if points.shape != shape + (2,):
            raise KnotVectorError(f"control net shape {points.shape} does not match basis counts {shape}")
        weights = np.ones(shape) if self.weights is None else np.array(self.weights, dtype=float)
        if weights.shape != shape:
            raise KnotVectorError(f"weight grid shape {weights.shape} does not match basis counts {shape}")
        if np.any(weights <= 0):
            raise KnotVectorError("control weights must be strictly positive")
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "control_points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def shape(self) -> tuple[int, int]:
        return self.xi.n, self.eta.n

    @property
    def n_control(self) -> int:
        return self.xi.n * self.eta.n

    @property
    def n_elements(self) -> int:
        return (self.xi.breakpoints.size - 1) * (self.eta.breakpoints.size - 1)

    def flat_index(self, i: int, j: int) -> int:
        return i * self.eta.n + j


@dataclass(frozen=True)
class RationalBasis:
    """Nonzero 2-D basis functions at one parameter point."""

    indices: np.ndarray
    values: np.ndarray
    d_xi: np.ndarray
    d_eta: np.ndarray


# --- univariate basis ---


def find_span(kv: KnotVector, xi: float) -> int:
    """Index i with knots[i] <= xi < knots[i+1]; the last knot maps to the last nonzero span."""
    lo, hi = kv.bounds
    if not lo <= xi <= hi:
        raise NurbsDomainError(f"parameter {xi} outside knot range [{lo}, {hi}]")
    if xi == hi:
        return kv.n - 1
    return int(np.searchsorted(kv.knots, xi, side="right") - 1)


def _basis_at_span(knots: np.ndarray, span: int, xi: float, p: int) -> np.ndarray:
    """Cox-de Boor triangle for the p+1 functions nonzero on a span; 0/0 counts as 0."""
    values = np.zeros(p + 1)
    values[0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = xi - knots[span + 1 - j]
        right[j] = knots[span + j] - xi
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            temp = values[r] / denom if denom != 0.0 else 0.0
            values[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        values[j] = saved
    return values


def _derivs_at_span(knots: np.ndarray, span: int, xi: float, p: int) -> np.ndarray:
    if p == 0:
        return np.zeros(1)
    lower = _basis_at_span(knots, span, xi, p - 1)
    derivs = np.zeros(p + 1)
    for j in range(p + 1):
        i = span - p + j
        if j >= 1:
            denom = knots[i + p] - knots[i]
            if denom != 0.0:
                derivs[j] += p * lower[j - 1] / denom
        if j <= p - 1:
            denom = knots[i + p + 1] - knots[i + 1]
            if denom != 0.0:
                derivs[j] -= p * lower[j] / denom
    return derivs


def eval_basis(kv: KnotVector, xi: float) -> np.ndarray:
    """The p+1 basis values nonzero at xi, ordered from global index span-p."""
    span = find_span(kv, xi)
    return _basis_at_span(kv.knots, span, xi, kv.degree)


def eval_basis_derivs(kv: KnotVector, xi: float) -> tuple[np.ndarray, np.ndarray]:
    span = find_span(kv, xi)
    return (
        _basis_at_span(kv.knots, span, xi, kv.degree),
        _derivs_at_span(kv.knots, span, xi, kv.degree),
    )


# --- bivariate basis and geometry ---


def rational_basis_2d(patch: Patch2D, pt: ParamPoint) -> RationalBasis:
    xi, eta = pt
    p, q = patch.xi.degree, patch.eta.degree
    span_i = find_span(patch.xi, xi)
    span_j = find_span(patch.eta, eta)
    n_xi = _basis_at_span(patch.xi.knots, span_i, xi, p)
    dn_xi = _derivs_at_span(patch.xi.knots, span_i, xi, p)
    n_eta = _basis_at_span(patch.eta.knots, span_j, eta, q)
    dn_eta = _derivs_at_span(patch.eta.knots, span_j, eta, q)

    rows = np.arange(span_i - p, span_i + 1)
    cols = np.arange(span_j - q, span_j + 1)
    w = patch.weights[np.ix_(rows, cols)]

    weighted = np.outer(n_xi, n_eta) * w
    weighted_dxi = np.outer(dn_xi, n_eta) * w
    weighted_deta = np.outer(n_xi, dn_eta) * w
    total = weighted.sum()
    total_dxi = weighted_dxi.sum()
    total_deta = weighted_deta.sum()

    values = weighted / total
    d_xi = (weighted_dxi - values * total_dxi) / total
    d_eta = (weighted_deta - values * total_deta) / total

    indices = (rows[:, None] * patch.eta.n + cols[None, :]).ravel()
    return RationalBasis(indices=indices, values=values.ravel(), d_xi=d_xi.ravel(), d_eta=d_eta.ravel())


def surface_point(patch: Patch2D, pt: ParamPoint) -> tuple[np.ndarray, np.ndarray]:
    """Physical point and Jacobian J[a, b] = d x_a / d u_b with u = (xi, eta)."""
    basis = rational_basis_2d(patch, pt)
    net = patch.control_points.reshape(-1, 2)[basis.indices]
    point = basis.values @ net
    jacobian = np.column_stack((basis.d_xi @ net, basis.d_eta @ net))
    det = np.linalg.det(jacobian)
    if det <= 0.0:
        raise DegenerateGeometryError(f"Jacobian determinant {det:.3e} at {tuple(pt)} is not positive")
    return point, jacobian


def physical_gradients(basis: RationalBasis, jacobian: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chain rule: [dR/dx; dR/dy] = J^-T [dR/dxi; dR/deta]."""
    grads = linalg.solve(jacobian.T, np.vstack((basis.d_xi, basis.d_eta)))
    return grads[0], grads[1]


def physical_to_parametric(patch: Patch2D, x: float, y: float, tol: float = 1e-12, max_iter: int = 50) -> ParamPoint:
    """Invert the geometric map by Newton iteration, clamped to the patch."""
    (xi_lo, xi_hi), (eta_lo, eta_hi) = patch.xi.bounds, patch.eta.bounds
    target = np.array([x, y], dtype=float)
    extent = np.ptp(patch.control_points.reshape(-1, 2), axis=0).max()
    u = np.array([(xi_lo + xi_hi) / 2, (eta_lo + eta_hi) / 2])
    for _ in range(max_iter):
        point, jacobian = surface_point(patch, ParamPoint(*u))
        step = linalg.solve(jacobian, target - point)
        u = np.clip(u + step, [xi_lo, eta_lo], [xi_hi, eta_hi])
        if np.linalg.norm(step) <= tol:
            break
    point, _ = surface_point(patch, ParamPoint(*u))
    if np.linalg.norm(point - target) > 1e-9 * max(extent, 1.0):
        raise GeometryError(f"point ({x}, {y}) is not on the plate")
    return ParamPoint(float(u[0]), float(u[1]))


# --- knot construction ---


def open_uniform_knots(n_elems: int, p: int) -> KnotVector:
    if n_elems < 1 or p < 1:
        raise KnotVectorError(f"need n_elems >= 1 and p >= 1, got n_elems={n_elems}, p={p}")
    knots = np.concatenate((np.zeros(p), np.linspace(0.0, 1.0, n_elems + 1), np.ones(p)))
    return KnotVector(knots, p)


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    p, knots = kv.degree, kv.knots
    if p == 0:
        return 0.5 * (knots[:-1] + knots[1:])
    return np.array([knots[i + 1: i + p + 1].mean() for i in range(kv.n)])


def rectangle_patch(a: float, b: float, elements_x: int, elements_y: int, degree: int = 2) -> Patch2D:
    """Rectangle [-a/2, a/2] x [-b/2, b/2] with a linear parameterization."""
    if a <= 0 or b <= 0:
        raise GeometryError(f"plate sides must be positive, got a={a}, b={b}")
    xi = open_uniform_knots(elements_x, degree)
    eta = open_uniform_knots(elements_y, degree)
    gx = -a / 2 + a * greville_abscissae(xi)
    gy = -b / 2 + b * greville_abscissae(eta)
    net = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1)
    return Patch2D(xi, eta, net)


def element_index(patch: Patch2D, pt: ParamPoint) -> int:
    """Position of the span containing `pt` in `element_spans` order."""
    bx, by = patch.xi.breakpoints, patch.eta.breakpoints
    i = min(int(np.searchsorted(bx, pt.xi, side="right")) - 1, bx.size - 2)
    j = min(int(np.searchsorted(by, pt.eta, side="right")) - 1, by.size - 2)
    return max(i, 0) * (by.size - 1) + max(j, 0)


def element_spans(patch: Patch2D) -> list[tuple[float, float, float, float]]:
    """(xi_lo, xi_hi, eta_lo, eta_hi) for every nonzero span, xi-major."""
    bx, by = patch.xi.breakpoints, patch.eta.breakpoints
    return [
        (float(bx[i]), float(bx[i + 1]), float(by[j]), float(by[j + 1]))
        for i in range(bx.size - 1)
        for j in range(by.size - 1)
    ]


# --- quadrature tables ---


@dataclass(frozen=True)
class QuadratureGrid:
    """Basis tables at Gauss points, one block per element.

    Shapes: indices (E, L), values/dx/dy (E, P, L), points (E, P, 2), weights (E, P).
    `weights` already include the Jacobian determinant.
    """

    indices: np.ndarray
    values: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    params: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.indices.shape[0]


def element_quadrature(patch: Patch2D, order_xi: int, order_eta: int) -> QuadratureGrid:
    """Tensor Gauss-Legendre rule on every element; raises DegenerateGeometryError on bad Jacobians."""
    gx, wx = np.polynomial.legendre.leggauss(order_xi)
    gy, wy = np.polynomial.legendre.leggauss(order_eta)
    indices, values, dxs, dys, points, weights, params = [], [], [], [], [], [], []
    for e, (xi_lo, xi_hi, eta_lo, eta_hi) in enumerate(element_spans(patch)):
        hx, hy = (xi_hi - xi_lo) / 2, (eta_hi - eta_lo) / 2
        el_idx = None
        el_vals, el_dx, el_dy, el_pts, el_w, el_par = [], [], [], [], [], []
        for s, ws in zip(gx, wx):
            for t, wt in zip(gy, wy):
                pt = ParamPoint(xi_lo + hx * (s + 1), eta_lo + hy * (t + 1))
                basis = rational_basis_2d(patch, pt)
                try:
                    point, jacobian = surface_point(patch, pt)
                except DegenerateGeometryError as exc:
                    raise DegenerateGeometryError(f"element {e}: {exc}", element=e) from exc
                dx, dy = physical_gradients(basis, jacobian)
                el_idx = basis.indices
                el_vals.append(basis.values)
                el_dx.append(dx)
                el_dy.append(dy)
                el_pts.append(point)
                el_w.append(ws * wt * hx * hy * np.linalg.det(jacobian))
                el_par.append(pt)
        indices.append(el_idx)
        values.append(el_vals)
        dxs.append(el_dx)
        dys.append(el_dy)
        points.append(el_pts)
        weights.append(el_w)
        params.append(el_par)
    logger.debug(
        "Built quadrature tables",
        extra={'elements': len(indices), 'points_per_element': order_xi * order_eta},
    )
    return QuadratureGrid(
        indices=np.array(indices, dtype=int),
        values=np.array(values),
        dx=np.array(dxs),
        dy=np.array(dys),
        points=np.array(points),
        weights=np.array(weights),
        params=np.array(params),
    )
