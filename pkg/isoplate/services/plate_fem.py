"""
First-order shear deformation plate on a NURBS patch.

Each control point carries five generalized displacements (u, v, w, phi_x,
phi_y) numbered 5 * c + component. In-plane strains keep the von Karman
quadratic terms and the coupling with an initial imperfection w_bar:

    eps_xx = u,x + w,x^2 / 2 + w,x wb,x
    eps_yy = v,y + w,y^2 / 2 + w,y wb,y
    gam_xy = u,y + v,x + w,x w,y + wb,x w,y + w,x wb,y
    kappa  = (phi_x,x, phi_y,y, phi_x,y + phi_y,x)
    gamma  = (phi_y + w,y + c wb,y, phi_x + w,x + c wb,x)

with c = 1 for the "literal" shear measure and c = 0 for "stress_free", where
transverse shear is measured from the normal of the imperfect surface.

Membrane and bending terms use the full (p+1) x (q+1) Gauss rule; transverse
shear uses p x q points unless `shear_integration="full"`.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal

import numpy as np
from scipy import linalg, sparse

from isoplate.core.exceptions import (
    BoundaryConditionError,
    DegenerateGeometryError,
    ElementError,
    FactorizationError,
    GeometryError,
    ImperfectionError,
)
from isoplate.core.logging_config import get_logger
from isoplate.services.laminate import DEFAULT_SHEAR_CORRECTION, Layup, SectionStiffness, section_stiffness
from isoplate.services.nurbs import (
    ParamPoint,
    Patch2D,
    QuadratureGrid,
    element_index,
    element_quadrature,
    greville_abscissae,
    physical_gradients,
    physical_to_parametric,
    rational_basis_2d,
    surface_point,
)
from isoplate.services.thickness_field import (
    ThicknessField,
    lamina_thickness_table,
    stack_interfaces,
)

logger = get_logger(__name__)

DOFS_PER_POINT = 5
U, V, W, PHI_X, PHI_Y = range(DOFS_PER_POINT)

# Edge label -> (parametric direction held fixed, control-net row/column)
EDGES = {
    "AD": ("xi", 0), "DA": ("xi", 0),
    "BC": ("xi", -1), "CB": ("xi", -1),
    "CD": ("eta", 0), "DC": ("eta", 0),
    "AB": ("eta", -1), "BA": ("eta", -1),
}

# Boundary kind -> constrained components on x = const edges and on y = const edges
BOUNDARY_KINDS = {
    "clamped": ((U, V, W, PHI_X, PHI_Y), (U, V, W, PHI_X, PHI_Y)),
    "ss1": ((W, PHI_Y), (W, PHI_X)),
    "ss2": ((U, V, W), (U, V, W)),
}


@dataclass(frozen=True)
class LoadCase:
    """Uniform pressure plus compressive edge resultants (positive = compression)."""

    pressure: float = 0.0
    edge_x: float = 0.0
    edge_y: float = 0.0

    @classmethod
    def uniform_pressure(cls, q: float = 1.0) -> "LoadCase":
        return cls(pressure=q)

    @classmethod
    def uniaxial_x(cls, N: float = 1.0) -> "LoadCase":
        return cls(edge_x=N)

    @classmethod
    def uniaxial_y(cls, N: float = 1.0) -> "LoadCase":
        return cls(edge_y=N)

    @classmethod
    def biaxial(cls, N: float = 1.0) -> "LoadCase":
        return cls(edge_x=N, edge_y=N)

    @property
    def has_edge_load(self) -> bool:
        return self.edge_x != 0.0 or self.edge_y != 0.0

    @property
    def is_zero(self) -> bool:
        return self.pressure == 0.0 and not self.has_edge_load

    def edge_only(self) -> "LoadCase":
        return LoadCase(edge_x=self.edge_x, edge_y=self.edge_y)


@dataclass(frozen=True)
class _RuleTables:
    grid: QuadratureGrid
    dofs: np.ndarray
    section: SectionStiffness

    @cached_property
    def abd(self) -> np.ndarray:
        return self.section.abd


@dataclass(eq=False)
class PlateModel:
    patch: Patch2D
    thickness: ThicknessField
    layup: Layup
    ks: float = DEFAULT_SHEAR_CORRECTION
    shear_integration: Literal["reduced", "full"] = "reduced"
    shear_imperfection: Literal["stress_free", "literal"] = "literal"
    imperfection: np.ndarray | None = None
    constrained: set[int] = field(default_factory=set)
    load: LoadCase = field(default_factory=LoadCase)
    _prestress_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.thickness.patch.shape != self.patch.shape:
            raise GeometryError("thickness field and plate patch have different control nets")
        if self.thickness.n_laminae != self.layup.n_laminae:
            raise GeometryError(
                f"thickness field has {self.thickness.n_laminae} laminae, layup has {self.layup.n_laminae}"
            )
        if self.shear_integration not in ("reduced", "full"):
            raise ValueError(f"unknown shear integration {self.shear_integration!r}")
        if self.shear_imperfection not in ("stress_free", "literal"):
            raise ValueError(f"unknown shear imperfection measure {self.shear_imperfection!r}")
        if self.imperfection is None:
            self.imperfection = np.zeros(self.patch.n_control)
        else:
            self.imperfection = np.asarray(self.imperfection, dtype=float)
            if self.imperfection.shape != (self.patch.n_control,):
                raise ImperfectionError(
                    f"imperfection needs {self.patch.n_control} control coefficients, got {self.imperfection.shape}"
                )
        self.constrained = set(self.constrained)

    @property
    def n_dofs(self) -> int:
        return DOFS_PER_POINT * self.patch.n_control

    @property
    def n_elements(self) -> int:
        return self.patch.n_elements

    def dof(self, c: int, component: int) -> int:
        return DOFS_PER_POINT * c + component

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.n_dofs)

    def _tables(self, order_xi: int, order_eta: int) -> _RuleTables:
        try:
            grid = element_quadrature(self.patch, order_xi, order_eta)
        except DegenerateGeometryError as exc:
            raise ElementError(f"singular element Jacobian: {exc}", element=exc.element) from exc
        dofs = (DOFS_PER_POINT * grid.indices[:, :, None] + np.arange(DOFS_PER_POINT)).reshape(
            grid.n_elements, -1
        )
        lamina = lamina_thickness_table(self.thickness, grid.indices, grid.values)
        section = section_stiffness(self.layup, stack_interfaces(lamina), self.ks)
        return _RuleTables(grid=grid, dofs=dofs, section=section)

    @cached_property
    def membrane_tables(self) -> _RuleTables:
        p, q = self.patch.xi.degree, self.patch.eta.degree
        return self._tables(p + 1, q + 1)

    @cached_property
    def shear_tables(self) -> _RuleTables:
        p, q = self.patch.xi.degree, self.patch.eta.degree
        if self.shear_integration == "full":
            return self.membrane_tables
        return self._tables(max(p, 1), max(q, 1))

    @property
    def shear_factor(self) -> float:
        return 0.0 if self.shear_imperfection == "stress_free" else 1.0


# --- pointwise operators ---


def _grad(d: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.sum(d * values, axis=-1)


def _membrane_bending(dx, dy, u_loc, wb_loc, linear: bool):
    """Generalized strains and operators at points with local basis gradients dx, dy (..., L)."""
    ux, uy = _grad(dx, u_loc[..., U]), _grad(dy, u_loc[..., U])
    vx, vy = _grad(dx, u_loc[..., V]), _grad(dy, u_loc[..., V])
    wx, wy = _grad(dx, u_loc[..., W]), _grad(dy, u_loc[..., W])
    fxx, fxy = _grad(dx, u_loc[..., PHI_X]), _grad(dy, u_loc[..., PHI_X])
    fyx, fyy = _grad(dx, u_loc[..., PHI_Y]), _grad(dy, u_loc[..., PHI_Y])
    wbx, wby = _grad(dx, wb_loc), _grad(dy, wb_loc)

    if linear:
        zero = np.zeros_like(ux)
        eps = np.stack((ux, vy, uy + vx), axis=-1)
        tx, ty = zero, zero
    else:
        eps = np.stack((
            ux + 0.5 * wx ** 2 + wx * wbx,
            vy + 0.5 * wy ** 2 + wy * wby,
            uy + vx + wx * wy + wbx * wy + wx * wby,
        ), axis=-1)
        tx, ty = wx + wbx, wy + wby
    kappa = np.stack((fxx, fyy, fxy + fyx), axis=-1)

    shape = np.broadcast_shapes(dx.shape, tx.shape + (1,))
    lead, n_local = shape[:-1], shape[-1]
    dx = np.broadcast_to(dx, shape)
    dy = np.broadcast_to(dy, shape)
    tx, ty = tx[..., None], ty[..., None]

    b_m = np.zeros(lead + (3, n_local, DOFS_PER_POINT))
    b_m[..., 0, :, U] = dx
    b_m[..., 1, :, V] = dy
    b_m[..., 2, :, U] = dy
    b_m[..., 2, :, V] = dx

    b_nl = np.zeros_like(b_m)
    b_nl[..., 0, :, W] = tx * dx
    b_nl[..., 1, :, W] = ty * dy
    b_nl[..., 2, :, W] = ty * dx + tx * dy

    b_b = np.zeros_like(b_m)
    b_b[..., 0, :, PHI_X] = dx
    b_b[..., 1, :, PHI_Y] = dy
    b_b[..., 2, :, PHI_X] = dy
    b_b[..., 2, :, PHI_Y] = dx
    return eps, kappa, b_m, b_nl, b_b


def _shear(values, dx, dy, u_loc, wb_loc, c: float):
    phix, phiy = _grad(values, u_loc[..., PHI_X]), _grad(values, u_loc[..., PHI_Y])
    wx, wy = _grad(dx, u_loc[..., W]), _grad(dy, u_loc[..., W])
    gamma = np.stack((
        phiy + wy + c * _grad(dy, wb_loc),
        phix + wx + c * _grad(dx, wb_loc),
    ), axis=-1)

    shape = np.broadcast_shapes(values.shape, phix.shape + (1,))
    lead, n_local = shape[:-1], shape[-1]
    b_s = np.zeros(lead + (2, n_local, DOFS_PER_POINT))
    b_s[..., 0, :, PHI_Y] = np.broadcast_to(values, shape)
    b_s[..., 0, :, W] = np.broadcast_to(dy, shape)
    b_s[..., 1, :, PHI_X] = np.broadcast_to(values, shape)
    b_s[..., 1, :, W] = np.broadcast_to(dx, shape)
    return gamma, b_s


# --- element kernel ---


@dataclass(frozen=True)
class _Evaluation:
    force: np.ndarray
    tangent: np.ndarray | None
    energy: float
    membrane_resultants: np.ndarray


def _evaluate(model: PlateModel, state: np.ndarray, elements=slice(None), *, linear: bool = False,
              with_tangent: bool = True) -> _Evaluation:
    state = np.asarray(state, dtype=float)
    imperfection = np.zeros_like(model.imperfection) if linear else model.imperfection

    mt = model.membrane_tables
    grid = mt.grid
    dofs = mt.dofs[elements]
    n_el = dofs.shape[0]
    n_local = grid.indices.shape[1]
    u_loc = state[dofs].reshape(n_el, 1, n_local, DOFS_PER_POINT)
    wb_loc = imperfection[grid.indices[elements]][:, None, :]
    weights = grid.weights[elements]
    abd = mt.abd[elements]

    eps, kappa, b_m, b_nl, b_b = _membrane_bending(grid.dx[elements], grid.dy[elements], u_loc, wb_loc, linear)
    strains = np.concatenate((eps, kappa), axis=-1)
    stress = np.einsum("epij,epj->epi", abd, strains)
    b_hat = np.concatenate((b_m + b_nl, b_b), axis=-3).reshape(n_el, -1, 6, n_local * DOFS_PER_POINT)

    force = np.einsum("epia,epi,ep->ea", b_hat, stress, weights)
    energy = 0.5 * np.einsum("epi,epi,ep->", strains, stress, weights)
    tangent = None
    if with_tangent:
        cb = np.einsum("epij,epja->epia", abd, b_hat)
        tangent = np.einsum("epia,epib,ep->eab", b_hat, cb, weights)
        if not linear:
            n_x, n_y, n_xy = stress[..., 0], stress[..., 1], stress[..., 2]
            dx, dy = grid.dx[elements], grid.dy[elements]
            k_w = (
                np.einsum("epl,ep,epm,ep->elm", dx, n_x, dx, weights)
                + np.einsum("epl,ep,epm,ep->elm", dy, n_y, dy, weights)
                + np.einsum("epl,ep,epm,ep->elm", dx, n_xy, dy, weights)
                + np.einsum("epl,ep,epm,ep->elm", dy, n_xy, dx, weights)
            )
            blocks = np.ascontiguousarray(tangent).reshape(n_el, n_local, DOFS_PER_POINT, n_local, DOFS_PER_POINT)
            blocks[:, :, W, :, W] += k_w
            tangent = blocks.reshape(n_el, n_local * DOFS_PER_POINT, n_local * DOFS_PER_POINT)

    st = model.shear_tables
    sgrid = st.grid
    su_loc = state[st.dofs[elements]].reshape(n_el, 1, n_local, DOFS_PER_POINT)
    swb_loc = imperfection[sgrid.indices[elements]][:, None, :]
    sweights = sgrid.weights[elements]
    a_s = st.section.As[elements]
    gamma, b_s = _shear(sgrid.values[elements], sgrid.dx[elements], sgrid.dy[elements], su_loc, swb_loc,
                        0.0 if linear else model.shear_factor)
    shear_force = np.einsum("epij,epj->epi", a_s, gamma)
    b_s = b_s.reshape(n_el, -1, 2, n_local * DOFS_PER_POINT)

    force = force + np.einsum("epia,epi,ep->ea", b_s, shear_force, sweights)
    energy += 0.5 * np.einsum("epi,epi,ep->", gamma, shear_force, sweights)
    if with_tangent:
        tangent += np.einsum("epia,epij,epjb,ep->eab", b_s, a_s, b_s, sweights)

    return _Evaluation(force=force, tangent=tangent, energy=float(energy), membrane_resultants=stress[..., :3])


def _scatter_vector(model: PlateModel, dofs: np.ndarray, local: np.ndarray) -> np.ndarray:
    out = np.zeros(model.n_dofs)
    np.add.at(out, dofs, local)
    return out


def _scatter_matrix(model: PlateModel, dofs: np.ndarray, local: np.ndarray) -> np.ndarray:
    rows = np.broadcast_to(dofs[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], local.shape).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(model.n_dofs, model.n_dofs)).toarray()


def element_dofs(model: PlateModel, element: int) -> np.ndarray:
    return model.membrane_tables.dofs[element]


def element_internal_force(model: PlateModel, state: np.ndarray, element: int) -> np.ndarray:
    return _evaluate(model, state, [element], with_tangent=False).force[0]


def element_tangent(model: PlateModel, state: np.ndarray, element: int) -> np.ndarray:
    return _evaluate(model, state, [element]).tangent[0]


def internal_force_and_tangent(model: PlateModel, state: np.ndarray, *, linear: bool = False):
    ev = _evaluate(model, state, linear=linear)
    dofs = model.membrane_tables.dofs
    return _scatter_vector(model, dofs, ev.force), _scatter_matrix(model, dofs, ev.tangent)


def strain_energy(model: PlateModel, state: np.ndarray) -> float:
    return _evaluate(model, state, with_tangent=False).energy


def linear_stiffness(model: PlateModel) -> np.ndarray:
    """Small-displacement stiffness of the perfect plate (full dof set)."""
    _, stiffness = internal_force_and_tangent(model, model.zero_state(), linear=True)
    return stiffness


def assemble(model: PlateModel, state: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Global internal force, tangent and prestress geometric stiffness."""
    force, tangent = internal_force_and_tangent(model, state)
    return force, tangent, geometric_stiffness(model)


# --- pointwise inspection ---


@dataclass(frozen=True)
class StrainOperators:
    """Strains and their operators at one point; operator columns follow `dofs`."""

    dofs: np.ndarray
    eps: np.ndarray
    kappa: np.ndarray
    gamma: np.ndarray
    membrane: np.ndarray
    nonlinear: np.ndarray
    bending: np.ndarray
    shear: np.ndarray


@dataclass(frozen=True)
class QuadraturePointState:
    eps: np.ndarray
    kappa: np.ndarray
    gamma: np.ndarray
    N: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    section: SectionStiffness


def strain_operators(model: PlateModel, state: np.ndarray, pt: ParamPoint) -> StrainOperators:
    basis = rational_basis_2d(model.patch, pt)
    try:
        _, jacobian = surface_point(model.patch, pt)
        dx, dy = physical_gradients(basis, jacobian)
    except (DegenerateGeometryError, linalg.LinAlgError) as exc:
        raise ElementError(f"singular Jacobian at {tuple(pt)}: {exc}",
                           element=element_index(model.patch, pt)) from exc

    dofs = (DOFS_PER_POINT * basis.indices[:, None] + np.arange(DOFS_PER_POINT)).ravel()
    u_loc = np.asarray(state, dtype=float)[dofs].reshape(-1, DOFS_PER_POINT)
    wb_loc = model.imperfection[basis.indices]
    eps, kappa, b_m, b_nl, b_b = _membrane_bending(dx, dy, u_loc, wb_loc, linear=False)
    gamma, b_s = _shear(basis.values, dx, dy, u_loc, wb_loc, model.shear_factor)
    n_cols = dofs.size
    return StrainOperators(
        dofs=dofs,
        eps=eps,
        kappa=kappa,
        gamma=gamma,
        membrane=b_m.reshape(3, n_cols),
        nonlinear=b_nl.reshape(3, n_cols),
        bending=b_b.reshape(3, n_cols),
        shear=b_s.reshape(2, n_cols),
    )


def quadrature_point_state(model: PlateModel, state: np.ndarray, pt: ParamPoint) -> QuadraturePointState:
    ops = strain_operators(model, state, pt)
    basis = rational_basis_2d(model.patch, pt)
    lamina = model.thickness.flat_control[:, basis.indices] @ basis.values
    section = section_stiffness(model.layup, stack_interfaces(lamina), model.ks)
    N = section.A @ ops.eps + section.B @ ops.kappa
    M = section.B @ ops.eps + section.D @ ops.kappa
    Q = section.As @ ops.gamma
    return QuadraturePointState(eps=ops.eps, kappa=ops.kappa, gamma=ops.gamma, N=N, M=M, Q=Q, section=section)


def deflection_weights(model: PlateModel, x: float, y: float) -> np.ndarray:
    """Vector p with p . state = w(x, y)."""
    basis = rational_basis_2d(model.patch, physical_to_parametric(model.patch, x, y))
    weights = np.zeros(model.n_dofs)
    weights[DOFS_PER_POINT * basis.indices + W] = basis.values
    return weights


def deflection_at(model: PlateModel, state: np.ndarray, x: float, y: float) -> float:
    return float(deflection_weights(model, x, y) @ np.asarray(state, dtype=float))


# --- loads ---


def edge_control_points(patch: Patch2D, edge: str) -> np.ndarray:
    key = edge.upper()
    if key not in EDGES:
        raise BoundaryConditionError(f"unknown edge {edge!r}; expected one of AD, BC, AB, CD")
    direction, position = EDGES[key]
    n, m = patch.shape
    if direction == "xi":
        i = position % n
        return np.array([patch.flat_index(i, j) for j in range(m)])
    j = position % m
    return np.array([patch.flat_index(i, j) for i in range(n)])


def edge_load_weights(patch: Patch2D, edge: str) -> np.ndarray:
    """Consistent nodal weights of a unit line load along an edge: int R_c ds."""
    direction, position = EDGES[edge.upper()]
    along = patch.eta if direction == "xi" else patch.xi
    fixed_kv = patch.xi if direction == "xi" else patch.eta
    fixed = fixed_kv.bounds[0] if position == 0 else fixed_kv.bounds[1]
    gauss, gw = np.polynomial.legendre.leggauss(along.degree + 2)
    out = np.zeros(patch.n_control)
    bp = along.breakpoints
    for lo, hi in zip(bp[:-1], bp[1:]):
        half = (hi - lo) / 2
        for s, ws in zip(gauss, gw):
            t = lo + half * (s + 1)
            pt = ParamPoint(fixed, t) if direction == "xi" else ParamPoint(t, fixed)
            basis = rational_basis_2d(patch, pt)
            _, jacobian = surface_point(patch, pt)
            ds = np.linalg.norm(jacobian[:, 1] if direction == "xi" else jacobian[:, 0])
            out[basis.indices] += basis.values * ws * half * ds
    return out


def load_vector(model: PlateModel, case: LoadCase | None = None) -> np.ndarray:
    case = model.load if case is None else case
    out = np.zeros(model.n_dofs)
    if case.pressure:
        grid = model.membrane_tables.grid
        local = case.pressure * np.einsum("epl,ep->el", grid.values, grid.weights)
        np.add.at(out, DOFS_PER_POINT * grid.indices + W, local)
    if case.edge_x:
        out[U::DOFS_PER_POINT] += case.edge_x * edge_load_weights(model.patch, "AD")
        out[U::DOFS_PER_POINT] -= case.edge_x * edge_load_weights(model.patch, "BC")
    if case.edge_y:
        out[V::DOFS_PER_POINT] += case.edge_y * edge_load_weights(model.patch, "CD")
        out[V::DOFS_PER_POINT] -= case.edge_y * edge_load_weights(model.patch, "AB")
    return out


# --- constraints ---


def apply_bc(model: PlateModel, kind: str, edges: Iterable[str]) -> None:
    """Constrain the control-point row or column on each edge; interpolatory by the open knots."""
    key = kind.lower()
    if key not in BOUNDARY_KINDS:
        raise BoundaryConditionError(f"unknown boundary kind {kind!r}; expected one of {sorted(BOUNDARY_KINDS)}")
    x_components, y_components = BOUNDARY_KINDS[key]
    for edge in edges:
        points = edge_control_points(model.patch, edge)
        components = x_components if EDGES[edge.upper()][0] == "xi" else y_components
        model.constrained.update(int(DOFS_PER_POINT * c + comp) for c in points for comp in components)
    logger.debug("Applied boundary conditions", extra={'kind': key, 'constrained': len(model.constrained)})


def rigid_in_plane_pins(model: PlateModel) -> set[int]:
    """Statically determinate u/v pins when no in-plane dof is restrained anywhere."""
    if any(d % DOFS_PER_POINT in (U, V) for d in model.constrained):
        return set()
    n, _ = model.patch.shape
    corner_d = model.patch.flat_index(0, 0)
    corner_c = model.patch.flat_index(n - 1, 0)
    return {model.dof(corner_d, U), model.dof(corner_d, V), model.dof(corner_c, V)}


def free_dofs(model: PlateModel) -> np.ndarray:
    fixed = model.constrained | rigid_in_plane_pins(model)
    return np.setdiff1d(np.arange(model.n_dofs), np.fromiter(fixed, dtype=int, count=len(fixed)))


# --- prestress and imperfection ---


def geometric_stiffness(model: PlateModel) -> np.ndarray:
    """-int G^T N0 G dA from a linear membrane solve under the edge part of the load case.

    Positive semi-definite for compressive prestress; zero without edge loads.
    """
    edge_case = model.load.edge_only()
    key = (edge_case, frozenset(model.constrained))
    if key in model._prestress_cache:
        return model._prestress_cache[key]
    if not edge_case.has_edge_load:
        result = np.zeros((model.n_dofs, model.n_dofs))
        model._prestress_cache[key] = result
        return result

    free = free_dofs(model)
    stiffness = linear_stiffness(model)[np.ix_(free, free)]
    rhs = load_vector(model, edge_case)[free]
    try:
        factor = linalg.cho_factor(stiffness)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"prestress stiffness is not positive definite: {exc}") from exc
    prestate = model.zero_state()
    prestate[free] = linalg.cho_solve(factor, rhs)

    ev = _evaluate(model, prestate, linear=True, with_tangent=False)
    mt = model.membrane_tables
    n0 = ev.membrane_resultants
    dx, dy, weights = mt.grid.dx, mt.grid.dy, mt.grid.weights
    k_w = -(
        np.einsum("epl,ep,epm,ep->elm", dx, n0[..., 0], dx, weights)
        + np.einsum("epl,ep,epm,ep->elm", dy, n0[..., 1], dy, weights)
        + np.einsum("epl,ep,epm,ep->elm", dx, n0[..., 2], dy, weights)
        + np.einsum("epl,ep,epm,ep->elm", dy, n0[..., 2], dx, weights)
    )
    w_dofs = DOFS_PER_POINT * mt.grid.indices + W
    result = _scatter_matrix(model, w_dofs, k_w)
    model._prestress_cache[key] = result
    logger.debug("Assembled prestress geometric stiffness", extra={'edge_x': edge_case.edge_x,
                                                                 'edge_y': edge_case.edge_y})
    return result


def seed_imperfection(model: PlateModel, mode: np.ndarray, delta: float, a: float) -> None:
    """Set w_bar_c = delta * a * w_mode / max|w_mode| from a full-length mode."""
    mode = np.asarray(mode, dtype=float)
    if mode.shape != (model.n_dofs,):
        raise ImperfectionError(f"mode must have {model.n_dofs} entries, got {mode.shape}")
    w_mode = mode[W::DOFS_PER_POINT]
    peak = np.max(np.abs(w_mode))
    if peak == 0.0:
        raise ImperfectionError("mode has no transverse component")
    model.imperfection = delta * a * w_mode / peak
    logger.info("Seeded geometric imperfection", extra={'amplitude': delta * a})


def imperfection_peak(model: PlateModel) -> tuple[float, float]:
    """Physical position (at its Greville point) of the control point with the largest |w_bar|."""
    if not np.any(model.imperfection):
        raise ImperfectionError("plate has no imperfection")
    i, j = np.unravel_index(np.argmax(np.abs(model.imperfection)), model.patch.shape)
    pt = ParamPoint(greville_abscissae(model.patch.xi)[i], greville_abscissae(model.patch.eta)[j])
    (x, y), _ = surface_point(model.patch, pt)
    return float(x), float(y)


# --- reduced system ---


class ReducedPlateSystem:
    """Plate equations restricted to free dofs, in the form the continuation solvers consume."""

    def __init__(self, model: PlateModel, probe_point: tuple[float, float] = (0.0, 0.0),
                 load: LoadCase | None = None):
        self.model = model
        self.free = free_dofs(model)
        self.size = self.free.size
        self._reference = load_vector(model, load)[self.free]
        self._probe = deflection_weights(model, *probe_point)[self.free]
        self._cached_key: bytes | None = None
        self._cached: tuple[np.ndarray, np.ndarray] | None = None

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        full = self.model.zero_state()
        full[self.free] = reduced
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full, dtype=float)[self.free]

    def _assembled(self, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        key = np.asarray(state, dtype=float).tobytes()
        if key != self._cached_key:
            force, tangent = internal_force_and_tangent(self.model, self.expand(state))
            self._cached = (force[self.free], tangent[np.ix_(self.free, self.free)])
            self._cached_key = key
        return self._cached

    def internal_force(self, state: np.ndarray) -> np.ndarray:
        return self._assembled(state)[0]

    def tangent(self, state: np.ndarray) -> np.ndarray:
        return self._assembled(state)[1]

    def reference_load(self) -> np.ndarray:
        return self._reference

    def probe(self, state: np.ndarray) -> float:
        return float(self._probe @ state)
