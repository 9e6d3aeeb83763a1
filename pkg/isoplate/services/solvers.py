"""
Linear, eigenvalue and continuation solvers for R(u, lambda) = f_int(u) - lambda F = 0.

Everything here works on an EquilibriumSystem: a reduced (constraint-free) set of
equations with a reference load and a scalar probe. A PlateModel passed in
place of a system is wrapped in a ReducedPlateSystem and results are expanded
back to the full dof vector.
"""

import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, runtime_checkable

import numpy as np
from scipy import linalg

from isoplate.core.exceptions import (
    FactorizationError,
    NonConvergenceError,
    PathTerminationError,
    StabilityError,
)
from isoplate.core.logging_config import get_logger
from isoplate.schemas.scenario import SolverSettings
from isoplate.services.plate_fem import (
    DOFS_PER_POINT,
    W,
    LoadCase,
    PlateModel,
    ReducedPlateSystem,
    free_dofs,
    geometric_stiffness,
    linear_stiffness,
    load_vector,
)

logger = get_logger(__name__)

_TINY = np.finfo(float).tiny


@runtime_checkable
class EquilibriumSystem(Protocol):
    size: int

    def internal_force(self, state: np.ndarray) -> np.ndarray: ...

    def tangent(self, state: np.ndarray) -> np.ndarray: ...

    def reference_load(self) -> np.ndarray: ...

    def probe(self, state: np.ndarray) -> float: ...


@dataclass(frozen=True)
class PathRecord:
    step: int
    load_factor: float
    state: np.ndarray
    probe: float
    iterations: int


@dataclass
class EquilibriumPath:
    records: list[PathRecord] = field(default_factory=list)
    converged: bool = True
    termination: str = "completed"

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def load_factors(self) -> np.ndarray:
        return np.array([r.load_factor for r in self.records])

    @property
    def probes(self) -> np.ndarray:
        return np.array([r.probe for r in self.records])


@dataclass(frozen=True)
class NewtonResult:
    state: np.ndarray
    load_factor: float
    iterations: int


def _as_system(target, probe_point=None) -> tuple[EquilibriumSystem, Callable[[np.ndarray], np.ndarray]]:
    if isinstance(target, PlateModel):
        system = ReducedPlateSystem(target, probe_point or (0.0, 0.0))
        return system, system.expand
    return target, lambda state: np.array(state, dtype=float)


def _norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


# --- direct solves ---


def linear_solve(K: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Cholesky solve of a reduced SPD system."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    f = np.asarray(f, dtype=float)
    try:
        factor = linalg.cho_factor(K)
    except linalg.LinAlgError as exc:
        match = re.search(r"(\d+)", str(exc))
        pivot = int(match.group(1)) if match else None
        raise FactorizationError(f"stiffness is singular or indefinite at pivot {pivot}: {exc}", pivot=pivot) from exc
    u = linalg.cho_solve(factor, f)
    scale = _norm(f)
    if scale > 0:
        residual = _norm(K @ u - f) / scale
        if residual > 1e-10:
            logger.warning("Linear solve residual above target", extra={'residual': residual})
    return u


def linear_bending(model: PlateModel, q: float) -> np.ndarray:
    """Small-deflection response of the perfect plate to uniform pressure q (full dof vector)."""
    free = free_dofs(model)
    stiffness = linear_stiffness(model)[np.ix_(free, free)]
    rhs = load_vector(model, LoadCase.uniform_pressure(q))[free]
    state = model.zero_state()
    state[free] = linear_solve(stiffness, rhs)
    return state


def linear_buckling(
    K: np.ndarray, Kg: np.ndarray, w_index: Optional[np.ndarray] = None
) -> tuple[float, np.ndarray]:
    """Smallest positive lambda with K phi = lambda Kg phi.

    Solved as Kg phi = mu K phi with mu = 1/lambda, taking the largest mu. The
    mode is scaled so its largest entry among `w_index` (default: all) is +1.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Kg = np.atleast_2d(np.asarray(Kg, dtype=float))
    n = K.shape[0]
    try:
        mu, vectors = linalg.eigh(Kg, K, subset_by_index=[n - 1, n - 1])
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"linear stiffness is not positive definite: {exc}") from exc
    top = float(mu[0])
    if not top > 1e-14 * max(np.abs(Kg).max(), _TINY) / max(np.abs(K).max(), _TINY):
        raise StabilityError("geometric stiffness admits no positive buckling load")
    mode = vectors[:, 0]
    components = mode if w_index is None else mode[w_index]
    mode = mode / components[np.argmax(np.abs(components))]
    load = 1.0 / top
    logger.info("Linear buckling load found", extra={'load_factor': load})
    return load, mode


def plate_linear_buckling(model: PlateModel) -> tuple[float, np.ndarray]:
    """Linear buckling of a constrained plate under its edge load; mode returned as a full dof vector."""
    free = free_dofs(model)
    K = linear_stiffness(model)[np.ix_(free, free)]
    Kg = geometric_stiffness(model)[np.ix_(free, free)]
    w_index = np.flatnonzero(free % DOFS_PER_POINT == W)
    load, reduced_mode = linear_buckling(K, Kg, w_index)
    mode = model.zero_state()
    mode[free] = reduced_mode
    return load, mode


# --- Newton-Raphson ---


def _newton(system: EquilibriumSystem, load_factor: float, settings: SolverSettings,
            state: np.ndarray) -> tuple[np.ndarray, int]:
    F = system.reference_load()
    u = np.array(state, dtype=float)
    for iteration in range(settings.max_iterations + 1):
        f_int = system.internal_force(u)
        residual = load_factor * F - f_int
        if _norm(residual) <= settings.residual_tolerance * max(_norm(load_factor * F), _norm(f_int), _TINY):
            return u, iteration
        if iteration == settings.max_iterations:
            break
        du = linalg.solve(system.tangent(u), residual, assume_a="sym")
        u = u + du
        logger.debug("Newton iteration", extra={'iteration': iteration + 1, 'increment': _norm(du)})
        if _norm(du) <= settings.tolerance * max(_norm(u), 1e-12):
            return u, iteration + 1
    raise NonConvergenceError(
        f"Newton-Raphson did not converge in {settings.max_iterations} iterations at load factor {load_factor}",
        last_state=u,
        iterations=settings.max_iterations,
    )


def newton_raphson(target, load_factor: float, settings: SolverSettings | None = None,
                   initial_state: np.ndarray | None = None) -> NewtonResult:
    """Equilibrium at a fixed load factor; a PlateModel target returns full dof vectors."""
    settings = settings or SolverSettings()
    system, expand = _as_system(target)
    if initial_state is None:
        start = np.zeros(system.size)
    elif isinstance(target, PlateModel):
        start = system.restrict(initial_state)
    else:
        start = initial_state
    try:
        state, iterations = _newton(system, load_factor, settings, start)
    except NonConvergenceError as exc:
        exc.last_state = expand(exc.last_state)
        raise
    except linalg.LinAlgError as exc:
        raise NonConvergenceError(f"singular tangent during Newton-Raphson: {exc}", last_state=expand(start)) from exc
    return NewtonResult(state=expand(state), load_factor=load_factor, iterations=iterations)


# --- Riks arc-length continuation ---


class _StepFailure(Exception):
    pass


def _solve_general(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        try:
            solution = linalg.lu_solve(linalg.lu_factor(K), rhs)
        except (linalg.LinAlgError, ValueError) as exc:
            raise _StepFailure(str(exc)) from exc
    if not np.all(np.isfinite(solution)):
        raise _StepFailure("singular tangent")
    return solution


def _riks_corrector(system: EquilibriumSystem, u0: np.ndarray, lam0: float, du_p: np.ndarray, dl_p: float,
                    scale: float, settings: SolverSettings) -> tuple[np.ndarray, float, int]:
    """Normal-plane corrector: iterates stay on the plane orthogonal to the predictor."""
    F = system.reference_load()
    s2 = scale * scale
    u, lam = u0 + du_p, lam0 + dl_p
    for iteration in range(1, settings.max_iterations + 1):
        f_int = system.internal_force(u)
        residual = lam * F - f_int
        if _norm(residual) <= settings.residual_tolerance * max(_norm(lam * F), _norm(f_int), _TINY):
            return u, lam, iteration
        solution = _solve_general(system.tangent(u), np.column_stack((residual, F)))
        du_r, du_f = solution[:, 0], solution[:, 1]
        denom = du_f @ du_p / s2 + dl_p
        if denom == 0.0:
            raise _StepFailure("corrector is tangent to the constraint plane")
        offset = (u - u0 - du_p) @ du_p / s2 + (lam - lam0 - dl_p) * dl_p
        dl = -(offset + du_r @ du_p / s2) / denom
        du = du_r + dl * du_f
        u, lam = u + du, lam + dl
        if not np.all(np.isfinite(u)) or not np.isfinite(lam):
            raise _StepFailure("corrector diverged")
        if _norm(du) <= settings.tolerance * max(_norm(u), 1e-12):
            return u, lam, iteration
    raise _StepFailure(f"corrector did not converge in {settings.max_iterations} iterations")


def riks_trace(target, settings: SolverSettings | None = None, *, probe_point=None,
               initial_state: np.ndarray | None = None) -> EquilibriumPath:
    """Trace the equilibrium path from lambda = 0 with a normal-plane arc-length constraint.

    The arc is measured in (du / u_ref, dlambda) with u_ref = |K_T(u0)^-1 F|.
    """
    settings = settings or SolverSettings()
    system, expand = _as_system(target, probe_point)
    F = system.reference_load()
    if not np.any(F):
        raise ValueError("reference load vector is zero")

    if initial_state is None:
        u = np.zeros(system.size)
    elif isinstance(target, PlateModel):
        u = system.restrict(initial_state)
    else:
        u = np.array(initial_state, dtype=float)
    try:
        u, _ = _newton(system, 0.0, settings, u)
        v0 = _solve_general(system.tangent(u), F)
    except (NonConvergenceError, _StepFailure, linalg.LinAlgError) as exc:
        raise PathTerminationError(f"no equilibrium at zero load: {exc}", path=EquilibriumPath(
            converged=False, termination="no initial equilibrium")) from exc
    lam = 0.0
    scale = _norm(v0) or 1.0

    if settings.initial_arc_length is not None:
        ds0 = settings.initial_arc_length
    else:
        probe_rate = abs(system.probe(v0))
        if settings.probe_target is not None and probe_rate > 0:
            dl0 = settings.probe_target / probe_rate
        else:
            dl0 = 1.0
        if settings.max_initial_load is not None:
            dl0 = min(dl0, settings.max_initial_load)
        ds0 = dl0 * np.hypot(_norm(v0) / scale, 1.0)

    path = EquilibriumPath()
    ds = ds0
    prev_du: Optional[np.ndarray] = None
    prev_dl = 0.0
    step = 0
    logger.info("Starting arc-length continuation", extra={'arc_length': ds0, 'dofs': system.size})

    while step < settings.max_steps:
        try:
            v = _solve_general(system.tangent(u), F)
            dl_p = ds / np.hypot(_norm(v) / scale, 1.0)
            du_p = dl_p * v
            cap = settings.max_load_increment
            if cap is not None and abs(dl_p) > cap:
                ds *= cap / abs(dl_p)
                du_p, dl_p = du_p * (cap / abs(dl_p)), float(np.copysign(cap, dl_p))
            if prev_du is not None and du_p @ prev_du / scale ** 2 + dl_p * prev_dl < 0:
                dl_p, du_p = -dl_p, -du_p
            u_new, lam_new, iterations = _riks_corrector(system, u, lam, du_p, dl_p, scale, settings)
            if settings.hold_probe_sign and path.records:
                last = path.records[-1].probe
                if last * system.probe(u_new) < 0:
                    raise _StepFailure("probe deflection changed sign")
        except (_StepFailure, linalg.LinAlgError) as exc:
            ds *= settings.shrink_factor
            logger.warning("Arc-length step rejected, shrinking", extra={'arc_length': ds, 'reason': str(exc)})
            if ds < settings.min_arc_length_ratio * ds0:
                path.converged = False
                path.termination = "arc-length underflow"
                raise PathTerminationError(
                    f"arc length fell below {settings.min_arc_length_ratio:g} of its initial value after "
                    f"{len(path)} steps",
                    path=path,
                ) from exc
            continue

        step += 1
        prev_du, prev_dl = u_new - u, lam_new - lam
        u, lam = u_new, lam_new
        probe = system.probe(u)
        path.records.append(PathRecord(step=step, load_factor=float(lam), state=expand(u), probe=probe,
                                       iterations=iterations))
        logger.debug(
            "Arc-length step accepted",
            extra={'step': step, 'load_factor': float(lam), 'probe': probe, 'iterations': iterations,
                   'arc_length': ds},
        )

        if settings.max_load_factor is not None and lam >= settings.max_load_factor:
            path.termination = "load limit"
            break
        if settings.max_probe is not None and abs(probe) >= settings.max_probe:
            path.termination = "deflection limit"
            break
        if iterations <= settings.fast_iterations:
            ds = min(ds * settings.growth_factor, settings.max_arc_length_ratio * ds0)
    else:
        path.termination = "max steps"

    logger.info("Arc-length continuation finished",
                extra={'steps': len(path), 'termination': path.termination, 'load_factor': float(lam)})
    return path


# --- critical load extraction ---


def critical_load_threshold(path: EquilibriumPath, h_bar: float, ratio: float = 0.05) -> Optional[float]:
    """Load at which |probe| first exceeds ratio * h_bar, interpolated linearly from the origin on."""
    limit = ratio * h_bar
    prev_load, prev_w = 0.0, 0.0
    for record in path:
        w = abs(record.probe)
        if w > limit:
            t = (limit - prev_w) / (w - prev_w)
            return prev_load + t * (record.load_factor - prev_load)
        prev_load, prev_w = record.load_factor, w
    return None


def critical_load_plateau(path: EquilibriumPath) -> Optional[float]:
    """Mean load of the rising segment with the smallest dlambda / d|w|."""
    loads = np.concatenate(([0.0], path.load_factors))
    deflections = np.concatenate(([0.0], np.abs(path.probes)))
    best_slope, best_load = np.inf, None
    for i in range(loads.size - 1):
        dw = deflections[i + 1] - deflections[i]
        if dw <= 0 or loads[i + 1] <= loads[i]:
            continue
        slope = (loads[i + 1] - loads[i]) / dw
        if slope < best_slope:
            best_slope, best_load = slope, 0.5 * (loads[i] + loads[i + 1])
    return None if best_load is None else float(best_load)
