"""
Scenario orchestration: config parsing, benchmark presets, model construction,
analysis dispatch and load normalization.
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import ValidationError

from isoplate.core.config import settings
from isoplate.core.exceptions import (
    ConfigParseError,
    ConfigValidationError,
    ElementError,
    FactorizationError,
    GeometryError,
    ImperfectionError,
    IsoplateError,
    NonConvergenceError,
    ParameterError,
    PathTerminationError,
    PresetError,
    StabilityError,
)
from isoplate.core.logging_config import get_logger
from isoplate.schemas.scenario import (
    ExplicitThickness,
    GeometryConfig,
    IsotropicMaterialConfig,
    MeshConfig,
    OrthotropicMaterialConfig,
    ScenarioConfig,
    SineWaveThickness,
    TaperedDiagonalThickness,
    TaperedXThickness,
    UniformThickness,
)
from isoplate.services import thickness_field as tf
from isoplate.services.laminate import LaminaMaterial, Layup
from isoplate.services.nurbs import rectangle_patch
from isoplate.services.plate_fem import (
    DOFS_PER_POINT,
    W,
    LoadCase,
    PlateModel,
    ReducedPlateSystem,
    apply_bc,
    deflection_weights,
    free_dofs,
    imperfection_peak,
    linear_stiffness,
    seed_imperfection,
)
from isoplate.services.solvers import (
    EquilibriumPath,
    PathRecord,
    critical_load_plateau,
    critical_load_threshold,
    linear_solve,
    plate_linear_buckling,
    riks_trace,
)

logger = get_logger(__name__)

PRESETS = ("4.1", "4.2", "4.3", "4.4", "4.5-iso", "4.5-crossply")

BOUNDARY_SETS = {
    "clamped-AD": (("clamped", ("AD",)),),
    "SS1-all": (("ss1", ("AD", "BC", "AB", "CD")),),
    "SS2-AD-DC": (("ss2", ("AD", "DC")),),
}

LOAD_CASES = {
    "pressure": LoadCase.uniform_pressure,
    "uniaxial-x": LoadCase.uniaxial_x,
    "uniaxial-y": LoadCase.uniaxial_y,
    "biaxial": LoadCase.biaxial,
}

# Fractions of the linear buckling load used to bound nonlinear buckling runs
INITIAL_LOAD_FRACTION = 0.05
BUCKLING_LOAD_LIMIT = 1.5
LOAD_INCREMENT_FRACTION = 0.02
BUCKLING_MAX_STEPS = 200
PROBE_TARGET_RATIO = 1e-2
# A seeded mode smaller than this fraction of its peak at O counts as nodal there
NODAL_PROBE_RATIO = 0.5
DEFAULT_BENDING_LIMIT = 1.0
SINE_WAVE_MIN_ELEMENTS = 12


# --- normalization ---


@dataclass(frozen=True)
class LoadNormalizer:
    """Raw <-> normalized deflection and load for one scenario.

    Isotropic plates: pressure q a^4 / (E h^4), edge load N a^2 / (pi^2 D) with
    D the flexural rigidity of the uniform plate. Laminates use E2 instead of E
    and N a^2 / (E2 h^3) for edge loads.
    """

    a: float
    h_bar: float
    modulus: float
    nu: float
    isotropic: bool
    pressure: bool

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "LoadNormalizer":
        material = config.material
        isotropic = isinstance(material, IsotropicMaterialConfig)
        return cls(
            a=config.geometry.a,
            h_bar=config.geometry.h_bar,
            modulus=material.E if isotropic else material.E2,
            nu=material.nu if isotropic else material.nu12,
            isotropic=isotropic,
            pressure=config.load == "pressure",
        )

    @property
    def flexural_rigidity(self) -> float:
        return self.modulus * self.h_bar ** 3 / (12.0 * (1.0 - self.nu ** 2))

    @property
    def load_scale(self) -> float:
        """Raw load per unit normalized load."""
        if self.pressure:
            return self.modulus * self.h_bar ** 4 / self.a ** 4
        if self.isotropic:
            return np.pi ** 2 * self.flexural_rigidity / self.a ** 2
        return self.modulus * self.h_bar ** 3 / self.a ** 2

    def load(self, raw: float) -> float:
        return raw / self.load_scale

    def raw_load(self, normalized: float) -> float:
        return normalized * self.load_scale

    def deflection(self, w: float) -> float:
        return w / self.h_bar

    def raw_deflection(self, normalized: float) -> float:
        return normalized * self.h_bar


# --- parsing ---


def _field_path(error: dict) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "<root>"


def parse_config(source: str | os.PathLike | dict) -> ScenarioConfig:
    """Load and validate a scenario document (path, JSON text or mapping)."""
    if isinstance(source, dict):
        data = source
    else:
        text = source
        if isinstance(source, os.PathLike) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            try:
                text = Path(source).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigParseError(f"cannot read config {source}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc

    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = _field_path(first)
        raise ConfigParseError(f"{path}: {first['msg']}", field=path) from exc

    check_admissible(config)
    return config


def _thickness_function(config: ScenarioConfig) -> Optional[tf.ThicknessFunction]:
    a, h_bar = config.geometry.a, config.geometry.h_bar
    shape = config.thickness
    if isinstance(shape, UniformThickness):
        return tf.uniform(h_bar)
    if isinstance(shape, TaperedXThickness):
        return tf.tapered_x(a, h_bar, shape.alpha)
    if isinstance(shape, TaperedDiagonalThickness):
        return tf.tapered_diagonal(a, h_bar, shape.alpha)
    if isinstance(shape, SineWaveThickness):
        return tf.sine_wave(a, h_bar, shape.alpha, shape.n, shape.origin)
    return None


def check_admissible(config: ScenarioConfig) -> None:
    """Physical admissibility beyond the schema: positive thickness, grid sizes, probe on the plate."""
    try:
        _thickness_function(config)
    except ParameterError as exc:
        raise ConfigValidationError(f"thickness: {exc}") from exc

    shape = config.thickness
    if isinstance(shape, ExplicitThickness):
        control = np.asarray(shape.control, dtype=float)
        n = config.mesh.elements + config.mesh.degree
        if control.ndim != 3 or control.shape != (len(config.layup), n, n):
            raise ConfigValidationError(
                f"thickness.control must have shape ({len(config.layup)}, {n}, {n}), got {control.shape}"
            )
        if np.any(control <= 0):
            raise ConfigValidationError("thickness.control values must be positive")

    if config.probe is not None:
        half = config.geometry.a / 2
        if any(abs(c) > half for c in config.probe):
            raise ConfigValidationError(f"probe point {config.probe} is outside the plate")

    if isinstance(shape, SineWaveThickness) and shape.alpha != 0 and config.mesh.elements < SINE_WAVE_MIN_ELEMENTS:
        logger.warning(
            "Sine-wave thickness needs a refined mesh to converge; use at least 12x12 elements",
            extra={'elements': config.mesh.elements, 'wavelengths': shape.n},
        )


# --- presets ---


def preset(name: str, alpha: float = 0.0, n: int = 1, analysis: str = "nonlinear-buckling") -> ScenarioConfig:
    """Benchmark scenario families: tapered-x, tapered-diagonal and sine-wave plates."""
    if name not in PRESETS:
        raise PresetError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    buckling = analysis == "nonlinear-buckling"
    if analysis not in ("linear-bending", "nonlinear-bending", "nonlinear-buckling"):
        raise PresetError(f"unknown analysis {analysis!r}")
    composite = OrthotropicMaterialConfig(kind="orthotropic")

    if name in ("4.1", "4.3"):
        data: dict[str, Any] = {
            "geometry": GeometryConfig(a=10.0, h_bar=0.2),
            "thickness": TaperedXThickness(type="tapered_x", alpha=alpha),
            "boundary": "SS1-all" if buckling else "clamped-AD",
            "load": "uniaxial-x" if buckling else "pressure",
        }
    elif name in ("4.2", "4.4"):
        data = {
            "geometry": GeometryConfig(a=10.0, h_bar=0.2),
            "thickness": TaperedDiagonalThickness(type="tapered_diagonal", alpha=alpha),
            "boundary": "SS1-all" if buckling else "SS2-AD-DC",
            "load": "biaxial" if buckling else "pressure",
        }
    else:
        if not buckling:
            raise PresetError(f"preset {name} defines buckling only")
        data = {
            "geometry": GeometryConfig(a=10.0, h_bar=0.5),
            "thickness": SineWaveThickness(type="sine_wave", alpha=alpha, n=n, origin="edge"),
            "mesh": MeshConfig(elements=SINE_WAVE_MIN_ELEMENTS if alpha != 0 else 6),
            "boundary": "SS1-all",
            "load": "uniaxial-y",
        }

    if name == "4.3" or name == "4.5-crossply":
        data["material"] = composite
        data["layup"] = [0.0, 90.0, 90.0, 0.0]
    elif name == "4.4":
        data["material"] = composite
        data["layup"] = [45.0, -45.0, -45.0, 45.0]

    suffix = f"-n{n}" if name.startswith("4.5") else ""
    config = ScenarioConfig(name=f"{name}-{analysis}-alpha{alpha:g}{suffix}", analysis=analysis, **data)
    check_admissible(config)
    return config


# --- model construction ---


def default_probe(config: ScenarioConfig) -> tuple[float, float]:
    """O for buckling, M (mid BC) for the clamped-AD cantilever, B for SS2-AD-DC."""
    if config.probe is not None:
        return config.probe
    half = config.geometry.a / 2
    if config.is_bending and config.boundary == "clamped-AD":
        return (half, 0.0)
    if config.is_bending and config.boundary == "SS2-AD-DC":
        return (half, half)
    return (0.0, 0.0)


def buckling_probe(config: ScenarioConfig, model: PlateModel) -> tuple[float, float]:
    """O, unless the seeded mode is (nearly) nodal there; then its peak."""
    if config.probe is not None:
        return config.probe
    peak = np.max(np.abs(model.imperfection))
    at_centre = abs(deflection_weights(model, 0.0, 0.0)[W::DOFS_PER_POINT] @ model.imperfection)
    if peak == 0.0 or at_centre >= NODAL_PROBE_RATIO * peak:
        return (0.0, 0.0)
    point = imperfection_peak(model)
    logger.info("Seeded mode is nodal at the centre, probing its peak", extra={'x': point[0], 'y': point[1]})
    return point


def build_material(config: ScenarioConfig) -> LaminaMaterial:
    material = config.material
    if isinstance(material, IsotropicMaterialConfig):
        return LaminaMaterial.isotropic(material.E, material.nu)
    return LaminaMaterial.from_ratios(
        E2=material.E2, E1_E2=material.E1_E2, G12_E2=material.G12_E2, G23_E2=material.G23_E2,
        G13_E2=material.G13_E2, nu12=material.nu12,
    )


def build_model(config: ScenarioConfig) -> PlateModel:
    a = config.geometry.a
    patch = rectangle_patch(a, a, config.mesh.elements, config.mesh.elements, config.mesh.degree)
    layup = Layup.from_angles(config.layup, build_material(config))
    function = _thickness_function(config)
    shear_measure = config.shear_imperfection or ("literal" if config.is_bending else "stress_free")
    if shear_measure == "literal" and not config.is_bending:
        logger.warning("Literal shear measure lets the unloaded plate relax onto -w_bar; the imperfection "
                       "will not trigger buckling")
    try:
        if function is None:
            field_ = tf.ThicknessField(patch, np.asarray(config.thickness.control, dtype=float))
        else:
            field_ = tf.fit_field(patch, function, layup.n_laminae)
    except GeometryError as exc:
        raise ConfigValidationError(f"thickness: {exc}") from exc

    model = PlateModel(
        patch=patch,
        thickness=field_,
        layup=layup,
        ks=config.shear_correction,
        shear_integration=config.shear_integration,
        shear_imperfection=shear_measure,
        load=LOAD_CASES[config.load](1.0),
    )
    for kind, edges in BOUNDARY_SETS[config.boundary]:
        apply_bc(model, kind, edges)

    n_free = free_dofs(model).size
    if n_free > settings.DENSE_DOF_WARNING:
        logger.warning("Reduced system exceeds the dense-solver comfort zone",
                       extra={'dofs': n_free, 'limit': settings.DENSE_DOF_WARNING})
    return model


# --- running ---


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    path: EquilibriumPath
    summary: dict[str, Any]
    normalizer: LoadNormalizer
    linear_critical_load: Optional[float] = None
    error: Optional[str] = field(default=None)

    @property
    def converged(self) -> bool:
        return self.path.converged


def _linear_path(model: PlateModel, config: ScenarioConfig, load_limit: float, probe_point) -> EquilibriumPath:
    system = ReducedPlateSystem(model, probe_point)
    stiffness = linear_stiffness(model)[np.ix_(system.free, system.free)]
    unit = linear_solve(stiffness, system.reference_load())
    path = EquilibriumPath()
    for step in range(1, config.linear_steps + 1):
        load = load_limit * step / config.linear_steps
        state = load * unit
        path.records.append(PathRecord(step=step, load_factor=load, state=system.expand(state),
                                       probe=system.probe(state), iterations=1))
    return path


def _solver_settings(config: ScenarioConfig, **overrides):
    explicit = config.solver.model_fields_set
    updates = {key: value for key, value in overrides.items() if key not in explicit}
    return config.solver.model_copy(update=updates)


def _failure_termination(exc: IsoplateError) -> str:
    if isinstance(exc, (StabilityError, ImperfectionError)):
        return "no buckling mode"
    if isinstance(exc, FactorizationError):
        return "singular stiffness"
    return "degenerate element"


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Run one analysis; numerical failures end up in the result rather than propagating."""
    normalizer = LoadNormalizer.from_config(config)
    model = build_model(config)
    probe_point = default_probe(config)
    h_bar = config.geometry.h_bar
    linear_critical = None
    error = None
    logger.info("Running scenario", extra={'scenario': config.name or config.analysis,
                                           'analysis': config.analysis, 'boundary': config.boundary})

    try:
        if config.analysis == "linear-bending":
            limit = normalizer.raw_load(config.load_limit or DEFAULT_BENDING_LIMIT)
            path = _linear_path(model, config, limit, probe_point)
        else:
            if config.analysis == "nonlinear-bending":
                solver = _solver_settings(
                    config,
                    max_load_factor=normalizer.raw_load(config.load_limit or DEFAULT_BENDING_LIMIT),
                    probe_target=PROBE_TARGET_RATIO * h_bar,
                )
            else:
                linear_critical, mode = plate_linear_buckling(model)
                seed_imperfection(model, mode, config.imperfection, config.geometry.a)
                probe_point = buckling_probe(config, model)
                limit = (normalizer.raw_load(config.load_limit) if config.load_limit
                         else BUCKLING_LOAD_LIMIT * linear_critical)
                solver = _solver_settings(
                    config,
                    max_load_factor=limit,
                    max_initial_load=INITIAL_LOAD_FRACTION * linear_critical,
                    max_load_increment=LOAD_INCREMENT_FRACTION * linear_critical,
                    max_steps=BUCKLING_MAX_STEPS,
                    probe_target=PROBE_TARGET_RATIO * h_bar,
                    max_probe=h_bar,
                )
            path = riks_trace(model, solver, probe_point=probe_point)
    except PathTerminationError as exc:
        path = exc.path
        error = str(exc)
        logger.warning("Equilibrium path terminated early", extra={'steps': len(path), 'reason': error})
    except NonConvergenceError as exc:
        path = EquilibriumPath(converged=False, termination="non-convergence")
        error = str(exc)
        logger.warning("Equilibrium iteration failed", extra={'reason': error})
    except (StabilityError, FactorizationError, ElementError, ImperfectionError) as exc:
        path = EquilibriumPath(converged=False, termination=_failure_termination(exc))
        error = str(exc)
        logger.error("Analysis failed", extra={'termination': path.termination, 'reason': error})

    summary = summarize(path, config, normalizer, linear_critical, model, probe_point=probe_point, error=error)
    return ScenarioResult(config=config, path=path, summary=summary, normalizer=normalizer,
                          linear_critical_load=linear_critical, error=error)


def summarize(path: EquilibriumPath, config: ScenarioConfig, normalizer: LoadNormalizer,
              linear_critical: Optional[float], model: PlateModel, *,
              probe_point: Optional[tuple[float, float]] = None, error: Optional[str] = None) -> dict[str, Any]:
    """Normalized summary; critical loads are reported for buckling runs only."""
    h_bar = config.geometry.h_bar

    def normalized(raw: Optional[float]) -> Optional[float]:
        return None if raw is None else float(normalizer.load(raw))

    buckling = config.analysis == "nonlinear-buckling"
    last = path.records[-1] if path.records else None
    return {
        "analysis": config.analysis,
        "critical_load_threshold": normalized(critical_load_threshold(path, h_bar)) if buckling else None,
        "critical_load_plateau": normalized(critical_load_plateau(path)) if buckling else None,
        "linear_critical_load": normalized(linear_critical),
        "final_load_normalized": normalized(last.load_factor) if last else None,
        "final_deflection_normalized": float(normalizer.deflection(last.probe)) if last else None,
        "plate_volume": tf.plate_volume(model.thickness),
        "probe": None if probe_point is None else [float(probe_point[0]), float(probe_point[1])],
        "steps": len(path),
        "converged": path.converged,
        "termination": path.termination,
        "error": error,
    }
