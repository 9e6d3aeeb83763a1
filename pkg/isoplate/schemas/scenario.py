from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tolerance: float = Field(1e-3, gt=0, description="Relative displacement-increment tolerance")
    residual_tolerance: float = Field(1e-9, gt=0, description="Relative residual accepted without an update")
    max_iterations: int = Field(25, ge=1)
    max_steps: int = Field(80, ge=1)
    initial_arc_length: Optional[float] = Field(None, gt=0)
    probe_target: Optional[float] = Field(None, gt=0, description="Probe deflection targeted by the first step")
    max_initial_load: Optional[float] = Field(None, gt=0)
    growth_factor: float = Field(1.5, ge=1.0, le=1.5)
    shrink_factor: float = Field(0.5, gt=0, lt=1)
    fast_iterations: int = Field(4, ge=1)
    max_arc_length_ratio: float = Field(8.0, ge=1.0)
    min_arc_length_ratio: float = Field(1e-10, gt=0, lt=1)
    max_load_factor: Optional[float] = None
    max_probe: Optional[float] = Field(None, gt=0)
    max_load_increment: Optional[float] = Field(None, gt=0, description="Largest load-factor change per arc-length step")
    hold_probe_sign: bool = Field(True, description="Reject steps that flip the sign of the probe deflection")


class GeometryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    a: float = Field(..., gt=0)
    h_bar: float = Field(..., gt=0)


class IsotropicMaterialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["isotropic"] = "isotropic"
    E: float = Field(3.0e6, gt=0)
    nu: float = Field(0.25, gt=0, lt=0.5)


class OrthotropicMaterialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["orthotropic"]
    E2: float = Field(1.0, gt=0)
    E1_E2: float = Field(25.0, gt=0)
    G12_E2: float = Field(0.5, gt=0)
    G23_E2: float = Field(0.2, gt=0)
    G13_E2: Optional[float] = Field(None, gt=0)
    nu12: float = Field(0.25, gt=0, lt=0.5)


MaterialConfig = Annotated[
    Union[IsotropicMaterialConfig, OrthotropicMaterialConfig], Field(discriminator="kind")
]


class UniformThickness(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["uniform"] = "uniform"


class TaperedXThickness(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["tapered_x"]
    alpha: float = Field(..., ge=0)


class TaperedDiagonalThickness(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["tapered_diagonal"]
    alpha: float = Field(..., ge=0)


class SineWaveThickness(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["sine_wave"]
    alpha: float = Field(..., ge=0, lt=0.5)
    n: int = Field(1, ge=1)
    origin: Literal["center", "edge"] = "center"


class ExplicitThickness(BaseModel):
    """Control thickness grids, one n x m grid per lamina (bottom first)."""

    model_config = ConfigDict(extra="forbid")

    type: Literal["explicit"]
    control: list[list[list[float]]]


ThicknessConfig = Annotated[
    Union[UniformThickness, TaperedXThickness, TaperedDiagonalThickness, SineWaveThickness, ExplicitThickness],
    Field(discriminator="type"),
]


class MeshConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    elements: int = Field(6, ge=1, le=40)
    degree: Literal[2] = 2


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = Field(1, alias="schema")
    name: Optional[str] = None
    geometry: GeometryConfig
    material: MaterialConfig = Field(default_factory=IsotropicMaterialConfig)
    layup: list[float] = Field(default_factory=lambda: [0.0], min_length=1)
    thickness: ThicknessConfig = Field(default_factory=UniformThickness)
    mesh: MeshConfig = Field(default_factory=MeshConfig)
    boundary: Literal["clamped-AD", "SS1-all", "SS2-AD-DC"]
    load: Literal["pressure", "uniaxial-x", "uniaxial-y", "biaxial"]
    analysis: Literal["linear-bending", "nonlinear-bending", "nonlinear-buckling"]
    solver: SolverSettings = Field(default_factory=SolverSettings)
    imperfection: float = Field(1e-5, ge=0)
    shear_correction: float = Field(5.0 / 6.0, gt=0)
    shear_integration: Literal["reduced", "full"] = "reduced"
    shear_imperfection: Optional[Literal["stress_free", "literal"]] = Field(
        None, description="Shear measure for w_bar; unset means stress_free for buckling and literal otherwise"
    )
    probe: Optional[tuple[float, float]] = None
    load_limit: Optional[float] = Field(None, gt=0, description="Upper load, normalized")
    linear_steps: int = Field(10, ge=1)
    output: Optional[str] = None

    @model_validator(mode="after")
    def load_matches_analysis(self) -> "ScenarioConfig":
        bending = self.analysis in ("linear-bending", "nonlinear-bending")
        if bending and self.load != "pressure":
            raise ValueError("bending analyses need a pressure load")
        if not bending and self.load == "pressure":
            raise ValueError("buckling analyses need an edge compression load")
        return self

    @property
    def is_bending(self) -> bool:
        return self.analysis != "nonlinear-buckling"
