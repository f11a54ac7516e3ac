"""Scenario configuration: JSON schema, validation and conversion to solver inputs."""

import json
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Discriminator,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    Tag,
    ValidationError,
    field_validator,
    model_validator,
)
from scipy.spatial.transform import Rotation

from .defaults import (
    DEFAULT_COUPLING_CUTOFF,
    DEFAULT_FD_STEP,
    DEFAULT_MAX_DEPTH,
    DEFAULT_NODES,
    DEFAULT_REL_TOL,
    FD_STEP_BOUNDS,
    MATERIAL_NAMES,
)
from .errors import ConfigError
from .geometry import build_cluster, covering_lattice, preset_scene, transform_body
from .materials import (
    DielectricModel,
    MaxwellGarnett,
    PolarizabilityModel,
    SphereRadiative,
    SphereStatic,
    SpheroidStatic,
    material,
    material_from_dict,
)
from .models import (
    Body,
    Box,
    CircularCylinder,
    Cube,
    InteractionMode,
    Lattice,
    QuadratureScheme,
    QuadratureSpec,
    Scene,
    SeparationKind,
    SweepParameter,
    SweepSpec,
)

logger = logging.getLogger(__name__)

Vec3 = Tuple[float, float, float]
PositiveVec3 = Tuple[PositiveFloat, PositiveFloat, PositiveFloat]


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- materials ----------------------------------------------------------------

class DrudeBlock(_Block):
    kind: Literal["drude"]
    plasma_eV: PositiveFloat
    damping_eV: NonNegativeFloat = 0.0


class OscillatorBlock(_Block):
    strength_eV2: NonNegativeFloat
    resonance_eV: NonNegativeFloat
    damping_eV: NonNegativeFloat = 0.0


class LorentzBlock(_Block):
    kind: Literal["lorentz"]
    oscillators: List[OscillatorBlock] = Field(min_length=1)


class ConstantBlock(_Block):
    kind: Literal["constant"]
    eps: float = Field(ge=1.0)


class PerfectMetalBlock(_Block):
    kind: Literal["perfect_metal"]


class TabulatedBlock(_Block):
    """Either a CSV file (header ``xi_eV,eps``) or inline ``[xi_eV, eps]`` rows."""
    kind: Literal["tabulated"]
    path: Optional[str] = None
    points: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.path is None) == (self.points is None):
            raise ValueError("tabulated material needs exactly one of 'path' or 'points'")
        return self


class MaxwellGarnettBlock(_Block):
    kind: Literal["maxwell_garnett"]
    inclusion: "MaterialRef"
    host: "MaterialRef" = "vacuum"
    fill: float = Field(ge=0.0, le=1.0)


MaterialBlock = Annotated[
    Union[DrudeBlock, LorentzBlock, ConstantBlock, PerfectMetalBlock, TabulatedBlock, MaxwellGarnettBlock],
    Field(discriminator="kind"),
]
# A library / custom material name, or an inline block.
MaterialRef = Union[str, MaterialBlock]

MaxwellGarnettBlock.model_rebuild()


# --- geometry -----------------------------------------------------------------

class SphereBlock(_Block):
    kind: Literal["sphere_radiative", "sphere_static"]
    radius_um: PositiveFloat
    material: MaterialRef


class SpheroidBlock(_Block):
    kind: Literal["spheroid_static"]
    semi_axes_um: PositiveVec3
    material: MaterialRef
    orientation_axis_angle_rad: Vec3 = (0.0, 0.0, 0.0)


InclusionBlock = Annotated[Union[SphereBlock, SpheroidBlock], Field(discriminator="kind")]


class CubeBlock(_Block):
    kind: Literal["cube"]
    side_um: PositiveFloat


class BoxBlock(_Block):
    kind: Literal["box"]
    size_um: PositiveVec3


class CylinderBlock(_Block):
    kind: Literal["circular_cylinder"]
    radius_um: PositiveFloat
    height_um: PositiveFloat


ShapeBlock = Annotated[Union[CubeBlock, BoxBlock, CylinderBlock], Field(discriminator="kind")]


class LatticeBlock(_Block):
    """Lattice spacing; ``counts`` omitted means: just cover the shape."""
    spacing_um: Union[PositiveFloat, PositiveVec3]
    counts: Optional[Tuple[int, int, int]] = None
    stretch: PositiveVec3 = (1.0, 1.0, 1.0)

    @field_validator("counts")
    @classmethod
    def _positive_counts(cls, value):
        if value is not None and min(value) < 1:
            raise ValueError("lattice counts must be >= 1")
        return value


class BodyBlock(_Block):
    shape: Optional[ShapeBlock] = None
    lattice: Optional[LatticeBlock] = None
    particles_um: Optional[List[Vec3]] = None
    inclusion: InclusionBlock
    rotation_axis_angle_rad: Vec3 = (0.0, 0.0, 0.0)
    translation_um: Vec3 = (0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def _one_layout(self):
        lattice_layout = self.shape is not None and self.lattice is not None
        if lattice_layout == (self.particles_um is not None):
            raise ValueError("a body needs either 'shape' + 'lattice' or 'particles_um'")
        if self.particles_um is not None and not self.particles_um:
            raise ValueError("'particles_um' is empty")
        return self


# --- scenes -------------------------------------------------------------------

class _PresetParams(_Block):
    """Knobs every preset accepts; fields left out keep the preset's defaults."""
    material: Optional[str] = None
    mode: Optional[Literal["retarded", "nonretarded"]] = None
    inclusion: Optional[Literal["radiative", "static"]] = None


class CubePairParams(_PresetParams):
    L_um: Optional[PositiveFloat] = None
    n: Optional[PositiveInt] = None
    z_over_L: Optional[PositiveFloat] = None
    gap_um: Optional[PositiveFloat] = None


class CylinderPairParams(CubePairParams):
    height_um: Optional[PositiveFloat] = None


class ResolutionParams(CubePairParams):
    variant: Optional[Literal["n10", "n8", "n6", "small_radius"]] = None


class RectTorqueParams(_PresetParams):
    L_um: Optional[PositiveFloat] = None
    counts: Optional[Tuple[PositiveInt, PositiveInt, PositiveInt]] = None
    ds_over_L: Optional[PositiveFloat] = None
    theta_rad: Optional[float] = None


class AnisoTorqueParams(_PresetParams):
    area_um2: Optional[PositiveFloat] = None
    height_um: Optional[PositiveFloat] = None
    gap_over_sqrtA: Optional[PositiveFloat] = None
    lattice_over_sqrtA: Optional[PositiveFloat] = None
    radius_over_sqrtA: Optional[PositiveFloat] = None
    stretch: Optional[PositiveFloat] = None
    aspect: Optional[float] = Field(default=None, ge=1.0)
    variant: Optional[Literal["spheres_asymmetric", "prolates_symmetric", "prolates_asymmetric"]] = None
    theta_rad: Optional[float] = None


class Fig1CubesScene(_Block):
    preset: Literal["fig1_cubes"]
    params: CubePairParams = Field(default_factory=CubePairParams)


class Fig1CylinderScene(_Block):
    preset: Literal["fig1_cylinder"]
    params: CylinderPairParams = Field(default_factory=CylinderPairParams)


class Fig2MaterialsScene(_Block):
    preset: Literal["fig2_materials"]
    params: CubePairParams = Field(default_factory=CubePairParams)


class Fig2ResolutionScene(_Block):
    preset: Literal["fig2_resolution"]
    params: ResolutionParams = Field(default_factory=ResolutionParams)


class Fig3RectTorqueScene(_Block):
    preset: Literal["fig3_rect_torque"]
    params: RectTorqueParams = Field(default_factory=RectTorqueParams)


class Fig4AnisoTorqueScene(_Block):
    preset: Literal["fig4_aniso_torque"]
    params: AnisoTorqueParams = Field(default_factory=AnisoTorqueParams)


class BodiesScene(_Block):
    bodies: List[BodyBlock] = Field(min_length=1)


PresetScene = Union[
    Fig1CubesScene,
    Fig1CylinderScene,
    Fig2MaterialsScene,
    Fig2ResolutionScene,
    Fig3RectTorqueScene,
    Fig4AnisoTorqueScene,
]


def _scene_tag(value: Any) -> Any:
    if isinstance(value, dict):
        return value.get("preset", "bodies")
    return getattr(value, "preset", "bodies")


SceneBlock = Annotated[
    Union[
        Annotated[Fig1CubesScene, Tag("fig1_cubes")],
        Annotated[Fig1CylinderScene, Tag("fig1_cylinder")],
        Annotated[Fig2MaterialsScene, Tag("fig2_materials")],
        Annotated[Fig2ResolutionScene, Tag("fig2_resolution")],
        Annotated[Fig3RectTorqueScene, Tag("fig3_rect_torque")],
        Annotated[Fig4AnisoTorqueScene, Tag("fig4_aniso_torque")],
        Annotated[BodiesScene, Tag("bodies")],
    ],
    Discriminator(_scene_tag),
]


# --- run blocks ---------------------------------------------------------------

class QuadratureBlock(_Block):
    scheme: Literal["gauss_legendre_mapped", "adaptive_simpson"] = "gauss_legendre_mapped"
    nodes: int = Field(default=DEFAULT_NODES, ge=4)
    xi0_eV: Optional[PositiveFloat] = None
    rel_tol: float = Field(default=DEFAULT_REL_TOL, gt=0.0, le=0.1)
    max_depth: int = Field(default=DEFAULT_MAX_DEPTH, ge=1)
    coupling_cutoff: PositiveFloat = DEFAULT_COUPLING_CUTOFF


class SweepBlock(_Block):
    """Separations carry ``_um`` fields, angles ``_rad`` fields."""
    parameter: Literal["separation", "angle"]
    grid_um: Optional[List[float]] = None
    grid_rad: Optional[List[float]] = None
    body_index: int = Field(default=1, ge=0)
    axis: Vec3 = (0.0, 0.0, 1.0)
    fd_step: float = Field(default=DEFAULT_FD_STEP, ge=FD_STEP_BOUNDS[0], le=FD_STEP_BOUNDS[1])
    separation_kind: Literal["surface", "center"] = "surface"
    derivatives: bool = True
    fit_um: Optional[Tuple[PositiveFloat, PositiveFloat]] = None
    fit_rad: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def _units_match(self):
        if self.parameter == "separation":
            if self.grid_rad is not None or self.fit_rad is not None:
                raise ValueError("separation sweeps take lengths: use 'grid_um' / 'fit_um'")
            grid = self.grid_um
            if grid is None:
                raise ValueError("separation sweep needs 'grid_um'")
            if any(g <= 0 for g in grid):
                raise ValueError("separations must be positive")
        else:
            if self.grid_um is not None or self.fit_um is not None:
                raise ValueError("angle sweeps take radians: use 'grid_rad' / 'fit_rad'")
            grid = self.grid_rad
            if grid is None:
                raise ValueError("angle sweep needs 'grid_rad'")
        if not grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if not any(self.axis):
            raise ValueError("sweep axis must be non-zero")
        return self

    @property
    def grid(self) -> List[float]:
        return self.grid_um if self.parameter == "separation" else self.grid_rad

    @property
    def fit_window(self) -> Optional[Tuple[float, float]]:
        return self.fit_um if self.parameter == "separation" else self.fit_rad


class OutputBlock(_Block):
    directory: str = "out"
    dump_integrand: bool = False
    excel: bool = False


class ScenarioConfig(_Block):
    scene: SceneBlock
    mode: Optional[Literal["retarded", "nonretarded"]] = None
    materials: Dict[str, MaterialBlock] = Field(default_factory=dict)
    quadrature: QuadratureBlock = Field(default_factory=QuadratureBlock)
    sweep: Optional[SweepBlock] = None
    output: OutputBlock = Field(default_factory=OutputBlock)

    @model_validator(mode="after")
    def _scene_references(self):
        if isinstance(self.scene, BodiesScene):
            n_bodies = len(self.scene.bodies)
        else:
            n_bodies = 2
            name = self.scene.params.material
            if name is not None and name not in MATERIAL_NAMES and name not in self.materials:
                raise ValueError(f"unknown preset material '{name}' (library: {', '.join(MATERIAL_NAMES)})")
        if self.sweep is not None and self.sweep.body_index >= n_bodies:
            raise ValueError(f"sweep.body_index {self.sweep.body_index} out of range for {n_bodies} bodies")
        return self


# --- parsing ------------------------------------------------------------------

def _format_error(error: Dict[str, Any]) -> str:
    location = ".".join(str(part) for part in error["loc"]) or "<root>"
    return f"{location}: {error['msg']}"


def parse_config(text: str) -> ScenarioConfig:
    """Validate scenario JSON; every violation is reported in one ConfigError."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("scenario file is not valid JSON", [f"line {e.lineno} column {e.colno}: {e.msg}"]) from e
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        violations = [_format_error(err) for err in e.errors()]
        raise ConfigError(f"scenario has {len(violations)} error(s)", violations) from e


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def config_echo(cfg: ScenarioConfig) -> Dict[str, Any]:
    """JSON-able copy of the validated config; parses back to the same config."""
    return cfg.model_dump(mode="json")


# --- conversion ---------------------------------------------------------------

class _MaterialResolver:
    """Turns material references into dielectric models, custom names first."""

    def __init__(self, custom: Dict[str, Any], base_dir: Optional[Path]):
        self.custom = custom
        self.base_dir = base_dir
        self.built: Dict[str, DielectricModel] = {}
        self.resolving: List[str] = []

    def __call__(self, ref: Any, name: str = "") -> DielectricModel:
        if isinstance(ref, str):
            if ref in self.built:
                return self.built[ref]
            if ref not in self.custom:
                return material(ref)
            if ref in self.resolving:
                raise ConfigError("material definitions form a cycle", [" -> ".join(self.resolving + [ref])])
            self.resolving.append(ref)
            self.built[ref] = self(self.custom[ref], name=ref)
            self.resolving.pop()
            return self.built[ref]
        if isinstance(ref, MaxwellGarnettBlock):
            return MaxwellGarnett(
                inclusion=self(ref.inclusion),
                host=self(ref.host),
                fill=ref.fill,
                name=name or "maxwell_garnett",
            )
        return material_from_dict(ref.model_dump(), name=name, base_dir=self.base_dir)


def _inclusion(block: Any, resolve: _MaterialResolver) -> PolarizabilityModel:
    medium = resolve(block.material)
    if isinstance(block, SpheroidBlock):
        orientation = Rotation.from_rotvec(block.orientation_axis_angle_rad).as_matrix()
        return SpheroidStatic(block.semi_axes_um, medium, orientation)
    if block.kind == "sphere_static":
        return SphereStatic(block.radius_um, medium)
    return SphereRadiative(block.radius_um, medium)


def _shape(block: Any):
    if isinstance(block, CubeBlock):
        return Cube(block.side_um)
    if isinstance(block, BoxBlock):
        return Box(*block.size_um)
    return CircularCylinder(block.radius_um, block.height_um)


def _body(block: BodyBlock, resolve: _MaterialResolver) -> Body:
    inclusion = _inclusion(block.inclusion, resolve)
    if block.particles_um is not None:
        body = Body(positions=np.asarray(block.particles_um), inclusions=(inclusion,) * len(block.particles_um))
    else:
        shape = _shape(block.shape)
        lattice_block = block.lattice
        if lattice_block.counts is None:
            lattice = covering_lattice(shape, lattice_block.spacing_um, lattice_block.stretch)
        else:
            spacings = np.broadcast_to(np.asarray(lattice_block.spacing_um, dtype=float), (3,))
            lattice = Lattice(
                spacings=tuple(float(s) for s in spacings),
                counts=lattice_block.counts,
                stretch=lattice_block.stretch,
            )
        body = build_cluster(shape, lattice, inclusion)
    return transform_body(body, block.rotation_axis_angle_rad, block.translation_um)


def build_scene(cfg: ScenarioConfig, base_dir: Optional[Path] = None) -> Scene:
    resolve = _MaterialResolver(cfg.materials, base_dir)
    if isinstance(cfg.scene, BodiesScene):
        bodies = tuple(_body(b, resolve) for b in cfg.scene.bodies)
        return Scene(bodies=bodies, mode=InteractionMode(cfg.mode or "retarded"))
    params: Dict[str, Any] = cfg.scene.params.model_dump(exclude_none=True)
    if cfg.mode is not None:
        params["mode"] = cfg.mode
    if params.get("material") in cfg.materials:
        params["material"] = resolve(params["material"])
    return preset_scene(cfg.scene.preset, params)


def build_quadrature(cfg: ScenarioConfig) -> QuadratureSpec:
    q = cfg.quadrature
    return QuadratureSpec(
        scheme=QuadratureScheme(q.scheme),
        nodes=q.nodes,
        xi0_ev=q.xi0_eV,
        rel_tol=q.rel_tol,
        max_depth=q.max_depth,
        coupling_cutoff=q.coupling_cutoff,
    )


def build_sweep(cfg: ScenarioConfig) -> Optional[SweepSpec]:
    s = cfg.sweep
    if s is None:
        return None
    return SweepSpec(
        parameter=SweepParameter(s.parameter),
        grid=tuple(s.grid),
        body_index=s.body_index,
        axis=s.axis,
        fd_step=s.fd_step,
        separation_kind=SeparationKind(s.separation_kind),
        derivatives=s.derivatives,
    )
