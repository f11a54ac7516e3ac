"""Particle clusters: lattices cut to shapes, rigid transforms and presets."""

import logging
import math
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation

from .defaults import (
    FIG2_RESOLUTION_VARIANTS,
    FIG4_VARIANTS,
    MATERIAL_NAMES,
    PRESET_DEFAULTS,
    RADIUS_OVER_SPACING,
)
from .errors import ConfigError, DomainError, EmptyClusterError, UnknownPresetError
from .materials import (
    DielectricModel,
    PolarizabilityModel,
    SphereRadiative,
    SphereStatic,
    SpheroidStatic,
    material,
)
from .models import (
    Body,
    Box,
    CircularCylinder,
    Cube,
    InteractionMode,
    Lattice,
    Scene,
    SeparationKind,
)

logger = logging.getLogger(__name__)

Shape = Union[Cube, Box, CircularCylinder]
RotationLike = Union[np.ndarray, Sequence[float]]

Z_AXIS = np.array([0.0, 0.0, 1.0])


def build_cluster(shape: Shape, lattice: Lattice, inclusion: PolarizabilityModel) -> Body:
    """Place one inclusion at every lattice site whose cell centre lies in ``shape``.

    Sites are centred on the body origin and ordered by (z, y, x).
    """
    sites = lattice.sites()
    inside = sites[shape.contains(sites)]
    if len(inside) == 0:
        raise EmptyClusterError(
            f"no lattice site of {lattice} falls inside {shape}",
            context={"shape": repr(shape)},
        )
    order = np.lexsort((inside[:, 0], inside[:, 1], inside[:, 2]))
    positions = inside[order]
    logger.debug(f"Built cluster of {len(positions)} particles in {type(shape).__name__}")
    return Body(positions=positions, inclusions=(inclusion,) * len(positions))


def covering_lattice(
    shape: Shape,
    spacing: Union[float, Sequence[float]],
    stretch: Sequence[float] = (1.0, 1.0, 1.0),
) -> Lattice:
    """Smallest centred lattice whose sites span the shape's bounding box."""
    spacings = np.broadcast_to(np.asarray(spacing, dtype=float), (3,))
    effective = spacings * np.asarray(stretch, dtype=float)
    counts = np.maximum(1, np.ceil(2.0 * shape.half_extents / effective - 1e-9)).astype(int)
    return Lattice(
        spacings=tuple(float(s) for s in spacings),
        counts=tuple(int(c) for c in counts),
        stretch=tuple(float(s) for s in stretch),
    )


def rotation_matrix(rotation: RotationLike) -> np.ndarray:
    """3x3 matrix from either a matrix or an axis-angle vector (rad)."""
    array = np.asarray(rotation, dtype=float)
    if array.shape == (3,):
        return Rotation.from_rotvec(array).as_matrix()
    if array.shape != (3, 3):
        raise DomainError(f"rotation must be a 3x3 matrix or an axis-angle vector, got shape {array.shape}")
    if not np.allclose(array @ array.T, np.eye(3), atol=1e-10) or np.linalg.det(array) <= 0:
        raise DomainError("rotation must be proper (orthogonal with det = +1)")
    return array


def axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    unit = np.asarray(axis, dtype=float)
    unit = unit / np.linalg.norm(unit)
    return Rotation.from_rotvec(unit * angle).as_matrix()


def transform_body(body: Body, rotation: RotationLike, translation: Sequence[float]) -> Body:
    """Apply x -> R x + t on top of the body's current lab transform."""
    matrix = rotation_matrix(rotation)
    shift = np.asarray(translation, dtype=float)
    return Body(
        positions=body.positions,
        inclusions=body.inclusions,
        rotation=matrix @ body.rotation,
        translation=matrix @ body.translation + shift,
    )


def rotate_about_center(body: Body, axis: Sequence[float], angle: float) -> Body:
    """Rotate about an axis through the body's geometric centre."""
    matrix = axis_angle(axis, angle)
    center = body.centroid()
    return transform_body(body, matrix, center - matrix @ center)


def filling_fraction(body: Body, lattice: Lattice) -> float:
    """Mean inclusion volume per lattice cell of a body built on ``lattice``."""
    volume = math.fsum(inc.volume for inc in body.inclusions)
    return volume / (body.n_particles * lattice.cell_volume)


def separation(scene: Scene, body_index: int, axis: Sequence[float], kind: SeparationKind) -> float:
    """Distance of the moving body from the others along ``axis``.

    Surface kind: gap between the nearest inclusion surfaces projected on the
    axis. Centre kind: distance between geometric centres along the axis.
    """
    unit = np.asarray(axis, dtype=float)
    unit = unit / np.linalg.norm(unit)
    moving = scene.bodies[body_index]
    others = [b for i, b in enumerate(scene.bodies) if i != body_index]
    if not others:
        raise DomainError("separation needs at least two bodies")
    if kind is SeparationKind.CENTER:
        reference = np.mean([b.centroid() for b in others], axis=0)
        return float((moving.centroid() - reference) @ unit)
    lower = float(np.min(moving.lab_positions() @ unit - moving.radii))
    upper = max(float(np.max(b.lab_positions() @ unit + b.radii)) for b in others)
    return lower - upper


def with_separation(
    scene: Scene,
    body_index: int,
    axis: Sequence[float],
    kind: SeparationKind,
    value: float,
) -> Scene:
    """Translate the moving body along ``axis`` so its separation equals ``value``."""
    unit = np.asarray(axis, dtype=float)
    unit = unit / np.linalg.norm(unit)
    current = separation(scene, body_index, unit, kind)
    moved = transform_body(scene.bodies[body_index], np.eye(3), (value - current) * unit)
    return scene.with_body(body_index, moved)


def with_rotation(scene: Scene, body_index: int, axis: Sequence[float], angle: float) -> Scene:
    """Rotate the moving body by ``angle`` about an axis through its centre."""
    return scene.with_body(body_index, rotate_about_center(scene.bodies[body_index], axis, angle))


def stack_along_z(lower: Body, upper: Body, gap: float, mode: InteractionMode) -> Scene:
    """Scene with ``upper`` placed a surface gap ``gap`` above ``lower``."""
    top = float(np.max(lower.lab_positions()[:, 2] + lower.radii))
    bottom = float(np.min(upper.lab_positions()[:, 2] - upper.radii))
    raised = transform_body(upper, np.eye(3), (0.0, 0.0, top - bottom + gap))
    return Scene(bodies=(lower, raised), mode=mode)


# --- presets ----------------------------------------------------------------

def _sphere(kind: str, radius: float, medium: DielectricModel) -> PolarizabilityModel:
    if kind == "radiative":
        return SphereRadiative(radius, medium)
    if kind == "static":
        return SphereStatic(radius, medium)
    raise ConfigError(f"unknown inclusion kind '{kind}'", ["inclusion must be 'radiative' or 'static'"])


def _mode(value: str) -> InteractionMode:
    try:
        return InteractionMode(value)
    except ValueError:
        raise ConfigError(f"unknown mode '{value}'", ["mode must be 'retarded' or 'nonretarded'"])


def _material(name: Any) -> DielectricModel:
    if isinstance(name, DielectricModel):
        return name
    if name not in MATERIAL_NAMES:
        raise ConfigError(f"unknown preset material '{name}'", [f"choose one of {MATERIAL_NAMES}"])
    return material(name)


def _gap(p: Dict[str, Any], scale: float) -> float:
    if p.get("gap_um") is not None:
        return float(p["gap_um"])
    return float(p["z_over_L"]) * scale


def _cube_pair(p: Dict[str, Any], n: int, radius: Optional[float] = None) -> Scene:
    side = float(p["L_um"])
    spacing = side / n
    inclusion = _sphere(p["inclusion"], radius or spacing * RADIUS_OVER_SPACING, _material(p["material"]))
    lattice = Lattice(spacings=(spacing,) * 3, counts=(n, n, n))
    body = build_cluster(Cube(side), lattice, inclusion)
    return stack_along_z(body, body, _gap(p, side), _mode(p["mode"]))


def _fig1_cubes(p: Dict[str, Any]) -> Scene:
    return _cube_pair(p, int(p["n"]))


def _fig1_cylinder(p: Dict[str, Any]) -> Scene:
    side = float(p["L_um"])
    spacing = side / int(p["n"])
    shape = CircularCylinder(radius=side / math.sqrt(math.pi), height=float(p["height_um"]))
    inclusion = _sphere(p["inclusion"], spacing * RADIUS_OVER_SPACING, _material(p["material"]))
    body = build_cluster(shape, covering_lattice(shape, spacing), inclusion)
    return stack_along_z(body, body, _gap(p, side), _mode(p["mode"]))


def _fig2_resolution(p: Dict[str, Any]) -> Scene:
    variant = p["variant"]
    if variant not in FIG2_RESOLUTION_VARIANTS:
        raise ConfigError(f"unknown variant '{variant}'", [f"choose one of {list(FIG2_RESOLUTION_VARIANTS)}"])
    choice = FIG2_RESOLUTION_VARIANTS[variant]
    radius = None
    if choice["radius_over_L"] is not None:
        radius = choice["radius_over_L"] * float(p["L_um"])
    return _cube_pair(p, int(p.get("n") or choice["n"]), radius)


def _fig3_rect_torque(p: Dict[str, Any]) -> Scene:
    side = float(p["L_um"])
    shape = Box(side, 2.0 * side, 0.5 * side)
    counts = tuple(int(c) for c in p["counts"])
    spacings = tuple(float(e) for e in 2.0 * shape.half_extents / np.asarray(counts))
    inclusion = _sphere(p["inclusion"], min(spacings) * RADIUS_OVER_SPACING, _material(p["material"]))
    body = build_cluster(shape, Lattice(spacings=spacings, counts=counts), inclusion)
    upper = rotate_about_center(body, Z_AXIS, float(p["theta_rad"]))
    return stack_along_z(body, upper, float(p["ds_over_L"]) * side, _mode(p["mode"]))


def _fig4_aniso_torque(p: Dict[str, Any]) -> Scene:
    variant = p["variant"]
    if variant not in FIG4_VARIANTS:
        raise ConfigError(f"unknown variant '{variant}'", [f"choose one of {list(FIG4_VARIANTS)}"])
    choice = FIG4_VARIANTS[variant]
    root_area = math.sqrt(float(p["area_um2"]))
    shape = CircularCylinder(radius=root_area / math.sqrt(math.pi), height=float(p["height_um"]))
    long_axis = float(p["radius_over_sqrtA"]) * root_area
    medium = _material(p["material"])
    if choice["prolate"]:
        short = long_axis / float(p["aspect"])
        inclusion: PolarizabilityModel = SpheroidStatic((long_axis, short, short), medium)
    else:
        inclusion = _sphere(p["inclusion"], long_axis, medium)
    stretch = (float(p["stretch"]), 1.0, 1.0) if choice["stretched"] else (1.0, 1.0, 1.0)
    lattice = covering_lattice(shape, float(p["lattice_over_sqrtA"]) * root_area, stretch)
    body = build_cluster(shape, lattice, inclusion)
    upper = rotate_about_center(body, Z_AXIS, float(p["theta_rad"]))
    return stack_along_z(body, upper, float(p["gap_over_sqrtA"]) * root_area, _mode(p["mode"]))


_BUILDERS = {
    "fig1_cubes": _fig1_cubes,
    "fig1_cylinder": _fig1_cylinder,
    "fig2_materials": _fig1_cubes,
    "fig2_resolution": _fig2_resolution,
    "fig3_rect_torque": _fig3_rect_torque,
    "fig4_aniso_torque": _fig4_aniso_torque,
}

# Optional knobs accepted on top of the defaults table.
_EXTRA_KEYS = {"gap_um", "n"}


def preset_scene(name: str, params: Optional[Dict[str, Any]] = None) -> Scene:
    """Scene for one of the named preset geometries.

    ``params`` override entries of ``defaults.PRESET_DEFAULTS[name]``;
    unknown keys are rejected.
    """
    if name not in _BUILDERS:
        raise UnknownPresetError(f"unknown preset '{name}'", [f"known presets: {', '.join(_BUILDERS)}"])
    merged = dict(PRESET_DEFAULTS[name])
    params = dict(params or {})
    unknown = sorted(set(params) - set(merged) - _EXTRA_KEYS)
    if unknown:
        raise ConfigError(f"unknown parameters for preset '{name}'", [f"unknown key '{k}'" for k in unknown])
    merged.update(params)
    try:
        scene = _BUILDERS[name](merged)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid parameters for preset '{name}'", [str(e)]) from e
    logger.info(f"Preset {name}: {len(scene.bodies)} bodies, {scene.n_particles} particles, mode {scene.mode.value}")
    return scene
