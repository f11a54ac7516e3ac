import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from casimir_dipoles.defaults import PRESET_FILL
from casimir_dipoles.errors import ConfigError, DomainError, EmptyClusterError, UnknownPresetError
from casimir_dipoles.geometry import (
    axis_angle,
    build_cluster,
    covering_lattice,
    filling_fraction,
    preset_scene,
    rotate_about_center,
    rotation_matrix,
    separation,
    stack_along_z,
    transform_body,
    with_rotation,
    with_separation,
)
from casimir_dipoles.materials import PerfectMetal, SphereRadiative, SphereStatic, SpheroidStatic
from casimir_dipoles.models import Box, CircularCylinder, Cube, InteractionMode, Lattice, Scene, SeparationKind

Z = (0.0, 0.0, 1.0)


def _sorted_rows(points):
    rounded = np.round(points, 12)
    return rounded[np.lexsort(rounded.T[::-1])]


@pytest.fixture
def sphere():
    return SphereStatic(0.05 / 3.0, PerfectMetal())


def test_cube_of_1000(sphere):
    side = 0.5
    lattice = Lattice(spacings=(side / 10,) * 3, counts=(10, 10, 10))
    body = build_cluster(Cube(side), lattice, sphere)
    assert body.n_particles == 1000
    assert filling_fraction(body, lattice) == pytest.approx(4.0 * math.pi / 81.0)
    assert filling_fraction(body, lattice) == pytest.approx(PRESET_FILL)
    np.testing.assert_allclose(body.centroid(), 0.0, atol=1e-15)


def test_single_site_at_origin(sphere):
    body = build_cluster(Cube(1.0), Lattice(spacings=(1.0,) * 3, counts=(1, 1, 1)), sphere)
    np.testing.assert_array_equal(body.positions, np.zeros((1, 3)))


def test_sites_ordered_by_z_then_y_then_x(sphere):
    body = build_cluster(Box(1.0, 1.0, 1.0), Lattice(spacings=(0.25,) * 3, counts=(4, 4, 4)), sphere)
    p = body.positions
    keys = list(zip(p[:, 2], p[:, 1], p[:, 0]))
    assert keys == sorted(keys)


def test_cylinder_containment(sphere):
    shape = CircularCylinder(radius=0.4, height=0.3)
    body = build_cluster(shape, covering_lattice(shape, 0.05), SphereStatic(0.01, PerfectMetal()))
    p = body.positions
    assert np.all(p[:, 0] ** 2 + p[:, 1] ** 2 <= 0.4 ** 2 * (1 + 1e-12))
    assert np.all(np.abs(p[:, 2]) <= 0.15 * (1 + 1e-12))
    assert body.n_particles > 100


def test_empty_cluster(sphere):
    with pytest.raises(EmptyClusterError):
        build_cluster(CircularCylinder(0.1, 1.0), Lattice(spacings=(1.0,) * 3, counts=(2, 2, 1)), sphere)


def test_covering_lattice_counts():
    lattice = covering_lattice(Box(1.0, 2.0, 0.5), 0.1)
    assert lattice.counts == (10, 20, 5)
    stretched = covering_lattice(Cube(1.2), 0.1, stretch=(1.2, 1.0, 1.0))
    assert stretched.counts == (10, 12, 12)


def test_identity_transform(sphere):
    body = build_cluster(Cube(0.5), Lattice(spacings=(0.1,) * 3, counts=(5, 5, 5)), sphere)
    moved = transform_body(body, np.eye(3), (0.0, 0.0, 0.0))
    np.testing.assert_array_equal(moved.lab_positions(), body.lab_positions())


def test_half_turn_symmetry(sphere):
    body = build_cluster(Box(0.4, 0.8, 0.2), Lattice(spacings=(0.1,) * 3, counts=(4, 8, 2)), sphere)
    turned = transform_body(body, axis_angle(Z, math.pi), (0.0, 0.0, 0.0))
    np.testing.assert_allclose(_sorted_rows(turned.lab_positions()), _sorted_rows(body.lab_positions()), atol=1e-12)


def test_translation_keeps_distances(sphere):
    body = build_cluster(Cube(0.5), Lattice(spacings=(0.1,) * 3, counts=(5, 5, 5)), sphere)
    moved = transform_body(body, np.eye(3), (0.0, 0.0, 3.0))
    np.testing.assert_allclose(pdist(moved.lab_positions()), pdist(body.lab_positions()), rtol=1e-12)


def test_transforms_compose(sphere):
    body = build_cluster(Cube(0.5), Lattice(spacings=(0.1,) * 3, counts=(5, 5, 5)), sphere)
    first = transform_body(body, (0.0, 0.0, 0.3), (1.0, 0.0, 0.0))
    second = transform_body(first, (0.0, 0.0, -0.3), (0.0, 0.0, 0.0))
    expected = body.lab_positions() + axis_angle(Z, -0.3) @ np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(second.lab_positions(), expected, atol=1e-12)


def test_rotation_must_be_proper():
    with pytest.raises(DomainError):
        rotation_matrix(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(DomainError):
        rotation_matrix(np.ones((2, 2)))
    np.testing.assert_allclose(rotation_matrix((0.0, 0.0, math.pi / 2)), axis_angle(Z, math.pi / 2))


def test_rotate_about_center_keeps_centroid(sphere):
    body = build_cluster(Box(0.4, 0.8, 0.2), Lattice(spacings=(0.1,) * 3, counts=(4, 8, 2)), sphere)
    shifted = transform_body(body, np.eye(3), (1.0, 2.0, 3.0))
    turned = rotate_about_center(shifted, Z, 0.7)
    np.testing.assert_allclose(turned.centroid(), shifted.centroid(), atol=1e-12)


def test_stack_and_separation(sphere):
    body = build_cluster(Cube(0.5), Lattice(spacings=(0.1,) * 3, counts=(5, 5, 5)), sphere)
    scene = stack_along_z(body, body, 0.2, InteractionMode.RETARDED)
    assert separation(scene, 1, Z, SeparationKind.SURFACE) == pytest.approx(0.2, abs=1e-14)
    moved = with_separation(scene, 1, Z, SeparationKind.SURFACE, 0.35)
    assert separation(moved, 1, Z, SeparationKind.SURFACE) == pytest.approx(0.35, abs=1e-14)
    centre = separation(moved, 1, Z, SeparationKind.CENTER)
    assert centre == pytest.approx(0.35 + 0.4 + 2 * sphere.radius, abs=1e-13)


def test_separation_needs_two_bodies(sphere):
    scene = Scene(bodies=(build_cluster(Cube(0.1), Lattice((0.1,) * 3, (1, 1, 1)), sphere),))
    with pytest.raises(DomainError):
        separation(scene, 0, Z, SeparationKind.SURFACE)


def test_with_rotation_round_trip(sphere):
    body = build_cluster(Box(0.4, 0.8, 0.2), Lattice(spacings=(0.1,) * 3, counts=(4, 8, 2)), sphere)
    scene = stack_along_z(body, body, 0.1, InteractionMode.NONRETARDED)
    back = with_rotation(with_rotation(scene, 1, Z, 0.4), 1, Z, -0.4)
    np.testing.assert_allclose(back.lab_positions(), scene.lab_positions(), atol=1e-12)


def test_fig1_cubes_preset():
    scene = preset_scene("fig1_cubes", {"L_um": 0.5, "z_over_L": 0.5})
    assert scene.n_particles == 2000
    assert scene.mode is InteractionMode.RETARDED
    assert separation(scene, 1, Z, SeparationKind.SURFACE) == pytest.approx(0.25, abs=1e-13)
    assert isinstance(scene.bodies[0].inclusions[0], SphereRadiative)


def test_fig1_cubes_desk_scale_overrides():
    scene = preset_scene("fig1_cubes", {"n": 4, "gap_um": 0.1, "mode": "nonretarded", "inclusion": "static"})
    assert scene.n_particles == 128
    assert scene.mode is InteractionMode.NONRETARDED
    assert separation(scene, 1, Z, SeparationKind.SURFACE) == pytest.approx(0.1, abs=1e-13)
    assert type(scene.bodies[0].inclusions[0]) is SphereStatic


def test_fig1_cylinder_preset():
    scene = preset_scene("fig1_cylinder", {"n": 4, "L_um": 1.0, "height_um": 0.5})
    positions = scene.bodies[0].lab_positions()
    radius = 1.0 / math.sqrt(math.pi)
    assert np.all(np.hypot(positions[:, 0], positions[:, 1]) <= radius * (1 + 1e-12))


def test_fig2_resolution_keeps_fill():
    coarse = preset_scene("fig2_resolution", {"variant": "n6", "L_um": 1.0})
    inclusion = coarse.bodies[0].inclusions[0]
    assert coarse.bodies[0].n_particles == 216
    assert inclusion.volume * 216 / 1.0 == pytest.approx(PRESET_FILL)
    small = preset_scene("fig2_resolution", {"variant": "small_radius", "L_um": 1.0, "n": 3})
    assert small.bodies[0].inclusions[0].radius == pytest.approx(1.0 / 50.0)


def test_fig3_rect_torque_aligned():
    scene = preset_scene("fig3_rect_torque", {"counts": [5, 10, 3], "ds_over_L": 0.35})
    lower, upper = scene.bodies
    assert lower.n_particles == upper.n_particles == 150
    np.testing.assert_allclose(
        _sorted_rows(upper.lab_positions()[:, :2]), _sorted_rows(lower.lab_positions()[:, :2]), atol=1e-12
    )
    assert separation(scene, 1, Z, SeparationKind.SURFACE) == pytest.approx(0.35, abs=1e-13)


def test_fig4_prolates_symmetric():
    scene = preset_scene(
        "fig4_aniso_torque",
        {"variant": "prolates_symmetric", "lattice_over_sqrtA": 0.25, "radius_over_sqrtA": 0.08},
    )
    assert len(scene.bodies) == 2
    inclusion = scene.bodies[0].inclusions[0]
    assert isinstance(inclusion, SpheroidStatic)
    assert inclusion.semi_axes[0] == pytest.approx(1.2 * inclusion.semi_axes[1])
    np.testing.assert_allclose(scene.bodies[1].rotation, np.eye(3), atol=1e-15)


def test_unknown_preset_and_keys():
    with pytest.raises(UnknownPresetError):
        preset_scene("fig9", {})
    with pytest.raises(ConfigError) as info:
        preset_scene("fig1_cubes", {"L": 0.5})
    assert "unknown key 'L'" in info.value.violations
    with pytest.raises(ConfigError):
        preset_scene("fig1_cubes", {"material": "cheese"})
