import math

import numpy as np
import pytest
from conftest import pair_scene, single

from casimir_dipoles.coupling import (
    assemble,
    assemble_decoupled,
    body_block,
    decouple,
    dipole_tensor,
    mode_flag,
    off_diagonal_ratio,
)
from casimir_dipoles.defaults import HBAR_C_EV_UM
from casimir_dipoles.errors import CoincidentParticleError, SingularPolarizabilityError
from casimir_dipoles.geometry import build_cluster, stack_along_z
from casimir_dipoles.materials import ConstantDielectric, PerfectMetal, SphereRadiative, SphereStatic, sphere_polarizability
from casimir_dipoles.models import Cube, ImagFrequency, InteractionMode, Lattice, Scene


def _naive_matrix(scene: Scene, xi: ImagFrequency) -> np.ndarray:
    positions = scene.lab_positions()
    inclusions = scene.lab_inclusions()
    n = len(positions)
    matrix = np.zeros((3 * n, 3 * n))
    for j in range(n):
        matrix[3 * j:3 * j + 3, 3 * j:3 * j + 3] = np.eye(3) / sphere_polarizability(inclusions[j], xi)
        for k in range(n):
            if j != k:
                r = positions[j] - positions[k]
                d = np.linalg.norm(r)
                u = r / d
                kr = xi.wavenumber * d
                t = math.exp(-kr) * (1 + kr + kr * kr) / d ** 3
                lng = -2.0 * math.exp(-kr) * (1 + kr) / d ** 3
                matrix[3 * j:3 * j + 3, 3 * k:3 * k + 3] = t * np.eye(3) + (lng - t) * np.outer(u, u)
    return matrix


@pytest.fixture
def two_cubes():
    sphere = SphereRadiative(0.1 / 3.0, ConstantDielectric(4.0))
    body = build_cluster(Cube(0.3), Lattice(spacings=(0.1,) * 3, counts=(3, 3, 3)), sphere)
    return stack_along_z(body, body, 0.15, InteractionMode.RETARDED)


def test_static_tensor_along_z():
    np.testing.assert_allclose(dipole_tensor((0.0, 0.0, 1.0), 0.0), np.diag([1.0, 1.0, -2.0]), atol=1e-15)


def test_static_tensor_scales_as_inverse_cube():
    np.testing.assert_allclose(dipole_tensor((0.0, 0.0, 2.0), 0.0), np.diag([1.0, 1.0, -2.0]) / 8.0, atol=1e-15)


def test_tensor_parity_and_symmetry():
    rng = np.random.default_rng(7)
    for _ in range(10):
        r = rng.normal(size=3)
        kappa = rng.uniform(0.0, 5.0)
        tensor = dipole_tensor(r, kappa)
        np.testing.assert_allclose(tensor, tensor.T, atol=1e-15)
        np.testing.assert_array_equal(dipole_tensor(-r, kappa), tensor)


def test_retarded_eigenvalues():
    tensor = dipole_tensor((0.0, 0.0, 1.0), 1.0)
    assert tensor[2, 2] == pytest.approx(-4.0 / math.e, rel=1e-14)
    assert tensor[2, 2] == pytest.approx(-1.47152, abs=1e-5)
    assert tensor[0, 0] == pytest.approx(3.0 / math.e, rel=1e-14)
    assert tensor[0, 0] == pytest.approx(1.10364, abs=1e-5)


def test_coincident_tensor():
    with pytest.raises(CoincidentParticleError):
        dipole_tensor((0.0, 0.0, 0.0), 0.0)


def test_single_particle(cm_sphere):
    coupled = assemble(Scene(bodies=(single(cm_sphere),)), ImagFrequency(1.0))
    np.testing.assert_allclose(coupled.matrix, np.eye(3) / 0.4)


def test_two_particle_blocks(gold_sphere):
    scene = pair_scene(gold_sphere, 0.3, axis=(1.0, 2.0, 0.5))
    coupled = assemble(scene, ImagFrequency(1.0))
    upper = coupled.matrix[0:3, 3:6]
    lower = coupled.matrix[3:6, 0:3]
    np.testing.assert_array_equal(upper, lower)
    np.testing.assert_allclose(upper, upper.T, atol=1e-15)
    assert coupled.symmetry_error() == 0.0


def test_matches_naive_assembly(two_cubes):
    for mode in InteractionMode:
        scene = two_cubes.with_mode(mode)
        xi = ImagFrequency.for_mode(0.8, mode)
        reference = _naive_matrix(scene, xi)
        coupled = assemble(scene, xi)
        error = np.linalg.norm(coupled.matrix - reference) / np.linalg.norm(reference)
        assert error < 1e-14


def test_threaded_assembly_identical():
    sphere = SphereStatic(0.1 / 3.0, ConstantDielectric(4.0))
    body = build_cluster(Cube(0.6), Lattice(spacings=(0.1,) * 3, counts=(6, 6, 6)), sphere)
    scene = stack_along_z(body, body, 0.1, InteractionMode.NONRETARDED)
    xi = ImagFrequency(1.0)
    np.testing.assert_array_equal(assemble(scene, xi, workers=4).matrix, assemble(scene, xi, workers=1).matrix)


def test_decoupled_one_body(two_cubes):
    scene = Scene(bodies=two_cubes.bodies[:1])
    xi = ImagFrequency.for_mode(1.0, InteractionMode.RETARDED)
    np.testing.assert_array_equal(assemble_decoupled(scene, xi).matrix, assemble(scene, xi).matrix)


def test_decoupled_blocks(two_cubes):
    xi = ImagFrequency.for_mode(1.0, InteractionMode.RETARDED)
    coupled = assemble(two_cubes, xi)
    separate = decouple(coupled)
    assert not np.any(body_block(separate, 0, 1))
    assert not np.any(body_block(separate, 1, 0))
    np.testing.assert_array_equal(body_block(separate, 1), body_block(coupled, 1))
    assert np.any(body_block(coupled, 0, 1))


def test_large_frequency_decouples(gold):
    r = 1.0
    scene = pair_scene(SphereStatic(0.05, gold), r, mode=InteractionMode.RETARDED)
    xi = ImagFrequency.for_mode(30.0 * HBAR_C_EV_UM / r, InteractionMode.RETARDED)
    assert off_diagonal_ratio(assemble(scene, xi)) < 1e-12


def test_singular_polarizability_carries_xi():
    a = 0.1
    scene = pair_scene(SphereRadiative(a, PerfectMetal()), 1.0, mode=InteractionMode.RETARDED)
    xi = ImagFrequency.for_mode(2.0 * HBAR_C_EV_UM / a, InteractionMode.RETARDED)
    with pytest.raises(SingularPolarizabilityError) as info:
        assemble(scene, xi)
    assert info.value.xi == pytest.approx(xi.xi)


def test_mode_flag(gold_sphere):
    for mode, flag in ((InteractionMode.RETARDED, 1), (InteractionMode.NONRETARDED, 0)):
        scene = pair_scene(gold_sphere, 0.5, mode=mode)
        assert mode_flag(assemble(scene, ImagFrequency.for_mode(1.0, mode))) == flag


def test_assemble_leaves_scene_untouched(two_cubes):
    before = two_cubes.lab_positions().copy()
    assemble(two_cubes, ImagFrequency.for_mode(1.0, InteractionMode.RETARDED))
    np.testing.assert_array_equal(two_cubes.lab_positions(), before)
