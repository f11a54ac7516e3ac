import math

import numpy as np
import pytest
from conftest import pair_scene, single

from casimir_dipoles.defaults import DEFAULT_COUPLING_CUTOFF, HBAR_C_EV_UM
from casimir_dipoles.errors import ConvergenceError, PivotSignError, SingularMatrixError
from casimir_dipoles.geometry import axis_angle, build_cluster, stack_along_z, transform_body
from casimir_dipoles.materials import ConstantDielectric, PerfectMetal, SphereRadiative, SphereStatic
from casimir_dipoles.models import (
    Cube,
    ImagFrequency,
    InteractionMode,
    Lattice,
    QuadratureScheme,
    QuadratureSpec,
    Scene,
)
from casimir_dipoles.oracle import casimir_polder_u, london_c6
from casimir_dipoles.spectrum import (
    cutoff_xi,
    delta_logdet,
    energy_on_mesh,
    gauss_legendre_mesh,
    interaction_energy,
    log_det_identity_plus,
    resolve_xi0,
    signed_logdet,
)


@pytest.fixture
def small_cubes():
    sphere = SphereStatic(0.1 / 3.0, ConstantDielectric(4.0))
    body = build_cluster(Cube(0.3), Lattice(spacings=(0.1,) * 3, counts=(3, 3, 3)), sphere)
    return stack_along_z(body, body, 0.1, InteractionMode.NONRETARDED)


def test_signed_logdet_matches_numpy():
    rng = np.random.default_rng(3)
    for _ in range(5):
        matrix = rng.normal(size=(9, 9))
        sign, logdet = signed_logdet(matrix)
        expected_sign, expected = np.linalg.slogdet(matrix)
        assert sign == expected_sign
        assert logdet == pytest.approx(expected, rel=1e-12)


def test_negative_determinant_rejected():
    with pytest.raises(PivotSignError):
        log_det_identity_plus(np.diag([0.0, -3.0, 0.0]))


@pytest.mark.parametrize("scale", [1e-14, 1e-8, 1e-3, 2e-2, 0.3])
def test_log_det_identity_plus_keeps_relative_precision(scale):
    rng = np.random.default_rng(5)
    diagonal = -scale * rng.uniform(0.1, 1.0, size=6)
    k = np.triu(scale * rng.normal(size=(6, 6)), 1) + np.diag(diagonal)
    expected = math.fsum(math.log1p(d) for d in diagonal)
    assert log_det_identity_plus(k) == pytest.approx(expected, rel=1e-12)


def test_log_det_identity_plus_series_matches_lu():
    rng = np.random.default_rng(8)
    b = rng.normal(size=(9, 9))
    k = -5e-5 * (b @ b.T)
    assert np.linalg.norm(k) < 1e-2
    expected = np.linalg.slogdet(np.eye(9) + k)[1]
    assert log_det_identity_plus(k) == pytest.approx(expected, rel=1e-11)
    assert log_det_identity_plus(np.zeros((4, 4))) == 0.0


def test_singular_matrix_rejected():
    with pytest.raises(SingularMatrixError):
        signed_logdet(np.zeros((3, 3)))


def test_one_body_is_zero(small_cubes):
    scene = Scene(bodies=small_cubes.bodies[:1], mode=InteractionMode.NONRETARDED)
    assert delta_logdet(scene, ImagFrequency(1.0)) == 0.0
    result = interaction_energy(scene)
    assert result.energy == 0.0
    assert result.node_count == 0


def test_two_static_particles_closed_form(cm_sphere):
    r = 2.5
    x = 0.4 ** 2 / r ** 6
    expected = math.log(1.0 - 4.0 * x) + 2.0 * math.log(1.0 - x)
    assert delta_logdet(pair_scene(cm_sphere, r), ImagFrequency(1.0)) == pytest.approx(expected, rel=1e-12)


def test_far_gap_vanishes():
    a = 0.01
    scene = pair_scene(SphereStatic(a, PerfectMetal()), 1e4 * a)
    value = delta_logdet(scene, ImagFrequency(1.0))
    assert abs(value) < 1e-12


def test_attractive_integrand(small_cubes, gold):
    for xi in (0.01, 0.3, 1.0, 5.0, 30.0):
        assert delta_logdet(small_cubes, ImagFrequency(xi)) < 0.0
    scene = pair_scene(SphereRadiative(0.05, gold), 0.3, mode=InteractionMode.RETARDED)
    for xi in (0.01, 0.3, 1.0, 2.0):
        assert delta_logdet(scene, ImagFrequency.for_mode(xi, InteractionMode.RETARDED)) < 0.0


def test_frame_invariance(small_cubes):
    rotation = axis_angle((1.0, 2.0, 3.0), 0.9)
    rotated = Scene(
        bodies=tuple(transform_body(b, rotation, (0.3, -0.2, 1.0)) for b in small_cubes.bodies),
        mode=small_cubes.mode,
    )
    xi = ImagFrequency(0.7)
    assert delta_logdet(rotated, xi) == pytest.approx(delta_logdet(small_cubes, xi), rel=1e-10)


def test_mapped_gauss_legendre_integrates_exponential():
    mesh = gauss_legendre_mesh(40, 1.0)
    assert math.fsum(mesh.weights * np.exp(-mesh.xi)) == pytest.approx(1.0, rel=1e-8)
    assert np.all(np.diff(mesh.xi) > 0)


def test_perfect_metal_london_limit():
    """With constant alpha the mapped rule itself sets the frequency cutoff."""
    a, r = 0.05, 1.0
    scene = pair_scene(SphereRadiative(a, PerfectMetal()), r)
    quad = QuadratureSpec()
    result = interaction_energy(scene, quad)
    cutoff = math.fsum(result.mesh.weights)
    c6 = london_c6(a ** 3, a ** 3, cutoff=cutoff)
    assert result.energy == pytest.approx(-c6 / r ** 6, rel=1e-2)


def test_drude_london_limit(undamped_drude):
    a = 0.05
    for ratio in (10, 20, 50):
        r = ratio * a
        scene = pair_scene(SphereRadiative(a, undamped_drude), r)
        result = interaction_energy(scene, QuadratureSpec(nodes=60))
        c6 = math.sqrt(3.0) / 4.0 * a ** 6 * undamped_drude.plasma_energy
        assert result.energy == pytest.approx(-c6 / r ** 6, rel=1e-2)


def test_node_doubling_within_estimate(gold_sphere):
    scene = pair_scene(gold_sphere, 0.4)
    coarse = interaction_energy(scene, QuadratureSpec(nodes=40))
    fine = interaction_energy(scene, QuadratureSpec(nodes=80))
    assert coarse.quad_error_estimate >= 0.0
    assert abs(fine.energy - coarse.energy) <= max(coarse.quad_error_estimate, 1e-9 * abs(coarse.energy))


def test_samples_sorted(gold_sphere):
    result = interaction_energy(pair_scene(gold_sphere, 0.4))
    xs = [x for x, _ in result.integrand_samples]
    assert xs == sorted(xs)
    assert result.node_count == len(xs) == 40


def test_scale_invariance_nonretarded(small_cubes):
    base = interaction_energy(small_cubes).energy
    for factor in (0.1, 10.0):
        scaled = interaction_energy(small_cubes.scaled(factor)).energy
        assert scaled == pytest.approx(base, rel=1e-10)


def test_retardation_weakens(gold):
    sphere = SphereStatic(0.1 / 3.0, gold)
    body = build_cluster(Cube(0.3), Lattice(spacings=(0.1,) * 3, counts=(3, 3, 3)), sphere)
    scene = stack_along_z(body, body, 0.2, InteractionMode.RETARDED)
    retarded = interaction_energy(scene).energy
    nonretarded = interaction_energy(scene.with_mode(InteractionMode.NONRETARDED)).energy
    assert retarded < 0.0 and nonretarded < 0.0
    assert abs(retarded) <= abs(nonretarded)


def test_adaptive_agrees_with_gauss_legendre(gold_sphere):
    scene = pair_scene(gold_sphere, 0.4)
    gauss = interaction_energy(scene, QuadratureSpec(nodes=80))
    adaptive = interaction_energy(
        scene, QuadratureSpec(scheme=QuadratureScheme.ADAPTIVE_SIMPSON, rel_tol=1e-8)
    )
    assert adaptive.energy == pytest.approx(gauss.energy, rel=1e-5)
    assert adaptive.quad_error_estimate <= 1e-6 * abs(adaptive.energy)
    weighted, _ = energy_on_mesh(scene, adaptive.mesh, QuadratureSpec())
    assert weighted == pytest.approx(adaptive.energy, rel=1e-4)


def test_adaptive_convergence_error(gold_sphere):
    scene = pair_scene(gold_sphere, 0.4)
    quad = QuadratureSpec(scheme=QuadratureScheme.ADAPTIVE_SIMPSON, rel_tol=1e-12, max_depth=1)
    with pytest.raises(ConvergenceError) as info:
        interaction_energy(scene, quad)
    assert info.value.partial < 0.0


def test_threads_bit_identical(small_cubes):
    one = interaction_energy(small_cubes, QuadratureSpec(nodes=16), workers=1)
    four = interaction_energy(small_cubes, QuadratureSpec(nodes=16), workers=4)
    assert one.energy == four.energy
    assert one.integrand_samples == four.integrand_samples
    assert one.evaluations == four.evaluations == 16 + 8


def test_map_scale_defaults(gold_sphere, gold):
    retarded = pair_scene(gold_sphere, 0.5, mode=InteractionMode.RETARDED)
    assert resolve_xi0(retarded, QuadratureSpec()) == pytest.approx(HBAR_C_EV_UM / 0.5)
    assert resolve_xi0(retarded, QuadratureSpec(xi0_ev=2.0)) == 2.0
    nonretarded = retarded.with_mode(InteractionMode.NONRETARDED)
    assert resolve_xi0(nonretarded, QuadratureSpec()) == pytest.approx(0.5 * 9.0 / math.sqrt(3.0))
    single_body = Scene(bodies=(single(gold_sphere),), mode=InteractionMode.RETARDED)
    assert resolve_xi0(single_body, QuadratureSpec()) == 1.0


def test_retarded_cutoff(gold):
    scene = pair_scene(SphereStatic(0.05, gold), 0.5, mode=InteractionMode.RETARDED)
    assert cutoff_xi(scene, QuadratureSpec()) == pytest.approx(DEFAULT_COUPLING_CUTOFF * HBAR_C_EV_UM / 0.5)
    assert math.isinf(cutoff_xi(scene.with_mode(InteractionMode.NONRETARDED), QuadratureSpec()))
    result = interaction_energy(scene)
    beyond = [v for x, v in result.integrand_samples if x > DEFAULT_COUPLING_CUTOFF * HBAR_C_EV_UM / 0.5]
    assert beyond and all(v == 0.0 for v in beyond)


def test_node_error_carries_frequency():
    a = 0.05
    scene = pair_scene(SphereRadiative(a, PerfectMetal()), 0.11, mode=InteractionMode.RETARDED)
    with pytest.raises(PivotSignError) as info:
        interaction_energy(scene)
    assert info.value.xi is not None and info.value.xi > 0.0


def test_retarded_pair_matches_casimir_polder(metal_sphere):
    r = 5.0
    a3 = metal_sphere.radius ** 3
    result = interaction_energy(pair_scene(metal_sphere, r, mode=InteractionMode.RETARDED))
    assert result.energy == pytest.approx(casimir_polder_u(a3, a3, r), rel=2e-2)


def test_retarded_integrand_tail_decays(gold):
    r, a = 0.5, 0.05
    gap = r - 2.0 * a
    scene = pair_scene(SphereStatic(a, gold), r, mode=InteractionMode.RETARDED)
    peak = max(
        abs(delta_logdet(scene, ImagFrequency.for_mode(x, InteractionMode.RETARDED)))
        for x in np.geomspace(1e-3, 10.0, 30) * HBAR_C_EV_UM / gap
    )
    tail = [
        abs(delta_logdet(scene, ImagFrequency.for_mode(k * HBAR_C_EV_UM / gap, InteractionMode.RETARDED)))
        for k in np.linspace(30.0, 60.0, 16)
    ]
    assert all(later < earlier for earlier, later in zip(tail, tail[1:]))
    assert tail[0] < 1e-12 * peak
    assert tail[-1] > 0.0
