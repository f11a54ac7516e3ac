import json

import pytest

from casimir_dipoles.config import (
    build_quadrature,
    build_scene,
    build_sweep,
    config_echo,
    load_config,
    parse_config,
)
from casimir_dipoles.defaults import DEFAULT_COUPLING_CUTOFF, DEFAULT_NODES
from casimir_dipoles.errors import ConfigError
from casimir_dipoles.materials import Drude, MaxwellGarnett, SphereStatic, Tabulated
from casimir_dipoles.models import InteractionMode, QuadratureScheme, SeparationKind, SweepParameter


def _body(material="gold", at=(0.0, 0.0, 0.0)):
    return {
        "particles_um": [[0.0, 0.0, 0.0]],
        "inclusion": {"kind": "sphere_static", "radius_um": 0.05, "material": material},
        "translation_um": list(at),
    }


def _parse(data) -> object:
    return parse_config(json.dumps(data))


def test_minimal_defaults():
    cfg = _parse({"scene": {"bodies": [_body(), _body(at=(0.0, 0.0, 0.5))]}})
    quad = build_quadrature(cfg)
    assert quad.scheme is QuadratureScheme.GAUSS_LEGENDRE_MAPPED
    assert quad.nodes == DEFAULT_NODES
    assert quad.coupling_cutoff == DEFAULT_COUPLING_CUTOFF
    assert build_sweep(cfg) is None
    scene = build_scene(cfg)
    assert scene.mode is InteractionMode.RETARDED
    assert scene.n_particles == 2
    assert isinstance(scene.bodies[0].inclusions[0], SphereStatic)


def test_load_from_file(scenario_file):
    cfg = load_config(scenario_file)
    spec = build_sweep(cfg)
    assert spec.parameter is SweepParameter.SEPARATION
    assert spec.grid == (0.2, 0.3, 0.4, 0.5)
    assert spec.separation_kind is SeparationKind.SURFACE
    assert cfg.sweep.fit_window == (0.2, 0.5)
    assert build_scene(cfg).mode is InteractionMode.NONRETARDED


def test_fill_out_of_range_is_named():
    data = {
        "materials": {"foam": {"kind": "maxwell_garnett", "inclusion": "gold", "fill": 1.2}},
        "scene": {"bodies": [_body("foam"), _body("foam", (0.0, 0.0, 0.5))]},
    }
    with pytest.raises(ConfigError) as info:
        _parse(data)
    assert any("fill" in v for v in info.value.violations)
    assert info.value.exit_code == 2


def test_preset_scene():
    cfg = _parse({"scene": {"preset": "fig1_cubes"}})
    assert build_scene(cfg).n_particles == 2000


def test_preset_mode_override():
    cfg = _parse({"mode": "nonretarded", "scene": {"preset": "fig1_cubes", "params": {"n": 3}}})
    scene = build_scene(cfg)
    assert scene.mode is InteractionMode.NONRETARDED
    assert scene.n_particles == 54


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError) as info:
        _parse({"scene": {"preset": "fig1_cubes"}, "quadrature": {"points": 10}})
    assert any("points" in v for v in info.value.violations)
    with pytest.raises(ConfigError) as info:
        _parse({"scene": {"preset": "fig1_cubes", "params": {"size": 2}}})
    assert any("size" in v for v in info.value.violations)


def test_all_violations_reported_together():
    data = {
        "scene": {"bodies": [_body(), _body(at=(0.0, 0.0, 0.5))]},
        "quadrature": {"nodes": 2, "rel_tol": 5.0},
        "output": {"colour": "red"},
    }
    with pytest.raises(ConfigError) as info:
        _parse(data)
    assert len(info.value.violations) >= 3
    assert "quadrature.nodes" in str(info.value)


def test_sweep_unit_mismatch():
    data = {
        "scene": {"preset": "fig3_rect_torque"},
        "sweep": {"parameter": "angle", "grid_um": [0.1, 0.2]},
    }
    with pytest.raises(ConfigError) as info:
        _parse(data)
    assert any("grid_rad" in v for v in info.value.violations)


def test_sweep_body_index_out_of_range():
    data = {
        "scene": {"bodies": [_body(), _body(at=(0.0, 0.0, 0.5))]},
        "sweep": {"parameter": "separation", "grid_um": [0.2], "body_index": 2},
    }
    with pytest.raises(ConfigError) as info:
        _parse(data)
    assert any("body_index" in v for v in info.value.violations)


def test_invalid_json_single_violation():
    with pytest.raises(ConfigError) as info:
        parse_config('{"scene": ')
    assert len(info.value.violations) == 1
    assert info.value.violations[0].startswith("line 1")


def test_echo_round_trip(scenario_dict):
    cfg = _parse(scenario_dict)
    echoed = config_echo(cfg)
    assert _parse(echoed) == cfg
    json.dumps(echoed)


def test_custom_materials_resolve_by_name():
    data = {
        "materials": {
            "soft_metal": {"kind": "drude", "plasma_eV": 5.0, "damping_eV": 0.1},
            "foam": {"kind": "maxwell_garnett", "inclusion": "soft_metal", "host": "vacuum", "fill": 0.2},
        },
        "scene": {"bodies": [_body("soft_metal"), _body("foam", (0.0, 0.0, 0.5))]},
    }
    scene = build_scene(_parse(data))
    first = scene.bodies[0].inclusions[0].material
    second = scene.bodies[1].inclusions[0].material
    assert isinstance(first, Drude) and first.name == "soft_metal"
    assert isinstance(second, MaxwellGarnett)
    assert second.inclusion is first


def test_material_cycle_rejected():
    data = {
        "materials": {
            "a": {"kind": "maxwell_garnett", "inclusion": "b", "fill": 0.1},
            "b": {"kind": "maxwell_garnett", "inclusion": "a", "fill": 0.1},
        },
        "scene": {"bodies": [_body("a"), _body("a", (0.0, 0.0, 0.5))]},
    }
    with pytest.raises(ConfigError) as info:
        build_scene(_parse(data))
    assert "cycle" in info.value.message


def test_tabulated_points_and_path(tmp_path):
    (tmp_path / "eps.csv").write_text("xi_eV,eps\n0.1,5.0\n1.0,2.0\n10.0,1.0\n", encoding="utf-8")
    data = {
        "materials": {
            "inline": {"kind": "tabulated", "points": [[0.1, 4.0], [1.0, 2.0], [10.0, 1.0]]},
            "file": {"kind": "tabulated", "path": "eps.csv"},
        },
        "scene": {"bodies": [_body("inline"), _body("file", (0.0, 0.0, 0.5))]},
    }
    scene = build_scene(_parse(data), base_dir=tmp_path)
    inline = scene.bodies[0].inclusions[0].material
    from_file = scene.bodies[1].inclusions[0].material
    assert isinstance(inline, Tabulated) and inline.epsilon(0.1) == pytest.approx(4.0)
    assert isinstance(from_file, Tabulated) and from_file.epsilon(1.0) == pytest.approx(2.0)


def test_tabulated_needs_one_source():
    data = {
        "materials": {"bad": {"kind": "tabulated"}},
        "scene": {"bodies": [_body(), _body(at=(0.0, 0.0, 0.5))]},
    }
    with pytest.raises(ConfigError):
        _parse(data)


def test_lattice_body_covers_shape():
    body = {
        "shape": {"kind": "cube", "side_um": 0.3},
        "lattice": {"spacing_um": 0.1},
        "inclusion": {"kind": "sphere_radiative", "radius_um": 0.03, "material": "silicon"},
    }
    raised = dict(body, translation_um=[0.0, 0.0, 0.5])
    scene = build_scene(_parse({"mode": "nonretarded", "scene": {"bodies": [body, raised]}}))
    assert scene.bodies[0].n_particles == 27


@pytest.mark.parametrize(
    "params, field",
    [
        ({"L_um": "abc"}, "L_um"),
        ({"L_um": -1.0}, "L_um"),
        ({"n": 0}, "n"),
        ({"n": 2.5}, "n"),
        ({"inclusion": "bubble"}, "inclusion"),
    ],
)
def test_preset_params_are_typed(params, field):
    with pytest.raises(ConfigError) as info:
        _parse({"scene": {"preset": "fig1_cubes", "params": params}})
    assert any(field in v for v in info.value.violations)


def test_preset_params_belong_to_their_preset():
    with pytest.raises(ConfigError) as info:
        _parse({"scene": {"preset": "fig1_cubes", "params": {"stretch": 1.5}}})
    assert any("stretch" in v for v in info.value.violations)
    cfg = _parse({"scene": {"preset": "fig4_aniso_torque", "params": {"stretch": 1.5, "aspect": 2.0}}})
    assert cfg.scene.params.stretch == 1.5


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError) as info:
        _parse({"scene": {"preset": "fig9_spirals"}})
    assert any("fig9_spirals" in v for v in info.value.violations)


def test_preset_material_must_be_known():
    with pytest.raises(ConfigError) as info:
        _parse({"scene": {"preset": "fig1_cubes", "params": {"material": "unobtainium"}}})
    assert any("unobtainium" in v for v in info.value.violations)


def test_preset_uses_custom_material():
    data = {
        "materials": {"soft_metal": {"kind": "drude", "plasma_eV": 5.0, "damping_eV": 0.1}},
        "scene": {"preset": "fig1_cubes", "params": {"n": 2, "material": "soft_metal"}},
    }
    scene = build_scene(_parse(data))
    medium = scene.bodies[0].inclusions[0].material
    assert isinstance(medium, Drude) and medium.name == "soft_metal"
