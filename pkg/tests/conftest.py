import json

import numpy as np
import pytest

from casimir_dipoles.materials import ConstantDielectric, Drude, PerfectMetal, SphereRadiative, SphereStatic, material
from casimir_dipoles.models import Body, InteractionMode, Scene


def single(inclusion, at=(0.0, 0.0, 0.0)) -> Body:
    return Body(positions=np.zeros((1, 3)), inclusions=(inclusion,), translation=np.asarray(at, dtype=float))


def pair_scene(inclusion, r: float, mode=InteractionMode.NONRETARDED, axis=(0.0, 0.0, 1.0)) -> Scene:
    """Two copies of ``inclusion`` a centre distance ``r`` apart."""
    offset = r * np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    return Scene(bodies=(single(inclusion), single(inclusion, offset)), mode=mode)


@pytest.fixture
def gold():
    return material("gold")


@pytest.fixture
def gold_sphere(gold):
    return SphereRadiative(0.05, gold)


@pytest.fixture
def undamped_drude():
    return Drude(9.0, 0.0)


@pytest.fixture
def metal_sphere():
    return SphereRadiative(0.02, PerfectMetal())


@pytest.fixture
def cm_sphere():
    """Static sphere, a = 1 um, eps = 3: alpha = 0.4 um^3."""
    return SphereStatic(1.0, ConstantDielectric(3.0))


@pytest.fixture
def scenario_dict():
    """Two gold spheres swept in surface gap, non-retarded."""
    return {
        "mode": "nonretarded",
        "scene": {
            "bodies": [
                {
                    "particles_um": [[0.0, 0.0, 0.0]],
                    "inclusion": {"kind": "sphere_radiative", "radius_um": 0.05, "material": "gold"},
                },
                {
                    "particles_um": [[0.0, 0.0, 0.0]],
                    "inclusion": {"kind": "sphere_radiative", "radius_um": 0.05, "material": "gold"},
                    "translation_um": [0.0, 0.0, 0.4],
                },
            ]
        },
        "quadrature": {"nodes": 24},
        "sweep": {"parameter": "separation", "grid_um": [0.2, 0.3, 0.4, 0.5], "fit_um": [0.2, 0.5]},
    }


@pytest.fixture
def scenario_file(tmp_path, scenario_dict):
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(scenario_dict), encoding="utf-8")
    return path
