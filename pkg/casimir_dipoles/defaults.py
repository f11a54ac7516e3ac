"""Constants, numerical defaults and preset dimension tables."""

import math

# hbar * c in eV * um; converts an imaginary frequency (as photon energy) to a
# wavenumber kappa = xi / HBAR_C_EV_UM in 1/um.
HBAR_C_EV_UM = 0.197327

# Spheroid depolarization factors must sum to one within this tolerance.
DEPOLARIZATION_SUM_TOL = 1e-12

# Radiative sphere polarizabilities are only evaluated for kappa * a below this.
RADIATIVE_KA_LIMIT = 1.0

# Quadrature
DEFAULT_NODES = 40
DEFAULT_REL_TOL = 1e-6
DEFAULT_MAX_DEPTH = 24
# Retarded nodes with kappa * r_min above this contribute exactly zero; the
# two-dipole integrand there is below 1e-9 of its peak.
DEFAULT_COUPLING_CUTOFF = 16.0
# Map scale used when no material resonance scale is available (eV).
DEFAULT_XI0_EV = 1.0

# Sweeps
DEFAULT_FD_STEP = 1e-3
FD_STEP_BOUNDS = (1e-6, 1e-1)
ANGLE_STEP_FLOOR_RAD = math.pi / 180.0

# Assembly
ROW_BLOCK = 128
SYMMETRY_TOL = 1e-13

# Filling fraction of every cube preset: spheres of radius d/3 on a cubic
# lattice of spacing d.
PRESET_FILL = 4.0 * math.pi / 81.0
RADIUS_OVER_SPACING = 1.0 / 3.0

# Material library names (parameters live in data/materials.json)
MATERIAL_NAMES = ["gold", "aluminum", "perfect_metal", "silicon", "polystyrene"]

# Preset defaults. Lengths in um, angles in rad. Presets whose radiative spheres
# would leave the dipole range (kappa*a < 1) below the coupling cutoff default to
# static inclusions.
PRESET_DEFAULTS = {
    "fig1_cubes": {
        "L_um": 0.5,
        "n": 10,
        "z_over_L": 0.5,
        "material": "gold",
        "mode": "retarded",
        "inclusion": "radiative",
    },
    "fig1_cylinder": {
        "L_um": 5.0,
        "height_um": 4.0,
        "n": 10,
        "z_over_L": 0.5,
        "material": "gold",
        "mode": "retarded",
        "inclusion": "static",
    },
    "fig2_materials": {
        "L_um": 0.5,
        "n": 10,
        "z_over_L": 0.5,
        "material": "gold",
        "mode": "retarded",
        "inclusion": "radiative",
    },
    "fig2_resolution": {
        "L_um": 5.0,
        "variant": "n10",
        "z_over_L": 0.5,
        "material": "gold",
        "mode": "retarded",
        "inclusion": "static",
    },
    "fig3_rect_torque": {
        "L_um": 1.0,
        "counts": [10, 20, 5],
        "ds_over_L": 0.35,
        "theta_rad": 0.0,
        "material": "gold",
        "mode": "retarded",
        "inclusion": "static",
    },
    "fig4_aniso_torque": {
        "area_um2": 1.0,
        "height_um": 0.43,
        "gap_over_sqrtA": 0.4,
        "lattice_over_sqrtA": 1.0 / 14.0,
        "radius_over_sqrtA": 1.0 / 42.0,
        "stretch": 1.2,
        "aspect": 1.2,
        "variant": "spheres_asymmetric",
        "theta_rad": 0.0,
        "material": "gold",
        "mode": "retarded",
        "inclusion": "radiative",
    },
}

FIG2_RESOLUTION_VARIANTS = {
    "n10": {"n": 10, "radius_over_L": None},
    "n8": {"n": 8, "radius_over_L": None},
    "n6": {"n": 6, "radius_over_L": None},
    "small_radius": {"n": 10, "radius_over_L": 1.0 / 50.0},
}

FIG4_VARIANTS = {
    "spheres_asymmetric": {"stretched": True, "prolate": False},
    "prolates_symmetric": {"stretched": False, "prolate": True},
    "prolates_asymmetric": {"stretched": True, "prolate": True},
}

PRESET_NAMES = list(PRESET_DEFAULTS)

PRESET_DESCRIPTIONS = {
    "fig1_cubes": "two cubes of 10^3 spheres, face-to-face gap z along z",
    "fig1_cylinder": "two circular cylinders with the base area of a 5 um cube face, height 4 um",
    "fig2_materials": "fig1 cubes with a selectable material",
    "fig2_resolution": "5 um cubes at fixed filling fraction: n10, n8, n6 or small_radius spheres",
    "fig3_rect_torque": "L x 2L x 0.5L boxes, upper one rotated by theta about z",
    "fig4_aniso_torque": "circular cylinders of stretched lattices and/or prolate spheroids, rotated by theta",
}

# Result columns; the unit suffix depends on the swept parameter.
CSV_COLUMNS = {
    "separation": ["param_um", "energy_eV", "derivative_eV_per_um", "quad_error_eV"],
    "angle": ["param_rad", "energy_eV", "derivative_eV_per_rad", "quad_error_eV"],
}
INTEGRAND_COLUMNS = ["xi_eV", "delta_logdet"]
GEOMETRY_COLUMNS = ["x_um", "y_um", "z_um", "radius_um"]
