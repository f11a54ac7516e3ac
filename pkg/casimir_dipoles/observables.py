"""Energy sweeps, finite-difference forces and torques, power-law fits."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, Tuple

import numpy as np
from scipy.stats import linregress

from .defaults import ANGLE_STEP_FLOOR_RAD
from .errors import CoincidentParticleError, NonPowerLawError, OverlapError, StencilError
from .geometry import with_rotation, with_separation
from .models import (
    EnergyResult,
    QuadratureSpec,
    Scene,
    SweepParameter,
    SweepResult,
    SweepRow,
    SweepSpec,
)
from .spectrum import cutoff_xi, energy_on_mesh, interaction_energy, resolve_xi0

logger = logging.getLogger(__name__)

EnergyHook = Callable[[float], float]
RowCallback = Callable[[SweepRow], None]


def place(scene: Scene, spec: SweepSpec, value: float) -> Scene:
    """Scene with the moving body at separation or angle ``value``.

    Angles are measured from the body's orientation in ``scene``.
    """
    try:
        if spec.parameter is SweepParameter.SEPARATION:
            return with_separation(scene, spec.body_index, spec.unit_axis, spec.separation_kind, value)
        return with_rotation(scene, spec.body_index, spec.unit_axis, value)
    except (OverlapError, CoincidentParticleError) as exc:
        raise StencilError(f"bodies overlap at {spec.parameter.value} {value:.9g}: {exc.message}", point=value)


def step_size(spec: SweepSpec, value: float) -> float:
    """Absolute finite-difference step at ``value``."""
    if spec.parameter is SweepParameter.SEPARATION:
        return spec.fd_step * value
    return spec.fd_step * max(abs(value), ANGLE_STEP_FLOOR_RAD)


def _evaluate_point(
    scene: Scene,
    spec: SweepSpec,
    quad: QuadratureSpec,
    value: float,
    workers: int,
) -> SweepRow:
    centre = place(scene, spec, value)
    quad = quad.with_xi0(resolve_xi0(centre, quad))
    result: EnergyResult = interaction_energy(centre, quad, workers)
    derivative = None
    if spec.derivatives and result.mesh is not None:
        h = step_size(spec, value)
        xi_cut = cutoff_xi(centre, quad)
        plus, _ = energy_on_mesh(place(scene, spec, value + h), result.mesh, quad, workers, xi_cut)
        minus, _ = energy_on_mesh(place(scene, spec, value - h), result.mesh, quad, workers, xi_cut)
        derivative = -(plus - minus) / (2.0 * h)
    return SweepRow(
        param=value,
        energy=result.energy,
        derivative=derivative,
        quad_error=result.quad_error_estimate,
        node_count=result.node_count,
    )


def _evaluate_hook(spec: SweepSpec, hook: EnergyHook, value: float) -> SweepRow:
    derivative = None
    if spec.derivatives:
        h = step_size(spec, value)
        derivative = -(hook(value + h) - hook(value - h)) / (2.0 * h)
    return SweepRow(param=value, energy=hook(value), derivative=derivative, quad_error=0.0)


def sweep(
    scene: Scene,
    spec: SweepSpec,
    quad: Optional[QuadratureSpec] = None,
    workers: int = 1,
    energy_hook: Optional[EnergyHook] = None,
    on_row: Optional[RowCallback] = None,
) -> SweepResult:
    """Energy and conjugate force (-dU/dz) or torque (-dU/dtheta) over the grid.

    Stencil energies reuse the centre point's quadrature mesh. ``energy_hook``
    replaces the solver with a closed-form U(param); ``on_row`` sees every row
    as soon as it is computed, in grid order. With several workers the grid
    points run in parallel and each point is evaluated single-threaded, so
    results do not depend on the worker count.
    """
    quad = quad or QuadratureSpec()
    result = SweepResult(
        parameter=spec.parameter,
        metadata={
            "scene_digest": scene.digest(),
            "mode": scene.mode.value,
            "quadrature": quad.describe(),
            "parameter": spec.parameter.value,
            "body_index": spec.body_index,
            "axis": [float(a) for a in spec.unit_axis],
            "separation_kind": spec.separation_kind.value,
            "fd_step": spec.fd_step,
        },
    )

    def evaluate(value: float, node_workers: int) -> SweepRow:
        if energy_hook is not None:
            return _evaluate_hook(spec, energy_hook, value)
        return _evaluate_point(scene, spec, quad, value, node_workers)

    pool: Optional[ThreadPoolExecutor] = None
    if workers > 1 and len(spec.grid) > 1 and energy_hook is None:
        pool = ThreadPoolExecutor(max_workers=workers)
        rows: Iterable[SweepRow] = pool.map(lambda v: evaluate(v, 1), spec.grid)
    else:
        rows = (evaluate(v, workers) for v in spec.grid)
    try:
        for k, (value, row) in enumerate(zip(spec.grid, rows)):
            _report(result, spec, k, value, row, on_row)
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)
    return result


def _report(
    result: SweepResult,
    spec: SweepSpec,
    k: int,
    value: float,
    row: SweepRow,
    on_row: Optional[RowCallback],
) -> None:
    logger.info(
        f"[{k + 1}/{len(spec.grid)}] {spec.parameter.value}={value:.6g}  "
        f"U={row.energy:.6e} eV  dU={row.derivative if row.derivative is not None else float('nan'):.6e}"
    )
    result.rows.append(row)
    if on_row is not None:
        on_row(row)


def power_law_exponent(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Slope of log|y| against log x and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 4:
        raise NonPowerLawError(f"power-law fit needs at least 4 points, got {len(x)}")
    if np.any(y == 0.0) or not (np.all(y > 0.0) or np.all(y < 0.0)):
        raise NonPowerLawError("values change sign inside the fit window")
    fit = linregress(np.log(x), np.log(np.abs(y)))
    return float(fit.slope), float(fit.stderr)


def fit_power_law(result: SweepResult, window: Tuple[float, float]) -> Tuple[float, float]:
    """Exponent of F ~ param^p over ``window`` (inclusive) and its standard error."""
    lo, hi = window
    params = result.params()
    values = result.derivatives()
    mask = (params >= lo) & (params <= hi) & ~np.isnan(values)
    exponent, stderr = power_law_exponent(params[mask], values[mask])
    logger.info(f"Power-law fit on [{lo:g}, {hi:g}]: exponent {exponent:.4f} +/- {stderr:.2e}")
    return exponent, stderr
