"""Interaction energy as an imaginary-frequency integral of a log-determinant difference."""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .coupling import assemble
from .defaults import DEFAULT_XI0_EV, HBAR_C_EV_UM
from .errors import ConvergenceError, NumericalError, PivotSignError, SingularMatrixError
from .models import (
    EnergyResult,
    ImagFrequency,
    InteractionMode,
    QuadratureMesh,
    QuadratureScheme,
    QuadratureSpec,
    Scene,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Rounding floor of the Gauss-Legendre error estimate, relative to sum |w f|.
ROUNDING_FLOOR = 1e-14

# Boole's rule on five equally spaced points, in units of the panel width.
BOOLE_WEIGHTS = np.array([7.0, 32.0, 12.0, 32.0, 7.0]) / 90.0

# Interaction matrices smaller than this (Frobenius) go through the trace series.
SERIES_NORM = 1e-2
SERIES_REL_TOL = 1e-17
SERIES_MAX_TERMS = 64

LUFactors = Tuple[np.ndarray, np.ndarray]


def _lu(matrix: np.ndarray) -> LUFactors:
    lu, piv = lu_factor(matrix, check_finite=False)
    pivots = np.diag(lu)
    if not np.all(np.isfinite(pivots)) or np.any(pivots == 0.0):
        raise SingularMatrixError(f"LU factorization of a {len(matrix)}x{len(matrix)} matrix broke down")
    return lu, piv


def _lu_sign_logdet(factors: LUFactors) -> Tuple[float, float]:
    lu, piv = factors
    pivots = np.diag(lu)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    negative = int(np.count_nonzero(pivots < 0.0))
    sign = -1.0 if (swaps + negative) % 2 else 1.0
    return sign, float(np.sum(np.log(np.abs(pivots))))


def signed_logdet(matrix: np.ndarray) -> Tuple[float, float]:
    """(sign, log|det|) from an LU factorization with partial pivoting."""
    return _lu_sign_logdet(_lu(matrix))


def _positive_factors(matrix: np.ndarray, what: str) -> LUFactors:
    factors = _lu(matrix)
    if _lu_sign_logdet(factors)[0] <= 0.0:
        raise PivotSignError(f"{what} system matrix has a non-positive determinant")
    return factors


def _trace_series(k: np.ndarray, norm: float) -> float:
    """sum_n (-1)^(n+1) tr(K^n) / n, stopped once the tail bound |K|_F^(n+1) / (1 - |K|_F) is negligible."""
    terms: List[float] = []
    power = k
    for n in range(1, SERIES_MAX_TERMS + 1):
        terms.append((-1.0) ** (n + 1) * float(np.trace(power)) / n)
        tail = norm ** (n + 1) / (1.0 - norm)
        if n >= 2 and tail <= SERIES_REL_TOL * abs(math.fsum(terms)):
            break
        power = power @ k
    return math.fsum(terms)


def log_det_identity_plus(k: np.ndarray) -> float:
    """log det(I + K), accurate to relative precision even when |K| is tiny."""
    norm = float(np.linalg.norm(k))
    if norm == 0.0:
        return 0.0
    if norm < SERIES_NORM:
        return _trace_series(k, norm)
    sign, logdet = signed_logdet(np.eye(len(k)) + k)
    if sign <= 0.0:
        raise PivotSignError("coupled system matrix has a non-positive determinant")
    return logdet


def delta_logdet(scene: Scene, xi: ImagFrequency, workers: int = 1) -> float:
    """log det M_full - log det M_decoupled at ``xi``.

    Computed as log det(I + D^-1 A_inter) with D the block-diagonal body
    part, so only the interaction is ever formed. For two bodies this
    reduces to log det(I - M11^-1 M12 M22^-1 M21) on the smaller body.
    """
    if len(scene.bodies) < 2:
        return 0.0
    try:
        coupled = assemble(scene, xi, workers)
        matrix = coupled.matrix
        rows = coupled.row_slices()
        factors = [_positive_factors(matrix[r, r], f"body {b}") for b, r in enumerate(rows)]
        if len(rows) == 2:
            (r1, r2), (f1, f2) = rows, factors
            if r2.stop - r2.start < r1.stop - r1.start:
                (r1, r2), (f1, f2) = (r2, r1), (f2, f1)
            k12 = lu_solve(f1, matrix[r1, r2], check_finite=False)
            k21 = lu_solve(f2, matrix[r2, r1], check_finite=False)
            value = log_det_identity_plus(-(k12 @ k21))
        else:
            k = np.empty_like(matrix)
            for r, f in zip(rows, factors):
                coupling = np.array(matrix[r])
                coupling[:, r] = 0.0
                k[r] = lu_solve(f, coupling, check_finite=False)
            value = log_det_identity_plus(k)
    except NumericalError as exc:
        raise exc.at_node(xi.xi)
    return value


def gauss_legendre_mesh(nodes: int, xi0: float) -> QuadratureMesh:
    """Gauss-Legendre rule on u in (0, 1) mapped to xi = xi0 u / (1 - u)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    weights = 0.5 * w * xi0 / (1.0 - u) ** 2
    return QuadratureMesh(xi=xi0 * u / (1.0 - u), weights=weights, xi0=xi0)


def resolve_xi0(scene: Scene, quad: QuadratureSpec) -> float:
    """Map scale: explicit value, hbar*c / r_min (retarded) or half the material resonance scale."""
    if quad.xi0_ev is not None:
        return quad.xi0_ev
    if scene.mode is InteractionMode.RETARDED:
        r_min = scene.min_interbody_distance()
        if math.isfinite(r_min):
            return HBAR_C_EV_UM / r_min
        return DEFAULT_XI0_EV
    unique = {id(inc.material): inc.material for inc in scene.lab_inclusions()}
    scales = [m.resonance_scale for m in unique.values()]
    scales = [s for s in scales if s]
    return 0.5 * max(scales) if scales else DEFAULT_XI0_EV


def cutoff_xi(scene: Scene, quad: QuadratureSpec) -> float:
    """Frequency above which nodes contribute 0: kappa * r_min > coupling_cutoff (retarded only)."""
    if scene.mode is not InteractionMode.RETARDED:
        return math.inf
    r_min = scene.min_interbody_distance()
    if not math.isfinite(r_min):
        return math.inf
    return quad.coupling_cutoff * HBAR_C_EV_UM / r_min


class _Integrand:
    """Delta log det at a node, with the retarded cutoff applied."""

    def __init__(self, scene: Scene, quad: QuadratureSpec, workers: int, xi_cut: Optional[float] = None):
        self.scene = scene
        self.workers = workers
        self.calls = 0
        self._lock = threading.Lock()
        self.xi_cut = cutoff_xi(scene, quad) if xi_cut is None else xi_cut

    def __call__(self, xi: float) -> float:
        if xi > self.xi_cut or len(self.scene.bodies) < 2:
            return 0.0
        with self._lock:
            self.calls += 1
        value = delta_logdet(self.scene, ImagFrequency.for_mode(xi, self.scene.mode))
        logger.debug(f"  xi={xi:.6g} eV  delta_logdet={value:.6e}")
        return value

    def map(self, xis: Sequence[float]) -> List[float]:
        """Evaluate in submission order."""
        if self.workers > 1 and len(xis) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(self, xis))
        return [self(xi) for xi in xis]


def _weighted_sum(weights: np.ndarray, values: Sequence[float]) -> float:
    return math.fsum(float(w) * v for w, v in zip(weights, values)) / TWO_PI


def energy_on_mesh(
    scene: Scene,
    mesh: QuadratureMesh,
    quad: QuadratureSpec,
    workers: int = 1,
    xi_cut: Optional[float] = None,
) -> Tuple[float, List[Tuple[float, float]]]:
    """Energy (eV) and integrand samples on a fixed mesh.

    ``xi_cut`` overrides the scene's own cutoff so neighbouring scenes share one.
    """
    integrand = _Integrand(scene, quad, workers, xi_cut)
    values = integrand.map([float(x) for x in mesh.xi])
    return _weighted_sum(mesh.weights, values), list(zip(map(float, mesh.xi), values))


def _gauss_legendre(scene: Scene, quad: QuadratureSpec, xi0: float, workers: int) -> EnergyResult:
    integrand = _Integrand(scene, quad, workers)
    mesh = gauss_legendre_mesh(quad.nodes, xi0)
    values = integrand.map([float(x) for x in mesh.xi])
    energy = _weighted_sum(mesh.weights, values)

    coarse = gauss_legendre_mesh(max(quad.nodes // 2, 2), xi0)
    coarse_energy = _weighted_sum(coarse.weights, integrand.map([float(x) for x in coarse.xi]))

    floor = ROUNDING_FLOOR * math.fsum(abs(float(w) * v) for w, v in zip(mesh.weights, values)) / TWO_PI
    return EnergyResult(
        energy=energy,
        quad_error_estimate=max(abs(energy - coarse_energy), floor),
        integrand_samples=list(zip(map(float, mesh.xi), values)),
        node_count=len(mesh),
        mesh=mesh,
        evaluations=integrand.calls,
    )


def _adaptive_simpson(scene: Scene, quad: QuadratureSpec, xi0: float, workers: int) -> EnergyResult:
    """Breadth-first adaptive Simpson on u in [0, 1] with Richardson-corrected panels.

    Every level halves all unresolved panels; the new points of a level are
    evaluated together in a single ordered map.
    """
    integrand = _Integrand(scene, quad, workers)
    cache: Dict[float, float] = {}

    def f_of_u(points: Sequence[float]) -> None:
        fresh = sorted({u for u in points if u not in cache})
        inner = [u for u in fresh if u < 1.0]
        values = integrand.map([xi0 * u / (1.0 - u) for u in inner])
        for u, g in zip(inner, values):
            cache[u] = g * xi0 / (1.0 - u) ** 2
        if 1.0 in fresh:
            # f(u = 1) = 0 for decaying integrands.
            cache[1.0] = 0.0

    open_panels = [(k / 4.0, (k + 1) / 4.0) for k in range(4)]
    accepted: List[Tuple[float, float, float, float]] = []
    total_estimate = 0.0
    for depth in range(quad.max_depth + 1):
        if not open_panels:
            break
        f_of_u([a + (b - a) * k / 4.0 for a, b in open_panels for k in range(5)])
        refined, level_sum = [], 0.0
        results = []
        for a, b in open_panels:
            h = b - a
            fa, f1, fm, f3, fb = (cache[a + h * k / 4.0] for k in range(5))
            coarse = h / 6.0 * (fa + 4.0 * fm + fb)
            fine = h / 12.0 * (fa + 4.0 * f1 + 2.0 * fm + 4.0 * f3 + fb)
            results.append((a, b, fine + (fine - coarse) / 15.0, abs(fine - coarse) / 15.0))
        total_estimate = math.fsum(r[2] for r in results) + math.fsum(p[2] for p in accepted)
        scale = max(abs(total_estimate), 1e-300)
        for a, b, value, err in results:
            if err <= quad.rel_tol * scale * (b - a):
                accepted.append((a, b, value, err))
            else:
                mid = 0.5 * (a + b)
                refined.extend([(a, mid), (mid, b)])
                level_sum += value
        logger.debug(f"adaptive level {depth}: {len(results)} panels, {len(refined) // 2} refined")
        if refined and depth == quad.max_depth:
            partial = math.fsum(p[2] for p in accepted) + level_sum
            raise ConvergenceError(
                f"adaptive quadrature did not reach rel_tol {quad.rel_tol} within depth {quad.max_depth}",
                partial=partial / TWO_PI,
            )
        open_panels = refined

    accepted.sort()
    energy = math.fsum(p[2] for p in accepted) / TWO_PI
    error = math.fsum(p[3] for p in accepted) / TWO_PI

    weights_u: Dict[float, float] = {}
    for a, b, _, _ in accepted:
        h = b - a
        for k in range(5):
            u = a + h * k / 4.0
            weights_u[u] = weights_u.get(u, 0.0) + BOOLE_WEIGHTS[k] * h
    nodes = sorted(u for u in weights_u if u < 1.0)
    mesh = QuadratureMesh(
        xi=np.array([xi0 * u / (1.0 - u) for u in nodes]),
        weights=np.array([weights_u[u] * xi0 / (1.0 - u) ** 2 for u in nodes]),
        xi0=xi0,
    )
    samples = [(xi0 * u / (1.0 - u), cache[u] * (1.0 - u) ** 2 / xi0) for u in nodes]
    return EnergyResult(
        energy=energy,
        quad_error_estimate=error,
        integrand_samples=samples,
        node_count=len(mesh),
        mesh=mesh,
        evaluations=integrand.calls,
    )


def interaction_energy(scene: Scene, quad: Optional[QuadratureSpec] = None, workers: int = 1) -> EnergyResult:
    """Interaction energy U = (1/2 pi) int_0^inf dxi Delta log det (eV; negative attracts)."""
    quad = quad or QuadratureSpec()
    if len(scene.bodies) < 2:
        return EnergyResult(energy=0.0, quad_error_estimate=0.0, integrand_samples=[], node_count=0)
    xi0 = resolve_xi0(scene, quad)
    logger.debug(f"Quadrature {quad.scheme.value}, xi0={xi0:.6g} eV, {scene.n_particles} particles")
    if quad.scheme is QuadratureScheme.ADAPTIVE_SIMPSON:
        result = _adaptive_simpson(scene, quad, xi0, workers)
    else:
        result = _gauss_legendre(scene, quad, xi0, workers)
    logger.debug(f"U = {result.energy:.10e} eV (+/- {result.quad_error_estimate:.2e}, {result.evaluations} evaluations)")
    return result
