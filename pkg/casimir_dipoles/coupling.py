"""System matrix M(i xi) = diag(1/alpha) + A for a scene of point dipoles."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from .defaults import ROW_BLOCK, SYMMETRY_TOL
from .errors import CoincidentParticleError, NumericalError, OverlapError
from .materials import PolarizabilityModel, inverse_polarizability
from .models import CouplingMatrix, ImagFrequency, InteractionMode, Scene

logger = logging.getLogger(__name__)


def _kernel_eigenvalues(r: np.ndarray, kappa: float):
    """Transverse and longitudinal eigenvalues of the kernel at q = i*kappa."""
    kr = kappa * r
    decay = np.exp(-kr) / r ** 3
    transverse = decay * (1.0 + kr + kr ** 2)
    longitudinal = -2.0 * decay * (1.0 + kr)
    return transverse, longitudinal


def dipole_tensor(r_jk: Sequence[float], kappa: float) -> np.ndarray:
    """3x3 interaction tensor (1/um^3) between dipoles separated by ``r_jk``.

    ``kappa`` = 0 gives the static kernel (I - 3 u u^T) / r^3.
    """
    vec = np.asarray(r_jk, dtype=float)
    r = float(np.linalg.norm(vec))
    if r == 0.0:
        raise CoincidentParticleError("dipole tensor undefined for coincident particles")
    unit = vec / r
    transverse, longitudinal = _kernel_eigenvalues(np.float64(r), kappa)
    return transverse * np.eye(3) + (longitudinal - transverse) * np.outer(unit, unit)


def _inverse_blocks(inclusions: List[PolarizabilityModel], xi: ImagFrequency) -> np.ndarray:
    """Inverse polarizability of every particle, shape (N, 3, 3)."""
    cache: Dict[int, np.ndarray] = {}
    blocks = np.empty((len(inclusions), 3, 3))
    for p, inc in enumerate(inclusions):
        key = id(inc)
        if key not in cache:
            inv = inverse_polarizability(inc, xi)
            cache[key] = 0.5 * (inv + inv.T)
        blocks[p] = cache[key]
    return blocks


def _fill_row_block(
    out: np.ndarray,
    positions: np.ndarray,
    radii: np.ndarray,
    start: int,
    stop: int,
    kappa: float,
) -> None:
    """Write the strict upper triangle of rows [start, stop) into ``out``."""
    rows = positions[start:stop]
    cols = positions[start:]
    diff = rows[:, None, :] - cols[None, :, :]
    r = np.linalg.norm(diff, axis=2)

    ii = np.arange(start, stop)[:, None]
    jj = np.arange(start, len(positions))[None, :]
    upper = jj > ii

    if np.any(upper & (r == 0.0)):
        i, j = np.argwhere(upper & (r == 0.0))[0]
        raise CoincidentParticleError(
            f"particles {start + i} and {start + j} coincide",
            context={"pair": (int(start + i), int(start + j))},
        )
    clearance = r - radii[start:stop, None] - radii[None, start:]
    if np.any(upper & (clearance <= 0.0)):
        i, j = np.argwhere(upper & (clearance <= 0.0))[0]
        raise OverlapError(
            f"particles {start + i} and {start + j} overlap",
            context={"pair": (int(start + i), int(start + j))},
        )

    safe_r = np.where(upper, r, 1.0)
    unit = diff / safe_r[..., None]
    transverse, longitudinal = _kernel_eigenvalues(safe_r, kappa)
    transverse = np.where(upper, transverse, 0.0)
    longitudinal = np.where(upper, longitudinal, 0.0)

    tensors = (longitudinal - transverse)[..., None, None] * unit[..., :, None] * unit[..., None, :]
    tensors[..., 0, 0] += transverse
    tensors[..., 1, 1] += transverse
    tensors[..., 2, 2] += transverse

    n_rows, n_cols = tensors.shape[:2]
    out[3 * start:3 * stop, 3 * start:] = tensors.transpose(0, 2, 1, 3).reshape(3 * n_rows, 3 * n_cols)


def _interaction_matrix(
    positions: np.ndarray,
    radii: np.ndarray,
    kappa: float,
    workers: int = 1,
) -> np.ndarray:
    """Full symmetric A with zero diagonal blocks, built from the upper triangle."""
    n = len(positions)
    upper = np.zeros((3 * n, 3 * n))
    starts = list(range(0, n, ROW_BLOCK))

    def fill(start: int) -> None:
        _fill_row_block(upper, positions, radii, start, min(start + ROW_BLOCK, n), kappa)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    return upper + upper.T


def assemble(scene: Scene, xi: ImagFrequency, workers: int = 1) -> CouplingMatrix:
    """Coupled system matrix of the scene at ``xi`` in the lab frame."""
    try:
        blocks = _inverse_blocks(scene.lab_inclusions(), xi)
        matrix = _interaction_matrix(scene.lab_positions(), scene.radii(), xi.wavenumber, workers)
    except NumericalError as exc:
        raise exc.at_node(xi.xi)

    for p in range(len(blocks)):
        matrix[3 * p:3 * p + 3, 3 * p:3 * p + 3] = blocks[p]

    result = CouplingMatrix(
        matrix=matrix,
        body_slices=tuple(scene.body_slices()),
        xi=xi.xi,
        mode=scene.mode,
    )
    if logger.isEnabledFor(logging.DEBUG):
        asymmetry = result.symmetry_error()
        logger.debug(f"Assembled {result.dim}x{result.dim} at xi={xi.xi:.6g} eV, asymmetry {asymmetry:.2e}")
        assert asymmetry <= SYMMETRY_TOL, f"system matrix asymmetry {asymmetry:.3e}"
    return result


def decouple(coupled: CouplingMatrix) -> CouplingMatrix:
    """Copy of ``coupled`` with every inter-body block set to zero."""
    matrix = np.zeros_like(coupled.matrix)
    for rows in coupled.row_slices():
        matrix[rows, rows] = coupled.matrix[rows, rows]
    return CouplingMatrix(matrix=matrix, body_slices=coupled.body_slices, xi=coupled.xi, mode=coupled.mode)


def assemble_decoupled(scene: Scene, xi: ImagFrequency, workers: int = 1) -> CouplingMatrix:
    """Block-diagonal system matrix: bodies keep their internal coupling only."""
    return decouple(assemble(scene, xi, workers))


def off_diagonal_ratio(coupled: CouplingMatrix) -> float:
    """||A|| / ||diag blocks|| (Frobenius); tends to 0 as xi grows in retarded mode."""
    diagonal = np.zeros_like(coupled.matrix)
    for p in range(coupled.dim // 3):
        diagonal[3 * p:3 * p + 3, 3 * p:3 * p + 3] = coupled.matrix[3 * p:3 * p + 3, 3 * p:3 * p + 3]
    return float(np.linalg.norm(coupled.matrix - diagonal) / np.linalg.norm(diagonal))


def mode_flag(coupled: CouplingMatrix) -> int:
    """Mode flag written to matrix dumps: 1 retarded, 0 non-retarded."""
    return 1 if coupled.mode is InteractionMode.RETARDED else 0


def body_block(coupled: CouplingMatrix, index: int, other: Optional[int] = None) -> np.ndarray:
    """Rows of body ``index`` against columns of body ``other`` (default: itself)."""
    rows = coupled.row_slices()
    return coupled.matrix[rows[index], rows[index if other is None else other]]
