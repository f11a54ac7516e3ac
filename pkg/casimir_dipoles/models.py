"""Data models shared by the Casimir dipole solver."""

import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .defaults import (
    CSV_COLUMNS,
    DEFAULT_COUPLING_CUTOFF,
    DEFAULT_FD_STEP,
    DEFAULT_MAX_DEPTH,
    DEFAULT_NODES,
    DEFAULT_REL_TOL,
    FD_STEP_BOUNDS,
    HBAR_C_EV_UM,
)
from .errors import CoincidentParticleError, DomainError, OverlapError

Vector = Tuple[float, float, float]


class InteractionMode(Enum):
    RETARDED = "retarded"
    NONRETARDED = "nonretarded"


class QuadratureScheme(Enum):
    GAUSS_LEGENDRE_MAPPED = "gauss_legendre_mapped"
    ADAPTIVE_SIMPSON = "adaptive_simpson"


class SweepParameter(Enum):
    SEPARATION = "separation"
    ANGLE = "angle"


class SeparationKind(Enum):
    SURFACE = "surface"
    CENTER = "center"


@dataclass(frozen=True)
class ImagFrequency:
    """A point w = i*xi on the imaginary frequency axis.

    ``xi`` is a photon energy in eV. ``kappa`` (1/um) is only set in
    retarded mode.
    """
    xi: float
    kappa: Optional[float] = None

    def __post_init__(self):
        if not self.xi >= 0.0:
            raise DomainError(f"imaginary frequency must be >= 0, got {self.xi}")
        if self.kappa is not None:
            if not self.kappa >= 0.0:
                raise DomainError(f"wavenumber must be >= 0, got {self.kappa}")
            expected = self.xi / HBAR_C_EV_UM
            if not math.isclose(self.kappa, expected, rel_tol=1e-9, abs_tol=1e-300):
                raise DomainError(f"kappa {self.kappa} inconsistent with xi {self.xi} eV")

    @classmethod
    def for_mode(cls, xi: float, mode: InteractionMode) -> "ImagFrequency":
        if mode is InteractionMode.RETARDED:
            return cls(xi=xi, kappa=xi / HBAR_C_EV_UM)
        return cls(xi=xi)

    @property
    def wavenumber(self) -> float:
        """kappa, or 0 in non-retarded mode."""
        return 0.0 if self.kappa is None else self.kappa


@dataclass(frozen=True)
class Lattice:
    """Rectangular point lattice centred on the origin."""
    spacings: Vector
    counts: Tuple[int, int, int]
    stretch: Vector = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.spacings) != 3 or len(self.counts) != 3 or len(self.stretch) != 3:
            raise DomainError("lattice spacings, counts and stretch need three entries")
        if min(self.spacings) <= 0 or min(self.stretch) <= 0:
            raise DomainError(f"lattice spacings must be positive: {self.spacings}")
        if min(self.counts) < 1:
            raise DomainError(f"lattice counts must be >= 1: {self.counts}")

    @property
    def effective_spacings(self) -> np.ndarray:
        return np.asarray(self.spacings, dtype=float) * np.asarray(self.stretch, dtype=float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.effective_spacings))

    def sites(self) -> np.ndarray:
        """All lattice sites, shape (n1*n2*n3, 3)."""
        d = self.effective_spacings
        axes = [(np.arange(n) - (n - 1) / 2.0) * d[i] for i, n in enumerate(self.counts)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)


@dataclass(frozen=True)
class Cube:
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise DomainError(f"cube side must be positive: {self.side}")

    @property
    def half_extents(self) -> np.ndarray:
        return np.full(3, self.side / 2.0)

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return np.all(np.abs(points) <= self.half_extents * (1 + tol), axis=1)


@dataclass(frozen=True)
class Box:
    lx: float
    ly: float
    lz: float

    def __post_init__(self):
        if min(self.lx, self.ly, self.lz) <= 0:
            raise DomainError(f"box dimensions must be positive: {(self.lx, self.ly, self.lz)}")

    @property
    def half_extents(self) -> np.ndarray:
        return np.array([self.lx, self.ly, self.lz]) / 2.0

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return np.all(np.abs(points) <= self.half_extents * (1 + tol), axis=1)


@dataclass(frozen=True)
class CircularCylinder:
    """Cylinder with its axis along z."""
    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise DomainError(f"cylinder dimensions must be positive: {(self.radius, self.height)}")

    @property
    def half_extents(self) -> np.ndarray:
        return np.array([self.radius, self.radius, self.height / 2.0])

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        rho2 = points[:, 0] ** 2 + points[:, 1] ** 2
        inside_disc = rho2 <= self.radius ** 2 * (1 + tol)
        inside_height = np.abs(points[:, 2]) <= self.height / 2.0 * (1 + tol)
        return inside_disc & inside_height


def check_no_overlap(
    positions: np.ndarray,
    radii: np.ndarray,
    other_positions: Optional[np.ndarray] = None,
    other_radii: Optional[np.ndarray] = None,
) -> None:
    """Raise OverlapError if any two particles intersect.

    Without ``other_*`` the check runs within one set of particles.
    """
    if other_positions is None:
        if len(positions) < 2:
            return
        tree = cKDTree(positions)
        pairs = tree.query_pairs(r=2.0 * float(radii.max()), output_type="ndarray")
        if len(pairs) == 0:
            return
        i, j = pairs[:, 0], pairs[:, 1]
    else:
        tree = cKDTree(positions)
        other_tree = cKDTree(other_positions)
        reach = float(radii.max()) + float(other_radii.max())
        candidates = tree.query_ball_tree(other_tree, r=reach)
        i = np.fromiter((a for a, hits in enumerate(candidates) for _ in hits), dtype=int)
        j = np.fromiter((b for hits in candidates for b in hits), dtype=int)
        if len(i) == 0:
            return
        radii = np.concatenate([radii, other_radii])
        positions = np.concatenate([positions, other_positions])
        j = j + len(candidates)

    dist = np.linalg.norm(positions[i] - positions[j], axis=1)
    if np.any(dist == 0.0):
        k = int(np.argmin(dist))
        raise CoincidentParticleError(
            f"particles {int(i[k])} and {int(j[k])} coincide",
            context={"pair": (int(i[k]), int(j[k]))},
        )
    clearance = dist - radii[i] - radii[j]
    k = int(np.argmin(clearance))
    if clearance[k] <= 0.0:
        raise OverlapError(
            f"particles {int(i[k])} and {int(j[k])} overlap "
            f"(distance {dist[k]:.6g} um, radii sum {radii[i][k] + radii[j][k]:.6g} um)",
            context={"pair": (int(i[k]), int(j[k])), "clearance_um": float(clearance[k])},
        )


@dataclass(frozen=True, eq=False)
class Body:
    """Rigid cluster of polarizable particles.

    ``positions`` are body-frame coordinates (um); the lab frame position of
    particle p is ``rotation @ p + translation``.
    """
    positions: np.ndarray
    inclusions: Tuple[Any, ...]
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))
        if len(positions) < 1:
            raise DomainError("a body needs at least one particle")
        if len(self.inclusions) != len(positions):
            raise DomainError(
                f"{len(self.inclusions)} inclusions for {len(positions)} particles"
            )
        if not np.all(np.isfinite(positions)):
            raise DomainError("particle positions must be finite")
        check_no_overlap(positions, self.radii)

    @property
    def n_particles(self) -> int:
        return len(self.positions)

    @property
    def radii(self) -> np.ndarray:
        """Bounding radius of every inclusion (um)."""
        return np.array([inc.bounding_radius for inc in self.inclusions])

    def lab_positions(self) -> np.ndarray:
        return self.positions @ self.rotation.T + self.translation

    def lab_inclusions(self) -> List[Any]:
        """Inclusions with their orientation rotated into the lab frame."""
        rotated: Dict[int, Any] = {}
        out = []
        for inc in self.inclusions:
            key = id(inc)
            if key not in rotated:
                rotated[key] = inc.rotated(self.rotation)
            out.append(rotated[key])
        return out

    def centroid(self) -> np.ndarray:
        """Geometric centre in the lab frame."""
        return self.lab_positions().mean(axis=0)

    def scaled(self, factor: float) -> "Body":
        scaled_inc: Dict[int, Any] = {}
        inclusions = []
        for inc in self.inclusions:
            if id(inc) not in scaled_inc:
                scaled_inc[id(inc)] = inc.scaled(factor)
            inclusions.append(scaled_inc[id(inc)])
        return Body(
            positions=self.positions * factor,
            inclusions=tuple(inclusions),
            rotation=self.rotation,
            translation=self.translation * factor,
        )


@dataclass(frozen=True, eq=False)
class Scene:
    """Bodies interacting through the vacuum."""
    bodies: Tuple[Body, ...]
    mode: InteractionMode = InteractionMode.RETARDED

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        if not self.bodies:
            raise DomainError("a scene needs at least one body")
        labs = [b.lab_positions() for b in self.bodies]
        for a in range(len(self.bodies)):
            for b in range(a + 1, len(self.bodies)):
                check_no_overlap(labs[a], self.bodies[a].radii, labs[b], self.bodies[b].radii)

    @property
    def n_particles(self) -> int:
        return sum(b.n_particles for b in self.bodies)

    def lab_positions(self) -> np.ndarray:
        return np.concatenate([b.lab_positions() for b in self.bodies])

    def lab_inclusions(self) -> List[Any]:
        out: List[Any] = []
        for body in self.bodies:
            out.extend(body.lab_inclusions())
        return out

    def radii(self) -> np.ndarray:
        return np.concatenate([b.radii for b in self.bodies])

    def body_slices(self) -> List[slice]:
        """Particle index range of every body."""
        slices, start = [], 0
        for body in self.bodies:
            slices.append(slice(start, start + body.n_particles))
            start += body.n_particles
        return slices

    def min_interbody_distance(self) -> float:
        """Smallest centre-to-centre distance between particles of different bodies."""
        if len(self.bodies) < 2:
            return math.inf
        labs = [b.lab_positions() for b in self.bodies]
        best = math.inf
        for a in range(len(labs)):
            tree = cKDTree(labs[a])
            for b in range(a + 1, len(labs)):
                dist, _ = tree.query(labs[b], k=1)
                best = min(best, float(dist.min()))
        return best

    def with_body(self, index: int, body: Body) -> "Scene":
        bodies = list(self.bodies)
        bodies[index] = body
        return Scene(bodies=tuple(bodies), mode=self.mode)

    def with_mode(self, mode: InteractionMode) -> "Scene":
        return Scene(bodies=self.bodies, mode=mode)

    def scaled(self, factor: float) -> "Scene":
        """Uniformly scale every length by ``factor``."""
        return Scene(bodies=tuple(b.scaled(factor) for b in self.bodies), mode=self.mode)

    def digest(self) -> str:
        """Stable hash of the lab-frame geometry, inclusions and mode."""
        h = hashlib.sha256(self.mode.value.encode())
        h.update(np.ascontiguousarray(self.lab_positions()).tobytes())
        for inc in self.lab_inclusions():
            h.update(repr(inc).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Dense 3N x 3N system matrix; row 3*j + beta is particle j, axis beta."""
    matrix: np.ndarray
    body_slices: Tuple[slice, ...]
    xi: float
    mode: InteractionMode

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def row_slices(self) -> List[slice]:
        return [slice(3 * s.start, 3 * s.stop) for s in self.body_slices]

    def symmetry_error(self) -> float:
        """||M - M^T|| / ||M|| (Frobenius)."""
        norm = np.linalg.norm(self.matrix)
        if norm == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix - self.matrix.T) / norm)


@dataclass(frozen=True)
class QuadratureSpec:
    """How the imaginary-frequency integral is evaluated.

    The semi-infinite axis is mapped with xi = xi0 * u / (1 - u), u in (0, 1).
    ``xi0_ev = None`` selects the default scale for the scene.
    """
    scheme: QuadratureScheme = QuadratureScheme.GAUSS_LEGENDRE_MAPPED
    nodes: int = DEFAULT_NODES
    xi0_ev: Optional[float] = None
    rel_tol: float = DEFAULT_REL_TOL
    max_depth: int = DEFAULT_MAX_DEPTH
    coupling_cutoff: float = DEFAULT_COUPLING_CUTOFF

    def __post_init__(self):
        if self.nodes < 4:
            raise DomainError(f"quadrature needs at least 4 nodes, got {self.nodes}")
        if self.xi0_ev is not None and not self.xi0_ev > 0:
            raise DomainError(f"map scale xi0 must be positive, got {self.xi0_ev}")
        if not 0.0 < self.rel_tol <= 0.1:
            raise DomainError(f"rel_tol must lie in (0, 0.1], got {self.rel_tol}")
        if self.coupling_cutoff <= 0:
            raise DomainError(f"coupling cutoff must be positive, got {self.coupling_cutoff}")

    def with_xi0(self, xi0_ev: float) -> "QuadratureSpec":
        return replace(self, xi0_ev=xi0_ev)

    def describe(self) -> Dict[str, Any]:
        return {
            "scheme": self.scheme.value,
            "nodes": self.nodes,
            "xi0_eV": self.xi0_ev,
            "rel_tol": self.rel_tol,
            "coupling_cutoff": self.coupling_cutoff,
        }


@dataclass(frozen=True, eq=False)
class QuadratureMesh:
    """Fixed nodes (eV) and weights (eV) on the imaginary axis."""
    xi: np.ndarray
    weights: np.ndarray
    xi0: float

    def __len__(self) -> int:
        return len(self.xi)


@dataclass
class EnergyResult:
    """Interaction energy in eV (negative = attraction)."""
    energy: float
    quad_error_estimate: float
    integrand_samples: List[Tuple[float, float]]
    node_count: int
    mesh: Optional[QuadratureMesh] = None
    evaluations: int = 0


@dataclass(frozen=True)
class SweepSpec:
    """Grid of separations (um) or angles (rad) for one moving body."""
    parameter: SweepParameter
    grid: Tuple[float, ...]
    body_index: int = 1
    axis: Vector = (0.0, 0.0, 1.0)
    fd_step: float = DEFAULT_FD_STEP
    separation_kind: SeparationKind = SeparationKind.SURFACE
    derivatives: bool = True

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        object.__setattr__(self, "grid", grid)
        if not grid:
            raise DomainError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("sweep grid must be strictly increasing")
        lo, hi = FD_STEP_BOUNDS
        if not lo <= self.fd_step <= hi:
            raise DomainError(f"fd_step must lie in [{lo}, {hi}], got {self.fd_step}")
        if np.linalg.norm(self.axis) == 0:
            raise DomainError("sweep axis must be non-zero")
        if self.parameter is SweepParameter.SEPARATION and grid[0] <= 0:
            raise DomainError("separations must be positive")

    @property
    def unit_axis(self) -> np.ndarray:
        axis = np.asarray(self.axis, dtype=float)
        return axis / np.linalg.norm(axis)


@dataclass
class SweepRow:
    param: float
    energy: float
    derivative: Optional[float]
    quad_error: float
    node_count: int = 0


@dataclass
class SweepResult:
    """Energies and conjugate forces/torques along a sweep."""
    parameter: SweepParameter
    rows: List[SweepRow] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def columns(self) -> List[str]:
        return CSV_COLUMNS[self.parameter.value]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.param, r.energy, r.derivative, r.quad_error) for r in self.rows],
            columns=self.columns,
        )

    def params(self) -> np.ndarray:
        return np.array([r.param for r in self.rows])

    def derivatives(self) -> np.ndarray:
        return np.array([np.nan if r.derivative is None else r.derivative for r in self.rows])


@dataclass(frozen=True)
class TwoDipoleConfig:
    """Two isotropic particles a centre distance ``r`` (um) apart."""
    alpha1: Any
    alpha2: Any
    r: float
    mode: InteractionMode = InteractionMode.NONRETARDED

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"two-dipole distance must be positive, got {self.r}")
