"""Dielectric functions on the imaginary axis and particle polarizabilities.

All arithmetic is real: at w = i*xi every response function below is real
and, for passive materials, eps(i*xi) >= 1 decays monotonically to 1.
"""

import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import elliprd

from .defaults import DEPOLARIZATION_SUM_TOL, RADIATIVE_KA_LIMIT
from .errors import (
    ConfigError,
    DomainError,
    SingularPolarizabilityError,
    TabulatedDataError,
)
from .models import ImagFrequency

logger = logging.getLogger(__name__)

# Marker returned by the perfect metal; only polarizabilities consume it.
PERFECT_METAL_EPS = math.inf


class DielectricModel(ABC):
    """eps(i*xi) evaluator, xi as photon energy in eV."""

    name: str = ""

    @abstractmethod
    def epsilon(self, xi: float) -> float:
        """Dielectric function at xi > 0."""

    def static_limit(self) -> float:
        """Limit of eps(i*xi) for xi -> 0+."""
        return self.epsilon(0.0)

    def response(self, xi: float) -> float:
        """eps at xi, using the static limit at xi = 0."""
        if xi == 0.0:
            return self.static_limit()
        return self.epsilon(xi)

    @property
    def resonance_scale(self) -> Optional[float]:
        """Characteristic frequency (eV) of the response, if any."""
        return None

    @property
    def decays(self) -> bool:
        """True when eps(i*xi) -> 1 as xi -> infinity."""
        return False


@dataclass(frozen=True)
class Drude(DielectricModel):
    plasma_energy: float
    damping: float
    name: str = "drude"

    def __post_init__(self):
        if self.plasma_energy <= 0 or self.damping < 0:
            raise DomainError(
                f"Drude needs plasma energy > 0 and damping >= 0, "
                f"got ({self.plasma_energy}, {self.damping})"
            )

    def epsilon(self, xi: float) -> float:
        if xi <= 0.0:
            raise DomainError("Drude permittivity diverges at xi = 0", xi=xi)
        return 1.0 + self.plasma_energy ** 2 / (xi * (xi + self.damping))

    def static_limit(self) -> float:
        return PERFECT_METAL_EPS

    @property
    def resonance_scale(self) -> Optional[float]:
        # sphere surface plasmon
        return self.plasma_energy / math.sqrt(3.0)

    @property
    def decays(self) -> bool:
        return True


@dataclass(frozen=True)
class Lorentz(DielectricModel):
    """Sum of oscillators (strength eV^2, resonance eV, damping eV)."""
    oscillators: Tuple[Tuple[float, float, float], ...]
    name: str = "lorentz"

    def __post_init__(self):
        object.__setattr__(self, "oscillators", tuple(tuple(map(float, o)) for o in self.oscillators))
        for strength, resonance, damping in self.oscillators:
            if strength < 0 or resonance < 0 or damping < 0:
                raise DomainError(f"invalid Lorentz oscillator {(strength, resonance, damping)}")
            if resonance == 0 and damping == 0:
                raise DomainError("Lorentz oscillator needs a resonance or a damping")

    def epsilon(self, xi: float) -> float:
        if xi < 0.0:
            raise DomainError("imaginary frequency must be >= 0", xi=xi)
        total = 0.0
        for strength, resonance, damping in self.oscillators:
            denominator = resonance ** 2 + xi ** 2 + damping * xi
            if denominator == 0.0:
                return PERFECT_METAL_EPS
            total += strength / denominator
        return 1.0 + total

    @property
    def resonance_scale(self) -> Optional[float]:
        scales = [math.sqrt(w ** 2 + s / 3.0) for s, w, _ in self.oscillators]
        return max(scales) if scales else None

    @property
    def decays(self) -> bool:
        return True


@dataclass(frozen=True)
class ConstantDielectric(DielectricModel):
    eps: float
    name: str = "constant"

    def __post_init__(self):
        if not self.eps >= 1.0:
            raise DomainError(f"constant permittivity must be >= 1, got {self.eps}")

    def epsilon(self, xi: float) -> float:
        return self.eps

    @property
    def decays(self) -> bool:
        return self.eps == 1.0


@dataclass(frozen=True)
class PerfectMetal(DielectricModel):
    name: str = "perfect_metal"

    def epsilon(self, xi: float) -> float:
        return PERFECT_METAL_EPS


@dataclass(frozen=True)
class Tabulated(DielectricModel):
    """eps(i*xi) samples, interpolated linearly in log(xi)-log(eps).

    Piecewise-linear interpolation of monotone data stays monotone; queries
    outside the table are clamped to the end values.
    """
    xi_values: Tuple[float, ...]
    eps_values: Tuple[float, ...]
    name: str = "tabulated"

    def __post_init__(self):
        xs = np.asarray(self.xi_values, dtype=float)
        es = np.asarray(self.eps_values, dtype=float)
        problems = []
        if len(xs) < 2 or len(xs) != len(es):
            problems.append("need at least two (xi, eps) rows of equal length")
        else:
            if np.any(xs <= 0):
                problems.append("xi values must be positive")
            if np.any(np.diff(xs) <= 0):
                problems.append("xi values must be strictly increasing")
            if np.any(es < 1.0):
                problems.append("eps values must be >= 1")
            if np.any(np.diff(es) > 0):
                problems.append("eps must be non-increasing in xi")
        if problems:
            raise TabulatedDataError(f"invalid tabulated data '{self.name}'", problems)
        object.__setattr__(self, "xi_values", tuple(xs))
        object.__setattr__(self, "eps_values", tuple(es))

    @classmethod
    def from_csv(cls, path: Union[str, Path], name: Optional[str] = None) -> "Tabulated":
        """Load a two-column CSV with header ``xi_eV,eps``."""
        try:
            frame = pd.read_csv(path)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise TabulatedDataError(f"could not read dielectric table {path}", [str(e)]) from e
        missing = [c for c in ("xi_eV", "eps") if c not in frame.columns]
        if missing:
            raise TabulatedDataError(
                f"dielectric table {path} lacks header columns",
                [f"missing column '{c}'" for c in missing],
            )
        logger.debug(f"Loaded {len(frame)} dielectric samples from {path}")
        return cls(
            xi_values=tuple(frame["xi_eV"].astype(float)),
            eps_values=tuple(frame["eps"].astype(float)),
            name=name or Path(path).stem,
        )

    def epsilon(self, xi: float) -> float:
        if xi < 0.0:
            raise DomainError("imaginary frequency must be >= 0", xi=xi)
        if xi <= self.xi_values[0]:
            return self.eps_values[0]
        if xi >= self.xi_values[-1]:
            return self.eps_values[-1]
        log_eps = np.interp(math.log(xi), np.log(self.xi_values), np.log(self.eps_values))
        return float(math.exp(log_eps))

    @property
    def resonance_scale(self) -> Optional[float]:
        return float(np.median(self.xi_values))

    @property
    def decays(self) -> bool:
        return self.eps_values[-1] <= 1.0 + 1e-9


@dataclass(frozen=True)
class MaxwellGarnett(DielectricModel):
    """Effective medium of spherical inclusions at volume fraction ``fill``."""
    inclusion: DielectricModel
    host: DielectricModel
    fill: float
    name: str = "maxwell_garnett"

    def __post_init__(self):
        if not 0.0 <= self.fill <= 1.0:
            raise DomainError(f"filling fraction must lie in [0, 1], got {self.fill}")

    def _mix(self, eps_i: float, eps_h: float) -> float:
        if math.isinf(eps_h):
            return PERFECT_METAL_EPS
        if self.fill == 0.0:
            return eps_h
        eta = 1.0 if math.isinf(eps_i) else (eps_i - eps_h) / (eps_i + 2.0 * eps_h)
        denominator = 1.0 - self.fill * eta
        if denominator <= 0.0:
            return PERFECT_METAL_EPS
        return eps_h * (1.0 + 3.0 * self.fill * eta / denominator)

    def epsilon(self, xi: float) -> float:
        return self._mix(self.inclusion.epsilon(xi), self.host.epsilon(xi))

    def static_limit(self) -> float:
        return self._mix(self.inclusion.static_limit(), self.host.static_limit())

    @property
    def resonance_scale(self) -> Optional[float]:
        return self.inclusion.resonance_scale or self.host.resonance_scale

    @property
    def decays(self) -> bool:
        return self.inclusion.decays and self.host.decays


VACUUM = ConstantDielectric(1.0, name="vacuum")


def eval_epsilon(model: DielectricModel, xi: ImagFrequency) -> float:
    """eps(i*xi) for a dielectric model."""
    return model.epsilon(xi.xi)


def effective_medium(
    inclusion: DielectricModel,
    fill: float,
    host: Optional[DielectricModel] = None,
) -> MaxwellGarnett:
    """Maxwell-Garnett composite of ``inclusion`` spheres in ``host`` (vacuum by default)."""
    return MaxwellGarnett(inclusion=inclusion, host=host or VACUUM, fill=fill)


def material_from_dict(data: Dict[str, Any], name: str = "", base_dir: Optional[Path] = None) -> DielectricModel:
    """Build a dielectric model from a material block (library or config)."""
    kind = data.get("kind")
    label = name or str(kind)
    if kind == "drude":
        return Drude(float(data["plasma_eV"]), float(data["damping_eV"]), name=label)
    if kind == "lorentz":
        oscillators = tuple(
            (float(o["strength_eV2"]), float(o["resonance_eV"]), float(o.get("damping_eV", 0.0)))
            for o in data["oscillators"]
        )
        return Lorentz(oscillators, name=label)
    if kind == "constant":
        return ConstantDielectric(float(data["eps"]), name=label)
    if kind == "perfect_metal":
        return PerfectMetal(name=label)
    if kind == "tabulated" and data.get("points"):
        points = [tuple(map(float, p)) for p in data["points"]]
        return Tabulated(tuple(p[0] for p in points), tuple(p[1] for p in points), name=label)
    if kind == "tabulated":
        path = Path(data["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return Tabulated.from_csv(path, name=label)
    if kind == "maxwell_garnett":
        return MaxwellGarnett(
            inclusion=resolve_material(data["inclusion"], base_dir),
            host=resolve_material(data.get("host", "vacuum"), base_dir),
            fill=float(data["fill"]),
            name=label,
        )
    raise ConfigError(f"unknown material kind '{kind}'")


@lru_cache(maxsize=1)
def _library_data() -> Dict[str, Dict[str, Any]]:
    text = resources.files("casimir_dipoles.data").joinpath("materials.json").read_text()
    return json.loads(text)


def material(name: str) -> DielectricModel:
    """Library material by name (gold, aluminum, perfect_metal, silicon, polystyrene)."""
    if name == "vacuum":
        return VACUUM
    library = _library_data()
    if name not in library:
        raise ConfigError(
            f"unknown material '{name}'",
            [f"known materials: {', '.join(sorted(library))}"],
        )
    return material_from_dict(library[name], name=name)


def resolve_material(spec: Union[str, Dict[str, Any], DielectricModel], base_dir: Optional[Path] = None) -> DielectricModel:
    if isinstance(spec, DielectricModel):
        return spec
    if isinstance(spec, str):
        return material(spec)
    return material_from_dict(spec, name=spec.get("name", ""), base_dir=base_dir)


# --- polarizabilities -------------------------------------------------------

def _rotation_tuple(rotation: np.ndarray) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in row) for row in np.asarray(rotation, dtype=float))


@dataclass(frozen=True)
class SphereRadiative:
    """Sphere with radiative corrections (kappa from the frequency)."""
    radius: float
    material: DielectricModel

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"sphere radius must be positive, got {self.radius}")

    @property
    def bounding_radius(self) -> float:
        return self.radius

    @property
    def volume(self) -> float:
        return 4.0 * math.pi / 3.0 * self.radius ** 3

    def scaled(self, factor: float) -> "SphereRadiative":
        return replace(self, radius=self.radius * factor)

    def rotated(self, rotation: np.ndarray) -> "SphereRadiative":
        return self


@dataclass(frozen=True)
class SphereStatic(SphereRadiative):
    """Clausius-Mossotti sphere; kappa is ignored."""


@dataclass(frozen=True)
class SpheroidStatic:
    """Ellipsoid with semi-axes along the columns of ``orientation``."""
    semi_axes: Tuple[float, float, float]
    material: DielectricModel
    orientation: Tuple[Tuple[float, ...], ...] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        object.__setattr__(self, "orientation", _rotation_tuple(self.orientation))
        if len(self.semi_axes) != 3 or min(self.semi_axes) <= 0:
            raise DomainError(f"spheroid semi-axes must be three positive lengths, got {self.semi_axes}")
        rotation = np.asarray(self.orientation)
        if not np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-10) or np.linalg.det(rotation) <= 0:
            raise DomainError("spheroid orientation must be a proper rotation")

    @property
    def bounding_radius(self) -> float:
        return max(self.semi_axes)

    @property
    def volume(self) -> float:
        a1, a2, a3 = self.semi_axes
        return 4.0 * math.pi / 3.0 * a1 * a2 * a3

    def scaled(self, factor: float) -> "SpheroidStatic":
        return replace(self, semi_axes=tuple(a * factor for a in self.semi_axes))

    def rotated(self, rotation: np.ndarray) -> "SpheroidStatic":
        return replace(self, orientation=_rotation_tuple(np.asarray(rotation) @ np.asarray(self.orientation)))


PolarizabilityModel = Union[SphereRadiative, SphereStatic, SpheroidStatic]


def sphere_polarizability(model: SphereRadiative, xi: ImagFrequency) -> float:
    """Scalar polarizability (um^3) of a sphere at w = i*xi.

    At q = i*kappa the radiative correction 1 + (qa)^2 - 2i(qa)^3/3 becomes
    1 - (kappa a)^2 - 2(kappa a)^3/3, so the result is real.
    """
    a = model.radius
    ka = 0.0 if isinstance(model, SphereStatic) else xi.wavenumber * a
    if ka >= RADIATIVE_KA_LIMIT:
        raise SingularPolarizabilityError(
            f"kappa*a = {ka:.4g} outside the dipole range (< {RADIATIVE_KA_LIMIT:g})",
            xi=xi.xi,
            kappa_a=ka,
        )
    correction = 1.0 - ka ** 2 - (2.0 / 3.0) * ka ** 3
    eps = model.material.response(xi.xi)
    if math.isinf(eps):
        numerator, denominator = 1.0, correction
    else:
        numerator = eps - 1.0
        denominator = 3.0 + numerator * correction
    if denominator <= 0.0:
        raise SingularPolarizabilityError(
            f"polarizability denominator {denominator:.4g} <= 0 at kappa*a = {ka:.4g}",
            xi=xi.xi,
            kappa_a=ka,
        )
    return a ** 3 * numerator / denominator


def depolarization_factors(semi_axes: Tuple[float, float, float]) -> np.ndarray:
    """Depolarization factors L_i of an ellipsoid, via Carlson's R_D.

    L_i = (a1 a2 a3 / 3) R_D(a_j^2, a_k^2, a_i^2); a sphere gives 1/3 each.
    """
    a = np.asarray(semi_axes, dtype=float)
    sq = a ** 2
    prefactor = a.prod() / 3.0
    factors = np.array([
        prefactor * elliprd(sq[(i + 1) % 3], sq[(i + 2) % 3], sq[i]) for i in range(3)
    ])
    if abs(factors.sum() - 1.0) > DEPOLARIZATION_SUM_TOL:
        raise DomainError(f"depolarization factors sum to {factors.sum():.15g}, not 1")
    return factors


def spheroid_polarizability(model: SpheroidStatic, xi: ImagFrequency) -> np.ndarray:
    """Static ellipsoid polarizability tensor (um^3) in the lab frame.

    alpha_i = (a1 a2 a3 / 3) (eps - 1) / (1 + L_i (eps - 1)); the sphere limit
    is the Clausius-Mossotti value a^3 (eps - 1) / (eps + 2).
    """
    factors = depolarization_factors(model.semi_axes)
    third_volume = float(np.prod(model.semi_axes)) / 3.0
    eps = model.material.response(xi.xi)
    if math.isinf(eps):
        principal = third_volume / factors
    else:
        chi = eps - 1.0
        principal = third_volume * chi / (1.0 + factors * chi)
    rotation = np.asarray(model.orientation)
    tensor = rotation @ np.diag(principal) @ rotation.T
    return 0.5 * (tensor + tensor.T)


def polarizability_tensor(model: PolarizabilityModel, xi: ImagFrequency) -> np.ndarray:
    if isinstance(model, SpheroidStatic):
        return spheroid_polarizability(model, xi)
    return sphere_polarizability(model, xi) * np.eye(3)


def inverse_polarizability(model: PolarizabilityModel, xi: ImagFrequency) -> np.ndarray:
    """3x3 inverse polarizability (1/um^3), the diagonal block of the system matrix."""
    if isinstance(model, SpheroidStatic):
        tensor = spheroid_polarizability(model, xi)
        if np.min(np.linalg.eigvalsh(tensor)) <= 0.0:
            raise SingularPolarizabilityError("spheroid polarizability is not positive", xi=xi.xi)
        return np.linalg.inv(tensor)
    alpha = sphere_polarizability(model, xi)
    if alpha <= 0.0:
        raise SingularPolarizabilityError(
            f"sphere polarizability {alpha:.4g} is not positive", xi=xi.xi, kappa_a=xi.wavenumber * model.radius
        )
    return np.eye(3) / alpha
