"""Reference results for two isotropic particles.

Nothing here touches the matrix code: determinants are written out in
closed form and integrals go through scipy's adaptive quadrature.
"""

import logging
import math
from numbers import Real
from typing import Callable, Optional, Tuple, Union

from scipy.integrate import quad

from .defaults import HBAR_C_EV_UM
from .errors import ContactRegimeError, DivergenceError
from .materials import SphereRadiative, SphereStatic, sphere_polarizability
from .models import ImagFrequency, InteractionMode, TwoDipoleConfig

logger = logging.getLogger(__name__)

# Scalar polarizability: a constant (um^3), a sphere model, or alpha(xi_eV).
AlphaLike = Union[float, SphereRadiative, Callable[[float], float]]

QUAD_REL_TOL = 1e-10
QUAD_LIMIT = 500

# Retarded integrands are negligible beyond this many multiples of hbar*c / r.
RETARDED_TAIL = 80.0

# kappa*a at which retarded integrals over radiative spheres stop (perfect-metal
# spheres turn singular near 0.8).
RADIATIVE_EDGE_KA = 0.5


def alpha_at(alpha: AlphaLike, xi: ImagFrequency) -> float:
    """Evaluate a scalar polarizability at ``xi``."""
    if isinstance(alpha, Real):
        return float(alpha)
    if isinstance(alpha, SphereRadiative):
        return sphere_polarizability(alpha, xi)
    return float(alpha(xi.xi))


def _decays(alpha: AlphaLike) -> bool:
    if isinstance(alpha, Real):
        return alpha == 0.0
    if isinstance(alpha, SphereRadiative):
        return alpha.material.decays
    return True


def _scale(alpha: AlphaLike) -> float:
    if isinstance(alpha, SphereRadiative) and alpha.material.resonance_scale:
        return alpha.material.resonance_scale
    return 1.0


def _radiative_limit(alpha: AlphaLike) -> float:
    """Upper xi (eV) keeping a radiative sphere inside its dipole range."""
    if isinstance(alpha, SphereRadiative) and not isinstance(alpha, SphereStatic):
        return RADIATIVE_EDGE_KA * HBAR_C_EV_UM / alpha.radius
    return math.inf


def two_dipole_delta_logdet(cfg: TwoDipoleConfig, xi: Union[float, ImagFrequency]) -> float:
    """log(1 - a1 a2 T_L^2) + 2 log(1 - a1 a2 T_T^2) for two dipoles ``cfg.r`` apart.

    T_L = 2 e^{-kr}(1 + kr)/r^3 and T_T = e^{-kr}(1 + kr + k^2 r^2)/r^3; k = 0
    in non-retarded mode.
    """
    if not isinstance(xi, ImagFrequency):
        xi = ImagFrequency.for_mode(float(xi), cfg.mode)
    product = alpha_at(cfg.alpha1, xi) * alpha_at(cfg.alpha2, xi)
    kr = xi.wavenumber * cfg.r
    decay = math.exp(-kr) / cfg.r ** 3
    longitudinal = 2.0 * decay * (1.0 + kr)
    transverse = decay * (1.0 + kr + kr * kr)
    arg_l = 1.0 - product * longitudinal ** 2
    arg_t = 1.0 - product * transverse ** 2
    if arg_l <= 0.0 or arg_t <= 0.0:
        raise ContactRegimeError(
            f"two-dipole determinant non-positive at r = {cfg.r:g} um",
            xi=xi.xi,
            context={"alpha_product": product},
        )
    return math.log1p(-product * longitudinal ** 2) + 2.0 * math.log1p(-product * transverse ** 2)


def _integrate(func: Callable[[float], float], upper: float, split: float) -> Tuple[float, float]:
    """int_0^upper func, split at ``split`` to help the adaptive rule find the peak."""
    split = min(split, upper)
    head, head_err = quad(func, 0.0, split, epsabs=0.0, epsrel=QUAD_REL_TOL, limit=QUAD_LIMIT)
    if split == upper:
        return head, head_err
    tail, tail_err = quad(func, split, upper, epsabs=0.0, epsrel=QUAD_REL_TOL, limit=QUAD_LIMIT)
    return head + tail, head_err + tail_err


def london_c6(alpha1: AlphaLike, alpha2: AlphaLike, cutoff: Optional[float] = None) -> float:
    """C6 = (3/pi) int_0^inf alpha1(i xi) alpha2(i xi) dxi (eV um^6), static kernel.

    Non-decaying polarizabilities (constants, perfect metal) need ``cutoff``
    (eV) as the upper integration limit.
    """
    if cutoff is None and not (_decays(alpha1) or _decays(alpha2)):
        raise DivergenceError("C6 integrand does not decay; supply a frequency cutoff")

    def integrand(xi: float) -> float:
        point = ImagFrequency(xi)
        return alpha_at(alpha1, point) * alpha_at(alpha2, point)

    upper = math.inf if cutoff is None else cutoff
    value, err = _integrate(integrand, upper, max(_scale(alpha1), _scale(alpha2)))
    logger.debug(f"C6 integral {value:.12e} (+/- {err:.1e})")
    return 3.0 / math.pi * value


def london_u(alpha1: AlphaLike, alpha2: AlphaLike, r: float, cutoff: Optional[float] = None) -> float:
    """Non-retarded pair energy -C6 / r^6 (eV)."""
    return -london_c6(alpha1, alpha2, cutoff) / r ** 6


def casimir_polder_u(alpha1_static: float, alpha2_static: float, r: float) -> float:
    """Retarded far-field pair energy -23 hbar c a1 a2 / (4 pi r^7) (eV)."""
    return -23.0 * HBAR_C_EV_UM * alpha1_static * alpha2_static / (4.0 * math.pi * r ** 7)


def two_dipole_energy(cfg: TwoDipoleConfig, cutoff: Optional[float] = None) -> float:
    """(1/2 pi) int_0^inf two_dipole_delta_logdet dxi (eV), adaptive quadrature."""
    scale = HBAR_C_EV_UM / cfg.r
    if cutoff is not None:
        upper = cutoff
    elif cfg.mode is InteractionMode.RETARDED:
        upper = min(RETARDED_TAIL * scale, _radiative_limit(cfg.alpha1), _radiative_limit(cfg.alpha2))
    elif _decays(cfg.alpha1) or _decays(cfg.alpha2):
        upper = math.inf
    else:
        raise DivergenceError("two-dipole integrand does not decay; supply a frequency cutoff")

    split = scale if cfg.mode is InteractionMode.RETARDED else max(_scale(cfg.alpha1), _scale(cfg.alpha2))
    value, err = _integrate(lambda xi: two_dipole_delta_logdet(cfg, xi), upper, split)
    logger.debug(f"two-dipole energy integral {value:.12e} (+/- {err:.1e})")
    return value / (2.0 * math.pi)
