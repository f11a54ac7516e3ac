"""Exception hierarchy for the Casimir dipole solver."""

from typing import Any, Dict, List, Optional


class CasimirError(Exception):
    """Base class for all solver errors."""

    exit_code = 1

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context or {})

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable form written to the run manifest."""
        return {
            "type": type(self).__name__,
            "message": self.message,
            "context": self.context,
        }


class ConfigError(CasimirError):
    """Scenario configuration could not be validated."""

    exit_code = 2

    def __init__(self, message: str, violations: Optional[List[str]] = None):
        super().__init__(message, {"violations": list(violations or [])})
        self.violations = list(violations or [])

    def __str__(self) -> str:
        if not self.violations:
            return self.message
        lines = "\n".join(f"  - {v}" for v in self.violations)
        return f"{self.message}\n{lines}"


class UnknownPresetError(ConfigError):
    pass


class TabulatedDataError(ConfigError):
    """Tabulated dielectric data failed load-time validation."""


class NumericalError(CasimirError):
    """Failure inside the numerical pipeline.

    ``xi`` is the imaginary-axis frequency (eV) of the quadrature node being
    evaluated, when known.
    """

    exit_code = 3

    def __init__(
        self,
        message: str,
        xi: Optional[float] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, context)
        self.xi = xi

    def at_node(self, xi: float) -> "NumericalError":
        """Attach the offending frequency if none is recorded yet."""
        if self.xi is None:
            self.xi = xi
        return self

    def __str__(self) -> str:
        if self.xi is None:
            return self.message
        return f"{self.message} (xi = {self.xi:.6g} eV)"

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record["xi"] = self.xi
        return record


class DomainError(NumericalError):
    pass


class SingularPolarizabilityError(NumericalError):
    """The dipole polarizability is singular or outside its validity range."""

    def __init__(self, message: str, xi: Optional[float] = None, kappa_a: Optional[float] = None):
        super().__init__(message, xi, {"kappa_a": kappa_a})
        self.kappa_a = kappa_a


class CoincidentParticleError(NumericalError):
    pass


class OverlapError(NumericalError):
    pass


class EmptyClusterError(NumericalError):
    pass


class PivotSignError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """Quadrature did not reach the requested tolerance.

    ``partial`` holds the energy (eV) summed over the panels reached so far.
    """

    def __init__(self, message: str, partial: Any = None, xi: Optional[float] = None):
        super().__init__(message, xi)
        self.partial = partial


class StencilError(NumericalError):
    """A finite-difference stencil point produced an invalid scene."""

    def __init__(self, message: str, point: float):
        super().__init__(message, context={"point": point})
        self.point = point


class NonPowerLawError(NumericalError):
    pass


class ContactRegimeError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass
