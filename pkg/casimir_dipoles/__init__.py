"""Casimir Dipoles - van der Waals and Casimir interactions between clusters of polarizable particles."""

__version__ = "0.1.0"

from .main import run  # noqa: E402
from .spectrum import interaction_energy  # noqa: E402

__all__ = ["run", "interaction_energy"]
