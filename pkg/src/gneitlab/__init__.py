"""Simulation and verification of functionals of Gneiting-class random fields."""

__version__ = "0.1.0"

from .errors import GneitlabError  # noqa: E402

__all__ = ["GneitlabError", "__version__"]
