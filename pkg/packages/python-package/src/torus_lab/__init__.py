"""Desk-scale numerical laboratory for the GUE-perturbed discrete torus."""

__all__ = ["__version__"]

__version__ = "0.1.0"
