"""Galerkin solver for radial N-Laplacian problems with exponential growth."""
__version__ = "0.1.0"
