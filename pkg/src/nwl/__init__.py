"""Nonlocal dispersive waves: symbols, kernels, traveling waves and symmetry checks."""
__version__ = "0.1.0"
