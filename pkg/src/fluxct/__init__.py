"""Flux-weighted polychromatic CT simulation, enhancement and complexity analysis."""

__version__ = "0.1.0"
