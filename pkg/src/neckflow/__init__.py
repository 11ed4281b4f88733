"""Geodesic flow through thin necks degenerating to a cusp."""
__version__ = "0.1.0"
