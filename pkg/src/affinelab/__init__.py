"""Equiaffine hypersurface laboratory: Blaschke invariants, curvature and
semi-parallel cubic form checks for parametrized hypersurfaces."""

__version__ = "0.1.0"
