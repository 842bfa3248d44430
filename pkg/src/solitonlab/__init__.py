"""Curvature, pseudo-symmetry and soliton checks for Riemannian 3-manifolds given in a chart."""

__version__ = "0.1.0"
