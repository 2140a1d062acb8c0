"""Geodesic centroidal Voronoi tessellations on meshes and image manifolds."""

__version__ = "0.1.0"
