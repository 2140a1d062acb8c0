"""Optimizers for the geodesic centroidal Voronoi energy."""
from .lloyd import CENTROID_METHODS, lloyd_run
from .matching import min_weight_matching
from .mde import MdeConfig, mde_run
