"""Content-sensitive superpixels and supervoxels."""
from .grid import StretchedGrid, default_lambdas, stretch_image, stretch_image_corners, stretch_video
from .metrics import segmentation_metrics, temporal_boundary_fraction
from .superpixels import LabelMap, enforce_connectivity, imslic_lloyd, rcvt_lloyd
