"""Quantitative checks for superpixel and supervoxel label maps."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import distance_transform_edt
from skimage.measure import label as connected_label


def label_boundaries(labels: np.ndarray) -> np.ndarray:
    """Samples with a 4- (6-) neighbor of a different label."""
    labels = np.asarray(labels)
    out = np.zeros(labels.shape, dtype=bool)
    for ax in range(labels.ndim):
        n = labels.shape[ax]
        a = np.take(labels, np.arange(n - 1), axis=ax)
        b = np.take(labels, np.arange(1, n), axis=ax)
        diff = a != b
        lo = [slice(None)] * labels.ndim
        hi = [slice(None)] * labels.ndim
        lo[ax] = slice(0, n - 1)
        hi[ax] = slice(1, n)
        out[tuple(lo)] |= diff
        out[tuple(hi)] |= diff
    return out


def regions_from_boundaries(boundaries: np.ndarray) -> np.ndarray:
    """Ground-truth regions: connected non-boundary components, with each
    boundary sample given to its nearest component."""
    boundaries = np.asarray(boundaries, dtype=bool)
    comp = connected_label(~boundaries, background=0, connectivity=1)
    if comp.max() == 0:
        return np.zeros(boundaries.shape, dtype=np.int64)
    _, idx = distance_transform_edt(comp == 0, return_indices=True)
    return comp[tuple(idx)].astype(np.int64) - 1


def boundary_recall(labels, gt_boundaries, tolerance: float = 2.0) -> float:
    """Fraction of ground-truth boundary samples within ``tolerance`` of a
    predicted boundary sample."""
    gt = np.asarray(gt_boundaries, dtype=bool)
    if not gt.any():
        return 1.0
    pred = label_boundaries(labels)
    if not pred.any():
        return 0.0
    dt = distance_transform_edt(~pred)
    return float((dt[gt] <= tolerance).mean())


def undersegmentation_error(labels, gt_regions) -> float:
    """Leakage of regions across ground-truth segments.

    For every pair of predicted region ``s`` and ground-truth segment ``g``
    that overlap, counts ``min(|s & g|, |s - g|)``, normalized by the sample
    count.
    """
    labels = np.asarray(labels).ravel()
    gt = np.asarray(gt_regions).ravel()
    nl = int(labels.max()) + 1
    ng = int(gt.max()) + 1
    overlap = np.bincount(labels * ng + gt, minlength=nl * ng).reshape(nl, ng)
    size = overlap.sum(1, keepdims=True)
    leak = np.minimum(overlap, size - overlap)
    return float(leak[overlap > 0].sum() / labels.size)


def size_cv(labels) -> float:
    """Coefficient of variation of region sizes."""
    sizes = np.bincount(np.asarray(labels).ravel())
    sizes = sizes[sizes > 0]
    return float(sizes.std() / sizes.mean())


def segmentation_metrics(labels, ground_truth_boundaries, tolerance: float = 2.0) -> dict:
    """Boundary recall, undersegmentation error and region size CV."""
    labels = np.asarray(getattr(labels, "labels", labels))
    gt = np.asarray(ground_truth_boundaries, dtype=bool)
    if labels.shape != gt.shape:
        raise ValueError(f"label map {labels.shape} and ground truth {gt.shape} differ in shape")
    return {
        "boundary_recall": boundary_recall(labels, gt, tolerance),
        "underseg_error": undersegmentation_error(labels, regions_from_boundaries(gt)),
        "size_cv": size_cv(labels),
    }


def temporal_boundary_fraction(labels) -> float:
    """Fraction of temporally adjacent voxel pairs with different labels."""
    labels = np.asarray(getattr(labels, "labels", labels))
    if labels.ndim != 3 or labels.shape[0] < 2:
        raise ValueError("expected a (T, H, W) label volume with T >= 2")
    return float((labels[1:] != labels[:-1]).mean())
