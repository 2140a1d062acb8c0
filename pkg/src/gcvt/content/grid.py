"""Images and videos lifted into a higher-dimensional content space.

A pixel at column ``u`` and row ``v`` with CIELAB color ``c`` is mapped to
``(l1 u, l1 v, l2 c)``; a voxel at ``(u, v, t)`` to ``(l1 u, l1 v, l2 t,
l3 c)``.  The lifted lattice is a 2- or 3-manifold whose area or volume
element grows with local color variation, which is what makes uniform
tessellations of it content sensitive.

Arrays follow numpy order: images are ``(H, W, 3)`` and videos
``(T, H, W, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import itertools

import numpy as np


@dataclass
class StretchedGrid:
    """Lifted pixel or voxel lattice.

    Attributes
    ----------
    shape : tuple
        ``(H, W)`` or ``(T, H, W)``.
    lambdas : tuple
        Stretching factors, ``(l1, l2)`` for images, ``(l1, l2, l3)`` for video.
    corners : ndarray
        Lifted lattice corners, shape ``shape + 1`` per axis plus the
        embedding dimension.
    features : ndarray
        ``(n, D)`` lifted sample at each pixel or voxel center, in C order.
    measure : ndarray
        Area (image) or volume proxy (video) of each lifted cell, shaped like
        the lattice.
    """
    shape: tuple
    lambdas: tuple
    corners: np.ndarray
    features: np.ndarray
    measure: np.ndarray

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def shape3(self) -> tuple:
        """Lattice shape padded to ``(T, H, W)``."""
        return (1,) * (3 - self.ndim) + tuple(self.shape)

    @property
    def spatial_scale(self) -> np.ndarray:
        """Lifted length of one lattice step along each ``(T, H, W)`` axis."""
        l1 = self.lambdas[0]
        lt = self.lambdas[1] if self.ndim == 3 else 1.0
        return np.array([lt, l1, l1], dtype=float)

    def pixel_graph(self):
        """4- or 6-connected lattice graph weighted by lifted center distances.

        Returns CSR arrays ``(indptr, indices, weights)``.
        """
        idx = np.arange(self.size).reshape(self.shape)
        f = self.features
        heads, tails = [], []
        for ax in range(self.ndim):
            a = np.take(idx, np.arange(self.shape[ax] - 1), axis=ax).ravel()
            b = np.take(idx, np.arange(1, self.shape[ax]), axis=ax).ravel()
            heads += [a, b]
            tails += [b, a]
        src = np.concatenate(heads)
        dst = np.concatenate(tails)
        w = np.linalg.norm(f[src] - f[dst], axis=1)
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        indptr = np.searchsorted(src, np.arange(self.size + 1))
        return indptr.astype(np.int64), dst.astype(np.int64), w


def _check_factors(*lams):
    for lam in lams:
        if not lam > 0:
            raise ValueError(f"stretching factors must be positive, got {lam}")


def corner_colors(values: np.ndarray) -> np.ndarray:
    """Bilinear corner sampling of per-cell values.

    Each lattice corner takes the mean of the cells touching it, with edge
    replication at the border.  Works for any number of lattice axes
    followed by one channel axis.
    """
    nd = values.ndim - 1
    out = np.pad(values, [(1, 1)] * nd + [(0, 0)], mode="edge")
    for ax in range(nd):
        n = out.shape[ax]
        lo = np.take(out, np.arange(n - 1), axis=ax)
        hi = np.take(out, np.arange(1, n), axis=ax)
        out = 0.5 * (lo + hi)
    return out


def _triangle_area(e1, e2):
    g11 = (e1 * e1).sum(-1)
    g22 = (e2 * e2).sum(-1)
    g12 = (e1 * e2).sum(-1)
    return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))


def _image_grid(corner_lab, center_lab, l1, l2) -> StretchedGrid:
    Hc, Wc = corner_lab.shape[:2]
    v, u = np.meshgrid(np.arange(Hc, dtype=float), np.arange(Wc, dtype=float), indexing="ij")
    corners = np.concatenate([l1 * u[..., None], l1 * v[..., None], l2 * corner_lab], axis=-1)
    c00 = corners[:-1, :-1]
    c01 = corners[:-1, 1:]
    c10 = corners[1:, :-1]
    c11 = corners[1:, 1:]
    area = _triangle_area(c01 - c00, c11 - c00) + _triangle_area(c11 - c00, c10 - c00)
    H, W = Hc - 1, Wc - 1
    v, u = np.meshgrid(np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    feats = np.concatenate([l1 * u[..., None], l1 * v[..., None], l2 * center_lab], axis=-1)
    return StretchedGrid((H, W), (l1, l2), corners, feats.reshape(H * W, -1), area)


def stretch_image(image: np.ndarray, lambda1: float = 1.0, lambda2: float = 1.0) -> StretchedGrid:
    """Lift an ``(H, W, 3)`` CIELAB image.

    Each pixel's measure is the area of its lifted quad, split along the
    main diagonal into two triangles.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        image = image[..., None]
    if image.ndim != 3 or min(image.shape[:2]) < 2:
        raise ValueError("image must be (H, W, C) with H, W >= 2")
    _check_factors(lambda1, lambda2)
    return _image_grid(corner_colors(image), image, lambda1, lambda2)


def stretch_image_corners(corner_lab: np.ndarray, lambda1: float = 1.0,
                          lambda2: float = 1.0) -> StretchedGrid:
    """Lift an image given directly by ``(H+1, W+1, C)`` corner colors.

    Pixel-center features use the mean of each pixel's four corners.
    """
    corner_lab = np.asarray(corner_lab, dtype=float)
    if corner_lab.ndim == 2:
        corner_lab = corner_lab[..., None]
    if min(corner_lab.shape[:2]) < 3:
        raise ValueError("need at least 3 x 3 corners")
    _check_factors(lambda1, lambda2)
    center = 0.25 * (corner_lab[:-1, :-1] + corner_lab[:-1, 1:] + corner_lab[1:, :-1] + corner_lab[1:, 1:])
    return _image_grid(corner_lab, center, lambda1, lambda2)


def voxel_measure(corners: np.ndarray) -> np.ndarray:
    """3-volume of each lifted voxel.

    The voxel is split into the six tetrahedra of its Kuhn triangulation
    (one per ordering of the lattice axes along a corner-to-corner path)
    and each contributes ``sqrt(det G) / 6``, with ``G`` the Gram matrix
    of its three lifted path edges.  For a static video the temporal edge
    is orthogonal to the rest, and the sum reduces to the two-triangle
    pixel area times the temporal factor.
    """
    T, H, W = (n - 1 for n in corners.shape[:3])

    def at(off):
        return corners[off[0]:off[0] + T, off[1]:off[1] + H, off[2]:off[2] + W]

    out = np.zeros((T, H, W))
    for order in itertools.permutations(range(3)):
        off = [0, 0, 0]
        prev = at(off)
        edges = []
        for ax in order:
            off[ax] = 1
            cur = at(off)
            edges.append(cur - prev)
            prev = cur
        E = np.stack(edges, axis=-2)
        G = E @ np.swapaxes(E, -1, -2)
        out += np.sqrt(np.maximum(np.linalg.det(G), 0.0)) / 6.0
    return out


def stretch_video(video: np.ndarray, lambda1: float = 1.0, lambda2: float = 1.0,
                  lambda3: float = 1.0) -> StretchedGrid:
    """Lift a ``(T, H, W, 3)`` CIELAB video with ``(l1 u, l1 v, l2 t, l3 c)``."""
    video = np.asarray(video, dtype=float)
    if video.ndim == 3:
        video = video[..., None]
    if video.ndim != 4 or video.shape[0] < 2 or min(video.shape[1:3]) < 2:
        raise ValueError("video must be (T, H, W, C) with T >= 2 and H, W >= 2")
    _check_factors(lambda1, lambda2, lambda3)
    cc = corner_colors(video)
    Tc, Hc, Wc = cc.shape[:3]
    t, v, u = np.meshgrid(np.arange(Tc, dtype=float), np.arange(Hc, dtype=float),
                          np.arange(Wc, dtype=float), indexing="ij")
    corners = np.concatenate([lambda1 * u[..., None], lambda1 * v[..., None],
                              lambda2 * t[..., None], lambda3 * cc], axis=-1)
    T, H, W = video.shape[:3]
    t, v, u = np.meshgrid(np.arange(T) + 0.5, np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    feats = np.concatenate([lambda1 * u[..., None], lambda1 * v[..., None],
                            lambda2 * t[..., None], lambda3 * video], axis=-1)
    return StretchedGrid((T, H, W), (lambda1, lambda2, lambda3), corners,
                         feats.reshape(T * H * W, -1), voxel_measure(corners))


def default_lambdas(shape, k: int) -> tuple:
    """Default stretching factors for a lattice of ``shape`` and ``k`` regions.

    Spatial factor 1, color factor ``2 / S`` with ``S`` the expected region
    spacing, and (for video) temporal factor 1.
    """
    S = (np.prod(shape) / k) ** (1.0 / len(shape))
    if len(shape) == 2:
        return (1.0, 2.0 / S)
    return (1.0, 1.0, 2.0 / S)
