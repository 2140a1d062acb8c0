"""Superpixels and supervoxels as centroidal tessellations of a lifted grid.

``rcvt_lloyd`` clusters with Euclidean distance in the embedding space and
lets centroids leave the manifold.  ``imslic_lloyd`` measures geodesic
distance along the lifted pixel graph and keeps generators on pixels.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from skimage.measure import label as connected_label

from .. import _kernels
from ..opt.centroids import landmark_mds
from .grid import StretchedGrid


SEED_RTOL = 1e-6


@dataclass
class LabelMap:
    """Region id per pixel or voxel."""
    labels: np.ndarray

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.k)

    @property
    def centroids(self) -> np.ndarray:
        """Mean lattice coordinate of each region, in array axis order."""
        coords = np.indices(self.labels.shape).reshape(self.labels.ndim, -1)
        lab = self.labels.ravel()
        s = np.maximum(self.sizes, 1)
        return np.stack([np.bincount(lab, weights=c, minlength=self.k) / s for c in coords], axis=1)

    def is_connected(self) -> bool:
        comps = connected_label(self.labels + 1, background=0, connectivity=1)
        return int(comps.max()) == len(np.unique(self.labels))


@dataclass
class SuperpixelResult:
    labels: LabelMap
    energy_trace: list
    iterations: int
    converged: bool
    generators: np.ndarray = None
    iteration_seconds: list = field(default_factory=list)

    @property
    def energy_final(self) -> float:
        return self.energy_trace[-1]


def lattice_seeds(shape3, k: int, scale=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Exactly ``k`` seeds spread uniformly over a ``(T, H, W)`` lattice.

    ``scale`` gives the physical length of one step per axis.  Layers along
    the slowest axis, rows and columns are chosen so that the spacing is as
    even as possible; returns float lattice coordinates ``(k, 3)``.
    """
    T, H, W = shape3
    ext = np.array([T, H, W], dtype=float) * np.asarray(scale, dtype=float)
    S = (np.prod(ext[ext > 0]) / k) ** (1.0 / max((np.array(shape3) > 1).sum(), 1))
    nt = 1 if T == 1 else int(np.clip(round(ext[0] / S), 1, min(T, k)))
    pts = []
    per_layer = [k // nt + (1 if i < k % nt else 0) for i in range(nt)]
    for li, kl in enumerate(per_layer):
        t = (li + 0.5) * T / nt - 0.5
        nr = int(np.clip(round(np.sqrt(kl * ext[1] / ext[2])), 1, min(H, kl)))
        per_row = [kl // nr + (1 if i < kl % nr else 0) for i in range(nr)]
        for ri, kr in enumerate(per_row):
            y = (ri + 0.5) * H / nr - 0.5
            for ci in range(kr):
                x = (ci + 0.5) * W / kr - 0.5
                pts.append((t, y, x))
    return np.array(pts)


def seed_positions(grid: StretchedGrid, k: int) -> np.ndarray:
    """Lattice positions ``(k, 3)`` of the initial generators.

    Seeds sit on the uniform lattice of :func:`lattice_seeds`; a seed moves
    to the lowest-measure pixel of its 3 x 3 neighborhood only when that
    measure is below the one at the seed by more than ``SEED_RTOL``
    (relative), so seeds avoid edges while a flat image, or a vanishing
    color factor, keeps the exact lattice.
    """
    T, H, W = grid.shape3
    pts = lattice_seeds(grid.shape3, k, grid.spatial_scale)
    meas = grid.measure.reshape(T, H, W)
    out = pts.copy()
    for j, (t, y, x) in enumerate(pts):
        t, yc, xc = int(round(t)), int(np.clip(round(y), 0, H - 1)), int(np.clip(round(x), 0, W - 1))
        here = meas[t, yc, xc]
        best = (here, 0, yc, xc)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = yc + dy, xc + dx
                if 0 <= yy < H and 0 <= xx < W:
                    cand = (meas[t, yy, xx], abs(dy) + abs(dx), yy, xx)
                    if cand < best:
                        best = cand
        if best[0] < here * (1.0 - SEED_RTOL):
            out[j] = (t, best[2], best[3])
    return out


def _check_k(grid, k):
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > grid.size:
        raise ValueError(f"k={k} exceeds the number of samples {grid.size}")


def _lattice_pos(grid: StretchedGrid, centers: np.ndarray) -> np.ndarray:
    """Lattice ``(t, y, x)`` of embedding-space points."""
    l1 = grid.lambdas[0]
    x = centers[:, 0] / l1 - 0.5
    y = centers[:, 1] / l1 - 0.5
    if grid.ndim == 3:
        t = centers[:, 2] / grid.lambdas[1] - 0.5
    else:
        t = np.zeros(len(centers))
    return np.column_stack([t, y, x])


def _weighted_means(grid, labels, k):
    w = grid.measure.ravel()
    mass = np.bincount(labels, weights=w, minlength=k)
    cols = [np.bincount(labels, weights=w * grid.features[:, j], minlength=k)
            for j in range(grid.features.shape[1])]
    return np.column_stack(cols) / np.maximum(mass, 1e-300)[:, None], mass


def rcvt_lloyd(grid: StretchedGrid, k: int, max_iters: int = 20, seed: int = 0,
               window: float = 2.0, tol: float = 1e-4) -> SuperpixelResult:
    """Lloyd iteration with Euclidean distance in the embedding space.

    Samples are assigned to the nearest generator inside a box of
    ``window * S`` lattice steps around it (``S`` the expected spacing);
    generators become measure-weighted embedding-space centroids, which
    need not lie on the manifold.  Stops after ``max_iters`` or when no
    generator moves more than ``tol * S``.  The energy never increases.

    ``seed`` only breaks ties in the seeding and is kept for a uniform
    interface; the procedure is otherwise deterministic.
    """
    _check_k(grid, k)
    shape3 = np.array(grid.shape3)
    scale = grid.spatial_scale
    S = (np.prod((shape3 * scale)[shape3 > 1]) / k) ** (1.0 / max((shape3 > 1).sum(), 1))
    half = np.where(shape3 > 1, 0.5 * window * S / scale, 0.0)
    half = np.minimum(half, shape3)
    spos = seed_positions(grid, k)
    # initial assignment: nearest seed in the lattice
    pos = np.ascontiguousarray(_lattice_pos_from_index(np.arange(grid.size), shape3) * scale)
    labels = np.full(grid.size, -1, dtype=np.int64)
    best = np.full(grid.size, np.inf)
    labels, _ = _kernels.windowed_assign(pos, spos * scale, spos, shape3.astype(np.int64),
                                         half, labels, best)
    if (labels < 0).any():
        # fall back to a global nearest-seed pass for uncovered samples
        miss = np.nonzero(labels < 0)[0]
        d = ((pos[miss, None, :] - (spos * scale)[None]) ** 2).sum(-1)
        labels[miss] = d.argmin(1)
    w = grid.measure.ravel()
    trace = []
    converged = False
    it = 0
    secs = []
    for it in range(1, max_iters + 1):
        t0 = time.perf_counter()
        centers, mass = _weighted_means(grid, labels, k)
        empty = mass <= 0
        if empty.any():
            centers[empty] = _interp_features(grid, spos[empty])
        dist = _kernels.sq_dist_to_assigned(grid.features, centers, labels)
        if not trace:
            trace.append(float((w * dist).sum()))
        old = labels.copy()
        labels, dist = _kernels.windowed_assign(grid.features, centers, _lattice_pos(grid, centers),
                                                shape3.astype(np.int64), half, labels, dist)
        trace.append(float((w * dist).sum()))
        new_centers, _ = _weighted_means(grid, labels, k)
        move = np.linalg.norm(new_centers - centers, axis=1).max()
        secs.append(time.perf_counter() - t0)
        if move < tol * S or np.array_equal(old, labels):
            converged = True
            centers = new_centers
            break
        centers = new_centers
    final = float((w * _kernels.sq_dist_to_assigned(grid.features, centers, labels)).sum())
    if final <= trace[-1]:
        trace.append(final)
    return SuperpixelResult(LabelMap(labels.reshape(grid.shape)), trace, it, converged, centers, secs)


def _lattice_pos_from_index(idx, shape3):
    T, H, W = shape3
    t, r = np.divmod(idx, H * W)
    y, x = np.divmod(r, W)
    return np.column_stack([t, y, x]).astype(float)


def _region_center(G, members, coords, weights, dim=2, n_landmarks=6, n_fit=10):
    """Lattice position of the weighted centroid of a ``dim``-dimensional
    landmark-MDS embedding of one region's subgraph.

    The centroid is mapped back through an affine fit of lattice
    coordinates against the embedding over the nearest members.
    """
    n = len(members)
    if n <= 3:
        return (weights[:, None] * coords).sum(0) / max(weights.sum(), 1e-300)
    sub = G[members][:, members]
    land = [0]
    rows = [dijkstra(sub, indices=0)]
    for _ in range(1, min(n_landmarks, n)):
        dmin = np.min(rows, axis=0)
        dmin[~np.isfinite(dmin)] = -1
        nxt = int(np.argmax(dmin))
        if dmin[nxt] <= 0:
            break
        land.append(nxt)
        rows.append(dijkstra(sub, indices=nxt))
    D = np.array(rows)
    D[~np.isfinite(D)] = D[np.isfinite(D)].max()
    if len(land) <= dim:
        Y = np.column_stack([D[0], np.zeros(n)])
    else:
        Y = landmark_mds(D, np.array(land), dim)
    c = (weights[:, None] * Y).sum(0) / max(weights.sum(), 1e-300)
    near = np.argsort(((Y - c) ** 2).sum(1), kind="stable")[:min(n_fit, n)]
    A = np.column_stack([Y[near], np.ones(len(near))])
    coef, *_ = np.linalg.lstsq(A, coords[near], rcond=None)
    p = np.r_[c, 1.0] @ coef
    # stay inside the region
    if np.abs(p - coords[near[0]]).max() > 1.0:
        p = coords[near[0]].astype(float)
    return p


def _octile_graph(grid: StretchedGrid):
    """Lattice graph with diagonal steps, used only for centroid embeddings."""
    idx = np.arange(grid.size).reshape(grid.shape)
    f = grid.features
    src, dst = [], []
    nd = grid.ndim
    offsets = [o for o in np.ndindex(*(3,) * nd) if any(v != 1 for v in o)]
    for o in offsets:
        o = np.array(o) - 1
        sl_a = tuple(slice(max(0, -v), s - max(0, v)) for v, s in zip(o, grid.shape))
        sl_b = tuple(slice(max(0, v), s - max(0, -v)) for v, s in zip(o, grid.shape))
        src.append(idx[sl_a].ravel())
        dst.append(idx[sl_b].ravel())
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    w = np.linalg.norm(f[src] - f[dst], axis=1)
    w = np.maximum(w, 1e-12)
    return csr_matrix((w, (src, dst)), shape=(grid.size, grid.size))


def _interp_features(grid: StretchedGrid, pos: np.ndarray) -> np.ndarray:
    """Lifted point at continuous lattice positions ``(t, y, x)``."""
    F = grid.features.reshape(grid.shape3 + (-1,))
    coords = np.clip(pos, 0, np.array(grid.shape3) - 1).T
    return np.column_stack([map_coordinates(F[..., j], coords, order=1, mode="nearest")
                            for j in range(F.shape[-1])])


def _generator_seeds(grid: StretchedGrid, pos: np.ndarray):
    """Pixels around each generator with their lifted distances."""
    shape3 = np.array(grid.shape3)
    P = _interp_features(grid, pos)
    nodes, dists, labs = [], [], []
    lo = np.floor(pos).astype(int)
    for corner in np.ndindex(2, 2, 2):
        c = np.clip(lo + np.array(corner), 0, shape3 - 1)
        idx = (c[:, 0] * shape3[1] + c[:, 1]) * shape3[2] + c[:, 2]
        nodes.append(idx)
        dists.append(np.linalg.norm(grid.features[idx] - P, axis=1))
        labs.append(np.arange(len(pos)))
    nodes = np.concatenate(nodes)
    dists = np.concatenate(dists)
    labs = np.concatenate(labs)
    # a pixel shared by two generators goes to the nearer one
    order = np.lexsort((labs, dists, nodes))
    first = np.ones(len(order), dtype=bool)
    first[1:] = nodes[order][1:] != nodes[order][:-1]
    keep = order[first]
    return nodes[keep].astype(np.int64), dists[keep], labs[keep].astype(np.int64)


def imslic_lloyd(grid: StretchedGrid, k: int, max_iters: int = 10, seed: int = 0,
                 bucket_fraction: float = 1.0 / 32, tol: float = 1e-2) -> SuperpixelResult:
    """Lloyd iteration with graph-geodesic distance on the lifted grid.

    Generators are points of the manifold at continuous lattice positions.
    Each iteration labels every sample by its geodesically nearest
    generator (multi-source label-correcting search over the 4- or
    6-connected lattice weighted by lifted lengths, started from the
    lattice cells around each generator), then moves each generator to the
    landmark-MDS centroid of its region.  Regions are connected by
    construction.  Stops after ``max_iters`` or when no generator moves
    more than ``tol`` lattice steps.
    """
    _check_k(grid, k)
    indptr, indices, weights = grid.pixel_graph()
    mask = np.ones(grid.size, dtype=np.bool_)
    width = max(float(weights.max()) * bucket_fraction, 1e-12) if len(weights) else 1.0
    G = _octile_graph(grid)
    w = grid.measure.ravel()
    coords = _lattice_pos_from_index(np.arange(grid.size), np.array(grid.shape3))
    gens = seed_positions(grid, k)
    trace = []
    converged = False
    it = 0

    def assign(gens):
        nodes, d0, labs = _generator_seeds(grid, gens)
        return _kernels.bucket_search(indptr, indices, weights, grid.size, nodes, d0, labs,
                                      mask, width)

    secs = []
    for it in range(1, max_iters + 1):
        t0 = time.perf_counter()
        dist, labels = assign(gens)
        trace.append(float((w * dist ** 2).sum()))
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(k + 1))
        new = gens.copy()
        for i in range(k):
            members = order[bounds[i]:bounds[i + 1]]
            if len(members):
                new[i] = _region_center(G, members, coords[members], w[members], grid.ndim,
                                        n_landmarks=4 * grid.ndim)
        move = np.abs(new - gens).max()
        gens = new
        secs.append(time.perf_counter() - t0)
        if move < tol:
            converged = True
            break
    dist, labels = assign(gens)
    trace.append(float((w * dist ** 2).sum()))
    return SuperpixelResult(LabelMap(labels.reshape(grid.shape)), trace, it, converged,
                            _interp_features(grid, gens), secs)


def enforce_connectivity(labels) -> LabelMap:
    """Make every region 4- (2D) or 6-connected (3D).

    Each label keeps its largest component; every other component is merged
    into the neighboring kept region it shares the longest boundary with.
    Orphans touching only other orphans wait for a later round.  Labels
    are renumbered to ``0..k'-1`` keeping the order of the old ids.
    """
    lab = np.array(labels.labels if isinstance(labels, LabelMap) else labels, dtype=np.int64)
    while True:
        comp = connected_label(lab + 1, background=0, connectivity=1) - 1
        nc = int(comp.max()) + 1
        comp_label = np.zeros(nc, dtype=np.int64)
        comp_label[comp.ravel()] = lab.ravel()
        size = np.bincount(comp.ravel(), minlength=nc)
        # largest component per label, ties to the lowest component id
        order = np.lexsort((np.arange(nc), -size, comp_label))
        keep = np.zeros(nc, dtype=bool)
        first = np.ones(nc, dtype=bool)
        first[1:] = comp_label[order][1:] != comp_label[order][:-1]
        keep[order[first]] = True
        if keep.all():
            break
        pairs = []
        for ax in range(lab.ndim):
            n = lab.shape[ax]
            a = np.take(comp, np.arange(n - 1), axis=ax).ravel()
            b = np.take(comp, np.arange(1, n), axis=ax).ravel()
            diff = a != b
            pairs += [np.column_stack([a[diff], b[diff]]), np.column_stack([b[diff], a[diff]])]
        P = np.concatenate(pairs)
        P = P[~keep[P[:, 0]] & keep[P[:, 1]]]
        if len(P) == 0:
            break
        key = P[:, 0] * (lab.max() + 1) + comp_label[P[:, 1]]
        uk, cnt = np.unique(key, return_counts=True)
        oc, nl = np.divmod(uk, lab.max() + 1)
        # per orphan: longest shared boundary, ties to the lowest label
        o = np.lexsort((nl, -cnt, oc))
        oc, nl = oc[o], nl[o]
        firsts = np.ones(len(oc), dtype=bool)
        firsts[1:] = oc[1:] != oc[:-1]
        target = comp_label.copy()
        target[oc[firsts]] = nl[firsts]
        lab = target[comp]
    _, lab = np.unique(lab, return_inverse=True)
    return LabelMap(lab.reshape(np.shape(labels.labels if isinstance(labels, LabelMap) else labels)))
