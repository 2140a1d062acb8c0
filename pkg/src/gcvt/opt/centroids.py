"""Nominal mass centroids of geodesic Voronoi cells."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, identity
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import spsolve

from ..geodesics import BoundaryHit, exp_map, local_field, log_map
from ..mesh import SurfacePoint, TangentVector, integrate_triangles


@dataclass
class CenterResult:
    point: SurfacePoint
    iterations: int
    converged: bool
    left_cell: bool = False


def _cell_complex(t, i):
    tris = t.cell_triangles(i)
    pids, local = np.unique(t.sub_pts[tris], return_inverse=True)
    local = local.reshape(-1, 3)
    a = local.ravel()
    b = np.roll(local, -1, axis=1).ravel()
    key = np.unique(np.minimum(a, b) * len(pids) + np.maximum(a, b))
    ea, eb = key // len(pids), key % len(pids)
    pos = t.points[pids]
    length = np.linalg.norm(pos[ea] - pos[eb], axis=1)
    return tris, pids, local, ea, eb, length


def landmark_mds(dist_to_landmarks, landmark_idx, dim=2):
    """Landmark MDS into ``dim`` dimensions from an (L, n) landmark-to-all
    distance matrix."""
    D = dist_to_landmarks
    Dl2 = D[:, landmark_idx] ** 2
    L = len(landmark_idx)
    J = np.eye(L) - 1.0 / L
    B = -0.5 * J @ Dl2 @ J
    w, V = np.linalg.eigh(B)
    order = np.argsort(w)[::-1][:dim]
    w = np.clip(w[order], 1e-300, None)
    V = V[:, order]
    pinv = V / np.sqrt(w)
    mean = Dl2.mean(axis=1)
    return (-0.5 * pinv.T @ (D ** 2 - mean[:, None])).T


def _refine_embedding(Y, ea, eb, length, iters=20, rel_gain=1e-3):
    """Gauss-Newton fit of planar edge lengths to the intrinsic lengths.

    A flat cell is recovered exactly up to a rigid motion.
    """
    keep = length > 1e-14
    ea, eb, length = ea[keep], eb[keep], length[keep]
    n = len(Y)
    rows = np.repeat(np.arange(len(ea)), 4)
    cols = np.column_stack([2 * ea, 2 * ea + 1, 2 * eb, 2 * eb + 1]).ravel()
    scale = max(length.max(), 1e-300)

    def resid(Y):
        diff = Y[ea] - Y[eb]
        cur = np.maximum(np.linalg.norm(diff, axis=1), 1e-300)
        return diff, cur, cur - length

    diff, cur, r = resid(Y)
    res = float(r @ r)
    for _ in range(iters):
        if np.abs(r).max() <= 1e-13 * scale:
            break
        g = diff / cur[:, None]
        vals = np.column_stack([g, -g]).ravel()
        Jm = coo_matrix((vals, (rows, cols)), shape=(len(ea), 2 * n)).tocsr()
        # tiny damping removes the rigid-motion null space
        A = (Jm.T @ Jm + 1e-12 * identity(2 * n)).tocsc()
        step = spsolve(A, -(Jm.T @ r)).reshape(n, 2)
        s = 1.0
        for _ in range(20):
            Yn = Y + s * step
            dn, cn, rn = resid(Yn)
            if float(rn @ rn) < res:
                break
            s *= 0.5
        else:
            break
        gain = res - float(rn @ rn)
        Y, diff, cur, r = Yn, dn, cn, rn
        res = float(r @ r)
        if gain <= rel_gain * res:
            break
    return Y


def lmds_centroid(t, i: int, n_landmarks: int = 8, rng=None) -> SurfacePoint:
    """Mass centroid of cell ``i`` computed in a planar unfolding.

    The cell's points are embedded by landmark MDS on graph distances along
    sub-triangle edges, the embedding is fitted to the true edge lengths,
    and the density-weighted planar centroid is mapped back through the
    unfolded sub-triangle containing it (or the nearest one).
    """
    tris, pids, local, ea, eb, length = _cell_complex(t, i)
    n = len(pids)
    if n < 3:
        return t.surface_point(int(pids[0]))
    G = coo_matrix((np.r_[length, length], (np.r_[ea, eb], np.r_[eb, ea])), shape=(n, n)).tocsr()
    # farthest-point landmarks starting from the point nearest the generator
    gpos = t.generators[i].position(t.mesh)
    start = int(np.argmin(np.linalg.norm(t.points[pids] - gpos, axis=1)))
    k = min(n_landmarks, n)
    land = [start]
    rows = [dijkstra(G, indices=start)]
    for _ in range(1, k):
        dmin = np.min(rows, axis=0)
        dmin[~np.isfinite(dmin)] = -1
        nxt = int(np.argmax(dmin))
        if dmin[nxt] <= 0:
            break
        land.append(nxt)
        rows.append(dijkstra(G, indices=nxt))
    D = np.array(rows)
    D[~np.isfinite(D)] = D[np.isfinite(D)].max()
    if len(land) < 3:
        Y = np.column_stack([D[0], np.zeros(n)])
    else:
        Y = landmark_mds(D, np.array(land))
    Y = _refine_embedding(Y, ea, eb, length)
    corners = Y[local]
    rho = t.sub_rho[tris]
    try:
        _, c = integrate_triangles(corners, rho)
    except ValueError:
        _, c = integrate_triangles(corners, np.ones_like(rho))
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    q = c - corners[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    ok = np.abs(det) > 1e-300
    det = np.where(ok, det, 1.0)
    l1 = (q[:, 0] * e2[:, 1] - q[:, 1] * e2[:, 0]) / det
    l2 = (e1[:, 0] * q[:, 1] - e1[:, 1] * q[:, 0]) / det
    lam_all = np.column_stack([1 - l1 - l2, l1, l2])
    score = np.where(ok, lam_all.min(1), -np.inf)
    bs = int(np.argmax(score))
    lam = np.clip(lam_all[bs], 0.0, None)
    lam /= lam.sum()
    s = tris[bs]
    b = lam @ t.sub_bary[s]
    b = np.clip(b, 0.0, None)
    return SurfacePoint(int(t.sub_face[s]), tuple(b / b.sum()))


def riemannian_center(t, i: int, graph=None, tol: float = None,
                      max_iter: int = 50) -> CenterResult:
    """Riemannian center of mass of cell ``i``'s Voronoi vertices.

    Iterates ``x <- exp(x, mean_j log(x, v_j))`` from the generator.  Cells
    without branch points fall back to :func:`lmds_centroid`.
    """
    graph = graph or t.graph
    mesh = t.mesh
    verts = [t.surface_point(p) for p in t.cell_branch_points(i)]
    if not verts:
        return CenterResult(lmds_centroid(t, i), 0, True)
    if len(verts) == 1:
        return CenterResult(verts[0], 0, True)
    tol = 1e-6 * mesh.diameter if tol is None else tol
    x = t.generators[i]
    prev = np.inf
    for it in range(1, max_iter + 1):
        fld = local_field(graph, x, verts)
        acc = np.zeros(2)
        for v in verts:
            acc += log_map(x, v, graph, fld).vector
        acc /= len(verts)
        step = TangentVector.from_planar(x, acc)
        if step.magnitude == 0:
            return CenterResult(x, it, True)
        if step.magnitude > 0.9 * prev:
            # steps stopped contracting: the graph-distance noise floor
            return CenterResult(x, it, step.magnitude < 1e3 * tol)
        prev = step.magnitude
        try:
            x = exp_map(x, step, mesh)
        except BoundaryHit as hit:
            x = hit.point
        if step.magnitude < tol:
            return CenterResult(x, it, True)
    return CenterResult(x, max_iter, False)
