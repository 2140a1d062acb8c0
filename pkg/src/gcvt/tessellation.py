"""Geodesic Voronoi tessellations on triangle meshes.

The tessellation is stored as a conforming complex of labeled
sub-triangles.  Generators are first inserted as extra vertices of a
refined "carrier" triangulation; carrier vertices get labels and distances
from a multi-source Steiner field, and every carrier triangle whose corners
disagree is split along the zero set of the linearly interpolated distance
difference.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .geodesics import (DEFAULT_LEVEL, SteinerGraph, build_steiner_graph,
                        containing_faces, distance_field)
from .mesh import SurfacePoint, TriMesh, genus as mesh_genus, triangle_areas, write_obj

_EYE = np.eye(3)


# -- carrier ------------------------------------------------------------------

def _insert_generators(mesh, generators):
    """Per-face sub-triangulations with generators inserted as vertices.

    Returns carrier triangles as (face, corner ids, corner barys) plus the
    carrier vertex id of every generator.  Carrier vertex ids are mesh
    vertices first, then inserted generators.
    """
    nv = mesh.n_vertices
    split = {}
    gen_vertex = []
    for i, g in enumerate(generators):
        b = np.asarray(g.bary)
        hit = np.nonzero(b > 1 - 1e-12)[0]
        if len(hit):
            gen_vertex.append(int(mesh.faces[g.face, hit[0]]))
            continue
        vid = nv + i
        gen_vertex.append(vid)
        pos = g.position(mesh)
        for f in containing_faces(mesh, g):
            tris = split.setdefault(f, [(tuple(int(x) for x in mesh.faces[f]), _EYE.copy())])
            bf = np.clip(mesh.barycentric(f, pos), 0.0, None)
            bf /= bf.sum()
            best, bl = -1, None
            for t, (_, B) in enumerate(tris):
                lam = np.linalg.solve(B.T, bf)
                if bl is None or lam.min() > bl.min():
                    best, bl = t, lam
            ids, B = tris.pop(best)
            if bl.max() > 1 - 1e-12:
                raise ValueError(f"generator {i} coincides with another generator")
            for k in range(3):
                if bl[k] <= 1e-12:
                    continue
                nid = list(ids)
                nb = B.copy()
                nid[k] = vid
                nb[k] = bf
                tris.append((tuple(nid), nb))
    faces, ids, barys = [], [], []
    for f in range(mesh.n_faces):
        if f in split:
            for t_ids, B in split[f]:
                faces.append(f)
                ids.append(t_ids)
                barys.append(B)
        else:
            faces.append(f)
            ids.append(tuple(int(x) for x in mesh.faces[f]))
            barys.append(_EYE)
    return (np.array(faces, dtype=np.int64), np.array(ids, dtype=np.int64),
            np.array(barys), gen_vertex)


def _csr(n, a, b, w):
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    ww = np.concatenate([w, w])
    order = np.lexsort((cols, rows))
    rows, cols, ww = rows[order], cols[order], ww[order]
    return np.searchsorted(rows, np.arange(n + 1)), cols, ww


@dataclass(eq=False)
class Tessellation:
    """Labeled sub-triangle complex of a geodesic Voronoi tessellation.

    Point ids index ``points``; ``sub_pts`` holds sub-triangle corners,
    ``sub_label`` the owning generator and ``sub_d`` the corner distances to
    that generator.  ``sub_face`` and ``sub_bary`` locate every corner in
    the original mesh face.
    """

    mesh: TriMesh
    graph: SteinerGraph
    generators: list
    field: object
    points: np.ndarray
    point_face: np.ndarray
    point_bary: np.ndarray
    point_kind: np.ndarray
    sub_face: np.ndarray
    sub_pts: np.ndarray
    sub_bary: np.ndarray
    sub_label: np.ndarray
    sub_d: np.ndarray
    center_labels: dict = dc_field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.generators)

    def surface_point(self, pid: int) -> SurfacePoint:
        return SurfacePoint(int(self.point_face[pid]), tuple(self.point_bary[pid]))

    @cached_property
    def sub_areas(self) -> np.ndarray:
        p = self.points[self.sub_pts]
        return triangle_areas(p[:, 0], p[:, 1], p[:, 2])

    @cached_property
    def sub_rho(self) -> np.ndarray:
        rho = self.mesh.density[self.mesh.faces[self.sub_face]]
        return np.einsum("skj,sj->sk", self.sub_bary, rho)

    @cached_property
    def cell_areas(self) -> np.ndarray:
        return np.bincount(self.sub_label, weights=self.sub_areas, minlength=self.m)

    def cell_triangles(self, i: int) -> np.ndarray:
        return np.nonzero(self.sub_label == i)[0]

    @cached_property
    def _edges(self):
        s = len(self.sub_pts)
        a = self.sub_pts.ravel()
        b = np.roll(self.sub_pts, -1, axis=1).ravel()
        key = np.minimum(a, b) * len(self.points) + np.maximum(a, b)
        uk, inv = np.unique(key, return_inverse=True)
        owner = np.repeat(np.arange(s), 3)
        order = np.argsort(inv, kind="stable")
        inv_s, own_s = inv[order], owner[order]
        first = np.r_[True, inv_s[1:] != inv_s[:-1]]
        ne = len(uk)
        t0 = np.full(ne, -1, dtype=np.int64)
        t1 = np.full(ne, -1, dtype=np.int64)
        t0[inv_s[first]] = own_s[first]
        t1[inv_s[~first]] = own_s[~first]
        n = len(self.points)
        return np.column_stack([uk // n, uk % n]), t0, t1, inv.reshape(s, 3)

    @cached_property
    def cells(self):
        """Per-cell (n_components, n_loops, euler_characteristic)."""
        edges, t0, t1, tri_edges = self._edges
        lab = self.sub_label
        inner = t1 >= 0
        same = inner & (lab[t0] == lab[np.where(inner, t1, 0)])
        s = len(lab)
        adj = coo_matrix((np.ones(same.sum()), (t0[same], t1[same])), shape=(s, s))
        _, comp = connected_components(adj, directed=False)
        bnd = ~same
        out = []
        npnt = len(self.points)
        for i in range(self.m):
            tris = np.nonzero(lab == i)[0]
            if len(tris) == 0:
                out.append((0, 0, 0))
                continue
            ncomp = len(np.unique(comp[tris]))
            eids = np.unique(tri_edges[tris].ravel())
            pids = np.unique(self.sub_pts[tris].ravel())
            chi = len(pids) - len(eids) + len(tris)
            be = eids[bnd[eids]]
            if len(be):
                e = edges[be]
                g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(npnt, npnt))
                _, pc = connected_components(g, directed=False)
                nloops = len(np.unique(pc[e[:, 0]]))
            else:
                nloops = 0
            out.append((ncomp, nloops, chi))
        return out

    @cached_property
    def voronoi_edges(self):
        """Boundary chains as (label pair, point-id list, closed)."""
        edges, t0, t1, _ = self._edges
        lab = self.sub_label
        inner = t1 >= 0
        seg = inner & (lab[t0] != lab[np.where(inner, t1, 0)])
        e = edges[seg]
        pairs = np.sort(np.column_stack([lab[t0[seg]], lab[t1[seg]]]), axis=1)
        nbr = {}
        for (a, b), pr in zip(e.tolist(), pairs.tolist()):
            nbr.setdefault(a, []).append((b, tuple(pr)))
            nbr.setdefault(b, []).append((a, tuple(pr)))
        used = set()
        chains = []
        ends = sorted(v for v, lst in nbr.items() if len(lst) != 2)
        for s in ends:
            for w, pr in nbr[s]:
                if (min(s, w), max(s, w)) in used:
                    continue
                path = [s]
                prev, cur = s, w
                used.add((min(s, w), max(s, w)))
                while True:
                    path.append(cur)
                    if len(nbr[cur]) != 2:
                        break
                    nxt = [x for x, _ in nbr[cur] if x != prev]
                    if not nxt:
                        break
                    key = (min(cur, nxt[0]), max(cur, nxt[0]))
                    if key in used:
                        break
                    used.add(key)
                    prev, cur = cur, nxt[0]
                chains.append((pr, path, False))
        for s in sorted(nbr):
            for w, pr in nbr[s]:
                key = (min(s, w), max(s, w))
                if key in used:
                    continue
                used.add(key)
                path = [s]
                prev, cur = s, w
                while cur != s:
                    path.append(cur)
                    nxt = [x for x, _ in nbr[cur] if x != prev][0]
                    used.add((min(cur, nxt), max(cur, nxt)))
                    prev, cur = cur, nxt
                chains.append((pr, path, True))
        return chains

    @property
    def branch_points(self) -> list:
        """Point ids where three cells meet."""
        return sorted(self.center_labels)

    def cell_branch_points(self, i: int) -> list:
        return [p for p, labs in sorted(self.center_labels.items()) if i in labs]

    @cached_property
    def adjacency(self) -> dict:
        adj = {}
        for pr, _, _ in self.voronoi_edges:
            adj[pr] = adj.get(pr, 0) + 1
        return adj

    def boundary_polylines(self):
        out = []
        for _, path, closed in self.voronoi_edges:
            out.append(list(path) + ([path[0]] if closed else []))
        return out


def build_gvt(mesh: TriMesh, generators, level: int = DEFAULT_LEVEL,
              graph: SteinerGraph = None) -> Tessellation:
    """Geodesic Voronoi tessellation of ``mesh`` by ``generators``."""
    generators = list(generators)
    if not generators:
        raise ValueError("at least one generator is required")
    if graph is None:
        graph = build_steiner_graph(mesh, level)
    pos = np.array([g.position(mesh) for g in generators])
    if len(pos) > 1:
        diff = np.linalg.norm(pos[:, None] - pos[None], axis=2)
        diff[np.diag_indices(len(pos))] = np.inf
        if diff.min() <= 1e-9:
            i, j = np.unravel_index(np.argmin(diff), diff.shape)
            raise ValueError(f"duplicate generators {min(i, j)} and {max(i, j)}")
    fld = distance_field(graph, generators)
    nv = mesh.n_vertices
    c_face, c_ids, c_bary, gen_vertex = _insert_generators(mesh, generators)

    ncv = nv + len(generators)
    cpos = np.vstack([mesh.vertices, pos])
    sd = np.concatenate([fld.dist[:nv], np.zeros(len(generators))])
    sl = np.concatenate([fld.label[:nv], np.arange(len(generators))])
    a = c_ids.ravel()
    b = np.roll(c_ids, -1, axis=1).ravel()
    key = np.unique(np.minimum(a, b) * ncv + np.maximum(a, b))
    ea, eb = key // ncv, key % ncv
    elen = np.linalg.norm(cpos[ea] - cpos[eb], axis=1)
    indptr, indices, weights = _csr(ncv, ea, eb, elen)
    flat = c_ids.ravel()
    vt_idx = np.argsort(flat, kind="stable") // 3
    vt_ptr = np.searchsorted(np.sort(flat), np.arange(ncv + 1))
    d, label, src, ray = _kernels.unfolding_march(cpos, c_ids, vt_ptr, vt_idx, indptr, indices, weights,
                                        sd, sl, np.array(gen_vertex, dtype=np.int64))
    _, ncomp = _kernels.same_label_components(indptr, indices, label)
    d1, label1, src1, ray1 = d.copy(), label.copy(), src.copy(), ray.copy()
    _kernels.unfold_relax(cpos, c_ids, vt_ptr, vt_idx, d1, label1, src1, ray1, 50 * ncv, True)
    if _kernels.same_label_components(indptr, indices, label1)[1] == ncomp:
        d, label, src = d1, label1, src1
    else:
        # relabeling split a cell; keep the propagated labels
        _kernels.unfold_relax(cpos, c_ids, vt_ptr, vt_idx, d, label, src, ray, 50 * ncv, False)

    # distances to label l near a carrier vertex are measured from the
    # virtual source of a nearby l-labeled vertex
    src_cache = {}

    def source(u, lab):
        if label[u] == lab:
            return src[u]
        k = (u, lab)
        if k not in src_cache:
            best, bs = math.inf, None
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if label[w] == lab:
                    dw = np.linalg.norm(cpos[u] - src[w])
                    if dw < best:
                        best, bs = dw, src[w]
            src_cache[k] = bs
        return src_cache[k]

    # points: carrier vertices, then edge splits, then face centers
    p_face, p_bary, p_pos, p_d, p_kind = [], [], [], [], []
    split_id = {}

    def add_point(f, bary, dd, kind):
        p_face.append(f)
        p_bary.append(bary)
        p_pos.append(bary @ mesh.vertices[mesh.faces[f]])
        p_d.append(dd)
        p_kind.append(kind)
        return ncv + len(p_face) - 1

    def split(u, v, f, bu, bv):
        """Split point id on carrier edge (u, v) and its bary in face f."""
        k = (min(u, v), max(u, v))
        if k not in split_id:
            la, lb = label[k[0]], label[k[1]]
            # |p - sa| = |p - sb| is linear along the edge
            sa, sb = src[k[0]], source(k[0], lb)
            p0, p1 = cpos[k[0]], cpos[k[1]]
            g = 2.0 * (sb - sa)
            f0 = g @ p0 + sa @ sa - sb @ sb
            f1 = g @ p1 + sa @ sa - sb @ sb
            t = 0.5 if f0 == f1 else f0 / (f0 - f1)
            t = min(max(t, 0.0), 1.0)
            dd = float(np.linalg.norm((1 - t) * p0 + t * p1 - sa))
            b0, b1 = (bu, bv) if u < v else (bv, bu)
            split_id[k] = (add_point(f, (1 - t) * b0 + t * b1, dd, 1), t)
        pid, t = split_id[k]
        if u > v:
            t = 1 - t
        return pid, (1 - t) * bu + t * bv

    lab3 = label[c_ids]
    mono = (lab3[:, 0] == lab3[:, 1]) & (lab3[:, 1] == lab3[:, 2])
    s_face = [c_face[mono]]
    s_pts = [c_ids[mono]]
    s_bary = [c_bary[mono]]
    s_label = [lab3[mono, 0]]
    extra_face, extra_pts, extra_bary, extra_label = [], [], [], []
    center_labels = {}
    center_d = {}
    for t in np.nonzero(~mono)[0]:
        f = int(c_face[t])
        ids = [int(x) for x in c_ids[t]]
        B = c_bary[t]
        L = [int(label[x]) for x in ids]
        if L[0] != L[1] and L[1] != L[2] and L[0] != L[2]:
            s01, q01 = split(ids[0], ids[1], f, B[0], B[1])
            s12, q12 = split(ids[1], ids[2], f, B[1], B[2])
            s20, q20 = split(ids[2], ids[0], f, B[2], B[0])
            S = [source(ids[j], L[j]) for j in range(3)]
            P = cpos[ids]
            # equidistant from the three sources within the triangle's plane
            g1, g2 = 2.0 * (S[1] - S[0]), 2.0 * (S[2] - S[1])
            A = np.array([P @ g1, P @ g2, np.ones(3)])
            rhs = [S[1] @ S[1] - S[0] @ S[0], S[2] @ S[2] - S[1] @ S[1], 1.0]
            beta = None
            try:
                beta = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                pass
            if beta is None or not np.isfinite(beta).all() or beta.min() < -1e-12:
                beta = np.linalg.solve(B.T, (q01 + q12 + q20) / 3.0)
            beta = np.clip(beta, 0.0, None)
            beta /= beta.sum()
            cd = float(np.linalg.norm(beta @ P - S[0]))
            qc = beta @ B
            c = add_point(f, qc, cd, 2)
            center_labels[c] = tuple(L)
            pc = beta @ P
            for j in range(3):
                # differs from cd only when the fallback point was used
                center_d[(c, L[j])] = float(np.linalg.norm(pc - S[j]))
            ring = [((ids[0], s01, c, s20), (B[0], q01, qc, q20)),
                    ((ids[1], s12, c, s01), (B[1], q12, qc, q01)),
                    ((ids[2], s20, c, s12), (B[2], q20, qc, q12))]
            for k, (pp, qq) in enumerate(ring):
                for a_, b_, c_ in ((0, 1, 2), (0, 2, 3)):
                    extra_face.append(f)
                    extra_pts.append((pp[a_], pp[b_], pp[c_]))
                    extra_bary.append((qq[a_], qq[b_], qq[c_]))
                    extra_label.append(L[k])
        else:
            # rotate so that corner 2 is the odd one out
            r = [k for k in range(3) if L[k] != L[(k + 1) % 3] and L[k] != L[(k + 2) % 3]][0]
            o = [(r + 1) % 3, (r + 2) % 3, r]
            k0, k1, k2 = (ids[i] for i in o)
            b0, b1, b2 = (B[i] for i in o)
            s12, q12 = split(k1, k2, f, b1, b2)
            s20, q20 = split(k2, k0, f, b2, b0)
            for tri, bb, lab in (((s12, k2, s20), (q12, b2, q20), L[r]),
                                 ((k0, k1, s12), (b0, b1, q12), L[o[0]]),
                                 ((k0, s12, s20), (b0, q12, q20), L[o[0]])):
                extra_face.append(f)
                extra_pts.append(tri)
                extra_bary.append(bb)
                extra_label.append(lab)

    n_new = len(p_face)
    points = np.vstack([cpos] + ([np.array(p_pos)] if n_new else []))
    pt_d = np.concatenate([d, np.array(p_d, dtype=float)])
    pt_kind = np.concatenate([np.zeros(ncv, dtype=np.int64), np.array(p_kind, dtype=np.int64)])

    # per-point face/bary: carrier vertices take any incident carrier triangle
    pt_face = np.full(len(points), -1, dtype=np.int64)
    pt_bary = np.zeros((len(points), 3))
    order = np.argsort(c_ids.ravel(), kind="stable")[::-1]
    flat_ids = c_ids.ravel()[order]
    pt_face[flat_ids] = np.repeat(c_face, 3)[order]
    pt_bary[flat_ids] = c_bary.reshape(-1, 3)[order]
    for i, g in enumerate(generators):
        v = gen_vertex[i]
        if v >= nv:
            pt_face[v] = g.face
            pt_bary[v] = g.bary
    if n_new:
        pt_face[ncv:] = p_face
        pt_bary[ncv:] = np.array(p_bary)

    if extra_pts:
        ep = np.array(extra_pts, dtype=np.int64)
        ef = np.array(extra_face, dtype=np.int64)
        eb = np.array(extra_bary, dtype=float)
        s_face.append(ef)
        s_pts.append(ep)
        s_bary.append(eb)
        s_label.append(np.array(extra_label, dtype=np.int64))
    sub_face = np.concatenate(s_face)
    sub_pts = np.concatenate(s_pts)
    sub_bary = np.concatenate(s_bary)
    sub_label = np.concatenate(s_label)
    sub_d = pt_d[sub_pts]
    # a carrier vertex corner always belongs to its own label and split
    # points carry the shared distance; centers are measured per label
    if center_d:
        rows, cols = np.nonzero(pt_kind[sub_pts] == 2)
        sub_d[rows, cols] = [center_d[(int(sub_pts[r, k]), int(sub_label[r]))]
                             for r, k in zip(rows, cols)]
    unused = np.ones(len(points), dtype=bool)
    unused[sub_pts.ravel()] = False
    if unused.any():
        # mesh vertices replaced by coincident generators
        keep = np.nonzero(~unused)[0]
        remap = np.full(len(points), -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        sub_pts = remap[sub_pts]
        points, pt_face, pt_bary, pt_kind = points[keep], pt_face[keep], pt_bary[keep], pt_kind[keep]
        center_labels = {int(remap[c]): v for c, v in center_labels.items()}
    return Tessellation(mesh, graph, generators, fld, points, pt_face, pt_bary, pt_kind,
                        sub_face, sub_pts, sub_bary, sub_label, sub_d, center_labels)


# -- analysis -------------------------------------------------------------------

@dataclass
class CellReport:
    connected: list
    simply_connected: list
    n_loops: list

    @property
    def all_connected(self) -> bool:
        return all(self.connected)


def validate_cells(t: Tessellation) -> CellReport:
    """Connectivity of every cell and whether it is a topological disk."""
    conn, simple, loops = [], [], []
    for ncomp, nloops, chi in t.cells:
        conn.append(ncomp == 1)
        simple.append(ncomp == 1 and nloops == 1 and chi == 1)
        loops.append(nloops)
    return CellReport(conn, simple, loops)


@dataclass
class CombinatorialStats:
    m: int
    genus: int
    n_branch: int
    n_edges: int
    n_loops_per_cell: list
    closed_ball: bool
    branch_degrees: list

    def expected_counts(self):
        """Euler-formula counts (n_branch, n_edges) for degree-3 closed-ball tessellations."""
        c = self.m - 2 + 2 * self.genus
        return 2 * c, 3 * c


def combinatorial_stats(t: Tessellation) -> CombinatorialStats:
    mesh = t.mesh
    g = mesh_genus(mesh) if mesh.is_closed else 0
    report = validate_cells(t)
    chains = t.voronoi_edges
    degrees = [3] * len(t.center_labels)
    closed_ball = (
        len(t.center_labels) > 0
        and all(report.simply_connected)
        and all(n == 1 for n in t.adjacency.values())
        and not any(closed or path[0] == path[-1] for _, path, closed in chains)
        and len({tuple(sorted(v)) for v in t.center_labels.values()}) == len(t.center_labels)
    )
    return CombinatorialStats(t.m, g, len(t.center_labels), len(chains), report.n_loops,
                              bool(closed_ball), degrees)


def _sub_energies(t: Tessellation) -> np.ndarray:
    # squared distance to a point source has Hessian 2I, so it is fitted per
    # sub-triangle by |x|^2 + linear and integrated exactly by the edge-midpoint rule
    d2 = t.sub_d ** 2
    p = t.points[t.sub_pts]
    l2 = ((p - np.roll(p, -1, axis=1)) ** 2).sum(-1)
    fm = np.maximum(0.5 * (d2 + np.roll(d2, -1, axis=1)) - 0.25 * l2, 0.0)
    rho = t.sub_rho
    rm = 0.5 * (rho + np.roll(rho, -1, axis=1))
    return t.sub_areas / 3.0 * (fm * rm).sum(1)


def gcvt_energy(t: Tessellation) -> float:
    """Density-weighted integral of squared distance to the owning generator."""
    return float(_sub_energies(t).sum())


def cell_energies(t: Tessellation) -> np.ndarray:
    return np.bincount(t.sub_label, weights=_sub_energies(t), minlength=t.m)


# -- dual triangulation -----------------------------------------------------------

@dataclass
class DualMesh:
    vertices: np.ndarray
    edges: list
    triangles: list
    valid: bool
    reason: str = ""

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.triangles)


def dual_idt(t: Tessellation) -> DualMesh:
    """Generators joined across Voronoi edges, one triangle per branch point."""
    verts = np.array([g.position(t.mesh) for g in t.generators])
    edges = [pr for pr, _, _ in t.voronoi_edges]
    tris = [t.center_labels[c] for c in t.branch_points]
    reason = ""
    if not tris:
        reason = "no branch points"
    elif len(set(edges)) != len(edges):
        reason = "repeated dual edge"
    elif len({tuple(sorted(x)) for x in tris}) != len(tris):
        reason = "repeated dual triangle"
    else:
        count = {e: 0 for e in edges}
        for a, b, c in tris:
            for e in ((a, b), (b, c), (c, a)):
                e = (min(e), max(e))
                if e not in count:
                    reason = "triangle edge without a Voronoi edge"
                    break
                count[e] += 1
            if reason:
                break
        if not reason and t.mesh.is_closed and any(v != 2 for v in count.values()):
            reason = "dual edge not shared by two triangles"
    return DualMesh(verts, sorted(set(edges)), [tuple(int(x) for x in tr) for tr in tris],
                    not reason, reason)


# -- export ---------------------------------------------------------------------------

def cell_colors(m: int) -> np.ndarray:
    """Distinct deterministic colors from golden-ratio hue stepping."""
    import colorsys
    return np.array([colorsys.hsv_to_rgb((0.61803398875 * i) % 1.0, 0.65, 0.95) for i in range(m)])


def write_cells_obj(t: Tessellation, path):
    from pathlib import Path
    path = Path(path)
    mtl = path.with_suffix(".mtl")
    cols = cell_colors(t.m)
    lines = []
    for i, c in enumerate(cols):
        lines += [f"newmtl cell_{i}", f"Kd {c[0]:.4f} {c[1]:.4f} {c[2]:.4f}", ""]
    mtl.write_text("\n".join(lines))
    groups = [(f"cell_{i}", t.sub_pts[t.sub_label == i]) for i in range(t.m)]
    write_obj(path, t.points, mtllib=mtl.name, groups=groups)


def write_boundary_obj(t: Tessellation, path):
    write_obj(path, t.points, lines=t.boundary_polylines())


def write_dual_obj(dual: DualMesh, path):
    write_obj(path, dual.vertices, faces=np.array(dual.triangles, dtype=int).reshape(-1, 3))


def stats_dict(t: Tessellation, stats: CombinatorialStats = None, energy: float = None) -> dict:
    stats = stats or combinatorial_stats(t)
    return {
        "m": stats.m,
        "genus": stats.genus,
        "n_branch": stats.n_branch,
        "n_edges": stats.n_edges,
        "closed_ball": stats.closed_ball,
        "energy": float(gcvt_energy(t) if energy is None else energy),
    }


def write_stats_json(t: Tessellation, path, extra: dict = None):
    d = stats_dict(t)
    if extra:
        d.update(extra)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return d
