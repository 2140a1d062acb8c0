"""Discrete geodesics on triangle meshes.

Distances come from a Steiner-point graph: every mesh edge carries
``level`` evenly spaced extra nodes and all boundary nodes of a face are
joined by straight in-face arcs.  Graph paths are realizable surface paths,
so graph distances bound the true geodesic distance from above and
converge to it as ``level`` grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .mesh import SurfacePoint, TangentVector, TriMesh, planar_barycentric

DEFAULT_LEVEL = 4


class BoundaryHit(RuntimeError):
    """A traced geodesic reached a boundary edge before its full length."""

    def __init__(self, point, traveled):
        super().__init__(f"geodesic hit the mesh boundary after length {traveled:.6g}")
        self.point = point
        self.traveled = traveled


@dataclass(eq=False)
class SteinerGraph:
    mesh: TriMesh
    level: int
    positions: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    face_nodes: np.ndarray
    node_edge: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_arcs(self) -> int:
        """Undirected arc count."""
        return len(self.indices) // 2

    def node_faces(self, node: int) -> np.ndarray:
        e = self.node_edge[node]
        if e < 0:
            return self.mesh.vertex_faces(node)
        ef = self.mesh.edge_faces[e]
        return ef[ef >= 0]

    def arc_weight(self, u: int, v: int) -> float:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        k = lo + int(np.searchsorted(self.indices[lo:hi], v))
        if k >= hi or self.indices[k] != v:
            raise KeyError((u, v))
        return float(self.weights[k])

    @cached_property
    def max_arc(self) -> float:
        return float(self.weights.max())


def build_steiner_graph(mesh: TriMesh, level: int = DEFAULT_LEVEL) -> SteinerGraph:
    """Steiner-refined edge graph with ``V + level * E`` nodes.

    Node order: mesh vertices, then edge points by edge index and parameter.
    Arcs join every pair of boundary nodes of each face.
    """
    level = int(level)
    if level < 0:
        raise ValueError("level must be nonnegative")
    nv, ne = mesh.n_vertices, mesh.n_edges
    edges = mesh.edges
    pos = [mesh.vertices]
    node_edge = [np.full(nv, -1, dtype=np.int64)]
    if level:
        t = np.arange(1, level + 1) / (level + 1)
        pa = mesh.vertices[edges[:, 0]][:, None, :]
        pb = mesh.vertices[edges[:, 1]][:, None, :]
        pe = pa * (1 - t)[None, :, None] + pb * t[None, :, None]
        pos.append(pe.reshape(-1, mesh.dim))
        node_edge.append(np.repeat(np.arange(ne), level))
    positions = np.vstack(pos)
    node_edge = np.concatenate(node_edge)

    f = mesh.faces
    cols = []
    for k in range(3):
        cols.append(f[:, k:k + 1])
        if level:
            e = mesh.face_edges[:, k]
            fwd = edges[e, 0] == f[:, k]
            base = nv + e[:, None] * level
            ramp = np.arange(level)[None, :]
            cols.append(np.where(fwd[:, None], base + ramp, base + level - 1 - ramp))
    face_nodes = np.hstack(cols)

    iu, ju = np.triu_indices(face_nodes.shape[1], 1)
    a = face_nodes[:, iu].ravel()
    b = face_nodes[:, ju].ravel()
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    n = len(positions)
    key = np.unique(lo * n + hi)
    lo, hi = key // n, key % n
    w = np.linalg.norm(positions[lo] - positions[hi], axis=1)
    rows = np.concatenate([lo, hi])
    cols_ = np.concatenate([hi, lo])
    ww = np.concatenate([w, w])
    order = np.lexsort((cols_, rows))
    rows, cols_, ww = rows[order], cols_[order], ww[order]
    indptr = np.searchsorted(rows, np.arange(n + 1)).astype(np.int64)
    return SteinerGraph(mesh, level, positions, indptr, cols_.astype(np.int64), ww,
                        face_nodes, node_edge)


def containing_faces(mesh: TriMesh, p: SurfacePoint) -> list:
    """All faces whose closure contains ``p`` (one, two or a vertex fan)."""
    b = np.asarray(p.bary)
    nz = np.nonzero(b > 1e-12)[0]
    if len(nz) == 3:
        return [p.face]
    if len(nz) == 2:
        i, j = nz
        k = i if (i + 1) % 3 == j else j
        g = mesh.face_neighbor(p.face, int(k))
        return [p.face] if g < 0 else [p.face, g]
    v = int(mesh.faces[p.face, nz[0]])
    return [p.face] + [int(g) for g in mesh.vertex_faces(v) if g != p.face]


def _point_seeds(graph, p, label):
    faces = containing_faces(graph.mesh, p)
    nodes = np.unique(graph.face_nodes[faces].ravel())
    x = p.position(graph.mesh)
    d = np.linalg.norm(graph.positions[nodes] - x, axis=1)
    return nodes, d, np.full(len(nodes), label, dtype=np.int64)


@dataclass(eq=False)
class DistanceField:
    """Nearest-source distances, labels and predecessors over graph nodes.

    ``pred[v] = -1 - i`` marks a node reached directly from source ``i``.
    """

    graph: SteinerGraph
    sources: list
    dist: np.ndarray
    label: np.ndarray
    pred: np.ndarray

    @cached_property
    def _source_faces(self):
        return [set(containing_faces(self.graph.mesh, s)) for s in self.sources]

    @cached_property
    def _source_pos(self):
        return np.array([s.position(self.graph.mesh) for s in self.sources])

    def query(self, p: SurfacePoint):
        """Distance, label and entry for an arbitrary surface point.

        ``entry`` is the last graph node of the shortest path, or ``-1 - i``
        when the path runs straight from source ``i`` inside a shared face.
        """
        g = self.graph
        faces = containing_faces(g.mesh, p)
        x = p.position(g.mesh)
        nodes = np.unique(g.face_nodes[faces].ravel())
        cand = self.dist[nodes] + np.linalg.norm(g.positions[nodes] - x, axis=1)
        labs = self.label[nodes]
        best = (math.inf, -1, -1)
        if len(nodes):
            order = np.lexsort((labs, cand))
            i = order[0]
            best = (float(cand[i]), int(labs[i]), int(nodes[i]))
        fs = set(faces)
        for i, sf in enumerate(self._source_faces):
            if sf & fs:
                d = float(np.linalg.norm(self._source_pos[i] - x))
                if d < best[0] or (d == best[0] and i < best[1]):
                    best = (d, i, -1 - i)
        return best

    def distance(self, p: SurfacePoint) -> float:
        return self.query(p)[0]

    def path_nodes(self, p: SurfacePoint):
        """Source index and graph nodes from the source towards ``p``."""
        _, lab, entry = self.query(p)
        nodes = []
        v = entry
        while v >= 0:
            nodes.append(v)
            v = int(self.pred[v])
        src = -1 - v
        nodes.reverse()
        return src, nodes

    def path(self, p: SurfacePoint):
        """Shortest graph path to ``p`` as (points, segment faces).

        ``points`` runs from the source to ``p``; ``faces[i]`` is a face
        containing segment ``points[i] -> points[i+1]``.
        """
        g = self.graph
        src, nodes = self.path_nodes(p)
        s = self.sources[src]
        pts = [s.position(g.mesh)] + [g.positions[n] for n in nodes] + [p.position(g.mesh)]
        sets = ([set(containing_faces(g.mesh, s))]
                + [set(int(f) for f in g.node_faces(n)) for n in nodes]
                + [set(containing_faces(g.mesh, p))])
        faces = []
        for i in range(len(sets) - 1):
            common = sets[i] & sets[i + 1]
            if not common:
                raise RuntimeError("path segment without a common face")
            faces.append(min(common))
        return np.array(pts), faces

    def export(self, path):
        with open(path, "w") as fh:
            for i, (d, lab) in enumerate(zip(self.dist, self.label)):
                fh.write(f"{i} {d:.17g} {lab}\n")


def distance_field(graph: SteinerGraph, sources, limit: float = math.inf) -> DistanceField:
    """Multi-source shortest paths over the Steiner graph.

    Sources are arbitrary surface points, attached by temporary arcs to the
    boundary nodes of their face(s).  Equidistant nodes take the lowest
    source index.
    """
    sources = list(sources)
    if not sources:
        raise ValueError("at least one source is required")
    seeds = [_point_seeds(graph, s, i) for i, s in enumerate(sources)]
    sn = np.concatenate([s[0] for s in seeds]).astype(np.int64)
    sd = np.concatenate([s[1] for s in seeds])
    sl = np.concatenate([s[2] for s in seeds])
    dist, label, pred = _kernels.dijkstra_labeled(
        graph.indptr, graph.indices, graph.weights, graph.n_nodes, sn, sd, sl, float(limit))
    return DistanceField(graph, sources, dist, label, pred)


def local_field(graph: SteinerGraph, x: SurfacePoint, targets, factor: float = 2.0) -> DistanceField:
    """Single-source field from ``x`` searched only as far as ``targets`` need.

    The search radius is ``factor`` times the largest straight-line distance
    to a target plus two arc lengths; if any target is still unreached the
    search is repeated without a radius.
    """
    mesh = graph.mesh
    px = x.position(mesh)
    reach = max((np.linalg.norm(t.position(mesh) - px) for t in targets), default=0.0)
    limit = factor * reach + 2 * graph.max_arc
    fld = distance_field(graph, [x], limit)
    if all(np.isfinite(fld.distance(t)) for t in targets):
        return fld
    return distance_field(graph, [x])


# -- isocontours --------------------------------------------------------------

@dataclass
class Isocontour:
    points: np.ndarray
    closed: bool

    @property
    def length(self) -> float:
        p = self.points
        seg = np.linalg.norm(np.diff(p, axis=0), axis=1).sum()
        if self.closed:
            seg += np.linalg.norm(p[0] - p[-1])
        return float(seg)


def extract_isocontours(field: DistanceField, value: float, mesh: TriMesh = None):
    """Level set ``{d = value}`` of the vertex distances, traced face by face.

    Distances are interpolated linearly inside each face from the three
    corner values.  Returns a list of :class:`Isocontour`.
    """
    if value < 0:
        raise ValueError("isocontour value must be nonnegative")
    mesh = mesh or field.graph.mesh
    d = field.dist[:mesh.n_vertices]
    above = d >= value
    e = mesh.edges
    cross = above[e[:, 0]] != above[e[:, 1]]
    if not cross.any():
        return []
    da, db = d[e[:, 0]], d[e[:, 1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, (value - da) / (db - da), 0.0)
    pts = mesh.vertices[e[:, 0]] * (1 - t)[:, None] + mesh.vertices[e[:, 1]] * t[:, None]
    fe = mesh.face_edges
    fc = cross[fe]
    mixed = np.nonzero(fc.any(1))[0]
    nbr = {}
    for f in mixed:
        a, b = fe[f][fc[f]]
        nbr.setdefault(int(a), []).append(int(b))
        nbr.setdefault(int(b), []).append(int(a))
    seen = set()
    out = []
    # open chains start at degree-1 crossings on boundary edges
    starts = sorted(k for k, v in nbr.items() if len(v) == 1) + sorted(nbr)
    for s in starts:
        if s in seen:
            continue
        chain = [s]
        seen.add(s)
        prev, cur = None, s
        while True:
            nxt = [x for x in nbr[cur] if x != prev and x not in seen]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)
        closed = len(nbr[s]) == 2 and s in nbr[chain[-1]] and len(chain) > 2
        out.append(Isocontour(pts[chain], closed))
    return out


def write_polylines_obj(path, contours):
    lines = []
    verts = []
    for c in contours:
        start = len(verts)
        verts.extend(c.points)
        idx = list(range(start, start + len(c.points)))
        if c.closed:
            idx.append(start)
        lines.append(idx)
    from .mesh import write_obj
    write_obj(path, np.array(verts).reshape(-1, 3) if verts else np.zeros((0, 3)),
              lines=lines)


# -- tangent-space operators ----------------------------------------------------

def _rot(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def _edge_transform(mesh, f, g, R, t):
    """Rigid map of face ``g``'s frame into the plane of face ``f``'s map (R, t)."""
    fv = list(mesh.faces[f])
    gv = list(mesh.faces[g])
    shared = [v for v in fv if v in gv]
    if len(shared) != 2:
        raise ValueError(f"faces {f} and {g} do not share an edge")
    a, b = shared
    ua, ub = mesh.face_uv[f][fv.index(a)], mesh.face_uv[f][fv.index(b)]
    va, vb = mesh.face_uv[g][gv.index(a)], mesh.face_uv[g][gv.index(b)]
    pa = R @ ua + t
    pb = R @ ub + t
    ang = math.atan2(*(pb - pa)[::-1]) - math.atan2(*(vb - va)[::-1])
    Rg = _rot(ang)
    return Rg, pa - Rg @ va


def _fan(mesh, v, f, g):
    """Faces around vertex ``v`` from ``f`` to ``g`` along the shorter side."""
    best = None
    for side in (0, 1):
        seq = [f]
        cur = f
        for _ in range(len(mesh.vertex_faces(v)) + 1):
            fv = list(mesh.faces[cur])
            k = fv.index(v)
            # side 0 crosses the outgoing edge (v, next), side 1 the incoming one
            edge = k if side == 0 else (k + 2) % 3
            nxt = mesh.face_neighbor(cur, edge)
            if nxt < 0:
                seq = None
                break
            seq.append(nxt)
            cur = nxt
            if cur == g:
                break
        if seq is not None and seq[-1] == g and (best is None or len(seq) < len(best)):
            best = seq
    if best is None:
        raise ValueError(f"faces {f} and {g} are not connected around vertex {v}")
    return best


def _connect(mesh, f, g, R, t, allow_vertex=True):
    """Carry the map (R, t) of face ``f`` over to face ``g``."""
    if f == g:
        return R, t
    fv = set(int(x) for x in mesh.faces[f])
    gv = set(int(x) for x in mesh.faces[g])
    shared = fv & gv
    if len(shared) == 2:
        return _edge_transform(mesh, f, g, R, t)
    if len(shared) == 1 and allow_vertex:
        seq = _fan(mesh, shared.pop(), f, g)
        for a, b in zip(seq[:-1], seq[1:]):
            R, t = _edge_transform(mesh, a, b, R, t)
        return R, t
    raise ValueError(f"faces {f} and {g} are not edge-adjacent")


def _is_flat_vertex(mesh, v, eps=1e-9):
    return (not mesh.boundary_vertices[v]) and abs(mesh.angle_sums[v] - 2 * math.pi) <= eps


def _unfold_polyline(mesh, base_face, points, faces):
    """Unfold a surface polyline into the plane of ``base_face``.

    Unfolding continues across shared edges and through intrinsically flat
    vertices, and stops at any other vertex.  Returns the unfolded position
    of the last reachable point and whether the whole polyline unfolded.
    """
    R, t = np.eye(2), np.zeros(2)
    cur = base_face
    for i, f in enumerate(faces):
        if f != cur:
            shared = set(int(x) for x in mesh.faces[cur]) & set(int(x) for x in mesh.faces[f])
            if len(shared) == 2:
                R, t = _edge_transform(mesh, cur, f, R, t)
            elif len(shared) == 1 and _is_flat_vertex(mesh, next(iter(shared))):
                R, t = _connect(mesh, cur, f, R, t)
            else:
                q = R @ mesh.to_face_plane(cur, points[i]) + t
                return q, False
            cur = f
    return R @ mesh.to_face_plane(cur, points[-1]) + t, True


def trace_geodesic(mesh: TriMesh, start: SurfacePoint, direction, length: float,
                   max_steps: int = 1_000_000):
    """Walk a straightest path from ``start``.

    ``direction`` is a 2-vector in the start face frame.  Returns the end
    point and the traced 3D polyline.  Raises :class:`BoundaryHit` when the
    path leaves the mesh.
    """
    f = start.face
    uv = np.asarray(start.bary) @ mesh.face_uv[f]
    d = np.asarray(direction, dtype=float)
    nd = math.hypot(d[0], d[1])
    poly = [start.position(mesh)]
    if length <= 0 or nd == 0:
        return start, np.array(poly)
    d = d / nd
    remaining = float(length)
    traveled = 0.0
    entry = -1
    nudges = 0
    for _ in range(max_steps):
        tri = mesh.face_uv[f]
        b = planar_barycentric(tri, uv)
        db = planar_barycentric(tri, uv + d) - b
        best, bi = math.inf, -1
        for i in range(3):
            if i == entry or db[i] >= -1e-15:
                continue
            s = max(b[i], 0.0) / -db[i]
            if s < best:
                best, bi = s, i
        if bi < 0 or remaining <= best:
            uv = uv + remaining * d
            traveled += remaining
            bb = planar_barycentric(tri, uv)
            bb = np.clip(bb, 0.0, None)
            end = SurfacePoint(f, tuple(bb / bb.sum()))
            poly.append(end.position(mesh))
            return end, np.array(poly)
        exit_uv = uv + best * d
        be = planar_barycentric(tri, exit_uv)
        near_vertex = any(abs(be[j]) < 1e-9 for j in range(3) if j != bi)
        if near_vertex and nudges < 64:
            d = _rot(1e-7) @ d
            nudges += 1
            continue
        nudges = 0
        k = (bi + 1) % 3
        g = mesh.face_neighbor(f, k)
        traveled += best
        remaining -= best
        if g < 0:
            be = np.clip(be, 0.0, None)
            raise BoundaryHit(SurfacePoint(f, tuple(be / be.sum())), traveled)
        fv = list(mesh.faces[f])
        gv = list(mesh.faces[g])
        a, c = fv[k], fv[(k + 1) % 3]
        ua, uc = tri[k], tri[(k + 1) % 3]
        ga, gc = mesh.face_uv[g][gv.index(a)], mesh.face_uv[g][gv.index(c)]
        lam = np.linalg.norm(exit_uv - ua) / np.linalg.norm(uc - ua)
        ang = math.atan2(*(gc - ga)[::-1]) - math.atan2(*(uc - ua)[::-1])
        d = _rot(ang) @ d
        uv = ga + lam * (gc - ga)
        # entering through edge (c, a) of g: the coordinate of g's third corner
        # is the one that is zero on that edge
        entry = 3 - gv.index(a) - gv.index(c)
        f = g
        poly.append(mesh.from_face_plane(f, uv))
    raise RuntimeError("geodesic trace did not terminate")


def exp_map(x: SurfacePoint, v: TangentVector, mesh: TriMesh = None) -> SurfacePoint:
    """Endpoint of the straightest path from ``x`` with initial velocity ``v``."""
    if mesh is None:
        raise TypeError("exp_map needs the mesh")
    if v.base.face != x.face:
        raise ValueError("tangent vector must be based in the face of x")
    end, _ = trace_geodesic(mesh, x, v.direction, v.magnitude)
    return end


def log_map(x: SurfacePoint, y: SurfacePoint, graph: SteinerGraph,
            field: DistanceField = None) -> TangentVector:
    """Initial direction and length of the geodesic from ``x`` to ``y``.

    The graph path from ``x`` is unfolded into the plane of ``x``'s face.
    When the unfolding is complete and a straight trace along the unfolded
    chord lands on ``y``, the chord is an exact geodesic and its length is
    used; otherwise the graph distance is returned with the direction of
    the unfolded prefix.  ``field`` may be a precomputed single-source field
    from ``x``.
    """
    mesh = graph.mesh
    px, py = x.position(mesh), y.position(mesh)
    scale = mesh.diameter
    if np.linalg.norm(px - py) <= 1e-12 * scale:
        return TangentVector(x)
    xf = containing_faces(mesh, x)
    yf = containing_faces(mesh, y)
    common = sorted(set(xf) & set(yf))
    uvx = np.asarray(x.bary) @ mesh.face_uv[x.face]
    if common:
        q, _ = _unfold_polyline(mesh, x.face, [px, py], [common[0]])
        return TangentVector.from_planar(x, q - uvx)
    if field is None:
        field = local_field(graph, x, [y])
    pts, faces = field.path(y)
    q, complete = _unfold_polyline(mesh, x.face, pts, faces)
    chord = q - uvx
    L = float(np.hypot(*chord))
    if complete and L > 0:
        try:
            end, _ = trace_geodesic(mesh, x, chord, L)
            if np.linalg.norm(end.position(mesh) - py) <= 1e-7 * scale:
                return TangentVector.from_planar(x, chord)
        except BoundaryHit:
            pass
    return TangentVector(x, tuple(chord), field.distance(y))


def parallel_transport(v: TangentVector, path, mesh: TriMesh) -> TangentVector:
    """Carry ``v`` along a chain of surface points by unfolding their faces.

    Consecutive faces must share an edge or a vertex; around a vertex the
    shorter side of the fan is unfolded.  The magnitude is preserved
    exactly and the result is based at the last path point.
    """
    path = list(path)
    if not path:
        return v
    R, t = np.eye(2), np.zeros(2)
    cur = v.base.face
    for p in path:
        R, t = _connect(mesh, cur, p.face, R, t)
        cur = p.face
    d = R.T @ np.asarray(v.direction)
    return TangentVector(path[-1], tuple(d), v.magnitude)


def path_points(field: DistanceField, target: SurfacePoint) -> list:
    """Graph path to ``target`` as surface points based in the segment faces."""
    mesh = field.graph.mesh
    pts, faces = field.path(target)
    out = []
    for p, f in zip(pts[1:-1], faces):
        b = np.clip(mesh.barycentric(f, p), 0.0, None)
        out.append(SurfacePoint(f, tuple(b / b.sum())))
    if faces:
        b = np.clip(mesh.barycentric(faces[-1], pts[-1]), 0.0, None)
        out.append(SurfacePoint(faces[-1], tuple(b / b.sum())))
    out.append(target)
    return out


def move_along(x: SurfacePoint, y: SurfacePoint, s: float, graph: SteinerGraph,
               field: DistanceField = None) -> SurfacePoint:
    """Point a fraction ``s`` of the way along the geodesic from x to y."""
    if s >= 1.0:
        return y
    v = log_map(x, y, graph, field)
    if v.magnitude == 0 or s <= 0:
        return x
    try:
        return exp_map(x, v.scaled(s), graph.mesh)
    except BoundaryHit as hit:
        return hit.point
