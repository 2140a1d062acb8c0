"""Indexed triangle meshes, surface points and tangent vectors."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class MeshError(ValueError):
    """Raised for unreadable or invalid mesh input.

    ``line`` is the 1-based line number in the source file when the failure
    can be pinned to one.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class SurfacePoint:
    """A point on a mesh given by a face index and barycentric coordinates."""

    face: int
    bary: tuple

    def __post_init__(self):
        b = np.asarray(self.bary, dtype=float)
        if b.shape != (3,):
            raise ValueError("barycentric coordinates need 3 entries")
        s = b.sum()
        if abs(s - 1.0) > 1e-9 or b.min() < -1e-9:
            raise ValueError(f"invalid barycentric coordinates {tuple(b)}")
        b = np.clip(b, 0.0, None)
        b = b / b.sum()
        object.__setattr__(self, "face", int(self.face))
        object.__setattr__(self, "bary", tuple(float(x) for x in b))

    def position(self, mesh: TriMesh) -> np.ndarray:
        return np.asarray(self.bary) @ mesh.vertices[mesh.faces[self.face]]

    @classmethod
    def at_vertex(cls, mesh: TriMesh, v: int) -> SurfacePoint:
        f = int(mesh.vertex_faces(v)[0])
        b = [0.0, 0.0, 0.0]
        b[int(np.nonzero(mesh.faces[f] == v)[0][0])] = 1.0
        return cls(f, tuple(b))

    def key(self):
        return (self.face,) + self.bary


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector stored as a unit direction in the base face frame."""

    base: SurfacePoint
    direction: tuple = (0.0, 0.0)
    magnitude: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        m = float(self.magnitude)
        if m < 0:
            raise ValueError("magnitude must be nonnegative")
        n = float(np.hypot(d[0], d[1]))
        if m == 0.0 or n == 0.0:
            d = np.zeros(2)
            m = 0.0
        else:
            d = d / n
        object.__setattr__(self, "direction", (float(d[0]), float(d[1])))
        object.__setattr__(self, "magnitude", m)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.direction) * self.magnitude

    def scaled(self, s: float) -> TangentVector:
        if s < 0:
            return TangentVector(self.base, tuple(-np.asarray(self.direction)),
                                 -s * self.magnitude)
        return TangentVector(self.base, self.direction, s * self.magnitude)

    @classmethod
    def from_planar(cls, base: SurfacePoint, vec) -> TangentVector:
        vec = np.asarray(vec, dtype=float)
        return cls(base, tuple(vec), float(np.hypot(vec[0], vec[1])))


@dataclass(eq=False)
class TriMesh:
    """Triangle 2-manifold embedded in R^n (n >= 3).

    Parameters
    ----------
    vertices : array_like, shape (V, n)
    faces : array_like of int, shape (F, 3)
    density : array_like, shape (V,), optional
        Nonnegative per-vertex density, linearly interpolated over faces.

    Construction validates manifoldness, consistent orientation, isolated
    vertices and degenerate faces.  The mesh is treated as immutable.
    """

    vertices: np.ndarray
    faces: np.ndarray
    density: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] < 2:
            raise MeshError("vertices must be an (V, n) array")
        if v.shape[1] == 2:
            v = np.column_stack([v, np.zeros(len(v))])
        if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
            raise MeshError("faces must be a non-empty (F, 3) array")
        if f.min() < 0 or f.max() >= len(v):
            raise MeshError("face index out of range")
        rep = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
        if rep.any():
            raise MeshError(f"degenerate face {int(np.argmax(rep))}: repeated vertex index")
        v.setflags(write=False)
        f.setflags(write=False)
        self.vertices = v
        self.faces = f
        if self.density is None:
            rho = np.ones(len(v))
        else:
            rho = np.asarray(self.density, dtype=float)
            if rho.shape != (len(v),):
                raise MeshError("density needs one value per vertex")
            if (rho < 0).any() or not np.isfinite(rho).all():
                raise MeshError("density must be finite and nonnegative")
        rho.setflags(write=False)
        self.density = rho
        used = np.zeros(len(v), dtype=bool)
        used[f.ravel()] = True
        if not used.all():
            raise MeshError(f"isolated vertex {int(np.argmin(used))}")
        area = self.face_areas
        if (area <= 0).any():
            raise MeshError(f"zero-area face {int(np.argmax(area <= 0))}")
        self._build_connectivity()

    # -- connectivity -------------------------------------------------------

    def _build_connectivity(self):
        f = self.faces
        nv = len(self.vertices)
        a = f.ravel()
        b = np.roll(f, -1, axis=1).ravel()
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        key = lo * nv + hi
        uniq, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
        if (counts > 2).any():
            e = int(uniq[np.argmax(counts > 2)])
            raise MeshError(f"non-manifold edge ({e // nv}, {e % nv}) shared by "
                            f"{int(counts.max())} faces")
        self.edges = np.column_stack([uniq // nv, uniq % nv])
        self.face_edges = inv.reshape(-1, 3)
        # halfedge h = 3*f + k runs faces[f, k] -> faces[f, k+1]
        dkey = a * nv + b
        order = np.argsort(dkey, kind="stable")
        sd = dkey[order]
        if (np.diff(sd) == 0).any():
            raise MeshError("inconsistent face orientation")
        rkey = b * nv + a
        pos = np.searchsorted(sd, rkey)
        pos_c = np.minimum(pos, len(sd) - 1)
        hit = sd[pos_c] == rkey
        twin = np.where(hit, order[pos_c], -1)
        self.twin = twin
        ne = len(self.edges)
        ef = np.full((ne, 2), -1, dtype=np.int64)
        fidx = np.repeat(np.arange(len(f)), 3)
        srt = np.lexsort((fidx, inv))
        inv_s, f_s = inv[srt], fidx[srt]
        starts = np.r_[True, inv_s[1:] != inv_s[:-1]]
        ef[inv_s[starts], 0] = f_s[starts]
        ef[inv_s[~starts], 1] = f_s[~starts]
        self.edge_faces = ef
        for arr in (self.edges, self.face_edges, self.twin, self.edge_faces):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.nonzero(self.edge_faces[:, 1] < 0)[0]

    @property
    def is_closed(self) -> bool:
        return len(self.boundary_edges) == 0

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    @cached_property
    def n_boundary_loops(self) -> int:
        """Connected components of the boundary-edge graph."""
        e = self.edges[self.boundary_edges]
        if len(e) == 0:
            return 0
        vs, inv = np.unique(e, return_inverse=True)
        inv = inv.reshape(-1, 2)
        g = coo_matrix((np.ones(len(e)), (inv[:, 0], inv[:, 1])), shape=(len(vs), len(vs)))
        return int(connected_components(g, directed=False)[0])

    @cached_property
    def _vf(self):
        f = self.faces.ravel()
        order = np.argsort(f, kind="stable")
        indptr = np.searchsorted(f[order], np.arange(self.n_vertices + 1))
        return indptr, order // 3

    def vertex_faces(self, v: int) -> np.ndarray:
        indptr, faces = self._vf
        return faces[indptr[v]:indptr[v + 1]]

    @cached_property
    def vertex_neighbors(self):
        """CSR ``(indptr, indices)`` of the vertex-edge graph."""
        e = self.edges
        nv = self.n_vertices
        rows = np.r_[e[:, 0], e[:, 1]]
        cols = np.r_[e[:, 1], e[:, 0]]
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        indptr = np.searchsorted(rows, np.arange(nv + 1))
        return indptr, cols

    def edge_index(self, a: int, b: int) -> int:
        lo, hi = (a, b) if a < b else (b, a)
        key = lo * self.n_vertices + hi
        keys = self.edges[:, 0] * self.n_vertices + self.edges[:, 1]
        i = int(np.searchsorted(keys, key))
        if i >= len(keys) or keys[i] != key:
            raise KeyError((a, b))
        return i

    def face_neighbor(self, f: int, k: int) -> int:
        """Face across edge ``k`` (faces[f,k] -> faces[f,k+1]) of face ``f``, or -1."""
        h = self.twin[3 * f + k]
        return -1 if h < 0 else int(h // 3)

    # -- geometry -----------------------------------------------------------

    @cached_property
    def face_areas(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return triangle_areas(p[:, 0], p[:, 1], p[:, 2])

    @property
    def area(self) -> float:
        return float(self.face_areas.sum())

    @cached_property
    def diameter(self) -> float:
        """Bounding-box diagonal, used as the length scale for tolerances."""
        return float(np.linalg.norm(self.vertices.max(0) - self.vertices.min(0)))

    @cached_property
    def frames(self):
        """Per-face orthonormal frames ``(origin, axes)``; axes has shape (F, 2, n).

        The first axis runs along the face's first edge and the second points
        towards the third corner, so face corners appear counter-clockwise.
        """
        p = self.vertices[self.faces]
        o = p[:, 0]
        e1 = p[:, 1] - o
        e1 /= np.linalg.norm(e1, axis=1)[:, None]
        w = p[:, 2] - o
        e2 = w - (w * e1).sum(1)[:, None] * e1
        e2 /= np.linalg.norm(e2, axis=1)[:, None]
        return o, np.stack([e1, e2], axis=1)

    @cached_property
    def face_uv(self) -> np.ndarray:
        """Corner coordinates in each face frame, shape (F, 3, 2)."""
        o, ax = self.frames
        rel = self.vertices[self.faces] - o[:, None, :]
        return np.einsum("fkn,fan->fka", rel, ax)

    def to_face_plane(self, f: int, points) -> np.ndarray:
        o, ax = self.frames
        return (np.asarray(points, dtype=float) - o[f]) @ ax[f].T

    def from_face_plane(self, f: int, uv) -> np.ndarray:
        o, ax = self.frames
        return o[f] + np.asarray(uv, dtype=float) @ ax[f]

    @cached_property
    def corner_angles(self) -> np.ndarray:
        p = self.vertices[self.faces]
        out = np.empty((self.n_faces, 3))
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            w = p[:, (k + 2) % 3] - p[:, k]
            c = (u * w).sum(1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
            out[:, k] = np.arccos(np.clip(c, -1.0, 1.0))
        return out

    @cached_property
    def angle_sums(self) -> np.ndarray:
        return np.bincount(self.faces.ravel(), weights=self.corner_angles.ravel(),
                           minlength=self.n_vertices)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def barycentric(self, f: int, point) -> np.ndarray:
        """Barycentric coordinates of ``point`` projected onto the plane of face ``f``."""
        uv = self.to_face_plane(f, point)
        return planar_barycentric(self.face_uv[f], uv)

    def nearest_surface_point(self, point) -> SurfacePoint:
        """Closest point among the faces around the nearest vertex."""
        point = np.asarray(point, dtype=float)
        v = int(np.argmin(((self.vertices - point) ** 2).sum(1)))
        best = None
        for f in self.vertex_faces(v):
            b = np.clip(self.barycentric(int(f), point), 0.0, None)
            b /= b.sum()
            q = b @ self.vertices[self.faces[f]]
            d = float(((q - point) ** 2).sum())
            if best is None or d < best[0]:
                best = (d, int(f), b)
        return SurfacePoint(best[1], tuple(best[2]))


def triangle_areas(a, b, c) -> np.ndarray:
    """Areas of triangles in R^n via the Gram determinant."""
    u = b - a
    w = c - a
    uu = (u * u).sum(-1)
    ww = (w * w).sum(-1)
    uw = (u * w).sum(-1)
    return 0.5 * np.sqrt(np.maximum(uu * ww - uw * uw, 0.0))


def planar_barycentric(tri, p) -> np.ndarray:
    """Barycentric coordinates of 2D point ``p`` in 2D triangle ``tri`` (3, 2)."""
    a, b, c = tri
    m = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
    s, t = np.linalg.solve(m, np.asarray(p) - a)
    return np.array([1.0 - s - t, s, t])


# -- IO ---------------------------------------------------------------------

def _read_text(source):
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8", errors="replace"), None
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8", errors="replace")
        return data, None
    path = Path(source)
    try:
        return path.read_text(encoding="utf-8", errors="replace"), str(path)
    except OSError as exc:
        raise MeshError(f"cannot read mesh file: {exc.strerror}", path=str(path)) from exc


def _check_faces(n_verts, faces, face_lines, path, base=1):
    """``base`` is the file format's first vertex index, used in messages."""
    for idx, lineno in zip(faces, face_lines):
        bad = [i for i in idx if not 0 <= i < n_verts]
        if bad:
            raise MeshError(f"face index {bad[0] + base} out of range "
                            f"({base}..{n_verts - 1 + base})", lineno, path)


def _parse_obj(text, path):
    verts, faces, face_lines = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "v":
            try:
                verts.append([float(x) for x in tok[1:]])
            except ValueError:
                raise MeshError(f"bad vertex line {raw!r}", lineno, path) from None
            if len(verts[-1]) < 3:
                raise MeshError("vertex needs at least 3 coordinates", lineno, path)
        elif tok[0] == "f":
            if len(tok) != 4:
                raise MeshError(f"only triangle faces are supported, got {len(tok) - 1} "
                                "corners", lineno, path)
            try:
                idx = [int(t.split("/")[0]) for t in tok[1:]]
            except ValueError:
                raise MeshError(f"bad face line {raw!r}", lineno, path) from None
            n = len(verts)
            idx = [i - 1 if i > 0 else n + i for i in idx]
            faces.append(idx)
            face_lines.append(lineno)
    if len({len(v) for v in verts}) > 1:
        raise MeshError("vertices have inconsistent dimension", path=path)
    _check_faces(len(verts), faces, face_lines, path)
    return verts, faces


def _parse_off(text, path):
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line))
    if not lines or not lines[0][1].startswith("OFF"):
        raise MeshError("missing OFF header", lines[0][0] if lines else 1, path)
    head = lines[0][1][3:].split()
    rest = lines[1:]
    if not head:
        if not rest:
            raise MeshError("missing counts line", path=path)
        lineno, counts = rest[0]
        head = counts.split()
        rest = rest[1:]
    else:
        lineno = lines[0][0]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise MeshError("bad counts line", lineno, path) from None
    if len(rest) < nv + nf:
        raise MeshError(f"expected {nv} vertices and {nf} faces", path=path)
    verts, faces, face_lines = [], [], []
    for lineno, line in rest[:nv]:
        try:
            verts.append([float(x) for x in line.split()])
        except ValueError:
            raise MeshError(f"bad vertex line {line!r}", lineno, path) from None
    for lineno, line in rest[nv:nv + nf]:
        tok = line.split()
        try:
            ar = int(tok[0])
            idx = [int(t) for t in tok[1:1 + ar]]
        except (ValueError, IndexError):
            raise MeshError(f"bad face line {line!r}", lineno, path) from None
        if ar != 3 or len(idx) != 3:
            raise MeshError(f"only triangle faces are supported, got arity {ar}",
                            lineno, path)
        faces.append(idx)
        face_lines.append(lineno)
    _check_faces(len(verts), faces, face_lines, path, base=0)
    return verts, faces


def load_mesh(source, format=None, density=None) -> TriMesh:
    """Load an OBJ or OFF triangle mesh.

    Parameters
    ----------
    source : path, bytes or file object
    format : {"obj", "off"}, optional
        Inferred from the file suffix or header when omitted.
    density : path or array_like, optional
        Per-vertex density values, or a sidecar text file with one scalar
        per vertex.
    """
    text, path = _read_text(source)
    fmt = (format or "").lower()
    if not fmt:
        if path and Path(path).suffix.lower() in (".obj", ".off"):
            fmt = Path(path).suffix.lower()[1:]
        else:
            fmt = "off" if text.lstrip().startswith("OFF") else "obj"
    if fmt == "obj":
        verts, faces = _parse_obj(text, path)
    elif fmt == "off":
        verts, faces = _parse_off(text, path)
    else:
        raise MeshError(f"unknown mesh format {format!r}", path=path)
    if not faces:
        raise MeshError("mesh has no faces", path=path)
    rho = None
    if density is not None:
        if isinstance(density, (str, Path)):
            rho = load_density(density)
        else:
            rho = np.asarray(density, dtype=float)
    try:
        return TriMesh(np.array(verts, dtype=float), np.array(faces, dtype=np.int64), rho)
    except MeshError as exc:
        if path and exc.path is None:
            raise MeshError(str(exc), path=path) from None
        raise


def load_density(path) -> np.ndarray:
    vals = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.append(float(line))
        except ValueError:
            raise MeshError(f"bad density value {raw!r}", lineno, str(path)) from None
    return np.array(vals)


def write_obj(path, vertices, faces=(), lines=(), mtllib=None, groups=None):
    """Write an OBJ file with optional line elements and material groups.

    ``groups`` is a list of ``(material_name, face_rows)`` and replaces
    ``faces`` when given.
    """
    out = []
    if mtllib:
        out.append(f"mtllib {mtllib}")
    for p in np.asarray(vertices, dtype=float):
        out.append("v " + " ".join(f"{x:.12g}" for x in p[:3]))
    if groups is not None:
        for name, rows in groups:
            out.append(f"usemtl {name}")
            out.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in rows)
    else:
        out.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(faces, dtype=int))
    for poly in lines:
        out.append("l " + " ".join(str(int(i) + 1) for i in poly))
    Path(path).write_text("\n".join(out) + "\n")


# -- intrinsic quantities ---------------------------------------------------

def genus(mesh: TriMesh) -> int:
    """Genus of a closed, connected mesh from its Euler characteristic."""
    if not mesh.is_closed:
        raise ValueError("genus is only defined here for closed meshes")
    twice = 2 - mesh.euler_characteristic
    if twice % 2 or twice < 0:
        raise ValueError(f"Euler characteristic {mesh.euler_characteristic} gives "
                         "a non-integer genus; connectivity is corrupt")
    return twice // 2


def saddle_vertices(mesh: TriMesh, eps: float = 1e-9) -> np.ndarray:
    """Interior vertices whose total incident angle exceeds 2*pi + eps."""
    interior = ~mesh.boundary_vertices
    return np.nonzero(interior & (mesh.angle_sums > 2 * math.pi + eps))[0]


def flat_vertices(mesh: TriMesh, eps: float = 1e-9) -> np.ndarray:
    interior = ~mesh.boundary_vertices
    return np.nonzero(interior & (np.abs(mesh.angle_sums - 2 * math.pi) <= eps))[0]


def integrate_triangles(corners, rho):
    """Mass and weighted centroid of triangles with linear density.

    ``corners`` has shape (K, 3, n) and ``rho`` (K, 3).  Uses the
    edge-midpoint rule, exact for the quadratic integrand x*rho.
    """
    corners = np.asarray(corners, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if corners.size == 0:
        raise ValueError("empty triangle set")
    area = triangle_areas(corners[:, 0], corners[:, 1], corners[:, 2])
    mid = 0.5 * (corners + np.roll(corners, -1, axis=1))
    rmid = 0.5 * (rho + np.roll(rho, -1, axis=1))
    mass = float((area * rho.mean(1)).sum())
    if mass <= 0:
        raise ValueError("total mass must be positive")
    moment = ((area / 3.0)[:, None, None] * rmid[:, :, None] * mid).sum((0, 1))
    return mass, moment / mass


def integrate_density(mesh: TriMesh, faces=None):
    """Mass and density-weighted centroid over a set of faces.

    Returns
    -------
    mass : float
    centroid : ndarray, shape (n,)
    """
    if faces is None:
        faces = np.arange(mesh.n_faces)
    faces = np.asarray(sorted(faces) if isinstance(faces, (set, frozenset)) else faces,
                       dtype=np.int64)
    if faces.size == 0:
        raise ValueError("subset must be non-empty")
    tri = mesh.faces[faces]
    return integrate_triangles(mesh.vertices[tri], mesh.density[tri])


def density_at(mesh: TriMesh, p: SurfacePoint) -> float:
    return float(np.asarray(p.bary) @ mesh.density[mesh.faces[p.face]])


def random_surface_points(mesh: TriMesh, n: int, rng) -> list:
    """``n`` points uniformly distributed by area."""
    a = mesh.face_areas
    faces = rng.choice(mesh.n_faces, size=n, p=a / a.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.column_stack([1 - r1, r1 * (1 - r2), r1 * r2])
    return [SurfacePoint(int(f), tuple(b)) for f, b in zip(faces, bary)]
