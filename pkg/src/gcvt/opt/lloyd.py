"""Lloyd relaxation towards a geodesic centroidal Voronoi tessellation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geodesics import DEFAULT_LEVEL, build_steiner_graph, local_field, move_along
from ..mesh import SurfacePoint
from ..tessellation import build_gvt, gcvt_energy
from .centroids import lmds_centroid, riemannian_center

CENTROID_METHODS = ("riemannian", "lmds")


@dataclass
class LloydResult:
    tessellation: object
    energy_trace: list
    generators: list
    iterations: int
    converged: bool
    events: list = field(default_factory=list)


def compute_centroids(t, method="lmds", graph=None):
    if method == "lmds":
        return [lmds_centroid(t, i) for i in range(t.m)]
    if method == "riemannian":
        return [riemannian_center(t, i, graph).point for i in range(t.m)]
    raise ValueError(f"unknown centroid method {method!r}")


def _separate(mesh, points, events, it):
    """Nudge later points that collide with earlier ones."""
    out = list(points)
    jitter = 1e-6 * mesh.diameter
    for j in range(len(out)):
        for _ in range(8):
            pj = out[j].position(mesh)
            clash = [i for i in range(j) if np.linalg.norm(out[i].position(mesh) - pj) <= 1e-9]
            if not clash:
                break
            f = out[j].face
            tri = mesh.vertices[mesh.faces[f]]
            c = tri.mean(0)
            d = c - pj
            nd = np.linalg.norm(d)
            if nd < 1e-300:
                d, nd = tri[0] - pj, np.linalg.norm(tri[0] - pj)
            q = pj + d / nd * jitter
            b = np.clip(mesh.barycentric(f, q), 0.0, None)
            out[j] = SurfacePoint(f, tuple(b / b.sum()))
            events.append({"iteration": it, "event": "collision", "generator": j})
    return out


def lloyd_run(mesh, init_generators, centroid="lmds", max_iters=100, move_tol=None,
              level=DEFAULT_LEVEL, graph=None, max_halvings=4):
    """Alternate tessellation and centroid updates.

    Each update moves every generator to its cell centroid.  If that raises
    the energy, the step is halved along the geodesics towards the
    centroids (up to ``max_halvings`` times) and the run stops when no
    shortened step helps, so the recorded energy never increases.

    Returns
    -------
    LloydResult
    """
    if centroid not in CENTROID_METHODS:
        raise ValueError(f"unknown centroid method {centroid!r}")
    graph = graph or build_steiner_graph(mesh, level)
    move_tol = 1e-4 * mesh.diameter if move_tol is None else move_tol
    gens = list(init_generators)
    t = build_gvt(mesh, gens, graph=graph)
    energy = gcvt_energy(t)
    trace = [energy]
    events = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        targets = _separate(mesh, compute_centroids(t, centroid, graph), events, it)
        old = np.array([g.position(mesh) for g in gens])
        cand = targets
        accepted = None
        for h in range(max_halvings + 1):
            if h:
                s = 0.5 ** h
                cand = []
                for g, c in zip(gens, targets):
                    fld = local_field(graph, g, [c])
                    cand.append(move_along(g, c, s, graph, fld))
                cand = _separate(mesh, cand, events, it)
            try:
                tn = build_gvt(mesh, cand, graph=graph)
            except ValueError:
                continue
            en = gcvt_energy(tn)
            if en <= energy:
                accepted = (cand, tn, en)
                break
            events.append({"iteration": it, "event": "halving", "energy": en})
        if accepted is None:
            converged = True
            break
        gens, t, energy = accepted
        trace.append(energy)
        move = np.linalg.norm(np.array([g.position(mesh) for g in gens]) - old, axis=1).max()
        if move < move_tol:
            converged = True
            break
    return LloydResult(t, trace, gens, it, converged, events)
