"""Manifold differential evolution over sets of surface points.

An agent is an ordered tuple of N generators.  Before the difference
operators are applied, agents are put in correspondence by minimum-weight
matching on geodesic distances, and the classic DE operators are carried
out in tangent spaces through the log map, parallel transport and the exp
map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geodesics import (DEFAULT_LEVEL, BoundaryHit, build_steiner_graph, distance_field,
                         exp_map, log_map, parallel_transport, path_points)
from ..mesh import random_surface_points
from ..tessellation import build_gvt, gcvt_energy
from .matching import min_weight_matching


@dataclass
class MdeConfig:
    population: int = None
    lam: float = 0.8
    crossover_rate: float = 0.9
    max_iterations: int = 50
    stall_window: int = 10
    target_energy: float = None
    seed: int = 0
    polish_iters: int = 0
    polish_tol: float = 1e-7
    centroid: str = "lmds"

    def resolved_population(self, n: int) -> int:
        return self.population if self.population is not None else max(8, 4 * n)

    def validate(self, n: int):
        if self.resolved_population(n) < 4:
            raise ValueError("population must be at least 4")
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must lie in (0, 1]")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover rate must lie in [0, 1]")
        if self.max_iterations < 0 or self.stall_window < 1:
            raise ValueError("max_iterations must be >= 0 and stall_window >= 1")


@dataclass(frozen=True)
class Agent:
    generators: tuple
    energy: float = None

    @property
    def key(self):
        return tuple(g.key() for g in self.generators)

    def with_energy(self, e):
        return Agent(self.generators, e)


class MdeContext:
    """Shared mesh, graph, per-point field cache and energy cache."""

    def __init__(self, mesh, graph):
        self.mesh = mesh
        self.graph = graph
        self.fields = {}
        self.energies = {}
        self.flags = []

    def field(self, p):
        k = p.key()
        if k not in self.fields:
            self.fields[k] = distance_field(self.graph, [p])
        return self.fields[k]

    def retain(self, agents):
        """Drop cached fields of points no longer in the population."""
        keep = {g.key() for a in agents for g in a.generators}
        self.fields = {k: v for k, v in self.fields.items() if k in keep}

    def energy(self, agent: Agent) -> float:
        k = agent.key
        if k not in self.energies:
            try:
                t = build_gvt(self.mesh, list(agent.generators), graph=self.graph)
                self.energies[k] = gcvt_energy(t)
            except ValueError:
                # coincident generators
                self.energies[k] = math.inf
        return self.energies[k]

    def evaluated(self, agent: Agent) -> Agent:
        return agent if agent.energy is not None else agent.with_energy(self.energy(agent))


def align(agent: Agent, reference: Agent, ctx: MdeContext) -> Agent:
    """Reorder ``agent`` so component i is matched to ``reference`` component i."""
    ref = reference.generators
    gens = agent.generators
    costs = np.array([[ctx.field(r).distance(g) for g in gens] for r in ref])
    perm, _ = min_weight_matching(costs)
    return Agent(tuple(gens[p] for p in perm), agent.energy)


def pick_triplet(m: int, j: int, rng):
    others = [i for i in range(m) if i != j]
    r = rng.choice(len(others), size=3, replace=False)
    return tuple(others[i] for i in r)


def mde_mutate(pop, j: int, lam: float, rng, ctx: MdeContext, indices=None) -> Agent:
    """Donor ``x3 + lam * (x1 - x2)`` built with tangent-space operators.

    ``indices`` forces ``(rand1, rand2, rand3)``.  Components whose traced
    geodesic leaves the mesh stay at ``x3`` and are recorded in ``ctx.flags``.
    """
    r1, r2, r3 = indices if indices is not None else pick_triplet(len(pop), j, rng)
    x3 = align(pop[r3], pop[j], ctx)
    x1 = align(pop[r1], x3, ctx)
    x2 = align(pop[r2], x3, ctx)
    out = []
    for i, (a, b, c) in enumerate(zip(x1.generators, x2.generators, x3.generators)):
        if lam == 0 or a.key() == b.key():
            out.append(c)
            continue
        fb = ctx.field(b)
        v = log_map(b, a, ctx.graph, fb).scaled(lam)
        if v.magnitude == 0:
            out.append(c)
            continue
        w = parallel_transport(v, path_points(fb, c), ctx.mesh)
        try:
            out.append(exp_map(c, w, ctx.mesh))
        except BoundaryHit:
            ctx.flags.append({"agent": j, "component": i, "event": "boundary"})
            out.append(c)
    return Agent(tuple(out))


def mde_crossover(x: Agent, v: Agent, crossover_rate: float, rng) -> Agent:
    """Per-component choice of the donor with probability ``crossover_rate``."""
    if len(x.generators) != len(v.generators):
        raise ValueError("agents differ in length")
    mask = rng.random(len(x.generators)) < crossover_rate
    gens = tuple(vg if m else xg for m, xg, vg in zip(mask, x.generators, v.generators))
    return Agent(gens)


def mde_select(x: Agent, u: Agent) -> Agent:
    """Keep ``x`` only when it is strictly better; ties go to the trial."""
    if x.energy is None or u.energy is None:
        raise ValueError("both agents need energies")
    return x if x.energy < u.energy else u


@dataclass
class MdeResult:
    best_agent: Agent
    tessellation: object
    energy_trace: list
    generations: int
    reason: str
    flags: list = field(default_factory=list)
    polished_energy: float = None

    @property
    def target_reached(self) -> bool:
        return self.reason == "target"


def mde_run(mesh, n: int, config: MdeConfig = None, graph=None, level=DEFAULT_LEVEL,
            init_population=None) -> MdeResult:
    """Global minimization of the GCVT energy over N generators.

    Every generation aligns, mutates, crosses over and selects each agent
    against the previous generation.  Stops at ``max_iterations``, after
    ``stall_window`` generations without a relative best-energy gain above
    1e-6, or once the best energy reaches ``target_energy``.  The optional
    polish runs Lloyd from the best agent down to moves of
    ``polish_tol`` times the mesh diameter and keeps the result if it is
    not worse.
    """
    config = config or MdeConfig()
    config.validate(n)
    graph = graph or build_steiner_graph(mesh, level)
    ctx = MdeContext(mesh, graph)
    M = config.resolved_population(n)
    if init_population is None:
        pop = [Agent(tuple(random_surface_points(mesh, n, np.random.default_rng([config.seed, 0, j]))))
               for j in range(M)]
    else:
        pop = [a if isinstance(a, Agent) else Agent(tuple(a)) for a in init_population]
        if len(pop) < 4:
            raise ValueError("population must be at least 4")
        M = len(pop)
    pop = [ctx.evaluated(a) for a in pop]

    def record(k):
        e = np.array([a.energy for a in pop])
        finite = e[np.isfinite(e)]
        return (k, float(e.min()), float(finite.mean()) if len(finite) else math.inf)

    trace = [record(0)]
    reason = "max_iterations"
    k = 0

    def target_hit():
        return config.target_energy is not None and trace[-1][1] <= config.target_energy

    if target_hit():
        reason = "target"
    else:
        for k in range(1, config.max_iterations + 1):
            ctx.retain(pop)
            new = []
            for j in range(M):
                rng = np.random.default_rng([config.seed, k, j])
                v = mde_mutate(pop, j, config.lam, rng, ctx)
                u = ctx.evaluated(mde_crossover(pop[j], v, config.crossover_rate, rng))
                new.append(mde_select(pop[j], u))
            pop = new
            trace.append(record(k))
            if target_hit():
                reason = "target"
                break
            w = config.stall_window
            if k >= w:
                old = trace[k - w][1]
                if old - trace[k][1] <= 1e-6 * abs(old):
                    reason = "stall"
                    break
    best = min(pop, key=lambda a: a.energy)
    t = build_gvt(mesh, list(best.generators), graph=graph)
    result = MdeResult(best, t, trace, k, reason, ctx.flags)
    if config.polish_iters > 0:
        from .lloyd import lloyd_run
        lr = lloyd_run(mesh, list(best.generators), config.centroid,
                       max_iters=config.polish_iters, graph=graph,
                       move_tol=config.polish_tol * mesh.diameter)
        e = lr.energy_trace[-1]
        result.polished_energy = e
        if e <= best.energy:
            result.best_agent = Agent(tuple(lr.generators), e)
            result.tessellation = lr.tessellation
    return result
