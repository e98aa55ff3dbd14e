"""Particle swarm optimization of anchor layouts on constrained room surfaces.

A particle is the stacked vector of all anchor positions. After every
velocity update each anchor is projected back onto the nearest allowed
surface, so anchors may migrate between planes during the search.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from . import streams
from .errors import BudgetExceededError, InvalidArgumentError, OptimizationFailedError
from .room import AnchorLayout, Room, make_layout, project_layout

log = logging.getLogger(__name__)

CostFn = Callable[[AnchorLayout], float]
Decoder = Callable[[AnchorLayout], AnchorLayout]


@dataclass(frozen=True)
class PsoHyperParams:
    omega: float = 0.729
    c1: float = 1.49445
    c2: float = 1.49445
    swarm_size: int = 15
    max_iterations: int = 40
    stop_threshold: float = 1e-3
    stop_patience: int = 5

    def __post_init__(self):
        if self.swarm_size < 2:
            raise InvalidArgumentError("swarm_size must be >= 2")
        if not 0 <= self.omega <= 1.2:
            raise InvalidArgumentError("omega must lie in [0, 1.2]")
        if self.c1 < 0 or self.c2 < 0:
            raise InvalidArgumentError("c1 and c2 must be non-negative")
        if self.max_iterations < 0 or self.stop_patience < 1:
            raise InvalidArgumentError("max_iterations >= 0 and stop_patience >= 1 required")


@dataclass(frozen=True, eq=False)
class Particle:
    x: np.ndarray
    v: np.ndarray
    p_best: np.ndarray
    p_best_cost: float
    planes: tuple[str, ...]
    cost: float


@dataclass(frozen=True, eq=False)
class SwarmState:
    particles: tuple[Particle, ...]
    g_best: np.ndarray
    g_best_cost: float
    t: int
    cost_history: tuple[float, ...] = field(default=())

    @property
    def n_anchors(self) -> int:
        return len(self.g_best) // 3


def apportion(room: Room, n_anchors: int) -> dict[str, int]:
    """Split anchors over the allowed planes in proportion to plane area.

    Largest-remainder rounding; equal remainders favour the earlier plane in
    the fixed plane order.
    """
    areas = np.array([room.plane_area(p) for p in room.allowed_planes])
    quotas = n_anchors * areas / areas.sum()
    counts = np.floor(quotas).astype(int)
    remainders = quotas - counts
    order = sorted(range(len(areas)), key=lambda i: (-round(remainders[i], 12), i))
    for i in order[: n_anchors - counts.sum()]:
        counts[i] += 1
    return dict(zip(room.allowed_planes, counts.tolist()))


def random_layout(room: Room, n_anchors: int, rng: np.random.Generator) -> AnchorLayout:
    """Area-apportioned anchors placed uniformly on each plane's anchor surface."""
    positions, planes = [], []
    for plane, count in apportion(room, n_anchors).items():
        lo, hi = room.surface_bounds(plane)
        for _ in range(count):
            positions.append(rng.uniform(lo, hi))
            planes.append(plane)
    return make_layout(np.array(positions), room, planes)


def _evaluate(cost_fn: CostFn, layouts: Sequence[AnchorLayout], map_fn=map) -> list[float]:
    def safe(layout):
        try:
            value = float(cost_fn(layout))
        except Exception as exc:  # any simulator failure marks the particle infeasible
            log.debug("cost evaluation failed: %s", exc)
            return math.inf
        return value if math.isfinite(value) else math.inf
    return list(map_fn(safe, layouts))


def _decoded(layout: AnchorLayout, decode: Decoder | None) -> AnchorLayout:
    return decode(layout) if decode is not None else layout


def init_swarm(room: Room, n_anchors: int, hp: PsoHyperParams, cost_fn: CostFn, seed: int,
               decode: Decoder | None = None, map_fn=map) -> SwarmState:
    if n_anchors < 4:
        raise InvalidArgumentError(f"need at least 4 anchors, got {n_anchors}")
    layouts = [random_layout(room, n_anchors, streams.derive_rng(seed, streams.PSO, 0, i))
               for i in range(hp.swarm_size)]
    costs = _evaluate(cost_fn, [_decoded(l, decode) for l in layouts], map_fn)
    particles = tuple(
        Particle(x=l.stacked.copy(), v=np.zeros(3 * n_anchors), p_best=l.stacked.copy(),
                 p_best_cost=c, planes=l.plane_of, cost=c)
        for l, c in zip(layouts, costs))
    best = int(np.argmin(costs))
    return SwarmState(particles, particles[best].p_best.copy(), costs[best], 0, (costs[best],))


def step(swarm: SwarmState, hp: PsoHyperParams, cost_fn: CostFn, seed: int, room: Room,
         decode: Decoder | None = None, map_fn=map) -> SwarmState:
    t = swarm.t + 1
    vmax = np.tile(room.extent / 2, swarm.n_anchors)
    moved, layouts = [], []
    for i, part in enumerate(swarm.particles):
        rng = streams.derive_rng(seed, streams.PSO, t, i)
        r1 = rng.random(part.x.shape)
        r2 = rng.random(part.x.shape)
        v = (hp.omega * part.v + hp.c1 * r1 * (part.p_best - part.x)
             + hp.c2 * r2 * (swarm.g_best - part.x))
        v = np.clip(v, -vmax, vmax)
        raw = part.x + v
        layout = project_layout(raw, room)
        # Reflect velocity components the projection altered. Keeping them
        # would pin the swarm to a clamp boundary with zero spread.
        v = np.where(layout.stacked != raw, -v, v)
        moved.append((part, v, layout))
        layouts.append(_decoded(layout, decode))
    costs = _evaluate(cost_fn, layouts, map_fn)

    particles = []
    g_best, g_best_cost = swarm.g_best, swarm.g_best_cost
    for (part, v, layout), cost in zip(moved, costs):
        improved = cost < part.p_best_cost
        new = Particle(x=layout.stacked.copy(), v=v,
                       p_best=layout.stacked.copy() if improved else part.p_best,
                       p_best_cost=cost if improved else part.p_best_cost,
                       planes=layout.plane_of, cost=cost)
        if new.p_best_cost < g_best_cost:
            g_best, g_best_cost = new.p_best, new.p_best_cost
        particles.append(new)
    return SwarmState(tuple(particles), g_best.copy(), g_best_cost, t,
                      swarm.cost_history + (g_best_cost,))


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    layout: AnchorLayout
    cost: float
    history: tuple[SwarmState, ...]

    @property
    def cost_history(self) -> tuple[float, ...]:
        return self.history[-1].cost_history


def should_stop(history: Sequence[float], hp: PsoHyperParams) -> bool:
    if len(history) - 1 >= hp.max_iterations:
        return True
    if len(history) <= hp.stop_patience:
        return False
    old, new = history[-1 - hp.stop_patience], history[-1]
    if not math.isfinite(old):
        return False
    gain = (old - new) / abs(old) if old != 0 else 0.0
    return gain < hp.stop_threshold


def optimize(room: Room, n_anchors: int, hp: PsoHyperParams, cost_fn: CostFn, seed: int,
             decode: Decoder | None = None, map_fn=map,
             callback: Callable[[SwarmState], None] | None = None) -> OptimizeResult:
    """Run the swarm until the stopping rule fires; returns every swarm state."""
    swarm = init_swarm(room, n_anchors, hp, cost_fn, seed, decode, map_fn)
    if not math.isfinite(swarm.g_best_cost):
        raise OptimizationFailedError("every initial particle is infeasible")
    history = [swarm]
    if callback:
        callback(swarm)
    while not should_stop(swarm.cost_history, hp):
        swarm = step(swarm, hp, cost_fn, seed, room, decode, map_fn)
        history.append(swarm)
        if callback:
            callback(swarm)
        log.info("iteration %d: best cost %.6g", swarm.t, swarm.g_best_cost)
    best = _decoded(project_layout(swarm.g_best, room), decode)
    return OptimizeResult(best, swarm.g_best_cost, tuple(history))


def snap_decoder(candidates, room: Room) -> Decoder:
    """Decode a layout by snapping anchors to distinct candidate positions.

    Anchors are matched in index order, each to the nearest unused candidate.
    The decoded layout lists the chosen candidates in ascending index order,
    so a subset always decodes to the same layout regardless of matching order.
    """
    candidates = np.asarray(candidates, dtype=float)

    def decode(layout: AnchorLayout) -> AnchorLayout:
        return make_layout(candidates[sorted(snap_indices(layout, candidates))], room)

    return decode


def snap_indices(layout: AnchorLayout, candidates) -> list[int]:
    candidates = np.asarray(candidates, dtype=float)
    if len(layout) > len(candidates):
        raise InvalidArgumentError("more anchors than candidate positions")
    used: list[int] = []
    for a in layout.anchors:
        dist = np.linalg.norm(candidates - a, axis=1)
        dist[used] = np.inf
        used.append(int(np.argmin(dist)))
    return used


@dataclass(frozen=True, eq=False)
class ExhaustiveResult:
    subset: tuple[int, ...]
    cost: float
    table: dict[tuple[int, ...], float]


DEFAULT_BUDGET = 1_000_000


def combination_count(n_candidates: int, n_anchors: int) -> int:
    return math.comb(n_candidates, n_anchors)


def extensive_search(candidates, n_anchors: int, cost_fn: CostFn, room: Room,
                     budget: int = DEFAULT_BUDGET, map_fn=map) -> ExhaustiveResult:
    """Evaluate every anchor subset of the candidate set."""
    candidates = np.asarray(candidates, dtype=float)
    if len(candidates) < n_anchors:
        raise InvalidArgumentError("fewer candidates than anchors")
    count = combination_count(len(candidates), n_anchors)
    if count > budget:
        raise BudgetExceededError(f"{count} combinations exceed the budget of {budget}", count)
    subsets = list(combinations(range(len(candidates)), n_anchors))
    layouts = [make_layout(candidates[list(s)], room) for s in subsets]
    costs = _evaluate(cost_fn, layouts, map_fn)
    best = int(np.argmin(costs))
    return ExhaustiveResult(subsets[best], costs[best], dict(zip(subsets, costs)))
