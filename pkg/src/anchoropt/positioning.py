"""Least-squares multilateration from anchor ranges.

The estimate minimizes ``sum_j (||p - a_j|| - r_j)^2``. A closed-form
difference-of-squares solution (referenced to the first anchor) seeds a
Gauss-Newton refinement with step halving, so the returned cost never exceeds
the cost at the linear seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, UnderdeterminedError

MAX_CONDITION = 1e8
GRAD_TOL = 1e-9
MAX_ITER = 50


@dataclass(frozen=True, eq=False)
class PositionEstimate:
    position: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int


def geometry_condition(anchors) -> float:
    anchors = np.asarray(anchors, dtype=float)
    A = 2 * (anchors[1:] - anchors[0])
    s = np.linalg.svd(A, compute_uv=False)
    return float(np.inf if s[-1] <= s[0] * 1e-300 else s[0] / s[-1])


def linear_init(anchors, ranges) -> np.ndarray:
    """Closed-form seed(s); ``ranges`` may carry leading batch axes (..., M)."""
    anchors = np.asarray(anchors, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    A = 2 * (anchors[1:] - anchors[0])
    sq = np.sum(anchors ** 2, axis=1)
    b = (sq[1:] - sq[0]) - ranges[..., 1:] ** 2 + ranges[..., :1] ** 2
    pinv = np.linalg.pinv(A)
    return b @ pinv.T


def _cost(anchors, ranges, p):
    d = np.linalg.norm(p[..., None, :] - anchors, axis=-1)
    return np.sum((d - ranges) ** 2, axis=-1)


def gauss_newton(anchors, ranges, p0, max_iter: int = MAX_ITER, tol: float = GRAD_TOL):
    """Batched Gauss-Newton with backtracking.

    ``ranges`` is (N, M), ``p0`` is (N, 3). Returns positions, costs,
    convergence flags and per-problem iteration counts.
    """
    anchors = np.asarray(anchors, dtype=float)
    ranges = np.atleast_2d(np.asarray(ranges, dtype=float))
    p = np.array(p0, dtype=float).reshape(len(ranges), 3)
    cost = _cost(anchors, ranges, p)
    active = np.ones(len(p), dtype=bool)
    converged = np.zeros(len(p), dtype=bool)
    iterations = np.zeros(len(p), dtype=np.int64)
    for _ in range(max_iter + 1):
        ids = np.flatnonzero(active)
        if len(ids) == 0:
            break
        delta = p[ids, None, :] - anchors
        dist = np.linalg.norm(delta, axis=-1)
        dist = np.where(dist == 0, 1e-12, dist)
        jac = delta / dist[..., None]
        res = dist - ranges[ids]
        grad = np.einsum("nmk,nm->nk", jac, res)
        done = np.linalg.norm(grad, axis=1) < tol
        converged[ids[done]] = True
        active[ids[done]] = False
        stalled = iterations[ids] >= max_iter
        active[ids[stalled & ~done]] = False
        keep = ~done & ~stalled
        ids, jac, grad = ids[keep], jac[keep], grad[keep]
        if len(ids) == 0:
            break
        normal = np.einsum("nmk,nml->nkl", jac, jac)
        step = -_solve(normal, grad)
        iterations[ids] += 1
        scale = np.ones(len(ids))
        trial_cost = cost[ids]
        accepted = np.zeros(len(ids), dtype=bool)
        for _ in range(30):
            trial = p[ids] + scale[:, None] * step
            c = _cost(anchors, ranges[ids], trial)
            ok = (c <= cost[ids]) & ~accepted
            p[ids[ok]] = trial[ok]
            trial_cost = np.where(ok, c, trial_cost)
            accepted |= ok
            if accepted.all():
                break
            scale = np.where(accepted, scale, scale / 2)
        cost[ids] = trial_cost
        # No descent possible: we are at a numerical minimum.
        stuck = ~accepted
        converged[ids[stuck]] = True
        active[ids[stuck]] = False
    return p, cost, converged, iterations


def _solve(normal, grad):
    try:
        return np.linalg.solve(normal, grad[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return (np.linalg.pinv(normal) @ grad[..., None])[..., 0]


def solve_ls(anchors, ranges) -> PositionEstimate:
    anchors = np.asarray(anchors, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    if len(anchors) < 4:
        raise UnderdeterminedError(f"need at least 4 anchors, got {len(anchors)}")
    seed = linear_init(anchors, ranges)
    cond = geometry_condition(anchors)
    if cond > MAX_CONDITION:
        raise DegenerateGeometryError(
            f"anchor geometry is rank deficient (condition number {cond:.3g})",
            linear_estimate=seed, condition_number=cond)
    p, cost, conv, its = gauss_newton(anchors, ranges[None], seed[None])
    return PositionEstimate(p[0], float(np.sqrt(cost[0])), bool(conv[0]), int(its[0]))


def solve_ls_batch(anchors, ranges, linear_only: bool = False):
    """Positions for many range vectors against one anchor set.

    ``ranges`` has shape (..., M); returns positions of shape (..., 3). Rank
    deficient geometries still get refined from the minimum-norm seed so a
    campaign can score them instead of aborting.
    """
    anchors = np.asarray(anchors, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    if anchors.shape[0] < 4:
        raise UnderdeterminedError(f"need at least 4 anchors, got {anchors.shape[0]}")
    lead = ranges.shape[:-1]
    flat = ranges.reshape(-1, ranges.shape[-1])
    seed = linear_init(anchors, flat)
    if linear_only:
        return seed.reshape(*lead, 3)
    p, _, _, _ = gauss_newton(anchors, flat, seed)
    return p.reshape(*lead, 3)
