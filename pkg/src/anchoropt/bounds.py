"""Fisher information, position error bound, DOP and error statistics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDataError, InvalidArgumentError

RANK_TOL = 1e-10
MAD_GATE = 5.0


@dataclass(frozen=True, eq=False)
class FimResult:
    fim: np.ndarray
    peb: float  # m^2, nan when rank < 3
    rank: int

    @property
    def defined(self) -> bool:
        return self.rank == 3


def fim_matrices(points, anchors, range_sigmas) -> np.ndarray:
    """FIM of every point under independent Gaussian ranging, shape (P, 3, 3)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    anchors = np.asarray(anchors, dtype=float)
    sigmas = np.asarray(range_sigmas, dtype=float)
    if np.any(sigmas <= 0):
        raise InvalidArgumentError("range sigmas must be positive")
    delta = points[:, None, :] - anchors[None, :, :]
    dist = np.linalg.norm(delta, axis=-1)
    if np.any(dist == 0):
        raise InvalidArgumentError("position coincides with an anchor")
    u = delta / dist[..., None]
    return np.einsum("j,pjm,pjn->pmn", 1 / sigmas ** 2, u, u)


def _rank_and_peb(J):
    eig = np.linalg.eigvalsh(J)
    top = eig[..., -1:]
    rank = np.sum(eig > RANK_TOL * np.where(top > 0, top, 1), axis=-1)
    safe = np.where(eig > 0, eig, 1)
    peb = np.where(rank == 3, np.sum(1 / safe, axis=-1), np.nan)
    return rank, peb


def fim(p, layout, range_sigmas) -> FimResult:
    anchors = getattr(layout, "anchors", layout)
    J = fim_matrices(p, anchors, range_sigmas)[0]
    rank, peb = _rank_and_peb(J)
    return FimResult(J, float(peb), int(rank))


@dataclass(frozen=True, eq=False)
class PebField:
    peb: np.ndarray  # m^2, nan where undefined
    rank: np.ndarray

    @property
    def defined(self) -> np.ndarray:
        return self.rank == 3

    @property
    def n_undefined(self) -> int:
        return int(np.sum(~self.defined))

    @property
    def bound_m(self) -> np.ndarray:
        """Root of the PEB, directly comparable with a position RMSE."""
        return np.sqrt(self.peb)


def peb_field(layout, grid, range_sigmas) -> PebField:
    anchors = getattr(layout, "anchors", layout)
    positions = getattr(grid, "positions", grid)
    rank, peb = _rank_and_peb(fim_matrices(positions, anchors, range_sigmas))
    return PebField(peb, rank)


@dataclass(frozen=True, eq=False)
class SigmaFit:
    sigmas: np.ndarray
    removed_fraction: np.ndarray
    n_samples: np.ndarray


def fit_range_sigmas(realizations: Sequence, min_realizations: int = 30) -> SigmaFit:
    """Per-anchor range-error std after median/MAD outlier gating.

    Accepts RangingRealization objects or an error array shaped (R, M, P).
    """
    if isinstance(realizations, np.ndarray):
        errors = realizations
    else:
        errors = np.array([r.errors for r in realizations])
    if len(errors) < min_realizations:
        raise InvalidArgumentError(f"need at least {min_realizations} realizations, got {len(errors)}")
    per_anchor = np.moveaxis(errors, 1, 0).reshape(errors.shape[1], -1)
    sigmas, removed, counts = [], [], []
    for j, e in enumerate(per_anchor):
        med = np.median(e)
        mad = np.median(np.abs(e - med))
        keep = np.abs(e - med) <= MAD_GATE * mad
        if keep.sum() < 2:
            raise DegenerateDataError(f"outlier gating removed all samples of anchor {j}")
        sigmas.append(np.std(e[keep], ddof=1))
        removed.append(1 - keep.mean())
        counts.append(int(keep.sum()))
    return SigmaFit(np.array(sigmas), np.array(removed), np.array(counts))


@dataclass(frozen=True, eq=False)
class ErrorStats:
    sigma: float
    mu: float
    p95: float
    variance: float
    cdf_x: np.ndarray
    cdf_y: np.ndarray

    @property
    def n(self) -> int:
        return len(self.cdf_x)

    def cdf_at(self, x) -> np.ndarray:
        """Empirical CDF, linearly interpolated between order statistics."""
        xs, idx = np.unique(self.cdf_x, return_index=True)
        # a tied value carries the fraction of its last occurrence
        last = np.r_[idx[1:], len(self.cdf_x)] - 1
        return np.interp(x, xs, self.cdf_y[last], left=0.0, right=1.0)


def euclidean_errors(true_positions, estimates) -> np.ndarray:
    true_positions = np.asarray(true_positions, dtype=float)
    estimates = np.asarray(estimates, dtype=float)
    if true_positions.shape != estimates.shape:
        raise InvalidArgumentError("true positions and estimates differ in shape")
    return np.linalg.norm(estimates - true_positions, axis=-1)


def stats_from_errors(errors) -> ErrorStats:
    errors = np.ravel(np.asarray(errors, dtype=float))
    if errors.size == 0:
        raise InvalidArgumentError("no errors to summarize")
    variance = float(np.var(errors, ddof=1)) if errors.size > 1 else 0.0
    x = np.sort(errors)
    y = np.arange(1, len(x) + 1) / len(x)
    return ErrorStats(sigma=float(np.sqrt(variance)), mu=float(np.mean(errors)),
                      p95=float(np.percentile(errors, 95)), variance=variance, cdf_x=x, cdf_y=y)


def error_stats(true_positions, estimates) -> ErrorStats:
    return stats_from_errors(euclidean_errors(true_positions, estimates))


@dataclass(frozen=True, eq=False)
class DopField:
    values: np.ndarray
    mean_dop: float


def dop_field(position_error_sigmas, mean_range_sigmas) -> DopField:
    num = np.asarray(position_error_sigmas, dtype=float)
    den = np.asarray(mean_range_sigmas, dtype=float)
    if np.any(den <= 0):
        raise InvalidArgumentError("range sigmas must be positive")
    values = num / den
    return DopField(values, float(np.mean(values)))
