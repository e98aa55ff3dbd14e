"""Monte Carlo evaluation of anchor layouts over the mobile grid.

Noise draws use common random numbers: realization ``r`` of anchor ``j`` at
position ``p`` is the same unit-noise vector for every layout evaluated with
the same seed and namespace, only scaled by that layout's noise std. The
optimization cost is therefore a deterministic function of the layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import streams
from .acoustics import PropagationModel, SignalChain, SignalConfig, true_ranges
from .bounds import DopField, ErrorStats, dop_field, stats_from_errors
from .positioning import solve_ls_batch
from .room import AnchorLayout, MobileGrid, Room

BLOCK = 16


@dataclass(frozen=True, eq=False)
class Evaluation:
    layout: AnchorLayout
    positions: np.ndarray  # (P, 3)
    ranges: np.ndarray  # (R, M, P)
    true_ranges: np.ndarray  # (M, P)
    estimates: np.ndarray  # (R, P, 3)
    noise_stds: np.ndarray  # (M,) signal-amplitude stds, or range sigmas in abstract mode

    @cached_property
    def errors(self) -> np.ndarray:
        """Euclidean position error, (R, P)."""
        return np.linalg.norm(self.estimates - self.positions[None], axis=-1)

    @cached_property
    def stats(self) -> ErrorStats:
        return stats_from_errors(self.errors)

    @property
    def range_errors(self) -> np.ndarray:
        return self.ranges - self.true_ranges[None]

    @property
    def n_realizations(self) -> int:
        return len(self.ranges)

    def _std(self, values, axis=0):
        ddof = 1 if values.shape[axis] > 1 else 0
        return np.std(values, axis=axis, ddof=ddof)

    @property
    def position_error_mean(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    @property
    def position_error_std(self) -> np.ndarray:
        return self._std(self.errors)

    @property
    def position_rmse(self) -> np.ndarray:
        return np.sqrt(np.mean(self.errors ** 2, axis=0))

    @property
    def mean_range_sigma(self) -> np.ndarray:
        """Per position: average over anchors of the range-error std."""
        return self._std(self.range_errors).mean(axis=0)

    def dop(self):
        """DOP per position; NaN where the ranges never vary across realizations.

        Returns None when no position has any ranging spread.
        """
        den = self.mean_range_sigma
        ok = den > 0
        if not ok.any():
            return None
        part = dop_field(self.position_error_std[ok], den[ok])
        values = np.full(len(den), np.nan)
        values[ok] = part.values
        return DopField(values, part.mean_dop)

    def axis_errors(self) -> np.ndarray:
        """Absolute per-axis errors, (R, P, 3)."""
        return np.abs(self.estimates - self.positions[None])


class Simulator:
    """Ranging + LS positioning for one room/grid/signal setup and master seed."""

    def __init__(self, room: Room, grid: MobileGrid, signal: SignalConfig, model: PropagationModel,
                 seed: int, abstract_sigma: float = 0.03, r_optimize: int = 10):
        self.room, self.grid, self.signal, self.model = room, grid, signal, model
        self.seed = int(seed)
        self.abstract_sigma = float(abstract_sigma)
        self.r_optimize = int(r_optimize)
        self.chain = None if model.mode == "abstract_gaussian" else SignalChain(room, signal, model)
        self._bank: np.ndarray | None = None

    @classmethod
    def from_config(cls, cfg) -> "Simulator":
        return cls(cfg.room, cfg.grid, cfg.signal, cfg.propagation, cfg.seed, cfg.abstract_sigma, cfg.r_optimize)

    @property
    def abstract(self) -> bool:
        return self.chain is None

    @property
    def _length(self) -> int:
        return 1 if self.abstract else self.signal.n_window

    def _blocks(self, namespace: int, n_anchors: int, n_real: int):
        if namespace == streams.OPTIMIZE_NOISE and n_real == self.r_optimize:
            if self._bank is None or self._bank.shape[1] < n_anchors:
                self._bank = streams.standard_normal_bank(self.seed, namespace, n_anchors, len(self.grid),
                                                          n_real, self._length)
            bank = self._bank[:, :n_anchors]
            return [bank[r0:r0 + BLOCK] for r0 in range(0, n_real, BLOCK)]
        return streams.normal_blocks(self.seed, namespace, n_anchors, len(self.grid), n_real,
                                     self._length, block=BLOCK)

    def noise_stds(self, layout: AnchorLayout) -> np.ndarray:
        if self.abstract:
            return np.full(len(layout), self.abstract_sigma)
        return self.chain.noise_stds(layout, self.grid)

    def ranges(self, layout: AnchorLayout, namespace: int, n_real: int) -> np.ndarray:
        """Range estimates, shape (R, M, P)."""
        m = len(layout)
        blocks = self._blocks(namespace, m, n_real)
        if self.abstract:
            true = true_ranges(layout.anchors, self.grid.positions)
            return np.concatenate([true[None] + self.abstract_sigma * b[..., 0] for b in blocks], axis=0)
        return self.chain.ranges(layout, self.grid, blocks)

    def evaluate(self, layout: AnchorLayout, n_real: int, namespace: int = streams.EVALUATE_NOISE) -> Evaluation:
        ranges = self.ranges(layout, namespace, n_real)
        estimates = solve_ls_batch(layout.anchors, np.swapaxes(ranges, 1, 2))
        return Evaluation(layout, self.grid.positions, ranges, true_ranges(layout.anchors, self.grid.positions),
                          estimates, self.noise_stds(layout))

    def cost(self, layout: AnchorLayout) -> float:
        """Sample variance of all Euclidean errors under the optimization noise bank."""
        return self.evaluate(layout, self.r_optimize, streams.OPTIMIZE_NOISE).stats.variance
