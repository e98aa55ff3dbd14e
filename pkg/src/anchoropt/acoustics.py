"""Chirp ranging simulator and the abstract Gaussian range model.

The signal chain mirrors an ultrasonic ToF system with perfect sync: each
anchor emits a linear up-chirp, the mobile captures a short window a fixed
time after sync, and the range follows from where that window sits inside
the transmitted chirp. The in-chirp offset is found by pulse compression:
cross-correlate, take the magnitude, smooth it with a moving average and pick
the maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter1d

from .errors import InfeasibleConfigError, InvalidArgumentError, NoPeakError
from .room import AnchorLayout, MobileGrid, Room, cardioid_gain

MODES = ("abstract_gaussian", "direct_path", "image_source")


@dataclass(frozen=True)
class SignalConfig:
    sample_rate: float = 192_000.0
    chirp_f0: float = 25_000.0
    chirp_f1: float = 45_000.0
    chirp_duration: float = 0.030
    capture_duration: float = 0.001
    capture_start: float = 0.028
    lpf_cutoff: float = 2_000.0
    speed_of_sound: float = 343.0
    # Snap the smoothed-envelope peak to the strongest in-phase correlation
    # lag within half a filter width. Without it the flat envelope top costs
    # tens of millimetres even without noise.
    peak_refine: bool = True

    def __post_init__(self):
        if not 0 < self.chirp_f0 < self.chirp_f1:
            raise InvalidArgumentError("need 0 < chirp_f0 < chirp_f1")
        if self.sample_rate <= 2 * self.chirp_f1:
            raise InvalidArgumentError("sample_rate must exceed twice chirp_f1")
        if min(self.chirp_duration, self.capture_duration, self.lpf_cutoff, self.speed_of_sound) <= 0:
            raise InvalidArgumentError("durations, lpf_cutoff and speed_of_sound must be positive")
        if self.capture_start < 0 or self.capture_start + self.capture_duration > self.chirp_duration:
            raise InvalidArgumentError("capture window must lie within the chirp duration")
        if self.n_window >= self.n_chirp:
            raise InvalidArgumentError("capture window must be shorter than the chirp")

    @property
    def n_chirp(self) -> int:
        return int(round(self.chirp_duration * self.sample_rate))

    @property
    def n_window(self) -> int:
        return int(round(self.capture_duration * self.sample_rate))

    @property
    def start_sample(self) -> int:
        return int(round(self.capture_start * self.sample_rate))

    @property
    def lpf_width(self) -> int:
        # Odd width keeps the centred moving average free of a half-sample shift.
        return int(round(self.sample_rate / self.lpf_cutoff)) | 1

    def check_room(self, room: Room) -> None:
        """Every in-room direct path must land the window inside the chirp."""
        max_delay = room.max_distance / self.speed_of_sound
        if self.capture_start < max_delay:
            raise InfeasibleConfigError(
                f"capture_start {self.capture_start * 1e3:.2f} ms is earlier than the "
                f"longest in-room delay {max_delay * 1e3:.2f} ms")


@dataclass(frozen=True)
class PropagationModel:
    mode: str = "direct_path"
    reflection_order: int = 0
    wall_reflection_coeff: float = 0.5
    snr_db: float = 30.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.reflection_order < 0:
            raise InvalidArgumentError("reflection_order must be >= 0")
        if self.mode == "image_source" and self.reflection_order < 1:
            raise InvalidArgumentError("image_source mode requires reflection_order >= 1")
        if not 0 <= self.wall_reflection_coeff < 1:
            raise InvalidArgumentError("wall_reflection_coeff must lie in [0, 1)")

    @property
    def order(self) -> int:
        return self.reflection_order if self.mode == "image_source" else 0


@dataclass(frozen=True, eq=False)
class RangingRealization:
    ranges: np.ndarray  # (M, P)
    true_ranges: np.ndarray  # (M, P)
    noise_sigma_per_anchor: np.ndarray  # (M,)

    def __post_init__(self):
        if self.ranges.shape != self.true_ranges.shape:
            raise InvalidArgumentError("ranges and true_ranges must share a shape")
        if np.any(self.true_ranges <= 0):
            raise InvalidArgumentError("true ranges must be positive")

    @property
    def errors(self) -> np.ndarray:
        return self.ranges - self.true_ranges


def generate_chirp(cfg: SignalConfig) -> np.ndarray:
    """Linear up-chirp with unit peak amplitude, starting at zero phase."""
    t = np.arange(cfg.n_chirp) / cfg.sample_rate
    sweep = (cfg.chirp_f1 - cfg.chirp_f0) / (2 * cfg.chirp_duration)
    return np.sin(2 * np.pi * (cfg.chirp_f0 * t + sweep * t ** 2))


def image_sources(source, directivity, room: Room, order: int):
    """Image sources of a point source in a rigid box, up to ``order`` bounces.

    Returns ``(positions, directivities, bounces)``; row 0 is the real source.
    Mirroring flips the matching directivity component, so the cardioid gain
    of an image toward the receiver equals the real source's gain along the
    departing ray.
    """
    source = np.asarray(source, dtype=float)
    directivity = np.asarray(directivity, dtype=float)
    per_axis = []
    for axis in range(3):
        opts = []
        for n in range(-order, order + 1):
            for q in (0, 1):
                bounces = abs(n - q) + abs(n)
                if bounces <= order:
                    sign = 1 - 2 * q
                    opts.append((2 * n * room.dims[axis] + sign * source[axis], sign, bounces))
        per_axis.append(opts)
    positions, dirs, counts = [source], [directivity], [0]
    for ox in per_axis[0]:
        for oy in per_axis[1]:
            for oz in per_axis[2]:
                total = ox[2] + oy[2] + oz[2]
                if total == 0 or total > order:
                    continue
                positions.append(np.array([ox[0], oy[0], oz[0]]))
                dirs.append(directivity * np.array([ox[1], oy[1], oz[1]]))
                counts.append(total)
    return np.array(positions), np.array(dirs), np.array(counts)


def propagation_paths(anchor, directivity, mobiles, room: Room, model: PropagationModel):
    """Path lengths and amplitudes from one anchor to each mobile, shape (K, P)."""
    mobiles = np.atleast_2d(np.asarray(mobiles, dtype=float))
    images, dirs, bounces = image_sources(anchor, directivity, room, model.order)
    delta = mobiles[None, :, :] - images[:, None, :]
    lengths = np.linalg.norm(delta, axis=-1)
    if np.any(lengths[0] == 0):
        raise InvalidArgumentError("mobile coincides with the anchor")
    gains = cardioid_gain(dirs[:, None, :], delta / lengths[..., None])
    gains = gains * model.wall_reflection_coeff ** bounces[:, None] / lengths
    return lengths, gains


def _window_from_paths(chirp, lengths, gains, cfg: SignalConfig, direct_index: int | None = 0):
    """Sum of delayed, scaled chirp copies over the capture window.

    ``lengths``/``gains`` have shape (K, P); returns (P, n_window).
    Samples outside the chirp are silent.
    """
    n_chirp, n_win = len(chirp), cfg.n_window
    delays = np.rint(lengths / cfg.speed_of_sound * cfg.sample_rate).astype(np.int64)
    offsets = cfg.start_sample - delays  # in-chirp index of the first captured sample
    if direct_index is not None:
        direct = offsets[direct_index]
        if np.any(direct < 0) or np.any(direct + n_win > n_chirp):
            raise InfeasibleConfigError("capture window falls outside the direct-path chirp arrival")
    idx = offsets[..., None] + np.arange(n_win)
    inside = (idx >= 0) & (idx < n_chirp)
    segments = np.where(inside, chirp[np.clip(idx, 0, n_chirp - 1)], 0.0)
    return np.einsum("kp,kpn->pn", gains, segments)


def simulate_reception(chirp, anchor, directivity, mobile, model: PropagationModel, cfg: SignalConfig,
                       noise_std: float, rng: np.random.Generator, room: Room | None = None) -> np.ndarray:
    """Captured window at one mobile for one anchor transmission."""
    if model.mode == "abstract_gaussian":
        raise InvalidArgumentError("abstract_gaussian mode has no signal to simulate")
    if model.order and room is None:
        raise InvalidArgumentError("image_source mode needs the room")
    room = room or Room()
    lengths, gains = propagation_paths(anchor, directivity, [mobile], room, model)
    window = _window_from_paths(chirp, lengths, gains, cfg)[0]
    if noise_std > 0:
        window = window + noise_std * rng.standard_normal(window.shape)
    return window


class Correlator:
    """Batched pulse-compression range estimator for a fixed chirp.

    Holds the Toeplitz matrix of every full-overlap chirp segment so one
    matrix product correlates a whole batch of windows over all lags.
    """

    def __init__(self, chirp, cfg: SignalConfig, block: int = 512):
        self.cfg = cfg
        self.block = block
        n_win = cfg.n_window
        padded = np.concatenate([np.zeros(n_win - 1), chirp, np.zeros(n_win - 1)])
        # row i <-> window starting at in-chirp index i - (n_win - 1)
        self._segments = np.ascontiguousarray(sliding_window_view(padded, n_win), dtype=np.float32)
        self._half = cfg.lpf_width // 2

    def offsets(self, windows) -> np.ndarray:
        """In-chirp start index (integer lag) for each window, shape (...,)."""
        windows = np.asarray(windows)
        lead = windows.shape[:-1]
        flat = windows.reshape(-1, windows.shape[-1]).astype(np.float32)
        if np.any(~flat.any(axis=1)):
            raise NoPeakError("all-zero capture window has no correlation peak")
        out = np.empty(len(flat), dtype=np.int64)
        steps = np.arange(-self._half, self._half + 1)
        for b0 in range(0, len(flat), self.block):
            corr = flat[b0:b0 + self.block] @ self._segments.T
            envelope = uniform_filter1d(np.abs(corr), size=self.cfg.lpf_width, axis=1, mode="constant")
            peak = np.argmax(envelope, axis=1)
            if self.cfg.peak_refine:
                idx = np.clip(peak[:, None] + steps, 0, corr.shape[1] - 1)
                local = np.take_along_axis(corr, idx, axis=1)
                peak = idx[np.arange(len(idx)), np.argmax(local, axis=1)]
            out[b0:b0 + len(peak)] = peak
        return (out - (self.cfg.n_window - 1)).reshape(lead)

    def ranges(self, windows) -> np.ndarray:
        lag = self.offsets(windows)
        delay = (self.cfg.start_sample - lag) / self.cfg.sample_rate
        return self.cfg.speed_of_sound * delay


def estimate_range(captured, chirp, cfg: SignalConfig) -> float:
    captured = np.asarray(captured, dtype=float)
    if len(captured) >= len(chirp):
        raise InvalidArgumentError("capture window must be shorter than the chirp")
    return float(Correlator(chirp, cfg).ranges(captured[None, :])[0])


def calibrate_noise(anchor, directivity, grid: MobileGrid, model: PropagationModel, cfg: SignalConfig,
                    chirp=None, room: Room | None = None) -> float:
    """Noise std giving ``snr_db`` for the direct path at the closest grid position."""
    if len(grid.positions) == 0:
        raise InvalidArgumentError("grid is empty")
    chirp = generate_chirp(cfg) if chirp is None else chirp
    anchor = np.asarray(anchor, dtype=float)
    closest = grid.positions[np.argmin(np.linalg.norm(grid.positions - anchor, axis=1))]
    direct = PropagationModel(mode="direct_path", snr_db=model.snr_db)
    lengths, gains = propagation_paths(anchor, directivity, [closest], room or Room(), direct)
    clean = _window_from_paths(chirp, lengths, gains, cfg)[0]
    rms = np.sqrt(np.mean(clean ** 2))
    return float(rms / 10 ** (model.snr_db / 20))


def draw_abstract_ranges(layout: AnchorLayout, grid: MobileGrid, sigmas, rng: np.random.Generator) -> RangingRealization:
    """Ranges under ``r = ||p - a|| + n`` with independent zero-mean Gaussian ``n``."""
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.shape != (len(layout),) or np.any(sigmas < 0):
        raise InvalidArgumentError("need one non-negative sigma per anchor")
    true = true_ranges(layout.anchors, grid.positions)
    noise = rng.standard_normal(true.shape) * sigmas[:, None]
    return RangingRealization(true + noise, true, sigmas)


def true_ranges(anchors, positions) -> np.ndarray:
    """Distance matrix, anchor j x position p."""
    return np.linalg.norm(np.asarray(positions)[None, :, :] - np.asarray(anchors)[:, None, :], axis=-1)


class SignalChain:
    """Signal-level ranging for whole layouts over a fixed grid."""

    def __init__(self, room: Room, cfg: SignalConfig, model: PropagationModel):
        if model.mode == "abstract_gaussian":
            raise InvalidArgumentError("SignalChain needs a signal propagation mode")
        cfg.check_room(room)
        self.room, self.cfg, self.model = room, cfg, model
        self.chirp = generate_chirp(cfg)
        self.correlator = Correlator(self.chirp, cfg)

    def clean_windows(self, layout: AnchorLayout, positions) -> np.ndarray:
        """Noise-free captures, shape (M, P, n_window)."""
        out = []
        for a, d in zip(layout.anchors, layout.directivities):
            lengths, gains = propagation_paths(a, d, positions, self.room, self.model)
            out.append(_window_from_paths(self.chirp, lengths, gains, self.cfg))
        return np.array(out)

    def noise_stds(self, layout: AnchorLayout, grid: MobileGrid) -> np.ndarray:
        return np.array([calibrate_noise(a, d, grid, self.model, self.cfg, self.chirp, self.room)
                         for a, d in zip(layout.anchors, layout.directivities)])

    def ranges(self, layout: AnchorLayout, grid: MobileGrid, noise_blocks: Iterable[np.ndarray]) -> np.ndarray:
        """Range estimates (R, M, P) for unit-noise blocks shaped (r, M, P, n_window).

        Blocks may carry more anchors than the layout; the leading ones are used.
        """
        clean = self.clean_windows(layout, grid.positions)
        stds = self.noise_stds(layout, grid)
        m = len(layout)
        out = [self.correlator.ranges(clean[None] + stds[None, :, None, None] * block[:, :m])
               for block in noise_blocks]
        return np.concatenate(out, axis=0)
