"""Campaign configuration: YAML on disk, typed dataclasses in memory.

Keys carry their units (``snr_db``, ``chirp_duration_ms``). Presets fill in
everything; a config file and CLI flags override individual values.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .acoustics import PropagationModel, SignalConfig
from .errors import ConfigError, InfeasibleConfigError, InvalidArgumentError
from .pso import PsoHyperParams
from .room import Room, build_grid

CLI_MODES = {
    "abstract": "abstract_gaussian",
    "signal": "direct_path",
    "signal+reflections": "image_source",
}
RUN_MODES = ("evaluate", "optimize", "sweep", "bounds")

_BASE: dict[str, Any] = {
    "mode": "evaluate",
    "seed": None,
    "output_dir": "runs",
    "room": {
        "dims_m": [8.0, 4.0, 2.4],
        "allowed_planes": ["wall_y0", "wall_yMax", "ceiling"],
        "anchor_offset_m": 0.03,
        "mobile_offset_m": 0.05,
    },
    "grid": {"counts": [9, 6, 5]},
    "signal": {
        "sample_rate_hz": 192000.0,
        "chirp_f0_hz": 25000.0,
        "chirp_f1_hz": 45000.0,
        "chirp_duration_ms": 30.0,
        "capture_duration_ms": 1.0,
        "capture_start_ms": 28.0,
        "lpf_cutoff_hz": 2000.0,
        "speed_of_sound_m_s": 343.0,
        "peak_refine": True,
    },
    "propagation": {
        "mode": "signal+reflections",
        "reflection_order": 1,
        "wall_reflection_coeff": 0.5,
        "snr_db": 30.0,
        "abstract_range_sigma_m": 0.03,
    },
    "anchors": {"counts": [4], "layout": "corner"},
    "pso": {
        "omega": 0.729,
        "c1": 1.49445,
        "c2": 1.49445,
        "swarm_size": 15,
        "max_iterations": 40,
        "stop_threshold": 1e-3,
        "stop_patience": 5,
    },
    "realizations": {"optimize": 20, "final": 500},
}

PRESETS: dict[str, dict[str, Any]] = {
    "paper": {},
    "desk": {"grid": {"counts": [5, 4, 3]}, "realizations": {"optimize": 10, "final": 50}},
}


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve(preset: str = "desk", overrides: dict | None = None) -> dict:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    raw = merge(merge(_BASE, PRESETS[preset]), overrides or {})
    raw["preset"] = preset
    return raw


def load_yaml(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return data


def config_hash(raw: dict) -> str:
    """Content hash of everything that affects results (not where they go)."""
    keyed = {k: v for k, v in raw.items() if k != "output_dir"}
    blob = json.dumps(keyed, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True, eq=False)
class CampaignConfig:
    raw: dict
    mode: str
    seed: int
    room: Room
    grid_counts: tuple[int, int, int]
    signal: SignalConfig
    propagation: PropagationModel
    abstract_sigma: float
    anchor_counts: tuple[int, ...]
    layout: Any
    pso: PsoHyperParams
    r_optimize: int
    r_final: int
    output_dir: Path

    @property
    def grid(self):
        return build_grid(self.room, self.grid_counts)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def parse(raw: dict) -> CampaignConfig:
    """Validate a resolved raw mapping; raises ConfigError on any problem."""
    try:
        if raw.get("seed") is None:
            raise ConfigError("a master seed is required")
        mode = raw["mode"]
        if mode not in RUN_MODES:
            raise ConfigError(f"mode must be one of {RUN_MODES}, got {mode!r}")
        r, s, p = raw["room"], raw["signal"], raw["propagation"]
        room = Room(dims=tuple(r["dims_m"]), allowed_planes=tuple(r["allowed_planes"]),
                    anchor_offset=r["anchor_offset_m"], mobile_offset=r["mobile_offset_m"])
        signal = SignalConfig(
            sample_rate=s["sample_rate_hz"], chirp_f0=s["chirp_f0_hz"], chirp_f1=s["chirp_f1_hz"],
            chirp_duration=s["chirp_duration_ms"] / 1e3, capture_duration=s["capture_duration_ms"] / 1e3,
            capture_start=s["capture_start_ms"] / 1e3, lpf_cutoff=s["lpf_cutoff_hz"],
            speed_of_sound=s["speed_of_sound_m_s"], peak_refine=bool(s.get("peak_refine", True)))
        if p["mode"] not in CLI_MODES:
            raise ConfigError(f"propagation mode must be one of {sorted(CLI_MODES)}, got {p['mode']!r}")
        prop_mode = CLI_MODES[p["mode"]]
        order = int(p["reflection_order"]) if prop_mode == "image_source" else 0
        propagation = PropagationModel(mode=prop_mode, reflection_order=order,
                                       wall_reflection_coeff=p["wall_reflection_coeff"], snr_db=p["snr_db"])
        if prop_mode != "abstract_gaussian":
            signal.check_room(room)
        sigma = float(p["abstract_range_sigma_m"])
        if sigma < 0:
            raise ConfigError("abstract_range_sigma_m must be >= 0")
        counts = tuple(int(m) for m in raw["anchors"]["counts"])
        if not counts or min(counts) < 4:
            raise ConfigError("anchors.counts needs at least one entry, each >= 4")
        pso = PsoHyperParams(**raw["pso"])
        grid_counts = tuple(int(n) for n in raw["grid"]["counts"])
        build_grid(room, grid_counts)
        r_opt, r_final = int(raw["realizations"]["optimize"]), int(raw["realizations"]["final"])
        if r_opt < 1 or r_final < 1:
            raise ConfigError("realization counts must be >= 1")
        return CampaignConfig(raw=raw, mode=mode, seed=int(raw["seed"]), room=room, grid_counts=grid_counts,
                              signal=signal, propagation=propagation, abstract_sigma=sigma,
                              anchor_counts=counts, layout=raw["anchors"].get("layout", "corner"),
                              pso=pso, r_optimize=r_opt, r_final=r_final,
                              output_dir=Path(raw.get("output_dir") or "runs"))
    except (ConfigError, InfeasibleConfigError):
        raise
    except (InvalidArgumentError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def build(preset: str = "desk", overrides: dict | None = None, **kw) -> CampaignConfig:
    """Resolve a preset plus overrides; keyword args are top-level overrides."""
    return parse(resolve(preset, merge(overrides or {}, kw)))
