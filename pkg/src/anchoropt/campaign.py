"""Campaign runners and run artifacts.

Each runner takes a validated :class:`CampaignConfig` and returns a
:class:`RunArtifact`: the resolved config snapshot plus plain tables (lists of
row dicts) that :func:`export_tables` writes as CSV/JSON.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bounds import fit_range_sigmas, peb_field
from .config import CampaignConfig, config_hash, parse
from .errors import ConfigError, InvalidArgumentError
from .pso import OptimizeResult, SwarmState, optimize
from .room import AnchorLayout, corner_layout, make_layout, project_layout
from .simulation import Evaluation, Simulator

log = logging.getLogger(__name__)


@dataclass(eq=False)
class RunArtifact:
    name: str
    config: dict
    summary: dict
    tables: dict[str, list[dict]] = field(default_factory=dict)
    records: list[dict] = field(default_factory=list)
    version: str = __version__

    @property
    def layout(self) -> list[list[float]]:
        return self.summary["layout"]


# ---------------------------------------------------------------- helpers

def resolve_layout(cfg: CampaignConfig, spec=None) -> AnchorLayout:
    """Layout from config: ``corner``, or an explicit list of [x, y, z]."""
    spec = cfg.layout if spec is None else spec
    if isinstance(spec, str):
        if spec == "corner":
            return corner_layout(cfg.room)
        raise ConfigError(f"unknown layout name {spec!r}")
    try:
        return make_layout(np.asarray(spec, dtype=float), cfg.room)
    except (InvalidArgumentError, ValueError) as exc:
        raise ConfigError(f"infeasible layout: {exc}") from exc


def layout_rows(layout: AnchorLayout, noise_stds=None) -> list[dict]:
    rows = []
    for j, (a, d, plane) in enumerate(zip(layout.anchors, layout.directivities, layout.plane_of)):
        row = {"anchor": j, "x_m": a[0], "y_m": a[1], "z_m": a[2], "plane": plane,
               "dir_x": d[0], "dir_y": d[1], "dir_z": d[2]}
        if noise_stds is not None:
            row["noise_std"] = noise_stds[j]
        rows.append(row)
    return rows


def cdf_rows(values, label: str) -> list[dict]:
    x = np.sort(np.ravel(values))
    n = len(x)
    return [{"series": label, "value_m": v, "cumulative": (i + 1) / n} for i, v in enumerate(x)]


def _range_sigmas_for_bounds(cfg: CampaignConfig, ev: Evaluation):
    if ev.n_realizations >= 30 and np.any(ev.range_errors != 0):
        try:
            return fit_range_sigmas(ev.range_errors)
        except Exception as exc:
            log.warning("range sigma fit failed (%s); using configured sigma", exc)
    return None


def evaluation_tables(cfg: CampaignConfig, ev: Evaluation, sigmas=None) -> tuple[dict, dict]:
    """Summary fields and per-position / CDF tables for one evaluated layout."""
    fit = _range_sigmas_for_bounds(cfg, ev) if sigmas is None else None
    if sigmas is None:
        sigmas = fit.sigmas if fit is not None else np.full(len(ev.layout), max(cfg.abstract_sigma, 1e-6))
    peb = peb_field(ev.layout, ev.positions, sigmas)
    dop = ev.dop()
    stats = ev.stats
    positions = []
    for p, pos in enumerate(ev.positions):
        positions.append({
            "position": p, "x_m": pos[0], "y_m": pos[1], "z_m": pos[2],
            "mean_error_m": ev.position_error_mean[p], "error_std_m": ev.position_error_std[p],
            "rmse_m": ev.position_rmse[p], "mean_range_sigma_m": ev.mean_range_sigma[p],
            "dop": dop.values[p] if dop is not None else math.nan,
            "peb_m2": peb.peb[p], "peb_defined": bool(peb.defined[p]),
        })
    axis = ev.axis_errors()
    cdf = cdf_rows(ev.errors, "euclidean")
    for k, name in enumerate("xyz"):
        cdf += cdf_rows(axis[..., k], name)
    summary = {
        "sigma_m": stats.sigma, "mu_m": stats.mu, "p95_m": stats.p95, "variance_m2": stats.variance,
        "n_errors": stats.n, "mean_dop": dop.mean_dop if dop is not None else None,
        "range_sigmas_m": [float(s) for s in sigmas],
        "range_sigma_outlier_fraction": None if fit is None else [float(f) for f in fit.removed_fraction],
        "noise_stds": [float(s) for s in ev.noise_stds],
        "peb_undefined": peb.n_undefined,
        "layout": ev.layout.anchors.tolist(), "planes": list(ev.layout.plane_of),
    }
    tables = {"positions": positions, "cdf": cdf, "layout": layout_rows(ev.layout, ev.noise_stds)}
    return summary, tables


def _artifact(cfg: CampaignConfig, verb: str, summary: dict, tables: dict, records=None) -> RunArtifact:
    return RunArtifact(name=f"{verb}-{cfg.hash}", config=cfg.raw, summary=summary, tables=tables,
                       records=records or [])


# ---------------------------------------------------------------- runners

def run_evaluate(cfg: CampaignConfig, layout: AnchorLayout | None = None, sim: Simulator | None = None) -> RunArtifact:
    layout = resolve_layout(cfg) if layout is None else layout
    layout.validate(cfg.room)
    sim = sim or Simulator.from_config(cfg)
    ev = sim.evaluate(layout, cfg.r_final)
    summary, tables = evaluation_tables(cfg, ev)
    summary.update(mode="evaluate", n_anchors=len(layout), realizations=cfg.r_final)
    return _artifact(cfg, "evaluate", summary, tables)


def iteration_record(state: SwarmState, cfg: CampaignConfig) -> dict:
    layout = project_layout(state.g_best, cfg.room)
    sigmas = np.full(len(layout), max(cfg.abstract_sigma, 1e-6))
    peb = peb_field(layout, cfg.grid, sigmas)
    finite = [p.cost for p in state.particles if math.isfinite(p.cost)]
    defined = peb.peb[peb.defined]
    return {
        "iteration": state.t,
        "g_best_cost_m2": state.g_best_cost,
        "mean_particle_cost_m2": float(np.mean(finite)) if finite else math.inf,
        "infeasible_particles": len(state.particles) - len(finite),
        "peb_median_m2": float(np.median(defined)) if len(defined) else math.nan,
        "peb_max_m2": float(np.max(defined)) if len(defined) else math.nan,
        "peb_undefined": peb.n_undefined,
        "layout": json.dumps(layout.anchors.round(12).tolist()),
    }


def optimize_layout(cfg: CampaignConfig, n_anchors: int, sim: Simulator) -> OptimizeResult:
    return optimize(cfg.room, n_anchors, cfg.pso, sim.cost, cfg.seed)


def run_optimize(cfg: CampaignConfig, n_anchors: int | None = None, sim: Simulator | None = None) -> RunArtifact:
    n_anchors = cfg.anchor_counts[0] if n_anchors is None else n_anchors
    sim = sim or Simulator.from_config(cfg)
    result = optimize_layout(cfg, n_anchors, sim)
    records = [iteration_record(s, cfg) for s in result.history]
    ev = sim.evaluate(result.layout, cfg.r_final)
    summary, tables = evaluation_tables(cfg, ev)
    summary.update(mode="optimize", n_anchors=n_anchors, realizations=cfg.r_final,
                   iterations=result.history[-1].t, optimization_cost_m2=result.cost)
    tables["iterations"] = records
    return _artifact(cfg, "optimize", summary, tables, records)


def table1_rows(artifacts: list[RunArtifact]) -> list[dict]:
    return [{"n_anchors": a.summary["n_anchors"], "sigma_m": a.summary["sigma_m"],
             "mu_m": a.summary["mu_m"], "p95_m": a.summary["p95_m"]} for a in artifacts]


def run_sweep(cfg: CampaignConfig) -> tuple[RunArtifact, list[RunArtifact]]:
    """Optimize and evaluate every anchor count; returns (combined, per-M) artifacts."""
    sim = Simulator.from_config(cfg)
    per_m = [run_optimize(cfg, m, sim) for m in cfg.anchor_counts]
    cdf, peb_cdf = [], []
    for art in per_m:
        m = art.summary["n_anchors"]
        cdf += [dict(row, n_anchors=m) for row in art.tables["cdf"] if row["series"] == "euclidean"]
        bounds = [r["peb_m2"] for r in art.tables["positions"] if r["peb_defined"]]
        peb_cdf += [dict(row, n_anchors=m) for row in cdf_rows(np.sqrt(bounds), "peb_bound")]
    summary = {"mode": "sweep", "anchor_counts": list(cfg.anchor_counts), "runs": [a.name for a in per_m],
               "table": table1_rows(per_m)}
    tables = {"table1": table1_rows(per_m), "cdf": cdf, "peb_cdf": peb_cdf}
    return _artifact(cfg, "sweep", summary, tables), per_m


def run_bounds(cfg: CampaignConfig, layout: AnchorLayout | None = None, sim: Simulator | None = None) -> RunArtifact:
    """PEB field with fitted range sigmas against per-position RMSE."""
    layout = resolve_layout(cfg) if layout is None else layout
    layout.validate(cfg.room)
    sim = sim or Simulator.from_config(cfg)
    ev = sim.evaluate(layout, cfg.r_final)
    fit = fit_range_sigmas(ev.range_errors) if ev.n_realizations >= 30 else None
    sigmas = fit.sigmas if fit is not None else np.full(len(layout), max(cfg.abstract_sigma, 1e-6))
    summary, tables = evaluation_tables(cfg, ev, sigmas=sigmas)
    peb = peb_field(layout, ev.positions, sigmas)
    rmse = ev.position_rmse
    bound = peb.bound_m[peb.defined]
    tables["bound_cdf"] = cdf_rows(rmse, "rmse") + cdf_rows(bound, "peb_bound")
    summary.update(
        mode="bounds", n_anchors=len(layout), realizations=cfg.r_final,
        range_sigma_outlier_fraction=None if fit is None else [float(f) for f in fit.removed_fraction],
        rmse_median_m=float(np.median(rmse)), rmse_p95_m=float(np.percentile(rmse, 95)),
        rmse_max_m=float(np.max(rmse)),
        peb_bound_median_m=float(np.median(bound)) if len(bound) else None,
        peb_bound_p95_m=float(np.percentile(bound, 95)) if len(bound) else None,
        peb_bound_max_m=float(np.max(bound)) if len(bound) else None,
    )
    return _artifact(cfg, "bounds", summary, tables)


# ---------------------------------------------------------------- export / load

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else repr(value)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def csv_text(rows: list[dict]) -> str:
    if not rows:
        return ""
    columns = list(rows[0])
    for row in rows[1:]:
        columns += [k for k in row if k not in columns]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in columns])
    return buf.getvalue()


def export_tables(artifact: RunArtifact, out_dir, fmt: str = "csv") -> list[Path]:
    """Write an artifact; returns the written paths.

    ``csv`` writes one CSV per table plus ``summary.json``, ``config.yaml`` and
    (for optimizations) ``iterations.jsonl``. ``json`` writes everything into
    ``artifact.json``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    def write(name, text):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    summary = {"name": artifact.name, "version": artifact.version, **artifact.summary}
    if fmt == "json":
        doc = {"summary": summary, "config": artifact.config, "tables": artifact.tables}
        write("artifact.json", json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n")
        return written
    if fmt != "csv":
        raise InvalidArgumentError(f"unknown export format {fmt!r}")
    write("config.yaml", yaml.safe_dump(artifact.config, sort_keys=True))
    write("summary.json", json.dumps(_jsonable(summary), indent=1, sort_keys=True) + "\n")
    for name, rows in sorted(artifact.tables.items()):
        write(f"{name}.csv", csv_text(rows))
    if artifact.records:
        write("iterations.jsonl", "".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in artifact.records))
    return written


def _parse_cell(text: str):
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_artifact(run_dir) -> RunArtifact:
    run_dir = Path(run_dir)
    if (run_dir / "artifact.json").exists():
        doc = json.loads((run_dir / "artifact.json").read_text())
        summary = doc["summary"]
        config, tables = doc["config"], doc["tables"]
    else:
        summary = json.loads((run_dir / "summary.json").read_text())
        config = yaml.safe_load((run_dir / "config.yaml").read_text())
        tables = {}
        for path in sorted(run_dir.glob("*.csv")):
            with path.open(newline="") as fh:
                tables[path.stem] = [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    name = summary.pop("name")
    version = summary.pop("version")
    records = []
    if (run_dir / "iterations.jsonl").exists():
        records = [json.loads(line) for line in (run_dir / "iterations.jsonl").read_text().splitlines()]
    return RunArtifact(name=name, config=config, summary=summary, tables=tables, records=records, version=version)


def rerun(run_dir) -> RunArtifact:
    """Recompute an artifact from the config snapshot stored next to it."""
    art = load_artifact(run_dir)
    cfg = parse(art.config)
    runner = {"evaluate": run_evaluate, "optimize": run_optimize, "bounds": run_bounds}
    if cfg.mode == "sweep":
        return run_sweep(cfg)[0]
    return runner[cfg.mode](cfg)


def run_dir_for(cfg: CampaignConfig, verb: str, out=None) -> Path:
    base = Path(out) if out is not None else cfg.output_dir
    return base / f"{verb}-{config_hash(cfg.raw)}"
