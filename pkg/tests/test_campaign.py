import csv
import json
import math
import os

import numpy as np
import pytest
import yaml

from anchoropt import campaign, cli, config
from anchoropt.errors import ConfigError, InfeasibleConfigError

SMALL = {
    "grid": {"counts": [3, 3, 2]},
    "realizations": {"optimize": 5, "final": 40},
    "pso": {"max_iterations": 3, "swarm_size": 4},
}


def small(mode="evaluate", prop="abstract", **extra):
    return config.build("desk", config.merge(SMALL, extra), seed=7, mode=mode,
                        propagation={"mode": prop})


def write_config(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_presets_resolve():
    desk = config.build("desk", seed=1)
    paper = config.build("paper", seed=1)
    assert len(desk.grid) == 60 and (desk.r_optimize, desk.r_final) == (10, 50)
    assert len(paper.grid) == 270 and (paper.r_optimize, paper.r_final) == (20, 500)
    assert desk.propagation.mode == "image_source" and desk.propagation.order == 1


@pytest.mark.parametrize("override", [
    {"seed": None},
    {"mode": "dance"},
    {"propagation": {"mode": "telepathy"}},
    {"anchors": {"counts": [3]}},
    {"pso": {"omega": 2.0}},
    {"grid": {"counts": [0, 2, 2]}},
    {"realizations": {"optimize": 0}},
    {"propagation": {"abstract_range_sigma_m": -1}},
])
def test_invalid_configs_raise_config_error(override):
    raw = config.resolve("desk", config.merge({"seed": 1}, override))
    with pytest.raises(ConfigError):
        config.parse(raw)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        config.resolve("garage")


def test_infeasible_capture_window_is_not_a_config_error():
    raw = config.resolve("desk", {"seed": 1, "signal": {"capture_start_ms": 5.0}})
    with pytest.raises(InfeasibleConfigError):
        config.parse(raw)


def test_config_hash_ignores_output_dir():
    a = config.resolve("desk", {"seed": 1, "output_dir": "a"})
    b = config.resolve("desk", {"seed": 1, "output_dir": "b"})
    c = config.resolve("desk", {"seed": 2})
    assert config.config_hash(a) == config.config_hash(b) != config.config_hash(c)


def test_evaluate_tables():
    art = campaign.run_evaluate(small())
    assert len(art.tables["positions"]) == 18
    assert {r["series"] for r in art.tables["cdf"]} == {"euclidean", "x", "y", "z"}
    eu = [r for r in art.tables["cdf"] if r["series"] == "euclidean"]
    assert len(eu) == 18 * 40
    values = [r["value_m"] for r in eu]
    cum = [r["cumulative"] for r in eu]
    assert values == sorted(values) and cum == sorted(cum) and cum[-1] == 1.0
    assert art.summary["sigma_m"] ** 2 == pytest.approx(art.summary["variance_m2"])


def test_explicit_layout_and_infeasible_layout():
    cfg = small(anchors={"layout": [[1, 0.03, 1], [5, 3.97, 1], [2, 2, 2.37], [6, 1, 2.37]]})
    assert campaign.run_evaluate(cfg).summary["planes"] == ["wall_y0", "wall_yMax", "ceiling", "ceiling"]
    with pytest.raises(ConfigError):
        campaign.resolve_layout(small(anchors={"layout": [[4, 2, 1.2]] * 4}))


def test_optimize_records_iterations():
    art = campaign.run_optimize(small("optimize"))
    recs = art.records
    assert [r["iteration"] for r in recs] == list(range(len(recs)))
    costs = [r["g_best_cost_m2"] for r in recs]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert art.summary["optimization_cost_m2"] == costs[-1]


def test_sweep_table1_columns():
    combined, per_m = campaign.run_sweep(small("sweep", anchors={"counts": [4, 6]}))
    rows = combined.tables["table1"]
    assert [r["n_anchors"] for r in rows] == [4, 6]
    assert set(rows[0]) == {"n_anchors", "sigma_m", "mu_m", "p95_m"}
    assert len(per_m) == 2


def test_sweep_of_one_count_matches_optimize():
    cfg = small("sweep", anchors={"counts": [4]})
    combined, (only,) = campaign.run_sweep(cfg)
    direct = campaign.run_optimize(cfg, 4)
    assert only.summary["sigma_m"] == direct.summary["sigma_m"]
    assert combined.tables["table1"][0]["p95_m"] == direct.summary["p95_m"]


def test_bounds_tables():
    art = campaign.run_bounds(small("bounds"))
    series = {r["series"] for r in art.tables["bound_cdf"]}
    assert series == {"rmse", "peb_bound"}
    assert art.summary["peb_bound_median_m"] > 0


def test_csv_round_trip(tmp_path):
    art = campaign.run_optimize(small("optimize"))
    campaign.export_tables(art, tmp_path)
    loaded = campaign.load_artifact(tmp_path)
    assert loaded.summary["sigma_m"] == art.summary["sigma_m"]
    assert loaded.config == json.loads(json.dumps(art.config))
    for row, orig in zip(loaded.tables["positions"], art.tables["positions"]):
        assert row["x_m"] == orig["x_m"] and row["rmse_m"] == orig["rmse_m"]
    assert len(loaded.records) == len(art.records)


def test_json_export_round_trip(tmp_path):
    art = campaign.run_evaluate(small())
    campaign.export_tables(art, tmp_path, fmt="json")
    loaded = campaign.load_artifact(tmp_path)
    assert loaded.tables["positions"][3]["rmse_m"] == art.tables["positions"][3]["rmse_m"]


def test_non_finite_values_survive_json(tmp_path):
    art = campaign.RunArtifact("x", {}, {"value": math.nan}, {"t": [{"a": math.inf}]})
    campaign.export_tables(art, tmp_path, fmt="json")
    doc = json.loads((tmp_path / "artifact.json").read_text())
    assert doc["summary"]["value"] == "nan" and doc["tables"]["t"][0]["a"] == "inf"


def test_rerun_is_byte_identical(tmp_path):
    art = campaign.run_optimize(small("optimize"))
    first, second = tmp_path / "a", tmp_path / "b"
    campaign.export_tables(art, first)
    campaign.export_tables(campaign.rerun(first), second)
    for path in sorted(first.iterdir()):
        assert path.read_bytes() == (second / path.name).read_bytes(), path.name


def test_cli_evaluate_writes_content_addressed_dir(tmp_path, capsys):
    cfg = write_config(tmp_path, dict(SMALL, propagation={"mode": "abstract"}))
    code = cli.main(["evaluate", "--config", cfg, "--seed", "3", "--out", str(tmp_path / "runs")])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    run_dir = tmp_path / "runs" / os.path.basename(out["run_dir"])
    assert run_dir.name.startswith("evaluate-") and len(run_dir.name) == len("evaluate-") + 12
    assert {"positions.csv", "cdf.csv", "layout.csv", "summary.json", "config.yaml"} <= {p.name for p in run_dir.iterdir()}


def test_cli_export_json(tmp_path):
    cfg = write_config(tmp_path, dict(SMALL, propagation={"mode": "abstract"}))
    assert cli.main(["bounds", "--config", cfg, "--seed", "3", "--out", str(tmp_path)]) == 0
    run_dir = next(tmp_path.glob("bounds-*"))
    assert cli.main(["export", "--artifact", str(run_dir), "--format", "json", "--out", str(tmp_path / "j")]) == 0
    assert (tmp_path / "j" / "artifact.json").exists()


def test_cli_layout_from_previous_run(tmp_path):
    cfg = write_config(tmp_path, dict(SMALL, propagation={"mode": "abstract"}))
    assert cli.main(["optimize", "--config", cfg, "--seed", "3", "--out", str(tmp_path)]) == 0
    run_dir = next(tmp_path.glob("optimize-*"))
    assert cli.main(["evaluate", "--config", cfg, "--seed", "3", "--out", str(tmp_path),
                     "--layout-from", str(run_dir)]) == 0
    evaluated = next(tmp_path.glob("evaluate-*"))
    assert read_csv(evaluated / "layout.csv")[0]["x_m"] == read_csv(run_dir / "layout.csv")[0]["x_m"]


def test_cli_exit_code_config(tmp_path):
    assert cli.main(["evaluate", "--out", str(tmp_path)]) == 2  # no seed
    bad = write_config(tmp_path, {"pso": {"swarm_size": 1}})
    assert cli.main(["optimize", "--config", bad, "--seed", "1", "--out", str(tmp_path)]) == 2
    assert cli.main(["sweep", "--seed", "1", "--anchors", "4,x", "--out", str(tmp_path)]) == 2


def test_cli_exit_code_infeasible(tmp_path):
    cfg = write_config(tmp_path, {"signal": {"capture_start_ms": 5.0}})
    assert cli.main(["evaluate", "--config", cfg, "--seed", "1", "--out", str(tmp_path)]) == 3


def test_cli_exit_code_optimization_failure(tmp_path, monkeypatch):
    from anchoropt.simulation import Simulator
    monkeypatch.setattr(Simulator, "cost", lambda self, layout: math.nan)
    cfg = write_config(tmp_path, dict(SMALL, propagation={"mode": "abstract"}))
    assert cli.main(["optimize", "--config", cfg, "--seed", "1", "--out", str(tmp_path)]) == 4


def test_cli_sweep_writes_per_m_dirs(tmp_path):
    cfg = write_config(tmp_path, dict(SMALL, propagation={"mode": "abstract"}))
    assert cli.main(["sweep", "--config", cfg, "--seed", "2", "--anchors", "4,5", "--out", str(tmp_path)]) == 0
    run_dir = next(tmp_path.glob("sweep-*"))
    rows = read_csv(run_dir / "table1.csv")
    assert [int(r["n_anchors"]) for r in rows] == [4, 5]
    assert (run_dir / "m04" / "iterations.jsonl").exists() and (run_dir / "m05" / "positions.csv").exists()


def test_mode_flag_selects_propagation(tmp_path):
    args = cli.build_parser().parse_args(["evaluate", "--seed", "1", "--mode", "signal"])
    assert cli.load_config(args).propagation.mode == "direct_path"
    args = cli.build_parser().parse_args(["evaluate", "--seed", "1", "--preset", "paper"])
    assert len(cli.load_config(args).grid) == 270


def test_numeric_format_is_full_precision():
    text = campaign.csv_text([{"v": 0.1 + 0.2, "i": np.int64(3), "b": True}])
    assert text.splitlines()[1] == "0.30000000000000004,3,true"
    assert float(text.splitlines()[1].split(",")[0]) == 0.1 + 0.2
