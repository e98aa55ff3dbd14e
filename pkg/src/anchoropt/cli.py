"""Command-line entry point: ``anchoropt <verb> [options]``.

Exit codes: 0 success, 2 config validation failure, 3 simulation
infeasibility, 4 optimization failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import campaign, config
from .errors import ConfigError, InfeasibleConfigError, NoPeakError, OptimizationFailedError

EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OPTIMIZATION = 2, 3, 4
VERBS = ("evaluate", "optimize", "sweep", "bounds", "export")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchoropt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--out", help="output base directory (a run subdirectory is created)")
        p.add_argument("-v", "--verbose", action="store_true")
        if verb == "export":
            p.add_argument("--artifact", required=True, help="run directory to re-export")
            p.add_argument("--format", choices=("csv", "json"), default="json")
            continue
        p.add_argument("--config", help="YAML campaign config")
        p.add_argument("--seed", type=int, help="master seed (u64)")
        p.add_argument("--preset", choices=sorted(config.PRESETS), default="desk")
        p.add_argument("--mode", choices=sorted(config.CLI_MODES), help="propagation mode")
        p.add_argument("--anchors", help="comma-separated anchor counts, e.g. 4,6,8,10")
        if verb in ("evaluate", "bounds"):
            p.add_argument("--layout-from", help="take the final layout of a previous run directory")
    return parser


def load_config(args) -> config.CampaignConfig:
    overrides = config.load_yaml(args.config) if args.config else {}
    overrides["mode"] = args.verb
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode:
        overrides.setdefault("propagation", {})["mode"] = args.mode
    if args.anchors:
        try:
            counts = [int(m) for m in args.anchors.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --anchors value {args.anchors!r}") from exc
        overrides.setdefault("anchors", {})["counts"] = counts
    if getattr(args, "layout_from", None):
        prior = campaign.load_artifact(args.layout_from)
        overrides.setdefault("anchors", {})["layout"] = prior.summary["layout"]
    if args.out:
        overrides["output_dir"] = args.out
    preset = overrides.pop("preset", None) or args.preset
    return config.parse(config.resolve(preset, overrides))


def run(args) -> Path:
    if args.verb == "export":
        art = campaign.load_artifact(args.artifact)
        out = Path(args.out) if args.out else Path(args.artifact)
        campaign.export_tables(art, out, args.format)
        return out
    cfg = load_config(args)
    run_dir = campaign.run_dir_for(cfg, args.verb)
    if args.verb == "sweep":
        combined, per_m = campaign.run_sweep(cfg)
        campaign.export_tables(combined, run_dir)
        for art in per_m:
            campaign.export_tables(art, run_dir / f"m{art.summary['n_anchors']:02d}")
        summary = combined.summary["table"]
    else:
        runner = {"evaluate": campaign.run_evaluate, "optimize": campaign.run_optimize,
                  "bounds": campaign.run_bounds}[args.verb]
        art = runner(cfg)
        campaign.export_tables(art, run_dir)
        summary = {k: art.summary.get(k) for k in ("sigma_m", "mu_m", "p95_m", "mean_dop")}
    print(json.dumps({"run_dir": str(run_dir), "summary": summary}, indent=1, default=str))
    return run_dir


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleConfigError, NoPeakError) as exc:
        print(f"simulation infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OptimizationFailedError as exc:
        print(f"optimization failed: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
