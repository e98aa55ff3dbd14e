"""Per-position RMSE against the PEB bound for one layout in several propagation modes.

    python3 scripts/bound_comparison.py --seed 1 [--layout-from RUN_DIR]
"""

import argparse

from anchoropt import campaign, config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--preset", default="desk", choices=sorted(config.PRESETS))
    ap.add_argument("--layout-from", default=None, help="run directory whose layout.csv to use (default: corner)")
    ap.add_argument("--abstract-sigma", type=float, default=0.005)
    args = ap.parse_args()

    layout = "corner"
    if args.layout_from:
        layout = campaign.load_artifact(args.layout_from).layout
    modes = {
        "abstract": {"mode": "abstract", "abstract_range_sigma_m": args.abstract_sigma},
        "signal": {"mode": "signal"},
        "signal+reflections": {"mode": "signal+reflections"},
    }
    print(f"{'mode':<20} {'rmse_med':>9} {'bound_med':>9} {'rmse_p95':>9} {'bound_p95':>9}")
    for name, prop in modes.items():
        cfg = config.build(args.preset, seed=args.seed, mode="bounds", propagation=prop,
                           anchors={"layout": layout})
        s = campaign.run_bounds(cfg).summary
        print(f"{name:<20} {s['rmse_median_m']:9.4f} {s['peb_bound_median_m']:9.4f} "
              f"{s['rmse_p95_m']:9.4f} {s['peb_bound_p95_m']:9.4f}")


if __name__ == "__main__":
    main()
