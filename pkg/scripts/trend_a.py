"""Corner layout versus PSO-optimized layout for four anchors.

    python3 scripts/trend_a.py --seed 1 [--preset paper] [--out runs]
"""

import argparse
import time

from anchoropt import campaign, config
from anchoropt.room import corner_layout
from anchoropt.simulation import Simulator


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--preset", default="desk", choices=sorted(config.PRESETS))
    ap.add_argument("--out", default=None, help="export both runs under this directory")
    args = ap.parse_args()

    cfg = config.build(args.preset, seed=args.seed, mode="optimize")
    sim = Simulator.from_config(cfg)
    t0 = time.perf_counter()
    corner = campaign.run_evaluate(cfg, corner_layout(cfg.room), sim)
    optimized = campaign.run_optimize(cfg, 4, sim)
    print(f"{'layout':<10} {'sigma_m':>9} {'mu_m':>9} {'p95_m':>9} {'mean_dop':>9}")
    for name, art in (("corner", corner), ("pso", optimized)):
        s = art.summary
        print(f"{name:<10} {s['sigma_m']:9.4f} {s['mu_m']:9.4f} {s['p95_m']:9.4f} {s['mean_dop']:9.3f}")
    reduction = 1 - optimized.summary["sigma_m"] / corner.summary["sigma_m"]
    print(f"std reduction {reduction:.1%} in {time.perf_counter() - t0:.0f} s")
    if args.out:
        for art in (corner, optimized):
            campaign.export_tables(art, campaign.run_dir_for(cfg, art.name.split("-")[0], args.out))


if __name__ == "__main__":
    main()
