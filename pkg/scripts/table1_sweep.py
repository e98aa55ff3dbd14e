"""Anchor-count sweep: optimize and evaluate each M, print sigma / mu / P95.

    python3 scripts/table1_sweep.py --seed 1 --anchors 4,6,8,10 [--preset paper] [--out runs]
"""

import argparse
import time

from anchoropt import campaign, config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--preset", default="desk", choices=sorted(config.PRESETS))
    ap.add_argument("--anchors", default="4,6,8,10")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    counts = [int(m) for m in args.anchors.split(",")]
    cfg = config.build(args.preset, seed=args.seed, mode="sweep", anchors={"counts": counts})
    t0 = time.perf_counter()
    combined, per_m = campaign.run_sweep(cfg)
    print(f"{'M':>3} {'sigma_m':>9} {'mu_m':>9} {'p95_m':>9} {'opt_cost_m2':>12}")
    for row, art in zip(combined.tables["table1"], per_m):
        print(f"{row['n_anchors']:>3} {row['sigma_m']:9.4f} {row['mu_m']:9.4f} {row['p95_m']:9.4f} "
              f"{art.summary['optimization_cost_m2']:12.5f}")
    print(f"done in {time.perf_counter() - t0:.0f} s")
    if args.out:
        run_dir = campaign.run_dir_for(cfg, "sweep", args.out)
        campaign.export_tables(combined, run_dir)
        for m, art in zip(counts, per_m):
            campaign.export_tables(art, run_dir / f"m{m:02d}")
        print(run_dir)


if __name__ == "__main__":
    main()
