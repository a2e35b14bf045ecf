"""Rejection rates for belief-anchor and leaf corrections versus the stickiness threshold.

    python scripts/sweep_stickiness.py --thresholds 1 3 10 150 --seeds 5
"""
import argparse
import copy
import csv
import sys

from mevir import scenario as sc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--thresholds", type=float, nargs="+", default=[1, 3, 10, 150])
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    base = sc.bundled("stickiness")
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["threshold", "seed", "belief_rejection", "leaf_rejection", "overall_rejection"])
    for th in args.thresholds:
        raw = copy.deepcopy(base)
        for cohort in raw["cohorts"]:
            cohort["stickiness_threshold"] = th
        cfg = sc.validate(raw)
        for s in range(args.seeds):
            summ = sc.run(cfg, s).summary
            out.writerow(
                [
                    th,
                    s,
                    summ["belief_correction_rejection_rate"],
                    summ["leaf_correction_rejection_rate"],
                    summ["final_metrics"]["rejected_correction_rate"],
                ]
            )


if __name__ == "__main__":
    main()
