#!/usr/bin/env python3
"""Spike-gate census over a sweep of synthetic colonies.

Quick-look variant of `mycelogic mine-spikes`: prints the census table and
ratio vector instead of writing files.

    python scripts/run_spike_census.py --colonies 4 --seed 0 --threads 2
"""
import argparse
import time

from mycelogic import experiments, spikegates


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--colonies", type=int, default=4)
    ap.add_argument("--pairs", type=int, default=3)
    ap.add_argument("--iterations", type=int, default=120_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = experiments.SpikeCensusConfig(
        colonies=args.colonies,
        pairs=args.pairs,
        iterations=args.iterations,
        seed=args.seed,
        threads=args.threads,
    )
    t0 = time.time()
    census = experiments.run_spike_census(cfg)
    print(spikegates.census_to_csv(census))
    report = spikegates.ratio_report(census)
    print(f"total events: {report['total']}  ({time.time() - t0:.1f}s)")
    if report["ratios"]:
        for gate, ratio in zip(report["order"], report["ratios"]):
            print(f"  {gate:>5}: {ratio:.3f}")


if __name__ == "__main__":
    main()
