#!/usr/bin/env python3
"""4-bit Boolean function mining through a simulated four-input substrate.

Prints the census summary and the top SOP forms.

    python scripts/run_function_mining.py --repeats 14 --seed 0
"""
import argparse
import time

from mycelogic import experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=14)
    ap.add_argument("--channels", type=int, default=7)
    ap.add_argument("--thresholds", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = experiments.FunctionMiningConfig(
        repeats=args.repeats, channels=args.channels, thresholds=args.thresholds, seed=args.seed
    )
    t0 = time.time()
    tables, census = experiments.run_function_mining(cfg)
    print(f"{len(tables)} tables, {census.unique_functions} unique functions ({time.time() - t0:.1f}s)")
    for value, count, expr in census.top(10):
        print(f"  n={count:<5} f={value:<6} {expr}")


if __name__ == "__main__":
    main()
