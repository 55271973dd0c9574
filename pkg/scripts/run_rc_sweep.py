#!/usr/bin/env python3
"""Gate counts vs binarization threshold for serial and parallel RC modes.

Prints per-mode class totals and the power-law fit of each decaying class.

    python scripts/run_rc_sweep.py --ensemble 50 --seed 0
"""
import argparse
import time

from mycelogic import experiments, rcnet


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ensemble", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = experiments.RcSweepConfig(ensemble=args.ensemble, seed=args.seed, threads=args.threads)
    graph = experiments.colony_graph_for(cfg)
    print(f"colony graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    for mode in ("serial", "parallel"):
        cfg.mode = mode
        t0 = time.time()
        res = experiments.run_rc_sweep(cfg, graph=graph)
        print(f"\n{mode} mode ({time.time() - t0:.1f}s):")
        for cls in rcnet.GATE_CLASSES:
            total = int(res.counts[cls].sum())
            line = f"  {cls:>7}: total {total}"
            try:
                a, k, rms = rcnet.fit_power_law(res.thetas, res.counts[cls])
                line += f"   n(theta) ~ {a:.3g} * theta^{k:.2f}  (rms log resid {rms:.2f})"
            except rcnet.InsufficientDataError:
                pass
            print(line)


if __name__ == "__main__":
    main()
