#!/usr/bin/env python3
"""Empirical scaling of the cellular grid: wave steps grow as sqrt(n) while a
centralized scan grows as n, and measured messages stay under the 4-per-cell
bound because boundary cells have fewer neighbors.

Usage: python scripts/ig_scaling.py [--verify-trials N]
"""

import argparse

import numpy as np

from resom import grid as ig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--verify-trials", type=int, default=200)
    args = ap.parse_args()

    print(f"{'grid':>8} {'cells':>6} {'t_p':>5} {'msgs/wave':>10} {'bound':>10} {'central':>8}")
    for k in (2, 4, 8, 16, 32, 64):
        rep = ig.cost_report(k, k, n_samples=1)
        print(
            f"{k:>4}x{k:<3} {rep.n_cells:>6} {rep.t_p:>5} {rep.messages_per_wave:>10} "
            f"{rep.message_upper_bound:>10} {rep.centralized_ops_per_sample:>8}"
        )

    rng = np.random.default_rng(0)
    mismatches = 0
    for _ in range(args.verify_trials):
        acts = rng.random((12, 12))
        wave = ig.winner_wave(acts)
        if wave.bmu_index != int(np.argmax(acts.ravel())):
            mismatches += 1
    print(f"\nverification on 12x12: {args.verify_trials} trials, {mismatches} mismatches")
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
