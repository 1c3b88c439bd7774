#!/usr/bin/env python3
"""How long do two packets travel together?

Two packets at the same location tend to be grabbed by the same particle
and move as one. Each time they coincide an episode starts; the episode
ends when a split drops them at different places. The episode length has
a geometric tail: the survival probability after k steps falls at least
as fast as (2/3)^((k-1)/2).
"""

import argparse
import math

import numpy as np

import heatlattice as hl


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scale", type=float, default=16.0)
    ap.add_argument("--episodes", type=int, default=5_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    spec = hl.DomainSpec.rectangle([(0.0, 1.0), (0.0, 1.0)])
    lat = hl.build_lattice(spec, args.scale)
    kappas = hl.pair_sticking_time_sample(
        lat, lat.n_sites, hl.Rng.from_seed(args.seed, 0),
        episodes=args.episodes,
    )
    never = kappas < 0
    n = len(kappas)

    print(f"{args.episodes:,} sticking episodes on a {lat.n_sites}-site "
          f"square; jointly absorbed without splitting: {int(never.sum())}")
    print("\n  k   P(stick > k)   geometric bound")
    for k in range(1, 11):
        p = float(((kappas > k) | never).mean())
        bound = (2.0 / 3.0) ** ((k - 1) / 2)
        print(f" {k:2d}     {p:8.4f}       {bound:8.4f}")

    finite = kappas[~never]
    print(f"\nmean episode length {finite.mean():.2f}, "
          f"longest observed {int(finite.max())}")


if __name__ == "__main__":
    main()
