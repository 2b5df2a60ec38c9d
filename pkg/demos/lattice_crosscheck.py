"""Exact lattice-tree enumeration against Monte Carlo spatial trees.

The enumeration side lists every lattice tree on Z^d with displacements in
[-L, L]^d up to a bond budget, with exact rational weights. The sampling
side draws trees from the same weighted census and a uniform vertex from
each, so its frequencies must match the closed-form law. The demo prints
both for d = 1, L = 1: the k+1 counting law, the truncated partition
value, the truncated generation mean, and the uniform-vertex law up to
two bonds (exact fractions vs sampled frequencies, with z-scores).

Run:  python demos/lattice_crosscheck.py [replicas]
"""

import sys
from fractions import Fraction

import numpy as np

from gwskel import (
    displacement_count,
    enumerate_trees,
    trees_to_text,
    truncated_generation_mean,
    truncated_partition,
    truncated_uniform_vertex_law,
    weight,
)

D, L = 1, 1


def counting_law():
    print("number of d=1, L=1 lattice trees with exactly k bonds (k+1 law):")
    for k in range(7):
        trees = [t for t in enumerate_trees(D, L, k) if t.n_bonds == k]
        print(f"  k={k}: {len(trees):>3} trees (expected {k + 1})")
    single = [t for t in enumerate_trees(D, L, 1) if t.n_bonds == 1]
    assert len(single) == displacement_count(D, L)


def partition_values():
    print("\ntruncated partition sum_T z^#bonds (exact rationals):")
    for top in (1, 2, 3, 4):
        z = truncated_partition(D, L, Fraction(1), top)
        print(f"  bonds <= {top}, z=1: {z} = {float(z):.6f}")
    print("\ntruncated mean number of generation-m vertices (z=1, 2 bonds):")
    for m in range(4):
        v = truncated_generation_mean(D, L, Fraction(1), 2, m)
        print(f"  m={m}: {v} = {float(v):.6f}")


def vertex_law_vs_sampling(replicas, seed=13):
    law = truncated_uniform_vertex_law(D, L, Fraction(1), 2)
    print(f"\nuniform-vertex law, trees up to 2 bonds at z=1 "
          f"(exact vs {replicas:,} samples):")

    # sample the same law directly: a tree T with weight z^#bonds, then a
    # uniform vertex of T
    trees = enumerate_trees(D, L, 2)
    w = np.array([float(weight(t, Fraction(1), D, L)) for t in trees])
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(trees), size=replicas, p=w / w.sum())
    counts = {}
    for i in pick:
        dist = trees[i].graph_distances()
        v = list(dist)[rng.integers(0, len(dist))]
        key = (dist[v], v)
        counts[key] = counts.get(key, 0) + 1

    print(f"  {'(m, x)':>14} {'exact':>8} {'sampled':>9} {'z-score':>8}")
    for key in sorted(law):
        p = float(law[key])
        hat = counts.get(key, 0) / replicas
        se = (p * (1 - p) / replicas) ** 0.5
        print(f"  {str(key):>14} {p:>8.5f} {hat:>9.5f} {(hat - p) / se:>8.2f}")

    mass = sum(law.values())
    assert mass == 1, mass


def main():
    replicas = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
    counting_law()
    partition_values()
    vertex_law_vs_sampling(replicas)
    trees = enumerate_trees(D, L, 1)
    print(f"\ntext form of all {len(trees)} trees with at most one bond:")
    print("  " + trees_to_text(trees).replace("\n", "\n  ").rstrip())


if __name__ == "__main__":
    main()
