"""From one conditioned tree to its genealogical skeleton, step by step.

Grows a critical tree conditioned to survive past generation n, attaches
lattice displacements, marks K uniform vertices, and then walks the whole
reduction chain: branch-time matrix -> nondegeneracy check -> labelled
shape -> serialized text form -> minimal subtree -> projection distortion.
Finishes by interpolating the marked vertices' spatial paths into a graph
spatial tree and checking the rescaling identity D(rescale(G), G_n) = 0.

Run:  python demos/skeleton_walkthrough.py [seed]
"""

import sys
from fractions import Fraction

import numpy as np

from gwskel import (
    attach_displacements,
    big_D,
    build_shape,
    check_nondegenerate,
    genealogical_branch_matrix,
    grow_conditioned,
    gst_of_paths,
    interpolate_kappa,
    minimal_subtree,
    offspring_law,
    path_to_root,
    rescale,
    rescale_path,
    serialize_shape,
    skeleton_projection,
    uniform_vertices,
)

N = 30
K = 4


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 4
    rng = np.random.default_rng(seed)
    law = offspring_law("geometric-half")

    tree = grow_conditioned(law, N, cap=200_000, rng=rng)
    stree = attach_displacements(tree, d=2, L=1, rng=rng)
    print(f"conditioned tree: {tree.n_vertices} vertices, "
          f"max generation {tree.max_generation}, "
          f"{tree.meta['rejections']} rejected attempts")

    marks = list(uniform_vertices(tree, K, rng))
    gens = [tree.generation(v) for v in marks]
    print(f"marked vertices {marks} at generations {gens}")

    mat = genealogical_branch_matrix(tree, marks)
    print("\nbranch-time matrix (diagonal = lifetimes, off = split times):")
    for row in mat.tau:
        print("   " + " ".join(f"{x:>4}" for x in row))

    report = check_nondegenerate(mat)
    print(f"nondegenerate: {report.ok}"
          + ("" if report.ok else f"  violations: {sorted(report.violations)}"))
    if not report.ok:
        print("degenerate draw (tied split times happen at small n); rerun "
              "with another seed to reach the shape step")
        return

    shape, lengths = build_shape(mat)
    print(f"\nlabelled shape on K={shape.K} leaves: parent = {shape.parent}")
    print(f"edge lengths: { {v: str(l) for v, l in sorted(lengths.items())} }")
    print(f"text form: {serialize_shape(shape, lengths)}")

    sub = minimal_subtree(tree, marks)
    print(f"\nminimal subtree: {len(sub.vertices)} of {tree.n_vertices} "
          f"tree vertices, reduced edges "
          f"{ {v: sub.reduced_lengths[v] for v in sorted(sub.reduced_lengths)} }")

    _, gdist, edist = skeleton_projection(stree, sub)
    print(f"projection distortion: max graph distance {int(gdist.max())} "
          f"({gdist.max() / N:.2f} n), max euclid {edist.max():.2f} "
          f"({edist.max() / np.sqrt(N):.2f} sqrt n)")

    # spatial paths of the marked vertices as one graph spatial tree
    paths = [interpolate_kappa(path_to_root(stree, v), N) for v in marks]
    g = gst_of_paths(paths)
    gn = gst_of_paths([rescale_path(p, N) for p in paths])
    print(f"\nGST of the marked paths: K={g.K}, "
          f"root point {tuple(float(x) for x in g.root_point())}")
    print(f"rescaling identity: D(rescale(G, n), G_n) = {big_D(rescale(g, N), gn)}")


if __name__ == "__main__":
    main()
