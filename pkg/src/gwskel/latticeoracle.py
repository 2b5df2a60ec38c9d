"""Exact enumeration of small lattice trees with range-limited bonds.

A lattice tree here is a finite tree of bonds on Z^d containing the origin,
each bond a displacement of sup-norm at most L.  Exhaustive enumeration up
to a bond budget gives exact (rational) weights, partition sums, and
marginal laws for cross-checking the samplers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .errors import EnumerationTooLarge, InadmissibleBond

ENUMERATION_GUARD = 10**6


def displacement_count(d, L):
    """Number of admissible single steps: the box minus the origin."""
    if d < 1 or L < 1:
        raise ValueError("need d >= 1 and L >= 1")
    return (2 * L + 1) ** d - 1


def _norm_bond(a, b):
    a, b = tuple(a), tuple(b)
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class LatticeTree:
    """Tree of bonds on Z^d containing the origin.

    ``bonds`` is the canonically sorted tuple of bonds, a bond being the
    sorted pair of its endpoints; two objects are equal exactly when they
    are the same set of bonds.  The bond-free tree is the origin alone.
    """

    d: int
    bonds: tuple

    @property
    def n_bonds(self):
        return len(self.bonds)

    @property
    def vertices(self):
        out = {(0,) * self.d}
        for a, b in self.bonds:
            out.add(a)
            out.add(b)
        return out

    def validate(self, L):
        origin = (0,) * self.d
        verts = self.vertices
        if origin not in verts:
            raise InadmissibleBond("tree must contain the origin")
        adj = {v: [] for v in verts}
        for a, b in self.bonds:
            if len(a) != self.d or len(b) != self.d:
                raise InadmissibleBond(f"bond {a}~{b} has wrong dimension")
            if a == b:
                raise InadmissibleBond(f"self-loop at {a}")
            if max(abs(x - y) for x, y in zip(a, b)) > L:
                raise InadmissibleBond(f"bond {a}~{b} exceeds range {L}")
            adj[a].append(b)
            adj[b].append(a)
        if len(set(self.bonds)) != len(self.bonds):
            raise InadmissibleBond("repeated bond")
        # connected with n_bonds = n_vertices - 1 means a tree
        seen = {origin}
        stack = [origin]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        if len(seen) != len(verts):
            raise InadmissibleBond("bonds do not form a connected tree")
        if len(self.bonds) != len(verts) - 1:
            raise InadmissibleBond("bond count is not vertex count minus one")
        return self

    def graph_distances(self):
        """Bond-count distance from the origin to every vertex."""
        origin = (0,) * self.d
        adj = {}
        for a, b in self.bonds:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        dist = {origin: 0}
        frontier = [origin]
        while frontier:
            nxt = []
            for v in frontier:
                for u in adj.get(v, []):
                    if u not in dist:
                        dist[u] = dist[v] + 1
                        nxt.append(u)
            frontier = nxt
        return dist


def lattice_tree(d, L, bonds):
    """Canonical LatticeTree from unordered bond data, validated."""
    normed = tuple(sorted(_norm_bond(a, b) for a, b in bonds))
    return LatticeTree(d=d, bonds=normed).validate(L)


def enumerate_trees(d, L, max_edges, guard=ENUMERATION_GUARD):
    """All lattice trees with at most max_edges bonds, by leaf additions.

    Every tree with k+1 bonds arises from one with k bonds by attaching a
    new vertex, so growing by single attachments and deduplicating on the
    canonical bond tuple reaches everything.  Raises EnumerationTooLarge
    when the output would pass ``guard``.
    """
    if max_edges < 0:
        raise ValueError("max_edges must be nonnegative")
    steps = [
        step
        for step in itertools.product(range(-L, L + 1), repeat=d)
        if any(step)
    ]
    first = LatticeTree(d=d, bonds=())
    out = [first]
    seen = {first.bonds}
    frontier = [first]
    for _ in range(max_edges):
        grown = []
        for tree in frontier:
            verts = tree.vertices
            for x in verts:
                for s in steps:
                    y = tuple(a + b for a, b in zip(x, s))
                    if y in verts:
                        continue
                    bonds = tuple(sorted(tree.bonds + (_norm_bond(x, y),)))
                    if bonds in seen:
                        continue
                    seen.add(bonds)
                    t = LatticeTree(d=d, bonds=bonds)
                    grown.append(t)
                    if len(seen) > guard:
                        raise EnumerationTooLarge(
                            f"more than {guard} trees with at most "
                            f"{max_edges} bonds"
                        )
        out.extend(grown)
        frontier = grown
    return out


def weight(tree, z, d, L):
    """Weight z**bonds times the uniform step probability per bond.

    Exact (Fraction) whenever z is an int or Fraction.
    """
    if tree.d != d:
        raise InadmissibleBond(f"tree lives in dimension {tree.d}, not {d}")
    tree.validate(L)
    omega = displacement_count(tree.d, L)
    k = tree.n_bonds
    if isinstance(z, (int, Fraction)):
        return Fraction(z) ** k / Fraction(omega) ** k
    return float(z) ** k / float(omega) ** k


def truncated_partition(d, L, z, max_edges, guard=ENUMERATION_GUARD):
    """Sum of weights over all trees with at most max_edges bonds."""
    total = 0
    for t in enumerate_trees(d, L, max_edges, guard=guard):
        total = total + weight(t, z, d, L)
    return total


def partition_by_counts(d, L, z, max_edges, guard=ENUMERATION_GUARD):
    """Same sum grouped by bond count; a cross-check of the direct sum."""
    counts = {}
    for t in enumerate_trees(d, L, max_edges, guard=guard):
        counts[t.n_bonds] = counts.get(t.n_bonds, 0) + 1
    omega = displacement_count(d, L)
    total = 0
    for k, n_k in sorted(counts.items()):
        if isinstance(z, (int, Fraction)):
            total = total + n_k * (Fraction(z) / omega) ** k
        else:
            total = total + n_k * (z / omega) ** k
    return total


def truncated_generation_mean(d, L, z, max_edges, m, guard=ENUMERATION_GUARD):
    """Mean number of vertices at bond-distance m from the origin, under
    the normalised weight over trees with at most max_edges bonds."""
    trees = enumerate_trees(d, L, max_edges, guard=guard)
    total = 0
    acc = 0
    for t in trees:
        w = weight(t, z, d, L)
        total = total + w
        hits = sum(1 for dist in t.graph_distances().values() if dist == m)
        acc = acc + w * hits
    return acc / total


def truncated_uniform_vertex_law(d, L, z, max_edges, guard=ENUMERATION_GUARD):
    """Joint law of (bond distance, position) for a uniform vertex of a
    weighted tree.

    Returns a dict keyed by (m, position tuple) with exact probabilities
    when z is rational: each tree contributes its normalised weight split
    evenly over its vertices.
    """
    trees = enumerate_trees(d, L, max_edges, guard=guard)
    weights = [weight(t, z, d, L) for t in trees]
    total = sum(weights)
    law = {}
    for t, w in zip(trees, weights):
        dist = t.graph_distances()
        share = w / total / len(dist)
        for v, m in dist.items():
            key = (m, v)
            law[key] = law.get(key, 0) + share
    return law


def format_point(p):
    return "(" + ",".join(str(x) for x in p) + ")"


def _parse_point(text):
    inner = text.strip()
    if not (inner.startswith("(") and inner.endswith(")")):
        raise ValueError(f"bad point {text!r}")
    return tuple(int(x) for x in inner[1:-1].split(","))


def trees_to_text(trees):
    """One line per tree: bonds 'p~q' joined by ';', sorted canonically;
    a bond-free tree is its origin point alone."""
    lines = []
    for t in trees:
        if not t.bonds:
            lines.append(format_point((0,) * t.d))
            continue
        lines.append(
            ";".join(f"{format_point(a)}~{format_point(b)}" for a, b in t.bonds)
        )
    return "\n".join(lines) + "\n"


def trees_from_text(text, d):
    """Inverse of trees_to_text for dimension d."""
    trees = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if "~" not in line:
            point = _parse_point(line)
            if point != (0,) * d:
                raise ValueError("bond-free line must be the origin")
            trees.append(LatticeTree(d=d, bonds=()))
            continue
        bonds = []
        for part in line.split(";"):
            a, b = part.split("~")
            bonds.append((_parse_point(a), _parse_point(b)))
        trees.append(LatticeTree(d=d, bonds=tuple(sorted(_norm_bond(a, b) for a, b in bonds))))
    return trees
