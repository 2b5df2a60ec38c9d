"""Branch-time matrices, labelled tree shapes, and the metrics they induce.

A branch-time matrix records, for K paths, the diagonal lifetimes and the
pairwise times at which paths part ways.  Nondegenerate matrices determine a
rooted shape with K labelled leaves and positive edge lengths; degenerate
ones collapse to a sentinel.  Leaf labels run 1..K throughout, the root is
0, and interior branch vertices get canonical labels K+1..2K-1 in the order
they are first met walking root to leaf 1, root to leaf 2, and so on.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidMatrix, KTooLarge, OutOfRange, UnknownVertex
from .treegen import DiscretePath, mrca_generation

MAX_LEAVES = 8


@dataclass(frozen=True)
class BranchMatrix:
    """Symmetric K x K matrix of lifetimes and pairwise branch times.

    ``tau`` is a tuple of K tuples; row and column r refer to leaf r+1.
    Entries may be ints, Fractions, or floats.  Structural invariants are
    checked on validate(): symmetry, 0 <= off-diagonal <= both lifetimes,
    and min(tau[i,j], tau[j,k]) <= tau[i,k] for every triple.
    """

    tau: tuple

    @property
    def K(self):
        return len(self.tau)

    def entry(self, i, j):
        """Entry for leaves i and j (labels 1..K)."""
        K = self.K
        if not (1 <= i <= K and 1 <= j <= K):
            raise UnknownVertex((i, j))
        return self.tau[i - 1][j - 1]

    def validate(self):
        K = self.K
        t = self.tau
        if any(len(row) != K for row in t):
            raise InvalidMatrix("matrix is not square")
        for i in range(K):
            for j in range(K):
                if t[i][j] != t[j][i]:
                    raise InvalidMatrix(f"asymmetric at ({i + 1},{j + 1})")
                if i != j:
                    if t[i][j] < 0 or t[i][j] > min(t[i][i], t[j][j]):
                        raise InvalidMatrix(
                            f"entry ({i + 1},{j + 1}) outside [0, min of lifetimes]"
                        )
                elif t[i][i] < 0:
                    raise InvalidMatrix(f"negative lifetime at {i + 1}")
        for i in range(K):
            for j in range(K):
                for k in range(K):
                    if min(t[i][j], t[j][k]) > t[i][k]:
                        raise InvalidMatrix(
                            f"triple ({i + 1},{j + 1},{k + 1}) breaks the "
                            "two-out-of-three rule"
                        )
        return self


def branch_matrix_from_entries(rows):
    """BranchMatrix from any nested sequence, validated."""
    tau = tuple(tuple(row) for row in rows)
    return BranchMatrix(tau).validate()


@dataclass(frozen=True)
class Violation:
    """One broken nondegeneracy rule; leaf labels are 1-based."""

    rule: str
    leaves: tuple


@dataclass(frozen=True)
class NondegeneracyReport:
    ok: bool
    violations: tuple


def check_nondegenerate(matrix):
    """Check the strict separation rules.

    Degeneracy means: a zero or boundary off-diagonal entry (paths that never
    part, or that part only at one of their deaths), a nonpositive lifetime,
    or three leaves whose three pairwise branch times all coincide.
    """
    t = matrix.tau
    K = matrix.K
    bad = []
    for i in range(K):
        if t[i][i] <= 0:
            bad.append(Violation("nonpositive-lifetime", (i + 1,)))
    for i in range(K):
        for j in range(i + 1, K):
            if not (0 < t[i][j] < min(t[i][i], t[j][j])):
                bad.append(Violation("offdiagonal-boundary", (i + 1, j + 1)))
    for i in range(K):
        for j in range(i + 1, K):
            for k in range(j + 1, K):
                if t[i][j] == t[i][k] == t[j][k]:
                    bad.append(Violation("triple-tie", (i + 1, j + 1, k + 1)))
    return NondegeneracyReport(ok=not bad, violations=tuple(bad))


@dataclass(frozen=True)
class EmptyK:
    """Degenerate sentinel; every degenerate matrix of a given K maps here."""

    K: int


@dataclass(frozen=True)
class Shape:
    """Rooted tree shape with canonically labelled vertices.

    2K vertices: root 0, leaves 1..K, branch vertices K+1..2K-1 (none for
    K = 1).  ``parent`` is a tuple indexed by vertex label, parent[0] = -1.
    Instances compare and hash by the parent tuple, so equality is equality
    of labelled shapes.
    """

    K: int
    parent: tuple

    def __post_init__(self):
        n = 2 * self.K if self.K > 1 else 2
        if len(self.parent) != n or self.parent[0] != -1:
            raise ValueError("parent tuple does not match the label scheme")

    @property
    def n_vertices(self):
        return len(self.parent)

    def is_leaf(self, v):
        return 1 <= v <= self.K

    def children(self, v):
        """Children of v ordered by smallest descendant leaf."""
        kids = [u for u in range(1, self.n_vertices) if self.parent[u] == v]
        kids.sort(key=self.min_leaf)
        return kids

    def min_leaf(self, v):
        """Smallest leaf label below v (v itself if a leaf)."""
        if self.is_leaf(v):
            return v
        best = None
        for u in range(1, self.n_vertices):
            if self.parent[u] == v:
                m = self.min_leaf(u)
                if best is None or m < best:
                    best = m
        if best is None:
            raise ValueError(f"vertex {v} has no leaf below it")
        return best

    def root_path(self, v):
        """Labels from the root to v inclusive."""
        out = []
        while v != -1:
            out.append(v)
            v = self.parent[v]
        out.reverse()
        return out


def canonical_shape(K, parent_map):
    """Relabel an arbitrary parent map into the canonical label scheme.

    ``parent_map`` maps vertex keys to parent keys with the root keyed 0 and
    leaves keyed 1..K; branch keys are arbitrary.  Branch labels are assigned
    K+1, K+2, ... in first-encounter order along the walks root -> leaf 1,
    root -> leaf 2, ...
    """
    relabel = {0: 0}
    for i in range(1, K + 1):
        relabel[i] = i
    nxt = K + 1
    for i in range(1, K + 1):
        chain = []
        v = i
        while v != 0:
            chain.append(v)
            v = parent_map[v]
        for v in reversed(chain):
            if v not in relabel:
                relabel[v] = nxt
                nxt += 1
    n = 2 * K if K > 1 else 2
    if len(relabel) != n:
        raise ValueError("parent map does not describe a binary-branching shape")
    parent = [-1] * n
    for v, p in parent_map.items():
        if v != 0:
            parent[relabel[v]] = relabel[p]
    return Shape(K=K, parent=tuple(parent)), relabel


def _pair_classes(matrix):
    """Group unordered leaf pairs by the shape-vertex they name.

    Pairs (i, j) and (k, l) name the same vertex when their branch times are
    equal and do not exceed the cross time tau[i,k].  Returns a list of
    classes, each a dict with the member pairs, the lexicographically least
    representative, and the common height.
    """
    t = matrix.tau
    K = matrix.K
    classes = []
    for i in range(1, K + 1):
        for j in range(i, K + 1):
            h = t[i - 1][j - 1]
            placed = False
            for c in classes:
                ri, rj = c["rep"]
                if h == c["height"] and h <= t[i - 1][ri - 1]:
                    c["members"].append((i, j))
                    placed = True
                    break
            if not placed:
                classes.append({"rep": (i, j), "height": h, "members": [(i, j)]})
    return classes


def _shape_data(matrix):
    """(shape, lengths, reps) of a validated nondegenerate matrix."""
    K = matrix.K
    t = matrix.tau
    classes = _pair_classes(matrix)

    def cls_of(i, j):
        h = t[i - 1][j - 1]
        for idx, c in enumerate(classes):
            ri = c["rep"][0]
            if h == c["height"] and h <= t[i - 1][ri - 1]:
                return idx
        raise InvalidMatrix("pair fell outside every class")

    # temp keys: leaves by label, branch classes by offset; then canonical
    key_of = {}
    for idx, c in enumerate(classes):
        leaf = next((i for i, j in c["members"] if i == j), None)
        key_of[idx] = leaf if leaf is not None else 2 * K + idx

    # parent of a class through the ancestor scan on its representative:
    # the largest strictly smaller time to any leaf, the root when none
    parent_map = {}
    heights = {}
    for idx, c in enumerate(classes):
        i, _ = c["rep"]
        best_val = 0
        best_k = 0
        for k in range(1, K + 1):
            v = t[i - 1][k - 1]
            if v < c["height"] and v > best_val:
                best_val, best_k = v, k
        parent_map[key_of[idx]] = 0 if best_k == 0 else key_of[cls_of(i, best_k)]
        heights[key_of[idx]] = c["height"]

    shape, relabel = canonical_shape(K, parent_map)
    hts = {relabel[k]: h for k, h in heights.items()}
    lengths = {}
    for v in range(1, shape.n_vertices):
        p = shape.parent[v]
        ph = 0 if p == 0 else hts[p]
        ell = hts[v] - ph
        if not ell > 0:
            raise InvalidMatrix("nonpositive edge length on a nondegenerate matrix")
        lengths[v] = ell
    reps = {relabel[key_of[idx]]: c["rep"] for idx, c in enumerate(classes)}
    return shape, lengths, reps


def build_shape(matrix):
    """Shape and edge lengths named by a branch-time matrix.

    Returns (Shape, lengths) with lengths keyed by the child vertex of each
    edge, or the EmptyK sentinel when the matrix is degenerate.  Lengths stay
    exact for int and Fraction entries.
    """
    matrix.validate()
    if not check_nondegenerate(matrix).ok:
        return EmptyK(matrix.K)
    shape, lengths, _ = _shape_data(matrix)
    return shape, lengths


def class_representatives(matrix):
    """Canonical label -> lexicographically least leaf pair naming it.

    Only nondegenerate matrices have classes; degenerate input raises
    InvalidMatrix.
    """
    matrix.validate()
    if not check_nondegenerate(matrix).ok:
        raise InvalidMatrix("degenerate matrix has no classes")
    _, _, reps = _shape_data(matrix)
    return reps


def tree_metric(matrix, p, q):
    """Distance between points of the tree named by the matrix.

    A point is (leaf label, height) with 0 <= height <= that leaf's
    lifetime.  Points on a common stem are compared by height; otherwise the
    distance climbs down to the branch time and back up.
    """
    matrix.validate()
    i, u = p
    j, v = q
    K = matrix.K
    for leaf, h in ((i, u), (j, v)):
        if not 1 <= leaf <= K:
            raise UnknownVertex(leaf)
        if h < 0 or h > matrix.entry(leaf, leaf):
            raise OutOfRange(f"height {h} outside [0, lifetime] for leaf {leaf}")
    if i == j:
        return abs(u - v)
    tij = matrix.entry(i, j)
    if min(u, v) > tij:
        return u + v - 2 * tij
    return abs(u - v)


def shape_distance(shape, lengths, a, b):
    """Path-length distance between two shape vertices via their paths to
    the root."""
    pa = shape.root_path(a)
    pb = shape.root_path(b)
    common = 0
    for x, y in zip(pa, pb):
        if x == y:
            common += 1
        else:
            break
    dist = 0
    for v in pa[common:]:
        dist += lengths[v]
    for v in pb[common:]:
        dist += lengths[v]
    return dist


def branch_time(w1, w2):
    """Time at which two discrete paths part ways, capped at the lifetimes.

    The uncapped time is the first integer at which the step functions
    disagree (infinite for equal paths); the result caps it at both
    lifetimes, so equal paths return the shorter lifetime.
    """
    if w1.dim != w2.dim:
        raise ValueError("paths of different dimension")
    m1, m2 = w1.lifetime, w2.lifetime
    horizon = max(m1, m2) + 1
    for j in range(horizon):
        if w1(j) != w2(j):
            return min(j, m1, m2)
    return min(m1, m2)


def branch_matrix(paths):
    """BranchMatrix of pairwise branch times; diagonal holds lifetimes."""
    K = len(paths)
    if K < 1:
        raise ValueError("need at least one path")
    tau = [[0] * K for _ in range(K)]
    for a in range(K):
        tau[a][a] = paths[a].lifetime
        for b in range(a + 1, K):
            tau[a][b] = tau[b][a] = branch_time(paths[a], paths[b])
    return branch_matrix_from_entries(tau)


def genealogical_branch_matrix(tree, vertices):
    """BranchMatrix of ancestor split generations for marked tree vertices.

    Diagonal entries are the vertices' generations; off-diagonal entries the
    generation of the pairwise most recent common ancestor.
    """
    K = len(vertices)
    tau = [[0] * K for _ in range(K)]
    for a in range(K):
        tau[a][a] = tree.generation(vertices[a])
        for b in range(a + 1, K):
            tau[a][b] = tau[b][a] = mrca_generation(tree, vertices[a], vertices[b])
    return branch_matrix_from_entries(tau)


def perturbation_radius(matrix):
    """One third of the smallest positive gap among matrix entries.

    Any entrywise perturbation below this radius that keeps the matrix valid
    leaves the shape unchanged; ties must stay tied because validity pins
    them together.
    """
    vals = sorted({v for row in matrix.tau for v in row} | {0})
    gaps = [b - a for a, b in zip(vals, vals[1:]) if b > a]
    if not gaps:
        raise InvalidMatrix("matrix has a single entry value")
    g = min(gaps)
    if isinstance(g, (int, Fraction)):
        return Fraction(g) / 3
    return g / 3


def serialize_shape(shape, lengths=None):
    """Canonical text form, children ordered by smallest descendant leaf.

    Example with lengths: ((1:1,(2:2,3:3)5:3)4:2)0;  Lengths format with
    str(), so Fractions stay exact.
    """

    def fmt(v):
        if lengths is None:
            return ""
        return ":" + str(lengths[v])

    def render(v):
        if shape.is_leaf(v):
            return f"{v}{fmt(v)}"
        inner = ",".join(render(u) for u in shape.children(v))
        suffix = fmt(v) if v != 0 else ""
        return f"({inner}){v}{suffix}"

    return render(0) + ";"


def count_shapes(K):
    """Number of labelled shapes with K leaves: 1, 1, 3, 15, 105, ..."""
    _check_leaf_count(K)
    out = 1
    for j in range(2, K + 1):
        out *= 2 * j - 3
    return out


def enumerate_shapes(K):
    """All labelled shapes with K leaves, canonically labelled.

    Grown by inserting leaf j into each of the 2j-3 edges of every shape
    with j-1 leaves; the insertion points are distinct, so no deduplication
    is needed.
    """
    _check_leaf_count(K)
    if K == 1:
        yield Shape(K=1, parent=(-1, 0))
        return
    # parent maps with temp branch keys >= 1000; leaves keyed by label
    seeds = [{1: 1000, 2: 1000, 1000: 0}]
    for j in range(3, K + 1):
        grown = []
        for pm in seeds:
            for child in [v for v in pm if v != 0]:
                new = dict(pm)
                b = 1000 + j  # fresh key per insertion round
                while b in new:
                    b += 1
                new[b] = new[child]
                new[child] = b
                new[j] = b
                grown.append(new)
        seeds = grown
    for pm in seeds:
        shape, _ = canonical_shape(K, pm)
        yield shape


def _check_leaf_count(K):
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise KTooLarge(f"leaf count must be a positive int, got {K!r}")
    if K > MAX_LEAVES:
        raise KTooLarge(f"leaf count {K} beyond the supported maximum {MAX_LEAVES}")


@dataclass
class SkeletonSubtree:
    """Union of root paths to marked vertices, plus its reduced form.

    ``vertices`` are all tree vertices on some root path (sorted ids),
    ``leaves`` the marked vertices in marking order.  The reduced tree
    contracts every unmarked degree-two vertex: ``reduced_parent`` maps a
    kept vertex to the next kept vertex toward the root and
    ``reduced_lengths`` to the number of contracted tree edges in between.
    ``degenerate`` records whether the genealogical branch matrix of the
    marked vertices fails the strict separation rules.
    """

    vertices: np.ndarray
    leaves: tuple
    reduced_parent: dict
    reduced_lengths: dict
    degenerate: bool
    report: NondegeneracyReport


def minimal_subtree(tree, vertices):
    """SkeletonSubtree spanned by the root and the marked vertices."""
    marked = list(int(v) for v in vertices)
    for v in marked:
        tree._check(v)
    on_path = set()
    for v in marked:
        u = v
        while u != -1 and u not in on_path:
            on_path.add(u)
            u = int(tree.parent[u])
    verts = np.array(sorted(on_path), dtype=np.int64)

    children_in = {}
    for v in on_path:
        p = int(tree.parent[v])
        if p != -1:
            children_in.setdefault(p, []).append(v)
    keep = set(marked) | {0}
    for v, kids in children_in.items():
        if len(kids) >= 2:
            keep.add(v)

    reduced_parent = {}
    reduced_lengths = {}
    for v in sorted(keep):
        if v == 0:
            continue
        u = int(tree.parent[v])
        hops = 1
        while u not in keep:
            u = int(tree.parent[u])
            hops += 1
        reduced_parent[v] = u
        reduced_lengths[v] = hops

    mat = genealogical_branch_matrix(tree, marked)
    rep = check_nondegenerate(mat)
    return SkeletonSubtree(
        vertices=verts,
        leaves=tuple(marked),
        reduced_parent=reduced_parent,
        reduced_lengths=reduced_lengths,
        degenerate=not rep.ok,
        report=rep,
    )


def skeleton_projection(stree, sub):
    """Project every vertex to its deepest ancestor inside the subtree.

    Returns (pi, graph_dist, euclid_dist): the projected vertex id, the
    number of tree edges climbed, and the Euclidean norm of the position
    difference, each indexed by vertex id.
    """
    tree = stree.tree
    n = tree.n_vertices
    inside = np.zeros(n, dtype=bool)
    inside[sub.vertices] = True
    if not inside[0]:
        raise ValueError("subtree must contain the root")
    pi = np.zeros(n, dtype=np.int64)
    for m in range(1, tree.max_generation + 1):
        s = tree.generation_slice(m)
        ids = np.arange(s.start, s.stop, dtype=np.int64)
        pi[s] = np.where(inside[s], ids, pi[tree.parent[s]])
    gens = np.searchsorted(tree.gen_starts, np.arange(n), side="right") - 1
    graph_dist = gens - gens[pi]
    diff = (stree.pos - stree.pos[pi]).astype(np.float64)
    euclid = np.sqrt((diff * diff).sum(axis=1))
    return pi, graph_dist, euclid
