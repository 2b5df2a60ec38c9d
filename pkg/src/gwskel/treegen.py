"""Critical offspring laws, rooted trees, and lattice displacements.

Trees are stored in breadth-first vertex order with dense integer ids, so a
generation is a contiguous id range and most per-tree work vectorises along
generations.  Spatial trees attach one displacement per non-root vertex,
uniform on a centred box with the origin removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, OutOfRange, UnknownVertex

DEFAULT_CAP = 50_000_000


@dataclass(frozen=True)
class OffspringLaw:
    """Mean-one offspring law with second factorial moment ``gamma``.

    ``kind`` is one of ``geometric-half`` (P(Y=y) = 2**-(y+1)),
    ``poisson-one`` and ``binary-half`` (Y uniform on {0, 2}).
    """

    kind: str
    gamma: int

    def sample_counts(self, rng, size):
        """Draw iid offspring counts, one per vertex."""
        if self.kind == "geometric-half":
            # numpy's geometric is supported on {1, 2, ...}
            return rng.geometric(0.5, size=size) - 1
        if self.kind == "poisson-one":
            return rng.poisson(1.0, size=size)
        if self.kind == "binary-half":
            return 2 * rng.integers(0, 2, size=size, dtype=np.int64)
        raise ValueError(f"unknown offspring law {self.kind!r}")

    def population_step(self, rng, sizes):
        """One generation of the population chain, vectorised over replicas.

        The sum of z iid offspring draws has an explicit law for every kind:
        negative binomial (z, 1/2) for geometric-half, Poisson(z) for
        poisson-one, and 2*Binomial(z, 1/2) for binary-half.  Entries with
        size zero stay zero, so extinct replicas cost nothing.
        """
        sizes = np.asarray(sizes, dtype=np.int64)
        out = np.zeros_like(sizes)
        pos = sizes > 0
        if not pos.any():
            return out
        z = sizes[pos]
        if self.kind == "geometric-half":
            out[pos] = rng.negative_binomial(z, 0.5)
        elif self.kind == "poisson-one":
            out[pos] = rng.poisson(z)
        elif self.kind == "binary-half":
            out[pos] = 2 * rng.binomial(z, 0.5)
        else:
            raise ValueError(f"unknown offspring law {self.kind!r}")
        return out


LAWS = {
    "geometric-half": OffspringLaw("geometric-half", 2),
    "poisson-one": OffspringLaw("poisson-one", 1),
    "binary-half": OffspringLaw("binary-half", 1),
}


def offspring_law(kind):
    try:
        return LAWS[kind]
    except KeyError:
        raise ValueError(f"unknown offspring law {kind!r}") from None


@dataclass
class GenTree:
    """Finite rooted tree in breadth-first vertex order.

    Vertex ids are dense: the root is 0 and generation m occupies the id
    range [gen_starts[m], gen_starts[m+1]).  ``parent[v]`` is the parent id
    (-1 for the root) and ``offspring[v]`` the number of children; children
    of a vertex form a contiguous block in the next generation.
    """

    parent: np.ndarray
    offspring: np.ndarray
    gen_starts: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_vertices(self):
        return int(self.gen_starts[-1])

    @property
    def max_generation(self):
        return len(self.gen_starts) - 2

    def generation(self, v):
        """Generation of vertex v (0 for the root)."""
        self._check(v)
        return int(np.searchsorted(self.gen_starts, v, side="right")) - 1

    def generation_slice(self, m):
        """Id range of generation m as a slice; empty beyond the last one."""
        if m < 0:
            raise UnknownVertex(m)
        if m > self.max_generation:
            return slice(self.n_vertices, self.n_vertices)
        return slice(int(self.gen_starts[m]), int(self.gen_starts[m + 1]))

    def generation_size(self, m):
        s = self.generation_slice(m)
        return s.stop - s.start

    def children(self, v):
        """Ids of the children of v, in stored order."""
        self._check(v)
        start = int(self._child_start()[v])
        return np.arange(start, start + int(self.offspring[v]), dtype=np.int64)

    def _child_start(self):
        cs = self.meta.get("_child_start")
        if cs is None:
            cs = np.empty(self.n_vertices + 1, dtype=np.int64)
            cs[0] = 1
            np.cumsum(self.offspring, out=cs[1:])
            cs[1:] += 1
            self.meta["_child_start"] = cs
        return cs

    def _check(self, v):
        if not 0 <= v < self.n_vertices:
            raise UnknownVertex(v)


def tree_from_offspring(per_generation, meta=None):
    """Assemble a GenTree from per-generation offspring count arrays.

    ``per_generation[m]`` lists the offspring counts of generation m in id
    order; the root's array has length one and the last generation's counts
    are all zero.
    """
    counts = [len(a) for a in per_generation]
    if counts[0] != 1:
        raise ValueError("generation 0 must hold exactly the root")
    offspring = np.concatenate([np.asarray(a, dtype=np.int64) for a in per_generation])
    gen_starts = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=gen_starts[1:])
    for m in range(len(counts) - 1):
        a, b = gen_starts[m], gen_starts[m + 1]
        if int(offspring[a:b].sum()) != counts[m + 1]:
            raise ValueError("offspring totals disagree with generation sizes")
    if int(np.asarray(per_generation[-1]).sum()) != 0:
        raise ValueError("last generation must be childless")
    n = int(gen_starts[-1])
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    for m in range(len(counts) - 1):
        a, b = int(gen_starts[m]), int(gen_starts[m + 1])
        ids = np.arange(a, b, dtype=np.int64)
        parent[b : b + counts[m + 1]] = np.repeat(ids, offspring[a:b])
    tree = GenTree(parent, offspring, gen_starts)
    if meta:
        tree.meta.update(meta)
    return tree


def grow_tree(law, cap=DEFAULT_CAP, rng=None):
    """Grow one unconditioned tree to extinction.

    Raises BudgetExceeded as soon as the vertex count would pass ``cap``;
    nothing is returned in that case.
    """
    if rng is None:
        rng = np.random.default_rng()
    per_gen = []
    current = 1
    total = 0
    while current:
        total += current
        if total > cap:
            raise BudgetExceeded(cap, total)
        y = law.sample_counts(rng, current)
        per_gen.append(y)
        current = int(y.sum())
    return tree_from_offspring(per_gen)


def grow_conditioned(law, m, cap=DEFAULT_CAP, rng=None):
    """Grow a tree conditioned to survive to generation m, by rejection.

    Attempts extinct before m are discarded; the accepted tree is grown to
    extinction.  The number of rejected attempts lands in ``meta``.
    """
    if rng is None:
        rng = np.random.default_rng()
    if m < 0:
        raise ValueError("m must be nonnegative")
    rejected = 0
    while True:
        per_gen = []
        current = 1
        total = 0
        while current:
            total += current
            if total > cap:
                raise BudgetExceeded(cap, total)
            y = law.sample_counts(rng, current)
            per_gen.append(y)
            current = int(y.sum())
        if len(per_gen) - 1 >= m:
            return tree_from_offspring(per_gen, meta={"rejections": rejected})
        rejected += 1


@dataclass
class SpatialTree:
    """GenTree with one lattice displacement per non-root vertex.

    ``disp[v]`` is the step from parent to v (row 0 is zero by convention)
    and ``pos[v]`` the resulting position of v; both are (n, d) integer
    arrays.
    """

    tree: GenTree
    d: int
    L: int
    disp: np.ndarray
    pos: np.ndarray


def _unrank_box(idx, d, L):
    """Map ranks in [0, (2L+1)**d - 1) to nonzero box points.

    Ranks at or past the origin's rank are shifted up by one, which removes
    the origin without rejection.
    """
    side = 2 * L + 1
    origin = (side**d - 1) // 2
    idx = np.asarray(idx, dtype=np.int64)
    idx = np.where(idx >= origin, idx + 1, idx)
    out = np.empty(idx.shape + (d,), dtype=np.int64)
    for axis in range(d):
        out[..., axis] = idx % side - L
        idx = idx // side
    return out


def attach_displacements(tree, d, L, rng=None):
    """Draw uniform nonzero box displacements and accumulate positions."""
    if d < 1 or L < 1:
        raise ValueError("need d >= 1 and L >= 1")
    if rng is None:
        rng = np.random.default_rng()
    n = tree.n_vertices
    side = 2 * L + 1
    disp = np.zeros((n, d), dtype=np.int64)
    if n > 1:
        ranks = rng.integers(0, side**d - 1, size=n - 1)
        disp[1:] = _unrank_box(ranks, d, L)
    pos = np.zeros((n, d), dtype=np.int64)
    for m in range(1, tree.max_generation + 1):
        s = tree.generation_slice(m)
        pos[s] = pos[tree.parent[s]] + disp[s]
    return SpatialTree(tree=tree, d=d, L=L, disp=disp, pos=pos)


class DiscretePath:
    """Integer-time path, constant after its last point.

    ``points[j]`` is the position at time j; evaluation at real u >= 0 reads
    the floor index, clamped to the end.  The lifetime is the index of the
    last point.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = []
        for p in points:
            if np.isscalar(p):
                pts.append((int(p),))
            else:
                pts.append(tuple(int(x) for x in p))
        if not pts:
            raise ValueError("a path needs at least its time-zero point")
        if len({len(p) for p in pts}) != 1:
            raise ValueError("points of mixed dimension")
        self.points = tuple(pts)

    @property
    def lifetime(self):
        return len(self.points) - 1

    @property
    def dim(self):
        return len(self.points[0])

    def __call__(self, u):
        if u < 0:
            raise OutOfRange(f"negative time {u}")
        j = min(int(u), self.lifetime)
        return self.points[j]

    def __eq__(self, other):
        return isinstance(other, DiscretePath) and self.points == other.points

    def __hash__(self):
        return hash(self.points)

    def __repr__(self):
        return f"DiscretePath({list(self.points)!r})"


def path_to_root(stree, v):
    """Positions along the ancestor line of v, root first."""
    base = stree.tree
    if not 0 <= v < base.n_vertices:
        raise UnknownVertex(v)
    chain = []
    u = v
    while u != -1:
        chain.append(u)
        u = int(base.parent[u])
    chain.reverse()
    return DiscretePath([tuple(int(x) for x in stree.pos[u]) for u in chain])


def uniform_vertices(tree, K, rng):
    """K vertices uniform on the tree, iid, drawn one at a time.

    Single-draw loop on purpose: for a fixed generator state the first K'
    entries coincide with a K'-sized call, so nested selections share their
    prefix.
    """
    n = tree.n_vertices
    return [int(rng.integers(0, n)) for _ in range(K)]


def survival_time(tree):
    """First generation with no vertices."""
    return tree.max_generation + 1


def mrca_generation(tree, u, v):
    """Generation of the most recent common ancestor of u and v."""
    tree._check(u)
    tree._check(v)
    gu, gv = tree.generation(u), tree.generation(v)
    while gu > gv:
        u = int(tree.parent[u])
        gu -= 1
    while gv > gu:
        v = int(tree.parent[v])
        gv -= 1
    while u != v:
        u = int(tree.parent[u])
        v = int(tree.parent[v])
        gu -= 1
    return gu


def population_profile(law, rng, horizon=None, cap=DEFAULT_CAP):
    """Sizes (Z_0, Z_1, ...) of one population chain, Z_0 = 1.

    Runs to extinction, or to ``horizon`` generations when given.  The joint
    law of the profile equals that of the generation sizes of grow_tree.
    """
    sizes = [1]
    z = np.array([1], dtype=np.int64)
    total = 1
    while z[0] > 0 and (horizon is None or len(sizes) <= horizon):
        z = law.population_step(rng, z)
        total += int(z[0])
        if total > cap:
            raise BudgetExceeded(cap, total)
        if z[0] > 0:
            sizes.append(int(z[0]))
    return sizes
