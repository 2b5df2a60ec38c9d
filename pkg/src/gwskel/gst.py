"""Piecewise-linear paths, graph spatial trees, and the distance D.

A graph spatial tree pairs a labelled shape with positive edge lengths and a
piecewise-linear chart per edge.  Comparing two trees of the same shape
costs a length part (largest edge-length difference) and a chart part
(largest pointwise gap after matching edges proportionally); the distance D
caps their sum at one.  Degenerate inputs collapse to the EmptyK sentinel,
at distance one from everything but itself.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidMatrix, OutOfRange, ShapeMismatch
from .skeleton import (
    BranchMatrix,
    EmptyK,
    Shape,
    _shape_data,
    check_nondegenerate,
    serialize_shape,
)


class PiecewiseLinearPath:
    """Polyline in R^d over [0, end], constant after its last breakpoint.

    ``times`` are strictly increasing numbers starting at 0 (ints and
    Fractions stay exact); ``points`` is the matching (B, d) float array.
    Evaluation at a breakpoint returns the stored row, so shared histories
    stay bit-identical.
    """

    __slots__ = ("times", "points")

    def __init__(self, times, points):
        times = tuple(times)
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if len(times) != len(points) or not times:
            raise ValueError("times and points must align and be nonempty")
        if times[0] != 0:
            raise ValueError("paths start at time zero")
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ValueError("times must increase strictly")
        self.times = times
        self.points = points

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def end(self):
        return self.times[-1]

    @property
    def lifetime(self):
        """Time after which the path is constant forever."""
        last = self.points[-1]
        idx = None
        for k in range(len(self.times) - 1, -1, -1):
            if not np.array_equal(self.points[k], last):
                idx = k
                break
        if idx is None:
            return 0
        return self.times[idx + 1]

    def __call__(self, t):
        if t < 0:
            raise OutOfRange(f"negative time {t}")
        if t >= self.times[-1]:
            return self.points[-1].copy()
        k = bisect_right(self.times, t) - 1
        if self.times[k] == t:
            return self.points[k].copy()
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        w = float(w)
        return self.points[k] + w * (self.points[k + 1] - self.points[k])

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseLinearPath)
            and self.times == other.times
            and np.array_equal(self.points, other.points)
        )

    def __repr__(self):
        return f"PiecewiseLinearPath({len(self.times)} breakpoints, dim {self.dim})"


class InterpolatedPath(PiecewiseLinearPath):
    """Piecewise-linear reading of a discrete path at mesh 1/n.

    Keeps the originating step path and the mesh around so the construction
    can be replayed or rescaled later.
    """

    __slots__ = ("base", "scale")

    def __init__(self, times, points, base, scale):
        super().__init__(times, points)
        self.base = base
        self.scale = scale


def interpolate_kappa(w, n):
    """Linear interpolation of a discrete path at mesh 1/n.

    Constant on [j, j+1-1/n] at the time-j point, then linear into the
    time-(j+1) point; evaluation at every k/n agrees with the step function.
    Breakpoint times are Fractions, so later rescalings stay exact.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    m = w.lifetime
    times = [Fraction(0)]
    rows = [w.points[0]]
    for j in range(1, m + 1):
        t_hold = Fraction(j) - Fraction(1, n)
        if t_hold > times[-1]:
            times.append(t_hold)
            rows.append(w.points[j - 1])
        times.append(Fraction(j))
        rows.append(w.points[j])
    return InterpolatedPath(times, np.array(rows, dtype=np.float64), base=w, scale=n)


def _div_exact(x, n):
    """x / n, kept a Fraction whenever x is exact."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x) / n
    return x / n


def rescale_path(p, n):
    """Divide times by n and positions by sqrt(n)."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    times = tuple(_div_exact(t, n) for t in p.times)
    return PiecewiseLinearPath(times, p.points / math.sqrt(n))


def _merged_times(p, q):
    ts = set(p.times) | set(q.times)
    return sorted(ts)


def pl_branch_time(p, q):
    """Time at which two piecewise-linear paths part ways, capped at both
    lifetimes.

    Two polylines that agree at consecutive merged breakpoints agree on the
    whole segment between them, so the uncapped divergence time is the last
    merged breakpoint of the initial agreement streak.
    """
    if p.dim != q.dim:
        raise ValueError("paths of different dimension")
    tbar = None
    diverged = False
    for t in _merged_times(p, q):
        if np.array_equal(p(t), q(t)):
            tbar = t
        else:
            diverged = True
            break
    l1, l2 = p.lifetime, q.lifetime
    if not diverged:
        # equal at every merged breakpoint, hence equal functions
        return min(l1, l2)
    if tbar is None:
        tbar = 0
    return min(tbar, l1, l2)


@dataclass
class GST:
    """Graph spatial tree: a shape, edge lengths, and one chart per edge.

    ``embedding[v]`` is a PiecewiseLinearPath over [0, lengths[v]] giving
    positions along the edge ending at vertex v, offset measured from the
    parent end.  Charts of adjacent edges must agree at the junction.
    """

    shape: Shape
    lengths: dict
    embedding: dict

    def __post_init__(self):
        n = self.shape.n_vertices
        labels = set(range(1, n))
        if set(self.lengths) != labels or set(self.embedding) != labels:
            raise ValueError("need one length and one chart per non-root vertex")
        dims = {self.embedding[v].dim for v in labels}
        if len(dims) != 1:
            raise ValueError("charts of mixed dimension")
        for v in labels:
            if self.lengths[v] <= 0:
                raise ValueError(f"edge length at {v} must be positive")
            chart = self.embedding[v]
            if chart.end != self.lengths[v]:
                raise ValueError(f"chart at {v} does not span its edge length")
        for v in labels:
            p = self.shape.parent[v]
            if p == 0:
                continue
            if not np.array_equal(self.embedding[v].points[0], self.embedding[p].points[-1]):
                raise ValueError(f"chart at {v} does not meet its parent chart")
        roots = [v for v in labels if self.shape.parent[v] == 0]
        for a, b in zip(roots, roots[1:]):
            if not np.array_equal(self.embedding[a].points[0], self.embedding[b].points[0]):
                raise ValueError("root charts disagree at the root point")

    @property
    def K(self):
        return self.shape.K

    @property
    def dim(self):
        return next(iter(self.embedding.values())).dim

    def root_point(self):
        v = next(v for v in range(1, self.shape.n_vertices) if self.shape.parent[v] == 0)
        return self.embedding[v].points[0].copy()

    def eval(self, point):
        """Position at (vertex label, offset along the edge ending there)."""
        v, alpha = point
        if v not in self.embedding:
            raise OutOfRange(f"no edge ends at vertex {v}")
        if alpha < 0 or alpha > self.lengths[v]:
            raise OutOfRange(f"offset {alpha} outside [0, {self.lengths[v]}]")
        return self.embedding[v](alpha)


def gst_of_paths(paths):
    """Assemble the graph spatial tree spanned by piecewise-linear paths.

    Branch times and lifetimes give a branch-time matrix; a degenerate
    matrix returns EmptyK.  Each edge's chart samples the representative
    path between the endpoint heights, at its own breakpoints, so shared
    path prefixes land in the charts bit-for-bit.
    """
    K = len(paths)
    if K < 1:
        raise ValueError("need at least one path")
    dims = {p.dim for p in paths}
    if len(dims) != 1:
        raise ValueError("paths of mixed dimension")
    tau = [[None] * K for _ in range(K)]
    for a in range(K):
        tau[a][a] = paths[a].lifetime
        for b in range(a + 1, K):
            tau[a][b] = tau[b][a] = pl_branch_time(paths[a], paths[b])
    matrix = BranchMatrix(tuple(tuple(row) for row in tau))
    matrix.validate()
    if not check_nondegenerate(matrix).ok:
        return EmptyK(K)
    shape, lengths, reps = _shape_data(matrix)

    heights = {}

    def height(v):
        if v == 0:
            return 0
        if v not in heights:
            heights[v] = lengths[v] + height(shape.parent[v])
        return heights[v]

    for v in range(1, shape.n_vertices):
        height(v)

    embedding = {}
    for v in range(1, shape.n_vertices):
        leaf = reps[v][0]
        path = paths[leaf - 1]
        p = shape.parent[v]
        lo = heights[p] if p != 0 else 0
        hi = heights[v]
        times = [lo]
        for t in path.times:
            if lo < t < hi:
                times.append(t)
        times.append(hi)
        rows = np.array([path(t) for t in times], dtype=np.float64)
        offsets = [t - lo for t in times]
        embedding[v] = PiecewiseLinearPath(offsets, rows)
    return GST(shape=shape, lengths=lengths, embedding=embedding)


def rescale(g, n):
    """Divide edge lengths and chart times by n, positions by sqrt(n)."""
    if isinstance(g, EmptyK):
        return g
    lengths = {}
    embedding = {}
    for v, ell in g.lengths.items():
        lengths[v] = _div_exact(ell, n)
        chart = g.embedding[v]
        times = tuple(_div_exact(t, n) for t in chart.times)
        embedding[v] = PiecewiseLinearPath(times, chart.points / math.sqrt(n))
    return GST(shape=g.shape, lengths=lengths, embedding=embedding)


def d1(g1, g2):
    """Largest edge-length difference; infinite across different shapes."""
    if isinstance(g1, EmptyK) or isinstance(g2, EmptyK) or g1.shape != g2.shape:
        return math.inf
    return max(abs(g1.lengths[v] - g2.lengths[v]) for v in g1.lengths)


def upsilon(g1, g2, point):
    """Carry (vertex, offset) from g1's edge to the same edge of g2,
    scaling the offset by the length ratio."""
    if isinstance(g1, EmptyK) or isinstance(g2, EmptyK) or g1.shape != g2.shape:
        raise ShapeMismatch("offsets only map between trees of one shape")
    v, alpha = point
    if v not in g1.lengths:
        raise OutOfRange(f"no edge ends at vertex {v}")
    if alpha < 0 or alpha > g1.lengths[v]:
        raise OutOfRange(f"offset {alpha} outside [0, {g1.lengths[v]}]")
    l1, l2 = g1.lengths[v], g2.lengths[v]
    if isinstance(alpha, (int, Fraction)) and isinstance(l1, (int, Fraction)) and isinstance(l2, (int, Fraction)):
        return (v, Fraction(alpha) * Fraction(l2) / Fraction(l1))
    return (v, alpha * l2 / l1)


def d2(g1, g2):
    """Largest pointwise chart gap after proportional edge matching.

    The gap along each edge is piecewise linear in the offset, so the
    supremum sits at a breakpoint of either chart (the second pulled back
    through the proportional map); infinite across different shapes.
    """
    if isinstance(g1, EmptyK) or isinstance(g2, EmptyK) or g1.shape != g2.shape:
        return math.inf
    if g1.dim != g2.dim:
        raise ShapeMismatch("charts of different dimension")
    worst = 0.0
    for v in g1.lengths:
        c1, c2 = g1.embedding[v], g2.embedding[v]
        l1, l2 = g1.lengths[v], g2.lengths[v]
        offsets = set(c1.times)
        for beta in c2.times:
            if isinstance(beta, (int, Fraction)) and isinstance(l1, (int, Fraction)) and isinstance(l2, (int, Fraction)):
                offsets.add(Fraction(beta) * Fraction(l1) / Fraction(l2))
            else:
                offsets.add(beta * l1 / l2)
        for alpha in sorted(offsets):
            _, pulled = upsilon(g1, g2, (v, alpha))
            gap = float(np.linalg.norm(c1(alpha) - c2(pulled)))
            if gap > worst:
                worst = gap
    return worst


def big_D(g1, g2):
    """Distance D: length part plus chart part, capped at one.

    The sentinel sits at distance one from every tree and from sentinels of
    other leaf counts, and at zero from itself.
    """
    e1, e2 = isinstance(g1, EmptyK), isinstance(g2, EmptyK)
    if e1 and e2:
        return 0.0 if g1.K == g2.K else 1.0
    if e1 or e2:
        return 1.0
    if g1.shape != g2.shape:
        return 1.0
    lengths_part = d1(g1, g2)
    charts_part = d2(g1, g2)
    return float(min(lengths_part + charts_part, 1))


def serialize_gst(g):
    """Text form: the shape line, then one chart line per edge.

    Chart lines read "v | offset point; offset point; ...", points as
    comma-separated coordinates, offsets via str() so Fractions survive.
    The sentinel serializes as "empty K;".
    """
    if isinstance(g, EmptyK):
        return f"empty {g.K};"
    lines = [serialize_shape(g.shape, g.lengths)]
    for v in sorted(g.embedding):
        chart = g.embedding[v]
        stops = "; ".join(
            f"{t} " + ",".join(repr(float(x)) for x in row)
            for t, row in zip(chart.times, chart.points)
        )
        lines.append(f"{v} | {stops}")
    return "\n".join(lines)
