"""Closed-form limit values and the tree-indexed Gaussian sampler.

The first half collects small exact formulas the Monte Carlo harness is
checked against: survival asymptotics, pairwise ancestor counts, the
lifetime tail, and the flat limit of rescaled branch times.  The second
half samples a centred Gaussian path indexed by a shape with vertex times,
sharing samples along common ancestry so that covariances come out right by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidShapeTimes, RangeError
from .skeleton import Shape


def survival_tail_gw(m, gamma):
    """Asymptotic survival probability 2 / (gamma m) of criticality."""
    if m < 1:
        raise RangeError("m must be at least 1")
    if gamma <= 0:
        raise RangeError("gamma must be positive")
    return 2.0 / (gamma * m)


def exact_survival_geometric(m):
    """P(generation m is alive) for the geometric mean-one law, exactly.

    The generating function iterates to q_m = m / (m + 1), so survival is
    1 / (m + 1).
    """
    if m < 0:
        raise RangeError("m must be nonnegative")
    q = Fraction(0)
    for _ in range(m):
        q = 1 / (2 - q)
    return 1 - q


def pair_mrca_expectation(law, m, k1, k2):
    """Expected ordered pairs (alpha in generation k1, beta in generation
    k2) whose common ancestor sits exactly in generation m.

    Constant in m below both depths: the second factorial moment of the
    offspring law.
    """
    if not 0 <= m < min(k1, k2):
        raise RangeError("need 0 <= m < min(k1, k2)")
    return law.gamma


def lifetime_tail_limit(t):
    """Limit of P(a uniform vertex outlives t times the conditioning
    depth), which is 1 / (2 t) for t > 1."""
    if t <= 1:
        raise RangeError("t must exceed 1")
    if isinstance(t, (int, Fraction)):
        return Fraction(1, 2) / t
    return 1.0 / (2.0 * t)


def branch_time_limit_measure(t1, t2, a, b):
    """Mass the flat branch-time limit puts on [a, b] for a pair of paths
    observed at rescaled times t1 and t2: the overlap of [a, b] with
    (0, min(t1, t2))."""
    if t1 <= 0 or t2 <= 0:
        raise RangeError("observation times must be positive")
    if a > b:
        raise RangeError("need a <= b")
    top = min(t1, t2)
    lo = max(a, 0)
    hi = min(b, top)
    width = hi - lo
    return width if width > 0 else 0 * width


@dataclass(frozen=True)
class MetricShapeTimes:
    """A shape together with strictly increasing vertex times.

    The root sits at time 0; every other vertex must be strictly later than
    its parent.  ``leaf_times[i - 1]`` is the time of leaf i and
    ``branch_times[v]`` the time of branch vertex v.
    """

    shape: Shape
    leaf_times: tuple
    branch_times: dict

    def __post_init__(self):
        K = self.shape.K
        if len(self.leaf_times) != K:
            raise InvalidShapeTimes("one time per leaf required")
        branch = set(range(K + 1, 2 * K)) if K > 1 else set()
        if set(self.branch_times) != branch:
            raise InvalidShapeTimes("one time per branch vertex required")
        for v in range(1, self.shape.n_vertices):
            if not self.time_of(v) > self.time_of(self.shape.parent[v]):
                raise InvalidShapeTimes(
                    f"vertex {v} not strictly later than its parent"
                )

    def time_of(self, v):
        if v == 0:
            return 0
        if self.shape.is_leaf(v):
            return self.leaf_times[v - 1]
        return self.branch_times[v]


@dataclass
class TreeIndexedBM:
    """Sampled Gaussian paths along a timed shape.

    ``leaf_grid[i]`` and ``leaf_values[i]`` give, for leaf i, the sample
    times from 0 to that leaf's time and the matching positions; rows on
    the common ancestry of two leaves are shared arrays, bit for bit.
    """

    times: MetricShapeTimes
    variance_rate: float
    step: float
    dim: int
    leaf_grid: dict
    leaf_values: dict

    def leaf_endpoint(self, i):
        return self.leaf_values[i][-1]

    def empirical_branch_time(self, i, j):
        """Last shared sample time of two leaf paths.

        Falls within one step of the branch vertex time, since samples
        above the fork are shared and samples below are independent
        Gaussians (equal with probability zero).
        """
        gi, gj = self.leaf_grid[i], self.leaf_grid[j]
        vi, vj = self.leaf_values[i], self.leaf_values[j]
        k = 0
        last = 0.0
        upto = min(len(gi), len(gj))
        while k < upto and gi[k] == gj[k] and np.array_equal(vi[k], vj[k]):
            last = gi[k]
            k += 1
        return last


def sample_tree_indexed_bm(shape_times, sigma0sq=1.0, h=None, dim=1, rng=None):
    """Sample one tree-indexed Brownian path family.

    Each edge gets a fresh grid of at most ``h``-sized increments with
    variance sigma0sq * dt per coordinate; a child edge starts from its
    parent's endpoint, so two leaves share every sample above their fork.
    Default h: a thousandth of the shortest edge.
    """
    times, variance_rate, step = shape_times, sigma0sq, h
    if rng is None:
        rng = np.random.default_rng()
    if variance_rate <= 0:
        raise RangeError("sigma0sq must be positive")
    shape = times.shape
    edge_spans = {}
    for v in range(1, shape.n_vertices):
        lo = float(times.time_of(shape.parent[v]))
        hi = float(times.time_of(v))
        edge_spans[v] = (lo, hi)
    if step is None:
        step = min(hi - lo for lo, hi in edge_spans.values()) * 1e-3
    if step <= 0:
        raise RangeError("h must be positive")

    grids = {}
    values = {}

    def sample_edge(v):
        lo, hi = edge_spans[v]
        p = shape.parent[v]
        if p == 0:
            start_val = np.zeros(dim)
        else:
            start_val = values[p][-1]
        n_steps = max(1, math.ceil((hi - lo) / step))
        grid = np.linspace(lo, hi, n_steps + 1)
        dt = np.diff(grid)
        incr = rng.normal(0.0, 1.0, size=(n_steps, dim)) * np.sqrt(
            variance_rate * dt
        )[:, None]
        vals = np.empty((n_steps + 1, dim))
        vals[0] = start_val
        np.cumsum(incr, axis=0, out=vals[1:])
        vals[1:] += start_val
        grids[v] = grid
        values[v] = vals

    order = []
    pending = list(range(1, shape.n_vertices))
    done = {0}
    while pending:
        rest = []
        for v in pending:
            if shape.parent[v] in done:
                order.append(v)
                done.add(v)
            else:
                rest.append(v)
        pending = rest
    for v in order:
        sample_edge(v)

    leaf_grid = {}
    leaf_values = {}
    for i in range(1, shape.K + 1):
        path = times.shape.root_path(i)[1:]
        g = [np.array([0.0])]
        val = [np.zeros((1, dim))]
        for v in path:
            g.append(grids[v][1:])
            val.append(values[v][1:])
        leaf_grid[i] = np.concatenate(g)
        leaf_values[i] = np.concatenate(val)
    return TreeIndexedBM(
        times=times,
        variance_rate=variance_rate,
        step=step,
        dim=dim,
        leaf_grid=leaf_grid,
        leaf_values=leaf_values,
    )
