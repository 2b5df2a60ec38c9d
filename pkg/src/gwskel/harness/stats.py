"""Sample summaries and the small test-statistic toolbox.

Everything here consumes plain arrays and returns plain floats, so the
experiment drivers can stay free of scipy imports.  Quantiles use the
linear-interpolation rule (numpy's default, type 7).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as sps

from ..errors import EmptySample

# asymptotic two-sided Kolmogorov-Smirnov critical scale at the 1% level
KS_CRIT_1PCT = 1.63


class EmpiricalSummary:
    """Sorted sample with ECDF queries and KS distances.

    The ECDF is the usual right-continuous step function; ks_distance is
    exact for continuous references evaluated at the sample points, and
    accepts the reference's left limits for references with atoms.
    """

    def __init__(self, values):
        arr = np.sort(np.asarray(values, dtype=np.float64))
        if arr.size == 0:
            raise EmptySample("empirical summary of an empty sample")
        self.values = arr

    @property
    def n(self):
        return int(self.values.size)

    def ecdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.n

    def mean(self):
        return float(self.values.mean())

    def se(self):
        if self.n < 2:
            return None
        return float(self.values.std(ddof=1) / math.sqrt(self.n))

    def quantiles(self, qs):
        return [float(v) for v in np.quantile(self.values, qs)]

    def ks_distance(self, cdf, cdf_left=None):
        return ks_distance(self, cdf, cdf_left=cdf_left)


def ks_distance(summary, cdf, cdf_left=None):
    """Sup distance between the ECDF and a reference CDF.

    ``cdf_left`` supplies left limits when the reference has atoms; by
    default the reference is assumed continuous, which makes the result an
    upper bound at any atom it does have.
    """
    if not isinstance(summary, EmpiricalSummary):
        summary = EmpiricalSummary(summary)
    xs = summary.values
    n = summary.n
    right = _eval_cdf(cdf, xs)
    left = right if cdf_left is None else _eval_cdf(cdf_left, xs)
    steps_hi = np.arange(1, n + 1) / n
    steps_lo = np.arange(0, n) / n
    d_plus = float(np.max(steps_hi - right))
    d_minus = float(np.max(left - steps_lo))
    return max(d_plus, d_minus, 0.0)


def _eval_cdf(cdf, xs):
    try:
        out = np.asarray(cdf(xs), dtype=np.float64)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.asarray([float(cdf(x)) for x in xs])


def mean_se(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptySample("mean of an empty sample")
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else None
    return mean, se, int(arr.size)


def mean_se_from_sums(total, sq_total, count):
    """Mean and standard error from streaming sums."""
    if count == 0:
        raise EmptySample("no replicas accumulated")
    mean = total / count
    if count < 2:
        return mean, None
    var = max(sq_total / count - mean * mean, 0.0) * count / (count - 1)
    return mean, math.sqrt(var / count)


def binomial_se(successes, count):
    if count == 0:
        raise EmptySample("no replicas accumulated")
    p = successes / count
    return p, math.sqrt(max(p * (1 - p), 0.0) / count)


def welch_p_greater(mean1, se1, mean2, se2):
    """One-sided p-value for H1: mean1 > mean2, via a normal z."""
    denom = math.hypot(se1, se2)
    if denom == 0:
        return 0.0 if mean1 > mean2 else 1.0
    z = (mean1 - mean2) / denom
    return float(sps.norm.sf(z))


def paired_p_greater(diff_sum, diff_sqsum, count):
    """One-sided p-value that the paired difference has positive mean."""
    if count < 2:
        return 1.0
    mean = diff_sum / count
    var = max(diff_sqsum / count - mean * mean, 0.0) * count / (count - 1)
    if var == 0:
        return 0.0 if mean > 0 else 1.0
    z = mean / math.sqrt(var / count)
    return float(sps.norm.sf(z))


def sign_test_p(wins, losses):
    """One-sided sign test: p-value against wins and losses being even."""
    total = wins + losses
    if total == 0:
        return 1.0
    return float(sps.binomtest(wins, total, 0.5, alternative="greater").pvalue)


def proportion_p_less(k1, n1, k2, n2):
    """One-sided p-value for H1: first proportion below the second."""
    if n1 == 0 or n2 == 0:
        return 1.0
    pooled = (k1 + k2) / (n1 + n2)
    denom = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if denom == 0:
        return 0.0 if k1 / n1 < k2 / n2 else 1.0
    z = (k2 / n2 - k1 / n1) / denom
    return float(sps.norm.sf(z))


def chisquare_uniform_p(counts):
    counts = np.asarray(counts, dtype=np.float64)
    if counts.sum() == 0:
        raise EmptySample("chi-square of empty counts")
    return float(sps.chisquare(counts).pvalue)


def two_sample_counts_p(counts_a, counts_b):
    table = np.asarray([counts_a, counts_b], dtype=np.float64)
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    if table.shape[1] < 2:
        return 1.0
    return float(sps.chi2_contingency(table).pvalue)


def inverse_cdf_sample(probs, rng, size):
    """Indices drawn proportionally to probs via the inverse CDF."""
    cum = np.cumsum(np.asarray(probs, dtype=np.float64))
    if cum.size == 0 or cum[-1] <= 0:
        raise EmptySample("cannot sample from an empty table")
    cum /= cum[-1]
    return np.searchsorted(cum, rng.random(size), side="right")
