"""Batched simulation engines behind the experiment drivers.

Two execution styles, chosen by what a statistic needs:

* population chains: only generation sizes matter, so replicas advance as
  one compacted vector of alive population counts (one vectorized offspring
  draw per generation regardless of population size);
* flat forests: genealogy or positions matter, so whole batches of trees
  grow side by side as per-generation arrays (attempt id, parent pointer,
  position, path signature), children laid down with np.repeat.

Batches map to independent Philox streams keyed by (seed, batch index), so
results do not depend on the worker count; partial results are combined in
batch order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import AcceptanceFloor
from ..treegen import _unrank_box

SIG_SEED = 0x51B0_97C3_AC10_66D5


def stream_for(seed, batch_index):
    """Independent generator for one batch of one run."""
    ss = np.random.SeedSequence([int(seed), int(batch_index)])
    return np.random.Generator(np.random.Philox(ss))


def batch_plan(total, batch_size):
    plan = []
    start = 0
    index = 0
    while start < total:
        count = min(batch_size, total - start)
        plan.append((index, count))
        start += count
        index += 1
    return plan


def run_batches(worker, plan, threads):
    """Run worker(batch_index, count) over the plan, results in plan order."""
    if threads <= 1:
        return [worker(*args) for args in plan]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, *args) for args in plan]
        return [f.result() for f in futures]


def run_batches_until(worker, batch_size, done, threads, max_batches):
    """Feed fixed-size batches to worker until ``done(results_so_far)``.

    Results are consumed strictly in batch-index order and the stopping
    test runs after each one, so the set of batches contributing to the
    output is the same for every worker count; with threads > 1 a few
    batches may be computed and thrown away.  Raises AcceptanceFloor when
    max_batches runs out first.
    """
    results = []
    if threads <= 1:
        for index in range(max_batches):
            results.append(worker(index, batch_size))
            if done(results):
                return results
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pending = {}
            horizon = 0
            for index in range(max_batches):
                while horizon < min(index + threads, max_batches):
                    pending[horizon] = pool.submit(worker, horizon, batch_size)
                    horizon += 1
                results.append(pending.pop(index).result())
                if done(results):
                    for fut in pending.values():
                        fut.cancel()
                    return results
    raise AcceptanceFloor(rate=0.0, floor=float(max_batches))


# ---------------------------------------------------------------------------
# population chains

def survival_moment_chain(law, checkpoints, count, rng):
    """Alive counts and size moments at each checkpoint generation.

    Returns {m: (alive, sum_z, sum_z2, sum_z4)} where the sums run over all
    ``count`` replicas, extinct ones contributing zero.  The fourth powers
    feed the standard error of the second-moment estimate.
    """
    checkpoints = sorted(set(int(m) for m in checkpoints))
    out = {}
    z = np.ones(count, dtype=np.int64)
    g = 0
    for m in checkpoints:
        while g < m and z.size:
            z = law.population_step(rng, z)
            z = z[z > 0]
            g += 1
        zf = z.astype(np.float64)
        sq = zf * zf
        out[m] = (int(z.size), int(z.sum()), float(sq.sum()), float((sq * sq).sum()))
    return out


def lifetime_chain(law, n, gen_cap, count, rng):
    """Uniform-vertex generation per tree surviving past generation n.

    Runs the population chain to extinction (capped at gen_cap), keeping a
    per-replica reservoir: at generation g each alive replica resamples its
    remembered generation with probability Z_g / W_g, which leaves a
    uniformly chosen vertex generation once the tree is finished.  Returns
    the sampled generations of replicas alive at n and dead by the cap,
    plus (accepted, still_alive_at_cap) counts.
    """
    idx = np.arange(count, dtype=np.int64)
    z = np.ones(count, dtype=np.int64)
    weight = np.ones(count, dtype=np.float64)
    sample_gen = np.zeros(count, dtype=np.int64)
    accepted = np.zeros(count, dtype=bool)
    g = 0
    while idx.size and g < gen_cap:
        z = law.population_step(rng, z)
        keep = z > 0
        idx = idx[keep]
        z = z[keep]
        g += 1
        if not idx.size:
            break
        weight[idx] += z
        pick = rng.random(idx.size) < z / weight[idx]
        sample_gen[idx[pick]] = g
        if g == n:
            accepted[idx] = True
    unfinished = np.zeros(count, dtype=bool)
    unfinished[idx] = True
    done = accepted & ~unfinished
    return sample_gen[done], int(accepted.sum()), int(unfinished.sum())


# ---------------------------------------------------------------------------
# flat forests

def _mix64(x):
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def _rank_tables(omega):
    base = _mix64(np.arange(omega, dtype=np.uint64) + np.uint64(SIG_SEED))
    return base, _mix64(base)


@dataclass
class FlatForest:
    """One batch of trees laid out generation by generation.

    ``reps[g]`` holds the attempt id of every generation-g vertex (sorted,
    since children inherit their parents' order), ``parents[g]`` the index
    of its parent within generation g-1.  Positions and path signatures are
    optional columns.  ``dropped`` marks attempts killed by the per-attempt
    vertex budget; their rows stay but the attempt must be ignored.
    """

    n_attempts: int
    reps: list = field(default_factory=list)
    parents: list = field(default_factory=list)
    pos: list = None
    siga: list = None
    sigb: list = None
    dropped: np.ndarray = None
    alive_after: np.ndarray = None
    unfinished: np.ndarray = None

    @property
    def n_generations(self):
        return len(self.reps)

    def gen_size(self, g):
        return len(self.reps[g])

    def rep_slice(self, g, rep):
        lo = np.searchsorted(self.reps[g], rep, side="left")
        hi = np.searchsorted(self.reps[g], rep, side="right")
        return int(lo), int(hi)


def grow_flat(law, count, rng, horizon, d=0, L=1, positions=False,
              signatures=False, to_extinction=False, gen_cap=None, budget=None):
    """Grow ``count`` trees side by side.

    Stops at ``horizon`` generations unless ``to_extinction`` is set, in
    which case growth continues to extinction or gen_cap (required then).
    ``budget`` caps vertices per attempt; offenders are killed and marked
    dropped.  ``alive_after`` marks attempts that reached generation
    ``horizon`` without being dropped; ``unfinished`` the ones still alive
    when gen_cap cut growth off.
    """
    if to_extinction and gen_cap is None:
        raise ValueError("to_extinction growth needs a gen_cap")
    forest = FlatForest(n_attempts=count)
    rep = np.arange(count, dtype=np.int64)
    forest.reps.append(rep)
    forest.parents.append(np.full(count, -1, dtype=np.int64))
    if positions:
        forest.pos = [np.zeros((count, d), dtype=np.int64)]
        steps = _unrank_box(np.arange((2 * L + 1) ** d - 1), d, L)
    if signatures:
        ta, tb = _rank_tables((2 * L + 1) ** d - 1)
        forest.siga = [np.zeros(count, dtype=np.uint64)]
        forest.sigb = [np.zeros(count, dtype=np.uint64)]
    forest.dropped = np.zeros(count, dtype=bool)
    totals = np.ones(count, dtype=np.int64)
    alive_after = np.zeros(count, dtype=bool)

    g = 0
    limit = gen_cap if to_extinction else horizon
    while g < limit:
        rep = forest.reps[g]
        if not rep.size:
            break
        y = law.sample_counts(rng, rep.size)
        if budget is not None:
            born = np.bincount(rep, weights=y, minlength=count).astype(np.int64)
            totals += born
            blown = totals > budget
            newly = blown & ~forest.dropped
            if newly.any():
                forest.dropped |= newly
            if forest.dropped.any():
                y = np.where(forest.dropped[rep], 0, y)
        n_children = int(y.sum())
        parent_ptr = np.repeat(np.arange(rep.size, dtype=np.int64), y)
        rep_next = rep[parent_ptr]
        forest.reps.append(rep_next)
        forest.parents.append(parent_ptr)
        if positions:
            ranks = rng.integers(0, len(steps), size=n_children)
            forest.pos.append(forest.pos[g][parent_ptr] + steps[ranks])
        if signatures:
            if not positions:
                ranks = rng.integers(0, len(ta), size=n_children)
            forest.siga.append(_mix64(forest.siga[g][parent_ptr] ^ ta[ranks]))
            forest.sigb.append(_mix64(forest.sigb[g][parent_ptr] ^ tb[ranks]))
        g += 1
        if g == horizon:
            alive_after[np.unique(rep_next)] = True
        if to_extinction and not rep_next.size:
            break
    if horizon == 0:
        alive_after[:] = True
    forest.unfinished = np.zeros(count, dtype=bool)
    if to_extinction and forest.reps[-1].size:
        forest.unfinished[np.unique(forest.reps[-1])] = True
    forest.alive_after = alive_after & ~forest.dropped
    return forest


def descendant_counts(forest, top):
    """Number of generation-``top`` descendants below every earlier vertex.

    Returns a list S with S[g][i] = descendants at generation top of vertex
    i in generation g, for g = 0..top (float64; exact for counts below
    2**53).
    """
    S = [None] * (top + 1)
    S[top] = np.ones(forest.gen_size(top), dtype=np.float64)
    for g in range(top - 1, -1, -1):
        S[g] = np.bincount(
            forest.parents[g + 1], weights=S[g + 1], minlength=forest.gen_size(g)
        )
    return S


def pairs_by_ancestor_gen(forest, S, m):
    """Per-attempt count of ordered pairs sharing a generation-m ancestor.

    S must come from descendant_counts for the generation the pairs live
    in.  Returns a float64 array over attempts.
    """
    if m >= len(S) or not forest.gen_size(m):
        return np.zeros(forest.n_attempts, dtype=np.float64)
    return np.bincount(
        forest.reps[m], weights=S[m] ** 2, minlength=forest.n_attempts
    )


def pairs_by_signature(forest, S, t, accepted_reps):
    """Ordered pairs whose position paths agree through generation t.

    Vertices of generation t are grouped by (attempt, both signatures);
    within a group every pair of generation-n descendants shares its path
    prefix, so the group's squared descendant total counts them all.
    Returns one value per entry of accepted_reps.
    """
    t = max(t, 0)
    rep = forest.reps[t]
    mask = np.isin(rep, accepted_reps)
    rep = rep[mask]
    if not rep.size:
        return np.zeros(len(accepted_reps), dtype=np.float64)
    sa = forest.siga[t][mask]
    sb = forest.sigb[t][mask]
    weights = S[t][mask]
    order = np.lexsort((sb, sa, rep))
    rep, sa, sb, weights = rep[order], sa[order], sb[order], weights[order]
    new_group = np.empty(rep.size, dtype=bool)
    new_group[0] = True
    new_group[1:] = (
        (rep[1:] != rep[:-1]) | (sa[1:] != sa[:-1]) | (sb[1:] != sb[:-1])
    )
    starts = np.flatnonzero(new_group)
    group_rep = rep[starts]
    group_total = np.add.reduceat(weights, starts)
    out = np.zeros(forest.n_attempts, dtype=np.float64)
    np.add.at(out, group_rep, group_total ** 2)
    return out[accepted_reps]


def sample_vertices_flat(forest, accepted_reps, per_rep, rng):
    """Uniform vertices over whole attempts: (gen, index-in-gen) pairs.

    Draws ``per_rep`` vertices per listed attempt, uniformly over all of
    its generations.  Relies on generation arrays being sorted by attempt.
    """
    acc = np.asarray(accepted_reps, dtype=np.int64)
    n_gens = forest.n_generations
    lo = np.empty((n_gens, acc.size), dtype=np.int64)
    cnt = np.empty((n_gens, acc.size), dtype=np.int64)
    for g in range(n_gens):
        rep_g = forest.reps[g]
        lo[g] = np.searchsorted(rep_g, acc, side="left")
        cnt[g] = np.searchsorted(rep_g, acc, side="right") - lo[g]
    cum = np.cumsum(cnt, axis=0)
    totals = cum[-1]
    draws = rng.integers(0, totals, size=(per_rep, acc.size))
    gens = np.empty((per_rep, acc.size), dtype=np.int64)
    idxs = np.empty((per_rep, acc.size), dtype=np.int64)
    for j in range(acc.size):
        g_of = np.searchsorted(cum[:, j], draws[:, j], side="right")
        prev = np.where(g_of > 0, cum[g_of - 1, j], 0)
        gens[:, j] = g_of
        idxs[:, j] = lo[g_of, j] + draws[:, j] - prev
    return gens, idxs, totals


def sample_generation_pairs(forest, gen, accepted_reps, per_rep, rng):
    """Uniform ordered vertex pairs within one generation per attempt."""
    acc = np.asarray(accepted_reps, dtype=np.int64)
    rep_g = forest.reps[gen]
    lo = np.searchsorted(rep_g, acc, side="left")
    hi = np.searchsorted(rep_g, acc, side="right")
    size = hi - lo
    a = lo[:, None] + rng.integers(0, size[:, None], size=(acc.size, per_rep))
    b = lo[:, None] + rng.integers(0, size[:, None], size=(acc.size, per_rep))
    return a, b


def walk_pairs(forest, ga, ia, gb, ib):
    """Trace ancestor pairs to the root.

    Returns (met, tau): met[k] is the highest generation where the two
    ancestries share a vertex; tau[k] the lowest generation where ancestor
    positions differ, or n_generations when the position paths agree
    everywhere (requires the position column for tau; otherwise tau is
    None).
    """
    ga = np.asarray(ga, dtype=np.int64).copy()
    ia = np.asarray(ia, dtype=np.int64).copy()
    gb = np.asarray(gb, dtype=np.int64).copy()
    ib = np.asarray(ib, dtype=np.int64).copy()
    n_pairs = ga.size
    met = np.full(n_pairs, -1, dtype=np.int64)
    has_pos = forest.pos is not None
    tau = np.full(n_pairs, forest.n_generations, dtype=np.int64) if has_pos else None
    top = int(max(ga.max(initial=0), gb.max(initial=0)))
    for g in range(top, -1, -1):
        both = (ga == g) & (gb == g)
        if both.any():
            sel = np.flatnonzero(both)
            same = ia[sel] == ib[sel]
            first = same & (met[sel] < 0)
            met[sel[first]] = g
            if has_pos:
                pos_g = forest.pos[g]
                differ = np.any(pos_g[ia[sel]] != pos_g[ib[sel]], axis=1)
                tau[sel[differ]] = g
        if g == 0:
            break
        step_a = ga == g
        ia[step_a] = forest.parents[g][ia[step_a]]
        ga[step_a] -= 1
        step_b = gb == g
        ib[step_b] = forest.parents[g][ib[step_b]]
        gb[step_b] -= 1
    return met, tau


def positions_at(forest, g0, i0, target):
    """Position of each vertex's generation-``target`` ancestor."""
    g = np.asarray(g0, dtype=np.int64).copy()
    idx = np.asarray(i0, dtype=np.int64).copy()
    target = np.asarray(target, dtype=np.int64)
    out = np.empty((g.size, forest.pos[0].shape[1]), dtype=np.int64)
    captured = np.zeros(g.size, dtype=bool)
    top = int(g.max(initial=0))
    for level in range(top, -1, -1):
        hit = (g == level) & (target == level) & ~captured
        if hit.any():
            out[hit] = forest.pos[level][idx[hit]]
            captured[hit] = True
        if level == 0:
            break
        step = (g == level) & ~captured
        idx[step] = forest.parents[level][idx[step]]
        g[step] -= 1
    if not captured.all():
        raise ValueError("target generation above the vertex generation")
    return out
