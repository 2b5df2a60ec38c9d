"""Experiment drivers: one function per subcommand.

Each driver takes a validated ExperimentConfig and returns an
ExperimentRecord whose results are lists of tidy cells (one estimate per
grid point, with standard error and closed-form oracle where one exists)
and whose summaries carry the derived tests: trend p-values, sign tests,
exact per-tree monotonicity flags, KS distances, acceptance accounting.

Randomness is drawn from per-batch Philox streams keyed by (seed, batch
index); grid points get disjoint index ranges.  Record content therefore
depends only on the physical config and seed, never on the thread count.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from itertools import combinations

import numpy as np

from ..errors import AcceptanceFloor, BudgetExceeded
from ..gst import big_D, gst_of_paths, interpolate_kappa, rescale, rescale_path
from ..latticeoracle import (
    enumerate_trees,
    truncated_generation_mean,
    truncated_partition,
    truncated_uniform_vertex_law,
)
from ..limitlaw import (
    branch_time_limit_measure,
    exact_survival_geometric,
    lifetime_tail_limit,
)
from ..skeleton import (
    EmptyK,
    branch_matrix_from_entries,
    build_shape,
    enumerate_shapes,
    minimal_subtree,
    serialize_shape,
    skeleton_projection,
)
from ..treegen import (
    attach_displacements,
    grow_conditioned,
    offspring_law,
    path_to_root,
    uniform_vertices,
)
from . import engine
from .records import StopWatch, make_cell, new_record
from .stats import (
    EmpiricalSummary,
    binomial_se,
    chisquare_uniform_p,
    inverse_cdf_sample,
    ks_distance,
    mean_se_from_sums,
    paired_p_greater,
    proportion_p_less,
    sign_test_p,
    two_sample_counts_p,
    welch_p_greater,
)

# Disjoint batch-index ranges for distinct grid points of one run.
STRIDE = 1 << 20


def _floor_frac(n, x):
    """floor(n * x) with x read as exact decimal, immune to float fuzz."""
    return int(math.floor(Fraction(n) * Fraction(str(x))))


def _max_batches(target, cfg, n, law):
    expected_rate = 2.0 / (law.gamma * n)
    need = target * cfg.attempt_factor / expected_rate
    return max(1, int(math.ceil(need / cfg.batch_size)))


# ---------------------------------------------------------------------------
# survival

def run_survival(cfg):
    law = offspring_law(cfg.law)
    record = new_record(cfg)
    watch = StopWatch()
    checkpoints = sorted(set(cfg.m_grid) | set(cfg.moment_m_grid))

    def worker(index, count):
        rng = engine.stream_for(cfg.seed, index)
        return engine.survival_moment_chain(law, checkpoints, count, rng)

    plan = engine.batch_plan(cfg.replicas, cfg.batch_size)
    parts = engine.run_batches(worker, plan, cfg.threads)
    totals = {m: [0, 0, 0.0, 0.0] for m in checkpoints}
    for part in parts:
        for m, vals in part.items():
            for i in range(4):
                totals[m][i] += vals[i]

    N = cfg.replicas
    geometric = cfg.law == "geometric-half"
    prob_cells = []
    scaled_cells = []
    for m in cfg.m_grid:
        alive = totals[m][0]
        p, se = binomial_se(alive, N)
        oracle = float(exact_survival_geometric(m)) if geometric else None
        prob_cells.append(make_cell(m=m, estimate=p, se=se, oracle=oracle,
                                    replicas=N))
        scaled_cells.append(make_cell(
            m=m, estimate=m * p, se=m * se, oracle=2.0 / law.gamma, replicas=N,
        ))
    mean_cells = []
    second_cells = []
    for m in cfg.moment_m_grid:
        _, zsum, z2sum, z4sum = totals[m]
        mean, se = mean_se_from_sums(zsum, z2sum, N)
        mean_cells.append(make_cell(m=m, estimate=mean, se=se, oracle=1.0,
                                    replicas=N))
        mean2, se2 = mean_se_from_sums(z2sum, z4sum, N)
        second_cells.append(make_cell(
            m=m, estimate=mean2, se=se2, oracle=1.0 + law.gamma * m, replicas=N,
        ))
    record.results["survival_prob"] = prob_cells
    record.results["survival_mscaled"] = scaled_cells
    record.results["generation_mean"] = mean_cells
    record.results["generation_second"] = second_cells

    def worst_z(cells):
        zs = [abs(c["estimate"] - c["oracle"]) / c["se"]
              for c in cells if c["oracle"] is not None and c["se"]]
        return max(zs) if zs else None

    record.summaries = {
        "replicas": N,
        "law": cfg.law,
        "max_abs_z": {
            name: worst_z(record.results[name])
            for name in ("survival_prob", "generation_mean", "generation_second")
        },
    }
    record.meta = {"seconds": watch.seconds(), "batches": len(plan)}
    return record


# ---------------------------------------------------------------------------
# pair-mrca

def run_pair_mrca(cfg):
    law = offspring_law(cfg.law)
    record = new_record(cfg)
    watch = StopWatch()
    depth = cfg.depth

    def depth_worker(index, count):
        rng = engine.stream_for(cfg.seed, index)
        forest = engine.grow_flat(law, count, rng, horizon=depth)
        S = engine.descendant_counts(forest, depth)
        A = [engine.pairs_by_ancestor_gen(forest, S, m) for m in range(depth + 1)]
        out = []
        for m in range(depth):
            diff = A[m] - A[m + 1]
            out.append((float(diff.sum()), float((diff * diff).sum())))
        return out

    plan = engine.batch_plan(cfg.replicas, cfg.batch_size)
    parts = engine.run_batches(depth_worker, plan, cfg.threads)
    cells = []
    for m in range(depth):
        total = sum(p[m][0] for p in parts)
        sq = sum(p[m][1] for p in parts)
        mean, se = mean_se_from_sums(total, sq, cfg.replicas)
        cells.append(make_cell(m=m, estimate=mean, se=se,
                               oracle=float(law.gamma), replicas=cfg.replicas))
    record.results["pair_mrca"] = cells

    a, b = cfg.window
    window_cells = []
    dropped_by_n = {}
    for grid_i, n in enumerate(cfg.window_n_grid):
        offset = (grid_i + 1) * STRIDE
        m1 = int(math.ceil(Fraction(str(a)) * n))
        m2 = _floor_frac(n, b)

        def window_worker(index, count, n=n, m1=m1, m2=m2, offset=offset):
            rng = engine.stream_for(cfg.seed, offset + index)
            forest = engine.grow_flat(law, count, rng, horizon=n,
                                      budget=cfg.budget)
            S = engine.descendant_counts(forest, n)
            inside = (engine.pairs_by_ancestor_gen(forest, S, m1)
                      - engine.pairs_by_ancestor_gen(forest, S, m2 + 1))
            x = inside[~forest.dropped] / (law.gamma * n)
            return (float(x.sum()), float((x * x).sum()), int(x.size),
                    int(forest.dropped.sum()))

        parts = engine.run_batches(window_worker, plan, cfg.threads)
        total = sum(p[0] for p in parts)
        sq = sum(p[1] for p in parts)
        kept = sum(p[2] for p in parts)
        dropped_by_n[n] = sum(p[3] for p in parts)
        mean, se = mean_se_from_sums(total, sq, kept)
        oracle = float(branch_time_limit_measure(1, 1, a, b))
        window_cells.append(make_cell(n=n, estimate=mean, se=se, oracle=oracle,
                                      replicas=kept))
    if window_cells:
        record.results["branch_window"] = window_cells

    record.summaries = {
        "replicas": cfg.replicas,
        "law": cfg.law,
        "gamma": law.gamma,
        "window": list(cfg.window),
        "budget_dropped": dropped_by_n,
    }
    record.meta = {"seconds": watch.seconds()}
    return record


# ---------------------------------------------------------------------------
# lifetime

def run_lifetime(cfg):
    law = offspring_law(cfg.law)
    record = new_record(cfg)
    watch = StopWatch()
    tail_cells = []
    summaries = {"per_n": {}}
    for grid_i, n in enumerate(cfg.n_grid):
        offset = grid_i * STRIDE
        gen_cap = cfg.gen_cap_factor * n

        def worker(index, count, n=n, gen_cap=gen_cap, offset=offset):
            rng = engine.stream_for(cfg.seed, offset + index)
            return engine.lifetime_chain(law, n, gen_cap, count, rng)

        def done(results):
            return sum(len(r[0]) for r in results) >= cfg.replicas

        parts = engine.run_batches_until(
            worker, cfg.batch_size, done, cfg.threads,
            _max_batches(cfg.replicas, cfg, n, law),
        )
        samples = np.concatenate([r[0] for r in parts])
        accepted = sum(r[1] for r in parts)
        unfinished = sum(r[2] for r in parts)
        attempts = len(parts) * cfg.batch_size
        scaled = samples / n
        for t in cfg.t_grid:
            est, se = binomial_se(int((samples > t * n).sum()), samples.size)
            if t > 1:
                cell = make_cell(n=n, m=round(t * n), estimate=est, se=se,
                                 oracle=float(lifetime_tail_limit(t)),
                                 replicas=int(samples.size))
            else:
                cell = make_cell(n=n, m=round(t * n), estimate=est, se=se,
                                 oracle=None, replicas=int(samples.size),
                                 error="no tail law at or below t = 1")
            tail_cells.append(cell)
        beyond = scaled[scaled > 1.0]
        ks = None
        if beyond.size:
            ks = ks_distance(EmpiricalSummary(beyond), lambda t: 1.0 - 1.0 / t)
        summary = EmpiricalSummary(scaled)
        summaries["per_n"][n] = {
            "attempts": attempts,
            "accepted": accepted,
            "finished": int(samples.size),
            "alive_at_cap_dropped": unfinished,
            "acceptance_rate": accepted / attempts,
            "ks_conditional_tail": ks,
            "quartiles": list(summary.quantiles((0.25, 0.5, 0.75))),
        }
    record.results["lifetime_tail"] = tail_cells
    record.summaries = summaries
    record.meta = {"seconds": watch.seconds()}
    return record


# ---------------------------------------------------------------------------
# skeleton-density

def run_skeleton_density(cfg):
    law = offspring_law(cfg.law)
    record = new_record(cfg)
    watch = StopWatch()
    k_grid = list(cfg.k_grid)
    graph_cells = []
    euclid_cells = []
    covering_cells = []
    summaries = {"per_n": {}}

    for grid_i, n in enumerate(cfg.n_grid):
        offset = grid_i * STRIDE

        def worker(index, count, n=n, offset=offset):
            rng = engine.stream_for(cfg.seed, offset + index)
            drops = 0
            while True:
                try:
                    tree = grow_conditioned(law, n, cap=cfg.budget, rng=rng)
                    break
                except BudgetExceeded:
                    drops += 1
                    if drops > 1000:
                        raise AcceptanceFloor(rate=0.0, floor=1000.0)
            stree = attach_displacements(tree, cfg.d, cfg.L, rng=rng)
            draws = uniform_vertices(tree, cfg.k_max, rng)
            for v in draws:
                # nonzero steps make the path through v exactly as long
                # as v is deep
                assert path_to_root(stree, v).lifetime == tree.generation(v)
            n_vertices = tree.n_vertices
            if n_vertices > cfg.sample_vertices:
                probe = rng.integers(0, n_vertices, size=cfg.sample_vertices)
            else:
                probe = np.arange(n_vertices)
            rows = []
            for K in k_grid:
                sub = minimal_subtree(tree, draws[:K])
                _, gdist, edist = skeleton_projection(stree, sub)
                gaps = [
                    float((edist[probe] > eps * math.sqrt(n)).mean())
                    for eps in cfg.epsilon_grid
                ]
                rows.append((int(gdist.max()), float(edist.max()), gaps))
            peaks = [r[0] for r in rows]
            assert all(x >= y for x, y in zip(peaks, peaks[1:])), \
                "projection distance grew under a larger marked set"
            return {
                "rows": rows,
                "rejections": tree.meta["rejections"],
                "budget_drops": drops,
                "vertices": n_vertices,
            }

        plan = [(i, 1) for i in range(cfg.replicas)]
        parts = engine.run_batches(worker, plan, cfg.threads)

        graph_max = np.array([[r[0] for r in p["rows"]] for p in parts],
                             dtype=np.float64)
        euclid_max = np.array([[r[1] for r in p["rows"]] for p in parts])
        for ki, K in enumerate(k_grid):
            graph_cells.append(make_cell(
                n=n, K=K, estimate=float(np.median(graph_max[:, ki])) / n,
                se=None, oracle=None, replicas=cfg.replicas,
            ))
            euclid_cells.append(make_cell(
                n=n, K=K,
                estimate=float(np.median(euclid_max[:, ki])) / math.sqrt(n),
                se=None, oracle=None, replicas=cfg.replicas,
            ))
            for ei, eps in enumerate(cfg.epsilon_grid):
                vals = np.array([p["rows"][ki][2][ei] for p in parts])
                covering_cells.append(make_cell(
                    n=n, K=K, epsilon=eps, estimate=float(vals.mean()),
                    se=float(vals.std(ddof=1) / math.sqrt(vals.size)),
                    oracle=None, replicas=cfg.replicas,
                ))
        first, last = graph_max[:, 0], graph_max[:, -1]
        wins = int((last < first).sum())
        ties = int((last == first).sum())
        losses = int((last > first).sum())
        summaries["per_n"][n] = {
            "trees": cfg.replicas,
            "nested_monotone_all": True,
            "sign_test": {
                "low_k": k_grid[0], "high_k": k_grid[-1],
                "wins": wins, "ties": ties, "losses": losses,
                "p_value": sign_test_p(wins, losses),
            },
            "mean_rejections": float(np.mean([p["rejections"] for p in parts])),
            "budget_drops": int(sum(p["budget_drops"] for p in parts)),
            "mean_vertices": float(np.mean([p["vertices"] for p in parts])),
        }
    record.results["graph_distortion"] = graph_cells
    record.results["euclid_distortion"] = euclid_cells
    record.results["covering_gap"] = covering_cells
    record.summaries = summaries
    record.meta = {"seconds": watch.seconds()}
    return record


# ---------------------------------------------------------------------------
# branch-boundary

def run_branch_boundary(cfg):
    law = offspring_law(cfg.law)
    record = new_record(cfg)
    watch = StopWatch()
    deltas = sorted(cfg.delta_grid)
    epsilons = sorted(cfg.epsilon_grid)
    M = cfg.pairs_per_tree
    agreement_cells = []
    meeting_cells = []
    summaries = {"per_n": {}, "delta_monotone_all": True,
                 "epsilon_monotone_all": True}
    per_n_delta = {}

    for grid_i, n in enumerate(cfg.n_grid):
        offset = grid_i * STRIDE
        gamma_n = law.gamma * n
        T_of = {d: _floor_frac(n, 1.0 - d) for d in deltas}
        shift_of = {d: _floor_frac(n, d) for d in deltas}

        def worker(index, count, n=n, offset=offset, T_of=T_of,
                   shift_of=shift_of):
            rng = engine.stream_for(cfg.seed, offset + index)
            forest = engine.grow_flat(
                law, count, rng, horizon=n, d=cfg.d, L=cfg.L,
                positions=True, signatures=True, budget=cfg.budget,
            )
            acc = np.flatnonzero(forest.alive_after)
            out = {
                "accepted": int(acc.size),
                "dropped": int(forest.dropped.sum()),
                "agree": {}, "meet": {},
                "delta_monotone": True, "epsilon_monotone": True,
                "pair_diff": {},
            }
            if not acc.size:
                return out
            S = engine.descendant_counts(forest, n)
            zn = np.bincount(forest.reps[n], minlength=count)[acc]
            prev = None
            for d in deltas:
                A = engine.pairs_by_signature(forest, S, T_of[d], acc)
                if prev is not None and not np.all(A >= prev):
                    out["delta_monotone"] = False
                prev = A
                x = A / gamma_n ** 2
                out["agree"][d] = (float(x.sum()), float((x * x).sum()))

            ia, ib = engine.sample_generation_pairs(forest, n, acc, M, rng)
            ia, ib = ia.ravel(), ib.ravel()
            full = np.full(ia.size, n, dtype=np.int64)
            _, tau = engine.walk_pairs(forest, full, ia, full, ib)
            weight = (zn.astype(np.float64) / gamma_n) ** 2
            for d in deltas:
                cond = tau <= T_of[d]
                target = np.where(cond, tau + shift_of[d], n)
                pa = engine.positions_at(forest, full, ia, target)
                pb = engine.positions_at(forest, full, ib, target)
                gap = np.linalg.norm((pa - pb).astype(np.float64), axis=1)
                prev_frac = None
                for eps in epsilons:
                    hit = cond & (gap < eps * math.sqrt(n))
                    frac = hit.reshape(acc.size, M).mean(axis=1)
                    if prev_frac is not None and not np.all(frac >= prev_frac):
                        out["epsilon_monotone"] = False
                    prev_frac = frac
                    x = frac * weight
                    out["meet"][(d, eps)] = (float(x.sum()),
                                             float((x * x).sum()))
                x_lo = (cond & (gap < epsilons[0] * math.sqrt(n)))
                x_hi = (cond & (gap < epsilons[-1] * math.sqrt(n)))
                diff = (x_hi.reshape(acc.size, M).mean(axis=1)
                        - x_lo.reshape(acc.size, M).mean(axis=1)) * weight
                out["pair_diff"][d] = (
                    float(diff.sum()), float((diff * diff).sum()),
                    int((diff > 0).sum()), int((diff == 0).sum()),
                    int((diff < 0).sum()),
                )
            return out

        plan = engine.batch_plan(cfg.replicas, cfg.batch_size)
        parts = engine.run_batches(worker, plan, cfg.threads)
        accepted = sum(p["accepted"] for p in parts)
        dropped = sum(p["dropped"] for p in parts)
        if not all(p["delta_monotone"] for p in parts):
            summaries["delta_monotone_all"] = False
        if not all(p["epsilon_monotone"] for p in parts):
            summaries["epsilon_monotone_all"] = False

        eps_tests = {}
        for d in deltas:
            tot = sum(p["agree"].get(d, (0.0, 0.0))[0] for p in parts)
            sq = sum(p["agree"].get(d, (0.0, 0.0))[1] for p in parts)
            mean, se = mean_se_from_sums(tot, sq, accepted)
            agreement_cells.append(make_cell(
                n=n, delta=d, estimate=mean, se=se, oracle=None,
                replicas=accepted,
            ))
            per_n_delta[(n, d)] = (mean, se)
            for eps in epsilons:
                tot = sum(p["meet"].get((d, eps), (0.0, 0.0))[0] for p in parts)
                sq = sum(p["meet"].get((d, eps), (0.0, 0.0))[1] for p in parts)
                mmean, mse = mean_se_from_sums(tot, sq, accepted)
                meeting_cells.append(make_cell(
                    n=n, delta=d, epsilon=eps, estimate=mmean, se=mse,
                    oracle=None, replicas=accepted,
                ))
            dsum = sum(p["pair_diff"].get(d, (0.0,) * 5)[0] for p in parts)
            dsq = sum(p["pair_diff"].get(d, (0.0,) * 5)[1] for p in parts)
            wins = sum(p["pair_diff"].get(d, (0,) * 5)[2] for p in parts)
            ties = sum(p["pair_diff"].get(d, (0,) * 5)[3] for p in parts)
            losses = sum(p["pair_diff"].get(d, (0,) * 5)[4] for p in parts)
            eps_tests[str(d)] = {
                "low_eps": epsilons[0], "high_eps": epsilons[-1],
                "paired_p": paired_p_greater(dsum, dsq, accepted),
                "sign_test": {"wins": wins, "ties": ties, "losses": losses,
                              "p_value": sign_test_p(wins, losses)},
            }
        summaries["per_n"][n] = {
            "attempts": cfg.replicas,
            "accepted": accepted,
            "budget_dropped": dropped,
            "epsilon_trend": eps_tests,
        }

    record.results["agreement_mass"] = agreement_cells
    record.results["meeting_fraction"] = meeting_cells
    if len(cfg.n_grid) > 1:
        lo_n, hi_n = min(cfg.n_grid), max(cfg.n_grid)
        summaries["n_trend"] = {
            str(d): welch_p_greater(*per_n_delta[(lo_n, d)],
                                    *per_n_delta[(hi_n, d)])
            for d in deltas
        }
    record.summaries = summaries
    record.meta = {"seconds": watch.seconds()}
    return record


# ---------------------------------------------------------------------------
# shapes

def run_shapes(cfg):
    law = offspring_law(cfg.law)
    record = new_record(cfg)
    watch = StopWatch()
    K = cfg.K
    shape_keys = [serialize_shape(s) for s in enumerate_shapes(K)]
    pair_slots = list(combinations(range(K), 2))
    freq_cells = []
    degen_cells = []
    summaries = {"per_n": {}, "shape_keys": shape_keys}
    counts_by_n = {}
    degen_by_n = {}

    for grid_i, n in enumerate(cfg.n_grid):
        offset = grid_i * STRIDE
        gen_cap = cfg.gen_cap_factor * n

        def worker(index, count, n=n, offset=offset, gen_cap=gen_cap):
            rng = engine.stream_for(cfg.seed, offset + index)
            forest = engine.grow_flat(
                law, count, rng, horizon=n, to_extinction=True,
                gen_cap=gen_cap, budget=cfg.budget,
            )
            acc = np.flatnonzero(forest.alive_after & ~forest.unfinished)
            out = {
                "accepted": int(acc.size),
                "dropped": int(forest.dropped.sum()),
                "unfinished": int((forest.alive_after & forest.unfinished).sum()),
                "degenerate": 0,
                "counts": Counter(),
            }
            if not acc.size:
                return out
            gens, idxs, _ = engine.sample_vertices_flat(forest, acc, K, rng)
            met = {}
            for p, q in pair_slots:
                met[(p, q)], _ = engine.walk_pairs(
                    forest, gens[p], idxs[p], gens[q], idxs[q])
            for j in range(acc.size):
                entries = [[0] * K for _ in range(K)]
                for p in range(K):
                    entries[p][p] = int(gens[p, j])
                for p, q in pair_slots:
                    entries[p][q] = entries[q][p] = int(met[(p, q)][j])
                built = build_shape(branch_matrix_from_entries(entries))
                if isinstance(built, EmptyK):
                    out["degenerate"] += 1
                else:
                    out["counts"][serialize_shape(built[0])] += 1
            return out

        def done(results):
            return sum(r["accepted"] for r in results) >= cfg.replicas

        parts = engine.run_batches_until(
            worker, cfg.batch_size, done, cfg.threads,
            _max_batches(cfg.replicas, cfg, n, law),
        )
        accepted = sum(p["accepted"] for p in parts)
        degenerate = sum(p["degenerate"] for p in parts)
        counts = Counter()
        for p in parts:
            counts.update(p["counts"])
        ordered = [counts.get(key, 0) for key in shape_keys]
        nondegen = sum(ordered)
        counts_by_n[n] = ordered
        degen_by_n[n] = (degenerate, accepted)

        for si, key in enumerate(shape_keys):
            est, se = binomial_se(ordered[si], nondegen)
            freq_cells.append(make_cell(
                n=n, K=K, m=si, estimate=est, se=se,
                oracle=1.0 / len(shape_keys), replicas=nondegen,
            ))
        dest, dse = binomial_se(degenerate, accepted)
        degen_cells.append(make_cell(n=n, K=K, estimate=dest, se=dse,
                                     oracle=None, replicas=accepted))
        summaries["per_n"][n] = {
            "attempts": len(parts) * cfg.batch_size,
            "accepted": accepted,
            "budget_dropped": sum(p["dropped"] for p in parts),
            "alive_at_cap_dropped": sum(p["unfinished"] for p in parts),
            "degenerate": degenerate,
            "shape_counts": dict(zip(shape_keys, ordered)),
            "uniformity_p": chisquare_uniform_p(ordered) if nondegen else None,
        }

    record.results["shape_freq"] = freq_cells
    record.results["degeneracy"] = degen_cells
    ns = sorted(counts_by_n)
    summaries["stabilization_p"] = {
        f"{a}-{b}": two_sample_counts_p(counts_by_n[a], counts_by_n[b])
        for a, b in zip(ns, ns[1:])
    }
    if len(ns) > 1:
        k_hi, n_hi = degen_by_n[ns[-1]]
        k_lo, n_lo = degen_by_n[ns[0]]
        summaries["degeneracy_trend_p"] = proportion_p_less(
            k_hi, n_hi, k_lo, n_lo)
    record.summaries = summaries
    record.meta = {"seconds": watch.seconds()}
    return record


# ---------------------------------------------------------------------------
# enumerate-lattice

def run_enumerate_lattice(cfg):
    record = new_record(cfg)
    watch = StopWatch()
    d, L, z, top = cfg.d, cfg.L, cfg.z, cfg.max_edges
    trees = enumerate_trees(d, L, top)
    simple = (d, L) == (1, 1)

    by_edges = Counter(t.n_bonds for t in trees)
    count_cells = [
        make_cell(m=k, estimate=float(by_edges.get(k, 0)),
                  oracle=float(k + 1) if simple else None, replicas=1)
        for k in range(top + 1)
    ]
    record.results["tree_counts"] = count_cells

    part = truncated_partition(d, L, z, top)
    part_oracle = 2.75 if simple and z == 1 and top == 2 else None
    record.results["partition"] = [
        make_cell(m=top, estimate=float(part), oracle=part_oracle, replicas=1,
                  exact=str(part)),
    ]

    record.results["generation_mean"] = [
        make_cell(m=m, estimate=float(truncated_generation_mean(d, L, z, top, m)),
                  replicas=1)
        for m in range(top + 1)
    ]

    law = truncated_uniform_vertex_law(d, L, z, top)
    keys = sorted(law)
    probs = [float(law[k]) for k in keys]
    rng = engine.stream_for(cfg.seed, 0)
    draws = inverse_cdf_sample(probs, rng, cfg.replicas)
    freq = np.bincount(draws, minlength=len(keys))

    by_distance = {}
    for (m, point), p in law.items():
        by_distance[m] = by_distance.get(m, 0.0) + float(p)
    emp_by_distance = Counter()
    for ki, (m, _) in enumerate(keys):
        emp_by_distance[m] += int(freq[ki])
    sample_cells = []
    for m in sorted(by_distance):
        est, se = binomial_se(emp_by_distance[m], cfg.replicas)
        sample_cells.append(make_cell(
            m=m, estimate=est, se=se, oracle=by_distance[m],
            replicas=cfg.replicas,
        ))
    record.results["vertex_law_sample"] = sample_cells

    table = []
    worst = 0.0
    for ki, key in enumerate(keys):
        exact = float(law[key])
        emp, se = binomial_se(int(freq[ki]), cfg.replicas)
        zscore = abs(emp - exact) / se if se else 0.0
        worst = max(worst, zscore)
        table.append({
            "distance": key[0],
            "point": list(key[1]),
            "exact": exact,
            "empirical": emp,
            "z": zscore,
        })
    record.summaries = {
        "trees": len(trees),
        "partition_exact": str(part),
        "vertex_law": table,
        "vertex_law_max_z": worst,
        "samples": cfg.replicas,
    }
    record.meta = {"seconds": watch.seconds()}
    return record


# ---------------------------------------------------------------------------
# gst-check

def _draw_path_family(law, cfg, rng):
    """Nondegenerate family of root paths from one conditioned tree."""
    for _ in range(500):
        try:
            tree = grow_conditioned(law, 3, cap=cfg.budget, rng=rng)
        except BudgetExceeded:
            continue
        stree = attach_displacements(tree, cfg.d, cfg.L, rng=rng)
        verts = uniform_vertices(tree, cfg.K, rng)
        paths = [interpolate_kappa(path_to_root(stree, v), 1) for v in verts]
        built = gst_of_paths(paths)
        if not isinstance(built, EmptyK):
            return paths, built
    raise AcceptanceFloor(rate=0.0, floor=500.0)


def run_gst_check(cfg):
    law = offspring_law(cfg.law)
    record = new_record(cfg)
    watch = StopWatch()

    def worker(index, count):
        rng = engine.stream_for(cfg.seed, index)
        paths, base = _draw_path_family(law, cfg, rng)
        gaps = []
        for n in cfg.n_grid:
            direct = gst_of_paths([rescale_path(p, n) for p in paths])
            pulled = rescale(base, n)
            gaps.append(float(big_D(direct, pulled)))
        return gaps

    plan = [(i, 1) for i in range(cfg.replicas)]
    parts = engine.run_batches(worker, plan, cfg.threads)
    gaps = np.array(parts, dtype=np.float64)
    cells = [
        make_cell(n=n, estimate=float(gaps[:, ni].max()), se=None, oracle=0.0,
                  replicas=cfg.replicas)
        for ni, n in enumerate(cfg.n_grid)
    ]
    record.results["identity_gap"] = cells
    record.summaries = {
        "families": cfg.replicas,
        "paths_per_family": cfg.K,
        "all_exact": bool((gaps == 0.0).all()),
    }
    record.meta = {"seconds": watch.seconds()}
    return record


DRIVERS = {
    "survival": run_survival,
    "pair-mrca": run_pair_mrca,
    "lifetime": run_lifetime,
    "skeleton-density": run_skeleton_density,
    "branch-boundary": run_branch_boundary,
    "shapes": run_shapes,
    "enumerate-lattice": run_enumerate_lattice,
    "gst-check": run_gst_check,
}
