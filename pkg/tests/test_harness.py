import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwskel.errors import AcceptanceFloor, ConfigError, EmptySample
from gwskel.harness.config import (
    EXPERIMENT_DEFAULTS,
    EXPERIMENTS,
    build_config,
    load_config,
    parse_config_text,
    validate_config,
    with_experiment,
)
from gwskel.harness.engine import (
    batch_plan,
    descendant_counts,
    grow_flat,
    lifetime_chain,
    pairs_by_ancestor_gen,
    pairs_by_signature,
    positions_at,
    run_batches,
    run_batches_until,
    sample_generation_pairs,
    sample_vertices_flat,
    stream_for,
    survival_moment_chain,
    walk_pairs,
)
from gwskel.harness import cli
from gwskel.harness.records import (
    CSV_COLUMNS,
    ExperimentRecord,
    canonical_json,
    jsonable,
    make_cell,
    new_record,
    record_from_json,
    write_record,
    write_tables,
)
from gwskel.harness.stats import (
    EmpiricalSummary,
    binomial_se,
    chisquare_uniform_p,
    inverse_cdf_sample,
    ks_distance,
    mean_se,
    mean_se_from_sums,
    paired_p_greater,
    proportion_p_less,
    sign_test_p,
    two_sample_counts_p,
    welch_p_greater,
)
from gwskel.treegen import offspring_law


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------- config


def test_parse_config_text_types():
    values = parse_config_text(
        """
        # comment
        seed = 7
        law = binary-half
        u1 = 1.0
        z = 2/3
        m_grid = 5, 10, 20
        t_grid = 1.5,2.0
        plot = true
        """
    )
    assert values["seed"] == 7
    assert values["law"] == "binary-half"
    assert values["u1"] == 1.0
    assert values["z"] == Fraction(2, 3)
    assert values["m_grid"] == (5, 10, 20)
    assert values["t_grid"] == (1.5, 2.0)
    assert values["plot"] is True


def test_parse_config_text_errors():
    with pytest.raises(ConfigError):
        parse_config_text("seed 7")
    with pytest.raises(ConfigError):
        parse_config_text("seed = x")
    with pytest.raises(ConfigError):
        parse_config_text("no_such_key = 1")


def test_build_config_layers(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("experiment = shapes\nreplicas = 77\nseed = 5\n")
    cfg = build_config("survival", path=str(path), overrides={"seed": 9})
    # file's experiment line is ignored; file beats baseline; override beats file
    assert cfg.experiment == "survival"
    assert cfg.replicas == 77
    assert cfg.seed == 9
    bare = build_config("survival")
    assert bare.replicas == EXPERIMENT_DEFAULTS["survival"]["replicas"]
    with pytest.raises(ConfigError):
        build_config("no-such-experiment")


def test_validate_config_rules():
    with pytest.raises(ConfigError):
        build_config("survival", overrides={"law": "cauchy"})
    with pytest.raises(ConfigError):
        build_config("survival", overrides={"replicas": 0})
    with pytest.raises(ConfigError):
        build_config("lifetime", overrides={"s": 2.0})
    with pytest.raises(ConfigError):
        build_config("shapes", overrides={"K": 5})
    with pytest.raises(ConfigError):
        build_config("skeleton-density", overrides={"k_grid": (16, 4)})
    with pytest.raises(ConfigError):
        build_config("skeleton-density", overrides={"k_grid": (4, 128), "k_max": 64})


def test_hash_dict_excludes_only_presentation_keys():
    cfg = build_config("survival", overrides={"threads": 7, "out": "x", "plot": True})
    hashed = cfg.hash_dict()
    for key in ("threads", "out", "format", "plot"):
        assert key not in hashed
    # batch layout changes the replica stream, so it stays hashed
    assert "batch_size" in hashed
    assert "seed" in hashed
    other = build_config("survival", overrides={"threads": 1})
    assert other.hash_dict() == hashed


def test_with_experiment():
    cfg = load_config(overrides={"seed": 3})
    assert with_experiment(cfg, "shapes").experiment == "shapes"


# ----------------------------------------------------------------- stats


def test_ks_distance_exact_values():
    uniform = lambda x: np.clip(x, 0.0, 1.0)
    assert ks_distance([0.3], uniform) == pytest.approx(0.7)
    assert ks_distance([0.5], uniform) == pytest.approx(0.5)
    assert ks_distance([1 / 3, 2 / 3], uniform) == pytest.approx(1 / 3)
    # point mass compared against itself, once left limits are supplied
    atom = lambda x: np.where(np.asarray(x, dtype=float) >= 0.3, 1.0, 0.0)
    atom_left = lambda x: np.where(np.asarray(x, dtype=float) > 0.3, 1.0, 0.0)
    assert ks_distance([0.3], atom, cdf_left=atom_left) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30))
def test_ks_distance_bounds(values):
    uniform = lambda x: np.clip(x, 0.0, 1.0)
    d = ks_distance(values, uniform)
    assert 0.0 <= d <= 1.0


def test_empirical_summary():
    s = EmpiricalSummary([3.0, 1.0, 2.0])
    assert s.n == 3
    assert list(s.values) == [1.0, 2.0, 3.0]
    assert s.ecdf(2.0) == pytest.approx(2 / 3)
    assert s.ecdf(0.0) == 0.0
    assert s.mean() == pytest.approx(2.0)
    assert s.quantiles([0.0, 0.5, 1.0]) == [1.0, 2.0, 3.0]
    with pytest.raises(EmptySample):
        EmpiricalSummary([])


def test_mean_se_variants():
    vals = rng(1).normal(3.0, 1.0, 500)
    m1, se1, n1 = mean_se(vals)
    m2, se2 = mean_se_from_sums(vals.sum(), (vals * vals).sum(), vals.size)
    assert m1 == pytest.approx(m2)
    assert se1 == pytest.approx(se2)
    assert n1 == 500
    with pytest.raises(EmptySample):
        mean_se([])
    with pytest.raises(EmptySample):
        mean_se_from_sums(0.0, 0.0, 0)


def test_binomial_se_exact():
    p, se = binomial_se(25, 100)
    assert p == 0.25
    assert se == pytest.approx((0.25 * 0.75 / 100) ** 0.5)


def test_hypothesis_test_helpers():
    assert welch_p_greater(1.0, 0.1, 0.0, 0.1) < 1e-10
    assert welch_p_greater(0.0, 0.1, 0.0, 0.1) == pytest.approx(0.5)
    assert sign_test_p(0, 0) == 1.0
    assert sign_test_p(20, 0) == pytest.approx(0.5**20)
    assert sign_test_p(10, 10) > 0.5
    assert paired_p_greater(10.0, 10.0, 10) < 0.05
    assert paired_p_greater(0.0, 10.0, 10) == pytest.approx(0.5)
    assert proportion_p_less(5, 100, 50, 100) < 1e-8
    assert proportion_p_less(50, 100, 50, 100) == pytest.approx(0.5)
    assert chisquare_uniform_p([100, 100, 100]) == pytest.approx(1.0)
    assert chisquare_uniform_p([150, 100, 50]) < 1e-8
    assert two_sample_counts_p([10, 10], [10, 10]) > 0.9
    assert two_sample_counts_p([100, 10], [10, 100]) < 1e-8


def test_inverse_cdf_sample():
    probs = [0.2, 0.3, 0.5]
    idx = inverse_cdf_sample(probs, rng(4), 200_000)
    counts = np.bincount(idx, minlength=3)
    assert idx.min() >= 0 and idx.max() <= 2
    exp = np.array(probs) * idx.size
    chi2_p = two_sample_counts_p(counts, exp)
    assert chi2_p > 1e-6
    with pytest.raises(EmptySample):
        inverse_cdf_sample([], rng(4), 10)


# --------------------------------------------------------------- records


def test_jsonable_and_canonical_json():
    obj = {
        "f": Fraction(11, 4),
        "i": np.int64(3),
        "x": np.float64(0.5),
        "a": np.arange(3),
        "t": (1, 2),
    }
    plain = jsonable(obj)
    assert plain == {"f": "11/4", "i": 3, "x": 0.5, "a": [0, 1, 2], "t": [1, 2]}
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    with pytest.raises(ValueError):
        jsonable({"bad": float("nan")})
    with pytest.raises(ValueError):
        jsonable({"bad": float("inf")})


def test_make_cell_extra_fields():
    cell = make_cell(n=5, estimate=1.0, note="hello")
    assert cell["n"] == 5 and cell["m"] is None and cell["note"] == "hello"


def record_for_tests():
    cfg = build_config("survival", overrides={"replicas": 10})
    rec = new_record(cfg)
    rec.results["survival_prob"] = [
        make_cell(m=10, estimate=0.0909, se=0.001, oracle=1 / 11, replicas=10),
        make_cell(m=50, estimate=0.0196, se=0.001, oracle=1 / 51, replicas=10),
    ]
    rec.summaries["max_abs_z"] = 1.0
    return rec


def test_record_hash_stability_and_sensitivity():
    a = record_for_tests()
    b = record_for_tests()
    assert a.content_hash() == b.content_hash()
    # non-physical config does not move the hash
    c = record_for_tests()
    c.config["threads"] = 31
    assert c.content_hash() == a.content_hash()
    # data does
    d = record_for_tests()
    d.results["survival_prob"][0]["estimate"] = 0.5
    assert d.content_hash() != a.content_hash()
    # meta (timing) does not
    e = record_for_tests()
    e.meta["seconds"] = 123.0
    assert e.content_hash() == a.content_hash()


def test_record_round_trip(tmp_path):
    rec = record_for_tests()
    rec.meta["seconds"] = 1.5
    path = write_record(rec, tmp_path)
    assert path.name == "survival.json"
    back = record_from_json(path.read_text())
    assert back.content_hash() == rec.content_hash()
    data = json.loads(path.read_text())
    assert data["content_hash"] == rec.content_hash()


def test_write_tables_csv(tmp_path):
    rec = record_for_tests()
    paths = write_tables(rec, tmp_path, "csv")
    assert [p.name for p in paths] == ["survival-survival_prob.csv"]
    lines = paths[0].read_text().strip().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "survival" and first[3] == "10"
    # json variant: one file
    jpaths = write_tables(rec, tmp_path, "json")
    assert [p.name for p in jpaths] == ["survival-tables.json"]
    json.loads(jpaths[0].read_text())


# ---------------------------------------------------------------- engine


def test_stream_determinism():
    a = stream_for(123, 5).random(8)
    b = stream_for(123, 5).random(8)
    c = stream_for(123, 6).random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_batch_plan_partition():
    plan = batch_plan(10_000, 4096)
    assert plan == [(0, 4096), (1, 4096), (2, 1808)]
    assert batch_plan(5, 100) == [(0, 5)]
    assert batch_plan(0, 100) == []


@settings(max_examples=40, deadline=None)
@given(total=st.integers(0, 10_000), size=st.integers(1, 999))
def test_batch_plan_partition_property(total, size):
    plan = batch_plan(total, size)
    assert sum(c for _, c in plan) == total
    assert all(1 <= c <= size for _, c in plan)
    assert [i for i, _ in plan] == list(range(len(plan)))


def test_run_batches_order_and_threads():
    plan = batch_plan(1000, 64)

    def worker(index, count):
        return (index, count)

    for threads in (1, 3):
        out = run_batches(worker, plan, threads)
        assert out == plan


def test_run_batches_until_thread_equivalence():
    def worker(index, count):
        r = stream_for(99, index)
        return list(r.integers(0, 1000, size=count))

    def done(results):
        return sum(len(r) for r in results) >= 700

    one = run_batches_until(worker, 128, done, threads=1, max_batches=50)
    three = run_batches_until(worker, 128, done, threads=3, max_batches=50)
    four = run_batches_until(worker, 128, done, threads=4, max_batches=50)
    assert one == three == four
    assert sum(len(r) for r in one) >= 700


def test_run_batches_until_floor():
    def worker(index, count):
        return []

    with pytest.raises(AcceptanceFloor):
        run_batches_until(worker, 8, lambda rs: False, threads=2, max_batches=5)


def forest_fixture(seed=11, n=5, count=400, law_kind="geometric-half"):
    law = offspring_law(law_kind)
    return grow_flat(
        law, count, rng(seed), horizon=n, d=1, L=1,
        positions=True, signatures=True,
    )


def test_grow_flat_structure():
    n = 5
    f = forest_fixture(n=n)
    assert f.n_attempts == 400
    assert len(f.reps) == n + 1
    assert len(f.reps[0]) == 400
    for g in range(n + 1):
        reps = f.reps[g]
        assert np.all(np.diff(reps) >= 0)        # sorted by replica
        if g > 0:
            parents = f.parents[g]
            assert parents.min() >= 0
            assert parents.max() < len(f.reps[g - 1])
            # parent rows belong to the same replica
            assert np.array_equal(f.reps[g - 1][parents], reps)
            # displacements are admissible nonzero steps
            step = f.pos[g] - f.pos[g - 1][parents]
            norms = np.abs(step).max(axis=1)
            assert norms.min() >= 1 and norms.max() <= 1
    alive = np.flatnonzero(f.alive_after)
    with_rows = np.unique(f.reps[n])
    assert np.array_equal(alive, with_rows)


def test_grow_flat_requires_cap_for_extinction():
    with pytest.raises(ValueError):
        grow_flat(offspring_law("binary-half"), 4, rng(0), horizon=2,
                  to_extinction=True)


def test_descendant_counts_totals():
    n = 5
    f = forest_fixture(n=n)
    S = descendant_counts(f, n)
    assert np.array_equal(S[n], np.ones(len(f.reps[n])))
    final = np.bincount(f.reps[n], minlength=f.n_attempts)
    for m in range(n + 1):
        per_rep = np.bincount(f.reps[m], weights=S[m], minlength=f.n_attempts)
        assert np.array_equal(per_rep, final)
    # generation-0 row counts the whole surviving population
    A0 = pairs_by_ancestor_gen(f, S, 0)
    assert np.array_equal(A0, final.astype(np.float64) ** 2)


def test_pairs_by_ancestor_matches_brute_force():
    n = 4
    f = forest_fixture(seed=21, n=n, count=150)
    S = descendant_counts(f, n)
    for m in range(n + 1):
        A = pairs_by_ancestor_gen(f, S, m)
        brute = np.zeros(f.n_attempts)
        # count ordered final pairs whose lines agree at m and, where
        # possible, part strictly later
        final_reps = f.reps[n]
        for rep in np.unique(final_reps):
            rows = np.flatnonzero(final_reps == rep)
            for a in rows:
                for b in rows:
                    ga, gb = n, n
                    ia, ib = int(a), int(b)
                    anc_a, anc_b = [ia], [ib]
                    while ga > 0:
                        ia = int(f.parents[ga][ia])
                        ga -= 1
                        anc_a.append(ia)
                    while gb > 0:
                        ib = int(f.parents[gb][ib])
                        gb -= 1
                        anc_b.append(ib)
                    anc_a.reverse()
                    anc_b.reverse()
                    mrca = max(g for g in range(n + 1) if anc_a[g] == anc_b[g])
                    if mrca == m:
                        brute[rep] += 1
        # A[m] counts agreement at m minus agreement at m+1, which is
        # exactly "MRCA generation == m"
        got = A if m < len(S) else np.zeros(f.n_attempts)
        nxt = (
            pairs_by_ancestor_gen(f, S, m + 1)
            if m + 1 <= n
            else np.zeros(f.n_attempts)
        )
        assert np.array_equal(got - nxt, brute)


def test_pairs_by_signature_matches_brute_force():
    n = 4
    f = forest_fixture(seed=31, n=n, count=200, law_kind="binary-half")
    S = descendant_counts(f, n)
    acc = np.flatnonzero(f.alive_after)
    final_reps = f.reps[n]
    for T in (0, 1, 3):
        got = pairs_by_signature(f, S, T, acc)
        # brute force: positions along each line up to time T
        for k, rep in enumerate(acc):
            rows = np.flatnonzero(final_reps == rep)
            total = 0
            paths = []
            for r in rows:
                g, i = n, int(r)
                chain = []
                while True:
                    chain.append(tuple(f.pos[g][i]))
                    if g == 0:
                        break
                    i = int(f.parents[g][i])
                    g -= 1
                chain.reverse()
                paths.append(tuple(chain[: T + 1]))
            for pa in paths:
                for pb in paths:
                    if pa == pb:
                        total += 1
            assert got[k] == total


def test_walk_pairs_against_tree_walk():
    n = 5
    f = forest_fixture(seed=41, n=n, count=100)
    acc = np.flatnonzero(f.alive_after)
    ga, ia, totals = sample_vertices_flat(f, acc, 2, rng(3))
    met, tau = walk_pairs(f, ga[0], ia[0], ga[1], ia[1])
    for k in range(acc.size):
        g1, i1 = int(ga[0, k]), int(ia[0, k])
        g2, i2 = int(ga[1, k]), int(ia[1, k])
        chain1, chain2 = {}, {}
        g, i = g1, i1
        while True:
            chain1[g] = (i, tuple(f.pos[g][i]))
            if g == 0:
                break
            i = int(f.parents[g][i])
            g -= 1
        g, i = g2, i2
        while True:
            chain2[g] = (i, tuple(f.pos[g][i]))
            if g == 0:
                break
            i = int(f.parents[g][i])
            g -= 1
        shared = [g for g in chain1 if g in chain2]
        expect_mrca = max(g for g in shared if chain1[g][0] == chain2[g][0])
        diffs = [
            g for g in shared if chain1[g][1] != chain2[g][1]
        ]
        assert met[k] == expect_mrca
        if diffs:
            assert tau[k] == min(diffs)
        else:
            assert tau[k] == f.n_generations


def test_positions_at_matches_chain():
    n = 4
    f = forest_fixture(seed=51, n=n, count=80)
    acc = np.flatnonzero(f.alive_after)
    ga, ia, _ = sample_vertices_flat(f, acc, 1, rng(9))
    g0, i0 = ga[0], ia[0]
    target = np.minimum(g0, 2)
    pos = positions_at(f, g0, i0, target)
    for k in range(acc.size):
        g, i = int(g0[k]), int(i0[k])
        while g > int(target[k]):
            i = int(f.parents[g][i])
            g -= 1
        assert np.array_equal(pos[k], f.pos[g][i])


def test_sample_vertices_flat_uniform():
    n = 4
    f = forest_fixture(seed=61, n=n, count=50)
    acc = np.flatnonzero(f.alive_after)
    ga, ia, totals = sample_vertices_flat(f, acc, 4000, rng(13))
    # totals equal each replica's vertex count
    for k, rep in enumerate(acc):
        expect = sum(int((f.reps[g] == rep).sum()) for g in range(n + 1))
        assert totals[k] == expect
    # uniformity within one replica: chi-square over its vertices
    k = int(np.argmax(totals))
    rep = acc[k]
    draws = [(int(ga[j, k]), int(ia[j, k])) for j in range(4000)]
    labels = {}
    for g in range(n + 1):
        for i in np.flatnonzero(f.reps[g] == rep):
            labels[(g, int(i))] = len(labels)
    counts = np.zeros(len(labels))
    for d in draws:
        counts[labels[d]] += 1
    assert chisquare_uniform_p(counts) > 1e-6


def test_sample_generation_pairs_ranges():
    n = 3
    f = forest_fixture(seed=71, n=n, count=60)
    acc = np.flatnonzero(f.alive_after)
    a, b = sample_generation_pairs(f, n, acc, 16, rng(3))
    sizes = np.bincount(f.reps[n], minlength=f.n_attempts)[acc]
    starts = np.searchsorted(f.reps[n], acc)
    assert a.shape == (acc.size, 16)
    for k in range(acc.size):
        assert np.all(a[k] >= starts[k]) and np.all(a[k] < starts[k] + sizes[k])
        assert np.all(b[k] >= starts[k]) and np.all(b[k] < starts[k] + sizes[k])


def test_survival_moment_chain_matches_grow_flat():
    law = offspring_law("binary-half")
    table = survival_moment_chain(law, [1, 3], 50_000, rng(17))
    assert set(table) == {1, 3}
    for m, (alive, zsum, z2sum, z4sum) in table.items():
        assert 0 < alive < 50_000
        assert zsum >= alive
        assert z4sum >= z2sum >= zsum
    # agree in distribution with the flat grower at the same depth
    f = grow_flat(law, 50_000, rng(18), horizon=3)
    z3 = np.bincount(f.reps[3], minlength=f.n_attempts)
    alive3, zsum3 = table[3][0], table[3][1]
    p1, se1 = binomial_se(alive3, 50_000)
    p2, se2 = binomial_se(int((z3 > 0).sum()), 50_000)
    assert abs(p1 - p2) < 5 * (se1 + se2)
    m1 = zsum3 / 50_000
    m2 = z3.mean()
    assert abs(m1 - m2) < 0.05


def test_lifetime_chain_reservoir_vs_direct():
    # two independent estimates of the generation of a uniform vertex
    law = offspring_law("geometric-half")
    n, cap, count = 2, 60, 30_000
    samples, accepted, unfinished = lifetime_chain(law, n, cap, count, rng(19))
    # replicas still alive at the cap passed generation n, so they are
    # accepted but yield no sample
    assert samples.size == accepted - unfinished
    assert 0 < accepted <= count
    assert samples.min() >= 0 and samples.max() <= cap

    f = grow_flat(law, count, rng(20), horizon=n, to_extinction=True,
                  gen_cap=cap, budget=10**7)
    acc = np.flatnonzero(f.alive_after & ~f.unfinished)
    ga, ia, _ = sample_vertices_flat(f, acc, 1, rng(21))
    direct = ga[0]

    top = max(int(samples.max()), int(direct.max())) + 1
    h1 = np.bincount(samples, minlength=top)
    h2 = np.bincount(direct, minlength=top)
    assert two_sample_counts_p(h1, h2) > 1e-4


def test_lifetime_chain_determinism():
    law = offspring_law("poisson-one")
    a = lifetime_chain(law, 3, 40, 5000, rng(23))
    b = lifetime_chain(law, 3, 40, 5000, rng(23))
    assert np.array_equal(a[0], b[0]) and a[1:] == b[1:]


def test_grow_flat_budget_drops():
    law = offspring_law("geometric-half")
    f = grow_flat(law, 300, rng(25), horizon=30, budget=40)
    assert f.dropped.any()
    # dropped replicas never count as alive
    assert not (f.alive_after & f.dropped).any()


# ------------------------------------------------------------------- cli


def run_cli(tmp_path, args):
    out = tmp_path / "out"
    code = cli.main(args + ["--out", str(out)])
    return code, out


def test_cli_enumerate_lattice(tmp_path, capsys):
    code, out = run_cli(tmp_path, [
        "enumerate-lattice", "--seed", "3", "--set", "replicas=20000",
    ])
    assert code == 0
    captured = capsys.readouterr().out
    assert "content:    sha256:" in captured
    rec = json.loads((out / "enumerate-lattice.json").read_text())
    assert rec["experiment"] == "enumerate-lattice"
    csvs = sorted(p.name for p in out.glob("*.csv"))
    assert "enumerate-lattice-tree_counts.csv" in csvs


def test_cli_exit_codes(tmp_path, capsys):
    code = cli.main(["survival", "--law", "no-such-law"])
    assert code == 2
    capsys.readouterr()
    code = cli.main([
        "gst-check", "--set", "budget=1", "--set", "replicas=2",
        "--out", str(tmp_path / "x"),
    ])
    assert code == 4
    capsys.readouterr()


def test_cli_thread_hash_stability(tmp_path, capsys):
    hashes = []
    for threads in ("1", "3"):
        code, out = run_cli(tmp_path, [
            "survival", "--seed", "12", "--threads", threads,
            "--set", "replicas=30000", "--set", "m_grid=5,10",
            "--set", "moment_m_grid=1,5",
        ])
        assert code == 0
        rec = json.loads((out / "survival.json").read_text())
        hashes.append(rec["content_hash"])
        capsys.readouterr()
    assert hashes[0] == hashes[1]


def test_cli_plot_flag(tmp_path, capsys):
    code, out = run_cli(tmp_path, [
        "enumerate-lattice", "--plot", "--set", "replicas=5000",
    ])
    assert code == 0
    assert list(out.glob("*.svg"))
    capsys.readouterr()
