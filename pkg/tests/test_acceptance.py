"""Acceptance criteria, one test per criterion.

Each test states its tolerance inline and fails loudly when missed; run
with -v for one pass/fail line per criterion.  The expensive Monte Carlo
records are produced once per module and shared between criteria.
"""

import json
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from gwskel.harness import cli
from gwskel.harness.config import build_config
from gwskel.harness.experiments import (
    run_branch_boundary,
    run_enumerate_lattice,
    run_gst_check,
    run_lifetime,
    run_pair_mrca,
    run_skeleton_density,
    run_survival,
)
from gwskel.limitlaw import exact_survival_geometric, pair_mrca_expectation
from gwskel.skeleton import (
    build_shape,
    branch_matrix_from_entries,
    count_shapes,
    enumerate_shapes,
    perturbation_radius,
    shape_distance,
    tree_metric,
)
from gwskel.treegen import offspring_law

from test_limitlaw import _binary_trees, _pairs_with_mrca_at
from test_skeleton import matrix_of, random_shape_with_depths

LAWS = ("geometric-half", "poisson-one", "binary-half")
GAMMA = {"geometric-half": 2.0, "poisson-one": 1.0, "binary-half": 1.0}


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def cell_by(cells, **keys):
    hits = [c for c in cells if all(c.get(k) == v for k, v in keys.items())]
    assert len(hits) == 1, f"no unique cell for {keys}"
    return hits[0]


@pytest.fixture(scope="module")
def survival_records():
    out = {}
    for law in LAWS:
        t0 = time.perf_counter()
        cfg = build_config("survival", overrides={"law": law})
        out[law] = (run_survival(cfg), time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def pair_mrca_records():
    return {
        law: run_pair_mrca(build_config("pair-mrca", overrides={"law": law}))
        for law in LAWS
    }


@pytest.fixture(scope="module")
def window_record():
    cfg = build_config(
        "pair-mrca",
        overrides={
            "law": "binary-half",
            "window_n_grid": (200,),
            "replicas": 1_500_000,
        },
    )
    return run_pair_mrca(cfg)


@pytest.fixture(scope="module")
def lifetime_record():
    t0 = time.perf_counter()
    record = run_lifetime(build_config("lifetime"))
    return record, time.perf_counter() - t0


@pytest.fixture(scope="module")
def branch_boundary_record():
    return run_branch_boundary(build_config("branch-boundary"))


@pytest.fixture(scope="module")
def skeleton_density_record():
    return run_skeleton_density(build_config("skeleton-density"))


def test_criterion_01_exact_geometric_survival(survival_records):
    record, elapsed = survival_records["geometric-half"]
    assert elapsed < 120.0, f"survival run took {elapsed:.1f} s"
    cells = record.results["survival_prob"]
    report = []
    for m in (10, 50, 100):
        cell = cell_by(cells, m=m)
        target = float(exact_survival_geometric(m))
        assert cell["replicas"] == 1_000_000
        gap = abs(cell["estimate"] - target)
        report.append(f"m={m}: {cell['estimate']:.6f} vs {target:.6f} "
                      f"({gap / cell['se']:.2f} se)")
        assert gap < 4 * cell["se"], report[-1]
    print("; ".join(report))


def test_criterion_02_kolmogorov_scaling(survival_records):
    report = []
    for law in LAWS:
        record, _ = survival_records[law]
        cell = cell_by(record.results["survival_mscaled"], m=200)
        target = 2.0 / GAMMA[law]
        rel = abs(cell["estimate"] - target) / target
        report.append(f"{law}: m*p = {cell['estimate']:.4f} vs {target} "
                      f"(rel {rel:.3f})")
        assert cell["replicas"] == 1_000_000
        assert rel <= 0.10, report[-1]
    print("; ".join(report))


def test_criterion_03_conditioned_moments(survival_records):
    report = []
    for law in LAWS:
        record, _ = survival_records[law]
        gamma = GAMMA[law]
        for m in (1, 5, 20):
            mean_cell = cell_by(record.results["generation_mean"], m=m)
            assert mean_cell["replicas"] >= 100_000
            gap1 = abs(mean_cell["estimate"] - 1.0)
            assert gap1 < 4 * mean_cell["se"], (law, m, "first moment")
            second_cell = cell_by(record.results["generation_second"], m=m)
            target = 1.0 + gamma * m
            gap2 = abs(second_cell["estimate"] - target)
            assert gap2 < 4 * second_cell["se"], (law, m, "second moment")
        report.append(f"{law}: moments ok at m in (1, 5, 20)")
    print("; ".join(report))


def test_criterion_04_pair_ancestry(pair_mrca_records, window_record):
    # exhaustive: zero-or-two offspring to depth three, exact rationals
    outcomes = _binary_trees(3)
    assert sum(p for p, _ in outcomes) == 1
    law = offspring_law("binary-half")
    for m in (0, 1, 2):
        exact = sum(p * _pairs_with_mrca_at(t, m, 3) for p, t in outcomes)
        assert exact == 1
        assert exact == pair_mrca_expectation(law, m, 3, 3)

    # Monte Carlo at the same depth, every law
    report = []
    for kind in LAWS:
        cells = pair_mrca_records[kind].results["pair_mrca"]
        for m in (0, 1, 2):
            cell = cell_by(cells, m=m)
            gap = abs(cell["estimate"] - GAMMA[kind])
            assert gap < 4 * cell["se"], (kind, m, cell)
        report.append(f"{kind}: mrca counts within 4 se")

    # aggregated branch-time window at n = 200
    cell = cell_by(window_record.results["branch_window"], n=200)
    assert cell["oracle"] == pytest.approx(0.4)
    rel = abs(cell["estimate"] - 0.4) / 0.4
    report.append(f"window mass {cell['estimate']:.4f} vs 0.4 (rel {rel:.3f})")
    assert rel <= 0.10, report[-1]
    print("; ".join(report))


def test_criterion_05_rescaling_identity():
    record = run_gst_check(build_config("gst-check", overrides={"replicas": 1000}))
    assert record.summaries["families"] == 1000
    assert record.summaries["all_exact"] is True
    for n in (1, 2, 7, 100):
        cell = cell_by(record.results["identity_gap"], n=n)
        assert cell["estimate"] == 0.0, f"nonzero gap at n={n}"
    print("identity gap 0.0 across 1000 families, n in (1, 2, 7, 100)")


def test_criterion_06_metric_equals_shape_distance():
    rs = rng(606)
    trials = 1000
    for _ in range(trials):
        K = int(rs.integers(2, 7))
        shape, depth, _ = random_shape_with_depths(rs, K)
        mat = matrix_of(shape, depth)
        built, lengths = build_shape(mat)
        assert built == shape
        reps = {v: built.min_leaf(v) for v in range(built.n_vertices)}
        for a, b in product(range(built.n_vertices), repeat=2):
            lhs = tree_metric(mat, (reps[a], depth[a]), (reps[b], depth[b]))
            rhs = shape_distance(built, lengths, a, b)
            assert lhs == rhs, (a, b, lhs, rhs)
    print(f"{trials} matrices: matrix metric equals shape path metric exactly")


def test_criterion_07_perturbation_stability():
    rs = rng(707)
    trials = 0
    while trials < 10_000:
        K = int(rs.integers(2, 6))
        shape, depth, _ = random_shape_with_depths(rs, K)
        mat = matrix_of(shape, depth)
        built, _ = build_shape(mat)
        delta = perturbation_radius(mat)
        values = sorted({v for row in mat.tau for v in row})
        for _ in range(5):
            shift = {
                v: Fraction(int(rs.integers(-99, 100)), 100) * delta
                for v in values
            }
            moved = branch_matrix_from_entries(
                [[x + shift[x] for x in row] for row in mat.tau]
            )
            again, _ = build_shape(moved)
            assert again == built, "shape moved inside the stability radius"
            trials += 1
    print(f"{trials} perturbation trials, labelled shape never changed")


def test_criterion_08_shape_counts_fast():
    t0 = time.perf_counter()
    expected = {2: 1, 3: 3, 4: 15, 5: 105}
    for K, count in expected.items():
        assert count_shapes(K) == count
        shapes = list(enumerate_shapes(K))
        assert len(shapes) == count
        assert len(set(shapes)) == count
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"shape enumeration took {elapsed:.2f} s"
    print(f"counts 1, 3, 15, 105 reproduced in {elapsed * 1000:.0f} ms")


def test_criterion_09_lifetime_tail(lifetime_record):
    record, elapsed = lifetime_record
    assert elapsed < 600.0, f"lifetime run took {elapsed:.1f} s"
    per_n = record.summaries["per_n"][200]
    assert per_n["finished"] >= 20_000
    report = [f"accepted {per_n['finished']} in {elapsed:.1f} s"]
    for t in (1.5, 2.0, 3.0):
        cell = cell_by(record.results["lifetime_tail"], m=round(t * 200))
        target = 1.0 / (2.0 * t)
        rel = abs(cell["estimate"] - target) / target
        report.append(f"t={t}: {cell['estimate']:.4f} vs {target:.4f} "
                      f"(rel {rel:.3f})")
        assert rel <= 0.15, report[-1]
    print("; ".join(report))


def test_criterion_10_boundary_statistics(branch_boundary_record):
    record = branch_boundary_record
    s = record.summaries
    assert s["delta_monotone_all"] is True
    assert s["epsilon_monotone_all"] is True
    report = []
    for d in ("0.05", "0.2"):
        p = s["n_trend"][d]
        report.append(f"delta={d}: n-trend p={p:.2e}")
        assert p < 0.01, report[-1]
    for n, per_n in s["per_n"].items():
        for d, trend in per_n["epsilon_trend"].items():
            p = trend["paired_p"]
            report.append(f"n={n} delta={d}: eps-trend p={p:.2e}")
            assert p < 0.01, report[-1]
    print("; ".join(report))


def test_criterion_11_skeleton_density(skeleton_density_record):
    record = skeleton_density_record
    per_n = record.summaries["per_n"][100]
    assert per_n["trees"] >= 1000
    assert per_n["nested_monotone_all"] is True
    low = cell_by(record.results["graph_distortion"], n=100, K=4)
    high = cell_by(record.results["graph_distortion"], n=100, K=64)
    assert high["estimate"] < low["estimate"], (low, high)
    p = per_n["sign_test"]["p_value"]
    assert p < 0.01, f"sign test p={p}"
    print(
        f"median max graph distance / n: K=4 {low['estimate']:.3f} -> "
        f"K=64 {high['estimate']:.3f}; sign test p={p:.2e}"
    )


def test_criterion_12_lattice_enumeration():
    record = run_enumerate_lattice(build_config("enumerate-lattice"))
    for k in (0, 1, 2):
        cell = cell_by(record.results["tree_counts"], m=k)
        assert cell["estimate"] == k + 1
        assert cell["oracle"] == k + 1
    part = record.results["partition"][0]
    assert part["exact"] == "11/4"
    assert part["estimate"] == 2.75
    worst = record.summaries["vertex_law_max_z"]
    assert worst <= 4.0, f"vertex law z-score {worst:.2f}"
    print(f"counts 1, 2, 3; partition 11/4; vertex law max |z| = {worst:.2f}")


def test_criterion_13_thread_count_determinism(tmp_path):
    hashes = {}
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        args = [
            "shapes", "--threads", threads, "--out", str(out),
            "--set", "replicas=150", "--set", "n_grid=50",
        ]
        assert cli.main(args) == 0
        hashes[threads] = json.loads(
            (out / "shapes.json").read_text())["content_hash"]
    assert hashes["1"] == hashes["3"]

    for threads in ("1", "4"):
        out = tmp_path / f"s{threads}"
        args = [
            "survival", "--threads", threads, "--out", str(out),
            "--set", "replicas=50000",
        ]
        assert cli.main(args) == 0
        hashes[f"s{threads}"] = json.loads(
            (out / "survival.json").read_text())["content_hash"]
    assert hashes["s1"] == hashes["s4"]
    print(f"shapes and survival hashes agree across thread counts: "
          f"{hashes['1'][:12]}..., {hashes['s1'][:12]}...")
