import itertools

import numpy as np
import pytest

from msgpass import oracle
from msgpass.problems.clustering import (build_kcenter, build_kclustering, build_sparse_null,
                                         default_preference, full_null, kcenter_radius, kclustering_value,
                                         kmedians_objective, load_karate, modularity, solve_kcenter,
                                         solve_kclustering, solve_kmedians, solve_modularity)
from msgpass.minmax import minmax_value
from msgpass.semiring import MIN_MAX

from helpers import random_symmetric, two_cluster_points


def test_kmedians_finds_two_blobs():
    rng = np.random.default_rng(0)
    hits = 0
    for seed in range(8):
        A = default_preference(two_cluster_points(rng))
        res = solve_kmedians(A, seed=seed)
        best, _ = oracle.kmedians_optimum(A)
        assert res.objective >= best - 1e-9
        assert res.objective == pytest.approx(kmedians_objective(A, res.centers))
        hits += res.objective <= best + 1e-9
    assert hits >= 7


def test_kmedians_assignment_points_at_nearest_center():
    A = default_preference(two_cluster_points(np.random.default_rng(1)))
    res = solve_kmedians(A)
    for i, c in enumerate(res.assignment):
        assert c in res.centers
        assert A[i, c] == min(A[i, k] for k in res.centers) or i == c


def test_kclustering_model_values_match_native_objective():
    rng = np.random.default_rng(2)
    A = random_symmetric(6, rng)
    g = build_kclustering(A, 2)
    best, _ = oracle.exact_argopt(g, MIN_MAX)
    assert best == oracle.kclustering_optimum(A, 2)[0]


def test_kcenter_model_optimum():
    rng = np.random.default_rng(3)
    A = random_symmetric(4, rng)
    np.fill_diagonal(A, 0.0)
    g = build_kcenter(A, 2)
    best, _ = oracle.exact_argopt(g, MIN_MAX)
    assert best == oracle.kcenter_optimum(A, 2)[0]


def test_kclustering_and_kcenter_solvers_are_witness_certified():
    rng = np.random.default_rng(4)
    for seed in range(4):
        A = random_symmetric(8, rng)
        np.fill_diagonal(A, 0.0)
        kc = solve_kclustering(A, 3, seed=seed)
        assert kc.status == "solved" and len(set(kc.assignment)) <= 3
        assert kc.objective == kclustering_value(A, kc.assignment)
        assert kc.objective >= oracle.kclustering_optimum(A, 3)[0]
        ce = solve_kcenter(A, 3, seed=seed)
        assert ce.status == "solved" and len(ce.centers) <= 3
        assert ce.objective == kcenter_radius(A, ce.centers)
        assert ce.objective >= oracle.kcenter_optimum(A, 3)[0]


def test_kclustering_with_one_block_per_node():
    A = random_symmetric(4, np.random.default_rng(5))
    assert solve_kclustering(A, 4).objective == -np.inf


def test_karate_fixture():
    n, w = load_karate()
    assert n == 34 and len(w) == 78
    assert modularity(n, w, [0] * n) == pytest.approx(0.0)


def test_modularity_against_hand_value():
    # two triangles joined by one edge, split along the bridge
    w = {e: 1.0 for e in [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]}
    assert modularity(6, w, [0, 0, 0, 1, 1, 1]) == pytest.approx(5 / 14)
    assert oracle.modularity_optimum(6, w)[0] == pytest.approx(5 / 14)


def test_modularity_solver_on_small_graphs():
    w = {e: 1.0 for e in [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)]}
    res = solve_modularity(6, w)
    assert res.modularity == pytest.approx(modularity(6, w, res.labels))
    assert res.modularity == pytest.approx(5 / 14)


def test_null_models():
    n, w = load_karate()
    full = full_null(n, w)
    assert sum(full.values()) == pytest.approx(1.0)
    a = build_sparse_null(n, w, 5, seed=3)
    assert a == build_sparse_null(n, w, 5, seed=3)
    assert sum(a.values()) == pytest.approx(1.0)
    assert all(i < j for i, j in a)
