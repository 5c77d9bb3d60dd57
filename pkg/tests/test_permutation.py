import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msgpass import oracle
from msgpass.problems.permutation import (
    COUNTER_EXAMPLE, bottleneck, btsp_lower_bound, build_btsp, build_morphism, check_orbits,
    count_homomorphisms, detect_orbits, estimate_permanent, find_morphism, isomorphism_preferences,
    mcs_preferences, qap_graphs, qap_objective, qap_preferences, solve_alignment, solve_bipartite_matching,
    solve_btsp, solve_tsp, tour_length, validate_morphism, validate_tour, alignment_score,
    homomorphism_preferences, build_alignment)
from msgpass.minmax import minmax_value
from msgpass.semiring import MIN_MAX, MIN_SUM

from helpers import random_euclidean


# ------------------------------------------------------------------ matching

def test_matching_identity_dominant():
    A = np.full((3, 3), 0.1) + np.eye(3)
    assert solve_bipartite_matching(A).permutation == [0, 1, 2]


def test_matching_on_permutation_matrix():
    P = np.eye(4)[[2, 0, 3, 1]]
    res = solve_bipartite_matching(P)
    assert res.permutation == [2, 0, 3, 1]
    assert res.value == 1.0
    est = estimate_permanent(P)
    assert est is not None and est <= 1.0 + 1e-9


def test_matching_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(5):
        A = rng.uniform(0.1, 1.0, size=(5, 5))
        best = max(np.prod(A[np.arange(5), p]) for p in itertools.permutations(range(5)))
        assert solve_bipartite_matching(A).value == pytest.approx(best)


def test_permanent_oracle_agrees_with_enumeration():
    rng = np.random.default_rng(6)
    for n in range(1, 7):
        A = rng.uniform(0, 1, size=(n, n))
        assert oracle.exact_permanent(A) == pytest.approx(oracle.naive_permanent(A))
    assert oracle.exact_permanent(np.ones((3, 3))) == 6.0
    assert oracle.exact_permanent(np.eye(4)) == 1.0


def test_bethe_permanent_is_a_lower_bound():
    rng = np.random.default_rng(7)
    for _ in range(15):
        A = rng.uniform(0, 1, size=(4, 4))
        est = estimate_permanent(A)
        if est is not None:
            assert est <= oracle.exact_permanent(A) * (1 + 1e-9)


def test_bethe_permanent_2x2_is_max_product():
    # a 2x2 matching graph is a single loop; its Bethe value is max(ad, bc)
    A = np.array([[0.7, 0.2], [0.4, 0.9]])
    assert estimate_permanent(A) == pytest.approx(max(0.7 * 0.9, 0.2 * 0.4), rel=1e-6)


# ----------------------------------------------------------------------- TSP

def test_tsp_square_and_triangle():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    res = solve_tsp(D)
    assert validate_tour(4, res.tour)[0]
    assert res.length == pytest.approx(4.0)
    T = random_euclidean(3, np.random.default_rng(0))
    tri = solve_tsp(T)
    assert sorted(tri.tour) == [0, 1, 2]
    assert tri.length == pytest.approx(tour_length(T, [0, 1, 2]))


def test_held_karp_matches_brute_force():
    rng = np.random.default_rng(8)
    for n in (3, 5, 7):
        D = random_euclidean(n, rng)
        hk, tour = oracle.held_karp(D)
        assert hk == pytest.approx(oracle.brute_force_tsp(D)[0])
        assert tour_length(D, tour) == pytest.approx(hk)


def test_tsp_near_optimal_and_audited():
    rng = np.random.default_rng(9)
    for _ in range(3):
        D = random_euclidean(8, rng)
        res = solve_tsp(D)
        assert validate_tour(8, res.tour)[0]
        assert res.length == pytest.approx(tour_length(D, res.tour))
        assert res.length >= oracle.held_karp(D)[0] - 1e-9
        # every subtour factor was violated by the round that added it
        assert len(res.audit) == len(res.subtours)
        for crossing in res.audit:
            assert crossing == 0


# ---------------------------------------------------------------- bottleneck

def test_btsp_lower_bound_and_value():
    rng = np.random.default_rng(10)
    for seed in range(3):
        D = random_euclidean(6, rng)
        res = solve_btsp(D, seed=seed)
        assert res.status == "solved"
        assert validate_tour(6, res.tour)[0]
        assert res.value == bottleneck(D, res.tour)
        assert res.value >= res.lower_bound
        assert res.value >= oracle.brute_force_tsp(D, bottleneck=True)[0]


def test_btsp_model_matches_bottleneck_of_tours():
    rng = np.random.default_rng(11)
    D = random_euclidean(5, rng)
    g = build_btsp(D)
    for perm in itertools.permutations(range(5)):
        x = np.empty(5, dtype=int)
        x[list(perm)] = np.arange(5)      # node perm[t] visited at time t
        assert minmax_value(g, x) == bottleneck(D, list(perm))
    best, _ = oracle.exact_argopt(g, MIN_MAX, cap=10**5)
    assert best == oracle.brute_force_tsp(D, bottleneck=True)[0]


def test_btsp_lower_bound_is_valid():
    rng = np.random.default_rng(12)
    for _ in range(10):
        D = random_euclidean(6, rng)
        assert btsp_lower_bound(D) <= oracle.brute_force_tsp(D, bottleneck=True)[0]


# ---------------------------------------------------------------- morphisms

C5 = (5, [(i, (i + 1) % 5) for i in range(5)])
P3 = (3, [(0, 1), (1, 2)])
K3 = (3, [(0, 1), (1, 2), (0, 2)])


def test_morphism_validator():
    assert validate_morphism(C5, K3, "homo", [0, 1, 0, 1, 2])[0]
    assert not validate_morphism(C5, K3, "homo", [0, 1, 0, 1, 0])[0]
    assert validate_morphism(P3, K3, "mono", [0, 1, 2])[0]
    assert not validate_morphism(P3, K3, "iso", [0, 1, 2])[0]


def test_homomorphism_count_exact_on_trees():
    # P3 -> K3: 3 * 2 * 2 = 12
    est = count_homomorphisms(P3, K3)
    assert est.converged and est.estimate == pytest.approx(12.0, rel=1e-6)
    assert oracle.homomorphism_count(*P3, *K3) == 12


def test_find_morphism_certified():
    for mode in ("homo", "mono", "iso"):
        target = K3 if mode == "homo" else (5, [(i, (i + 2) % 5) for i in range(5)])
        x = find_morphism(C5, target, mode, seed=1)
        assert x is not None and validate_morphism(C5, target, mode, x)[0]
    assert find_morphism(K3, P3, "homo", method="bp-dec", seed=0) is None


def test_counter_example_counts_and_orbits():
    n, edges = COUNTER_EXAMPLE
    assert oracle.homomorphism_count(n, edges, n, edges) == 78
    assert oracle.automorphism_orbits(n, edges) == [[0, 6], [1, 2], [3], [4, 5]]
    chk = check_orbits(COUNTER_EXAMPLE, "exact")
    assert chk.agree and chk.predicted == [[0, 6], [1, 2], [3], [4, 5]]


def test_counter_example_needs_columns():
    from msgpass.problems.permutation import endomorphism_marginals
    P = endomorphism_marginals(COUNTER_EXAMPLE, "exact")
    # node 3 (0-based) shares its row with 0 and 6 but not its column
    assert np.abs(P[3] - P[0]).max() < 1e-9
    assert np.abs(P[:, 3] - P[:, 0]).max() > 1e-3


def test_vertex_transitive_single_orbit():
    assert detect_orbits(C5, "exact") == [[0, 1, 2, 3, 4]]
    assert detect_orbits(C5, "bp") == [[0, 1, 2, 3, 4]]


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2**15 - 1))
def test_automorphism_pruning_agrees(n, bits):
    pairs = list(itertools.combinations(range(n), 2))
    edges = [p for k, p in enumerate(pairs) if bits >> k & 1]
    assert oracle.automorphisms(n, edges, prune=True) == oracle.automorphisms(n, edges, prune=False)


# ---------------------------------------------------------------- alignment

def test_alignment_qap_matches_brute_force():
    rng = np.random.default_rng(13)
    for _ in range(3):
        F = rng.integers(1, 6, size=(3, 3)).astype(float)
        L = rng.integers(1, 6, size=(3, 3)).astype(float)
        F, L = F + F.T, L + L.T
        np.fill_diagonal(F, 0)
        np.fill_diagonal(L, 0)
        best = max(qap_objective(F, L, p) for p in itertools.permutations(range(3)))
        G, G2 = qap_graphs(F, L)
        res = solve_alignment(G, G2, qap_preferences(F, L))
        assert res.status == "solved"
        # edge scores count each unordered pair once; the objective counts both orders
        assert 2 * res.score == pytest.approx(best)
        assert qap_objective(F, L, res.mapping) == pytest.approx(best)


def test_alignment_identical_graphs_with_iso_preferences():
    G = (5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)])
    res = solve_alignment(G, G, isomorphism_preferences())
    assert res.status == "solved"
    assert res.score == len(G[1])
    assert validate_morphism(G, G, "iso", res.mapping)[0]


def test_alignment_infeasible_when_nothing_to_map():
    res = solve_alignment((2, [(0, 1)]), (0, []), homomorphism_preferences())
    assert res.status == "infeasible"


def test_alignment_score_matches_model():
    G = (4, [(0, 1), (1, 2), (2, 3)])
    G2 = (3, [(0, 1), (1, 2)])
    prefs = mcs_preferences()
    table = oracle.joint_table(build_alignment(G, G2, prefs), MIN_SUM)
    for x in itertools.product(range(4), repeat=4):
        mapping = [None if v == 3 else v for v in x]
        assert -table[x] == alignment_score(G, G2, prefs, mapping)
