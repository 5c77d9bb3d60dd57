import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msgpass import oracle
from msgpass.factor_graph import evaluate_joint
from msgpass.minmax import minmax_value
from msgpass.problems.csp import (CnfInstance, GraphInstance, build_clique_cover, build_coloring,
                                  build_dominating_set, build_max_independent_set, build_min_set_cover,
                                  build_min_vertex_cover, build_packing_binary, build_packing_categorical,
                                  build_sat, build_set_cover, build_sphere_packing_hamming, chromatic_number,
                                  decode_code, decode_leaders, example_sat, generate_random_kcol,
                                  generate_random_ksat, set_cover_example, validate_clique_cover,
                                  validate_code, validate_coloring, validate_independent_set,
                                  validate_packing, validate_sat, validate_set_cover,
                                  validate_vertex_cover)
from msgpass.semiring import MIN_MAX, MIN_SUM, SUM_PRODUCT
from msgpass.stochastic import RestartPolicy, perturbed_bp_solve


def small_graph(seed, n=5, p=0.5, directed=False):
    rng = np.random.default_rng(seed)
    pairs = itertools.permutations(range(n), 2) if directed else itertools.combinations(range(n), 2)
    return GraphInstance(n, [e for e in pairs if rng.random() < p], directed=directed)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_sat_solutions_are_exactly_the_valid_assignments(seed):
    cnf = generate_random_ksat(6, 3.0, 3, seed)
    sols = set(oracle.enumerate_solutions(build_sat(cnf)))
    for x in itertools.product((0, 1), repeat=6):
        assert (x in sols) == validate_sat(cnf, x)[0]


def test_toy_sat_solutions():
    sols = oracle.enumerate_solutions(build_sat(example_sat()))
    assert sorted(sols) == [(0, 0, 0), (0, 0, 1), (1, 1, 1)]


def test_cnf_validation():
    with pytest.raises(ValueError):
        CnfInstance(2, [[1, 3]])
    with pytest.raises(ValueError):
        CnfInstance(2, [[1, -1]])
    with pytest.raises(ValueError):
        CnfInstance(2, [[]])


def test_generators_are_deterministic():
    assert generate_random_ksat(50, 4.2, 3, 7).clauses == generate_random_ksat(50, 4.2, 3, 7).clauses
    a = generate_random_kcol(50, 4.0, 3, 7)
    assert a.edges == generate_random_kcol(50, 4.0, 3, 7).edges
    assert len(a.edges) == 100 and len(set(map(frozenset, a.edges))) == 100
    assert len(generate_random_ksat(100, 4.2, 3, 0).clauses) == 420


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), K=st.integers(1, 3))
def test_coloring_and_clique_cover_match_validators(seed, K):
    graph = small_graph(seed)
    col = set(oracle.enumerate_solutions(build_coloring(graph, K)))
    cc = set(oracle.enumerate_solutions(build_clique_cover(graph, K)))
    for x in itertools.product(range(K), repeat=graph.n):
        assert (x in col) == validate_coloring(graph, K, x)[0]
        assert (x in cc) == validate_clique_cover(graph, K, x)[0]


def test_clamp_first_breaks_symmetry():
    graph = small_graph(3)
    a = oracle.count_solutions(build_coloring(graph, 3))
    b = oracle.count_solutions(build_coloring(graph, 3, clamp_first=True))
    assert a == 3 * b


def test_chromatic_number():
    def solver(g):
        r = perturbed_bp_solve(g, seed=0, restart=RestartPolicy(max_T=640))
        return r.assignment if r.solved else None
    c5 = GraphInstance(5, [(i, (i + 1) % 5) for i in range(5)])
    k, x = chromatic_number(c5, solver)
    assert k == 3 and validate_coloring(c5, 3, x)[0]
    k4 = GraphInstance(4, list(itertools.combinations(range(4), 2)))
    assert chromatic_number(k4, solver)[0] == 4


def test_set_cover_example():
    graph, D = set_cover_example()
    assert validate_set_cover(graph, 2, D)[0]
    g = build_set_cover(graph, 2)
    covers = {tuple(decode_leaders(g, x)) for x in oracle.enumerate_solutions(g)}
    assert tuple(D) in covers
    for c in covers:
        assert validate_set_cover(graph, 2, c)[0]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), K=st.integers(1, 3), directed=st.booleans())
def test_set_cover_leaders_are_exactly_the_covers(seed, K, directed):
    graph = small_graph(seed, n=4, p=0.4, directed=directed)
    g = build_set_cover(graph, K) if directed else build_dominating_set(graph, K)
    covers = {tuple(decode_leaders(g, x)) for x in oracle.enumerate_solutions(g)}
    adj = graph.adjacency() if directed else graph.adjacency() | graph.adjacency().T
    undirected = GraphInstance(graph.n, graph.edges, directed=False)
    check = graph if directed else undirected
    for r in range(graph.n + 1):
        for D in itertools.combinations(range(graph.n), r):
            assert (D in covers) == validate_set_cover(check, K, D)[0]


def test_min_set_cover_optimum():
    graph, D = set_cover_example()
    best, args = oracle.exact_argopt(build_min_set_cover(graph), MIN_SUM)
    assert best == 2.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_independent_set_and_vertex_cover_optima(seed):
    graph = small_graph(seed, n=6)
    g_is = build_max_independent_set(graph)
    g_vc = build_min_vertex_cover(graph)
    best_is, args = oracle.exact_argopt(g_is, MIN_SUM)
    best_vc, _ = oracle.exact_argopt(g_vc, MIN_SUM)
    brute = max(len(S) for r in range(7) for S in itertools.combinations(range(6), r)
                if validate_independent_set(graph, S)[0])
    assert -best_is == brute
    assert best_vc == 6 - brute                    # complement of a maximum independent set
    S = [i for i, v in enumerate(args[0]) if v]
    assert validate_independent_set(graph, S)[0]
    assert not validate_vertex_cover(graph, [])[0] or not graph.edges


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_packing_models_agree_with_exhaustive_optimum(seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(1, 20, (6, 6)).astype(float)
    A = np.triu(A, 1) + np.triu(A, 1).T
    opt, sub = oracle.packing_optimum(A, 3)
    b, args = oracle.exact_argopt(build_packing_binary(A, 3), MIN_MAX)
    c, _ = oracle.exact_argopt(build_packing_categorical(A, 3), MIN_MAX)
    assert b == opt == c
    chosen = [i for i, v in enumerate(args[0]) if v]
    ok, dmin = validate_packing(A, 3, chosen)
    assert ok and -dmin == opt


@pytest.mark.parametrize("q,n,K,y", [(2, 3, 2, 2), (2, 3, 3, 2), (3, 2, 2, 2)])
def test_hamming_model_counts_codes(q, n, K, y):
    g = build_sphere_packing_hamming(q, n, K, y)
    assert oracle.count_solutions(g) == oracle.hamming_code_count(q, n, K, y)
    for x in oracle.enumerate_solutions(g)[:20]:
        assert validate_code(decode_code(x, n, K), y)[0]


def test_validate_code():
    assert validate_code([[0, 0, 0], [1, 1, 1]], 3) == (True, 3)
    assert validate_code([[0, 0, 0], [1, 0, 0]], 2) == (False, 1)
