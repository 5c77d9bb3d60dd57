import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msgpass import oracle
from msgpass.factor_graph import (BandLimited, ExactlyKofN, FactorGraph, InversePotts, Local, dense_factor,
                                  evaluate_joint, kernel_factor)
from msgpass.minmax import (RangeLadder, bp_dec_solver, minmax_binary_search, minmax_value,
                            minsum_reduce, perturbed_bp_solver, py_reduce)
from msgpass.semiring import MIN_MAX, MIN_SUM, SUM_PRODUCT


def random_minmax_graph(rng, n=5, q=3):
    fs = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.5:
                fs.append(dense_factor((i, j), rng.integers(0, 6, (q, q)).astype(float)))
    fs.append(kernel_factor((0,), Local(rng.integers(0, 6, q).astype(float))))
    if n >= 2:
        fs.append(kernel_factor((0, 1), InversePotts(float(rng.integers(0, 6)))))
    return FactorGraph([q] * n, fs, MIN_MAX)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_py_reduce_solutions_are_the_y_level_set(seed):
    rng = np.random.default_rng(seed)
    g = random_minmax_graph(rng)
    ladder = RangeLadder.from_graph(g)
    y = ladder[int(rng.integers(len(ladder)))]
    red = py_reduce(g, y)
    for x in itertools.product(range(3), repeat=g.num_vars):
        assert (evaluate_joint(red, SUM_PRODUCT, x) > 0) == (minmax_value(g, x) <= y)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_minsum_reduction_keeps_the_argmin(seed):
    rng = np.random.default_rng(seed)
    g = random_minmax_graph(rng, n=4)
    best, _ = oracle.exact_argopt(g, MIN_MAX)
    h = minsum_reduce(g)
    _, args = oracle.exact_argopt(h, MIN_SUM)
    for x in args:
        assert minmax_value(g, x) == best


def test_rank_base_handles_ties():
    # three factors at the second-smallest value against one at the largest
    fs = [dense_factor((i,), np.array([1.0, 2.0])) for i in range(3)]
    fs.append(dense_factor((3,), np.array([1.0, 3.0])))
    fs.append(dense_factor((0, 1, 2, 3), np.where(np.indices((2, 2, 2, 2)).sum(0) == 3, 0.0, np.inf)))
    g = FactorGraph([2] * 4, fs, MIN_MAX)
    _, args = oracle.exact_argopt(minsum_reduce(g), MIN_SUM)
    assert all(minmax_value(g, x) == 2.0 for x in args)


def test_ladder():
    lad = RangeLadder([1.0, 3.0, 7.0])
    assert lad.index(3.0) == 1 and lad.index(5.0) == 1 and lad.index(0.5) == -1
    assert lad.rank(7.0) == 2
    with pytest.raises(KeyError):
        lad.rank(2.0)


def test_band_limited_reduction():
    g = FactorGraph([4, 4], [kernel_factor((0, 1), BandLimited(4, 2.0, 5.0))], MIN_MAX)
    red = py_reduce(g, 3.0)
    k = red.factors[0].kernel
    assert (k.fwd, k.bwd) == (1.0, 0.0)


@pytest.mark.parametrize("make", [perturbed_bp_solver, bp_dec_solver])
def test_binary_search_never_beats_the_optimum(make):
    rng = np.random.default_rng(11)
    for seed in range(6):
        A = rng.integers(1, 30, (7, 7)).astype(float)
        A = np.triu(A, 1) + np.triu(A, 1).T
        from msgpass.problems.csp import build_packing_binary
        g = build_packing_binary(A, 3)
        res = minmax_binary_search(g, make(), attempts=2, seed=seed)
        best, _ = oracle.exact_argopt(g, MIN_MAX)
        assert res.status == "solved"
        assert res.value >= best                       # witness values are real
        assert minmax_value(g, res.assignment) == res.value
        assert all(found in (True, False) for _, found in res.probes)


def test_infeasible_model():
    g = FactorGraph([2, 2], [kernel_factor((0, 1), ExactlyKofN(2)),
                             dense_factor((0,), np.array([1.0, np.inf]))], MIN_MAX)
    res = minmax_binary_search(g, perturbed_bp_solver(), attempts=1)
    assert res.status == "infeasible" and res.assignment is None
