import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msgpass.factor_graph import AtLeastKofN, ExactlyKofN, FactorGraph, kernel_factor, dense_factor
from msgpass.kernels import kofn_minsum_msg, kofn_sumproduct_msg
from msgpass.semiring import SUM_PRODUCT
from msgpass.stochastic import gamma_ramp, perturbed_bp_run
from msgpass.problems.csp import build_coloring, build_sat, generate_random_kcol, generate_random_ksat

from helpers import kernel_cases, kernel_matches_dense


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_kernel_messages_equal_dense_tables(seed):
    rng = np.random.default_rng(seed)
    for s, f, doms, inc in kernel_cases(rng, 3):
        assert kernel_matches_dense(s, f, doms, inc), (s.name, f.kernel, inc)


def test_kofn_closed_forms():
    # exactly one of three: target on -> both others off (weight 1); off -> one of two on (weight 2)
    assert kofn_sumproduct_msg("exactly", 1, [1.0, 1.0]) == pytest.approx(0.5)
    assert kofn_sumproduct_msg("at_least", 1, [np.inf]) == pytest.approx(1.0)
    # exactly two of three: on -> cheapest single other (-0.1); off -> both others (0.2)
    assert kofn_minsum_msg("exactly", 2, [0.3, -0.1]) == pytest.approx(-0.3)
    assert kofn_minsum_msg("at_most", 0, [0.5]) == np.inf


@settings(max_examples=100, deadline=None)
@given(mode=st.sampled_from(["exactly", "at_least", "at_most"]), K=st.integers(0, 4),
       m=st.lists(st.integers(-5, 5).map(float), max_size=5))
def test_kofn_minsum_brute_force(mode, K, m):
    import itertools
    ok = {"exactly": lambda c: c == K, "at_least": lambda c: c >= K, "at_most": lambda c: c <= K}[mode]
    best = [np.inf, np.inf]
    for x in (0, 1):
        for bits in itertools.product((0, 1), repeat=len(m)):
            if ok(x + sum(bits)):
                best[x] = min(best[x], sum(b * v for b, v in zip(bits, m)))
    got = kofn_minsum_msg(mode, K, m)
    if best == [np.inf, np.inf]:
        assert np.isnan(got)
    elif np.isinf(best[0]) or np.isinf(best[1]):
        assert got == (np.inf if np.isinf(best[1]) else -np.inf)
    else:
        assert got == pytest.approx(best[1] - best[0])


@pytest.mark.parametrize("make", ["sat", "col"])
def test_compiled_and_python_perturbed_runs_agree(make):
    """Same pre-drawn randomness -> same status, assignment and sweep count on both paths."""
    for seed in range(4):
        if make == "sat":
            g = build_sat(generate_random_ksat(40, 3.5, 3, seed))
        else:
            g = build_coloring(generate_random_kcol(30, 3.5, 3, seed), 3)
        gam = gamma_ramp(40)
        a = perturbed_bp_run(g, gam, np.random.default_rng(seed), backend="numba")
        b = perturbed_bp_run(g, gam, np.random.default_rng(seed), backend="python")
        assert a[0] == b[0] and a[2] == b[2]
        assert a[1] == b[1]


def test_compiled_path_handles_count_kernels():
    fs = [kernel_factor((0, 1, 2, 3), ExactlyKofN(2)), kernel_factor((2, 3, 4), AtLeastKofN(2)),
          dense_factor((0, 4), np.array([[0.0, 1.0], [1.0, 0.0]]))]
    g = FactorGraph([2] * 5, fs, SUM_PRODUCT)
    for seed in range(3):
        gam = gamma_ramp(30)
        a = perturbed_bp_run(g, gam, np.random.default_rng(seed), backend="numba")
        b = perturbed_bp_run(g, gam, np.random.default_rng(seed), backend="python")
        assert a == b
