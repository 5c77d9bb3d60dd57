import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msgpass import oracle
from msgpass.factor_graph import (AtLeastKofN, AtMostKofN, BandLimited, Consistency, ExactlyKofN,
                                  FactorGraph, InversePotts, KERNELS, Leader, Local, Potts, Subtour,
                                  TspDegree, EdgeMap, NonEdgeMap, CliqueTriangle, clamp, dense_factor,
                                  dump, evaluate_joint, kernel_factor, load_dump, materialize_kernel)
from msgpass.semiring import MIN_MAX, MIN_SUM, SUM_PRODUCT

from helpers import random_values


def _mixed_graph(rng, s=SUM_PRODUCT):
    """Six binary variables with dense and count factors (some with a big scope)."""
    fs = [dense_factor((0, 1), random_values(s, (2, 2), rng)),
          dense_factor((2,), random_values(s, (2,), rng)),
          kernel_factor((0, 2, 3, 4), AtMostKofN(2)),
          kernel_factor((1, 3, 4, 5), ExactlyKofN(2)),
          kernel_factor((5, 0, 1, 2, 3), Consistency()),
          kernel_factor((2, 5), Potts())]
    return FactorGraph([2] * 6, fs, s)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), data=st.data())
def test_clamp_matches_joint_slice(seed, data):
    rng = np.random.default_rng(seed)
    g = _mixed_graph(rng)
    vars_ = data.draw(st.lists(st.integers(0, 5), unique=True, max_size=5))
    ev = {v: data.draw(st.integers(0, 1)) for v in vars_}
    red = clamp(g, ev)
    full = oracle.joint_table(g, SUM_PRODUCT)
    index = tuple(ev.get(i, slice(None)) for i in range(6))
    expect = full[index]
    got = oracle.joint_table(red.graph, SUM_PRODUCT)
    assert np.allclose(got, expect)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), data=st.data())
def test_clamp_composition(seed, data):
    rng = np.random.default_rng(seed)
    g = _mixed_graph(rng)
    a = data.draw(st.lists(st.integers(0, 5), unique=True, min_size=1, max_size=3))
    ev1 = {v: data.draw(st.integers(0, 1)) for v in a}
    r1 = clamp(g, ev1)
    left = r1.index_map
    b = data.draw(st.lists(st.sampled_from(range(len(left))), unique=True, max_size=len(left))) if left else []
    ev2 = {v: data.draw(st.integers(0, 1)) for v in b}
    r2 = clamp(r1.graph, ev2)
    both = dict(ev1)
    both.update({left[v]: x for v, x in ev2.items()})
    r12 = clamp(g, both)
    assert [left[i] for i in r2.index_map] == r12.index_map
    assert np.allclose(oracle.joint_table(r2.graph, SUM_PRODUCT), oracle.joint_table(r12.graph, SUM_PRODUCT))


def test_clamp_lift_roundtrip():
    g = _mixed_graph(np.random.default_rng(0))
    red = clamp(g, {1: 1, 4: 0})
    assert red.lift([0, 1, 1, 0]) == [0, 1, 1, 1, 0, 0]


def test_clamp_rejects_bad_evidence():
    g = _mixed_graph(np.random.default_rng(0))
    with pytest.raises(ValueError):
        clamp(g, {0: 2})


def test_evaluate_joint_checks_assignment():
    g = _mixed_graph(np.random.default_rng(0))
    with pytest.raises(ValueError):
        evaluate_joint(g, SUM_PRODUCT, [0] * 5)
    with pytest.raises(ValueError):
        evaluate_joint(g, SUM_PRODUCT, [0, 0, 0, 0, 0, 3])


def test_table_shape_is_checked():
    with pytest.raises(ValueError):
        FactorGraph([2, 3], [dense_factor((0, 1), np.ones((2, 2)))])
    with pytest.raises(ValueError):
        FactorGraph([2], [dense_factor((1,), np.ones(2))])
    with pytest.raises(ValueError):
        FactorGraph([2, 3], [kernel_factor((0, 1), InversePotts())])


def _all_kernel_graph():
    adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=bool)
    fs = [kernel_factor((0, 1, 2), ExactlyKofN(1)), kernel_factor((0, 1), AtLeastKofN(1)),
          kernel_factor((1, 2), AtMostKofN(1)), kernel_factor((0, 1, 2), TspDegree()),
          kernel_factor((0, 1, 2), Subtour()), kernel_factor((0, 1), Leader(exact=True)),
          kernel_factor((0, 1, 2), Consistency()), kernel_factor((0, 1, 2), CliqueTriangle()),
          kernel_factor((3, 4), Potts()), kernel_factor((3, 4), InversePotts(diag=2.0)),
          kernel_factor((3, 4), EdgeMap(adj)), kernel_factor((3, 4), NonEdgeMap(adj)),
          kernel_factor((3, 4), BandLimited(3, 1.5, -2.0)), kernel_factor((0,), Local([0.0, np.inf])),
          dense_factor((2, 3), np.arange(6.0).reshape(2, 3))]
    return FactorGraph([2, 2, 2, 3, 3], fs, MIN_SUM)


def test_dump_roundtrip_covers_every_kernel():
    g = _all_kernel_graph()
    assert {f.kernel.kind for f in g.factors if f.kernel is not None} == set(KERNELS)
    g2 = load_dump(dump(g))
    assert g2.domains == g.domains and g2.semiring is g.semiring
    for f1, f2 in zip(g.factors, g2.factors):
        assert f1.scope == f2.scope
        if f1.kernel is not None:
            assert f1.kernel == f2.kernel
        else:
            assert np.array_equal(f1.table, f2.table)
    assert np.array_equal(oracle.joint_table(g, MIN_SUM), oracle.joint_table(g2, MIN_SUM))


def test_load_dump_errors_name_the_line():
    with pytest.raises(ValueError, match="line 1"):
        load_dump("nonsense\n")
    with pytest.raises(ValueError, match="line 3"):
        load_dump("msgpass-factor-graph v1\ndomains 2\nfactor 0 Bogus {}\n")


def test_count_kernel_tables():
    t = materialize_kernel(ExactlyKofN(2), (0, 1, 2), [2, 2, 2], SUM_PRODUCT)
    assert t.sum() == 3 and t[1, 1, 0] == 1 and t[1, 1, 1] == 0
    t = materialize_kernel(AtLeastKofN(2), (0, 1, 2), [2, 2, 2], MIN_SUM)
    assert t[1, 1, 1] == 0 and t[1, 0, 0] == np.inf


def test_band_limited_table_wraps_around():
    t = materialize_kernel(BandLimited(4, 5.0, 7.0), (0, 1), [4, 4], MIN_MAX)
    assert t[3, 0] == 5.0 and t[0, 3] == 7.0        # last and first positions are consecutive
    assert t[0, 2] == -np.inf and t[1, 1] == np.inf
