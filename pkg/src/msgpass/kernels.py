"""Factor-to-variable message computations.

``factor_messages`` returns every outgoing message of a factor from the
incoming variable-to-factor messages; ``factor_message`` returns one. Dense
tables are marginalised by direct enumeration, kernels use closed forms that
run in time linear (or K-linear) in the scope size. Returned messages are
not normalised.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .factor_graph import (BandLimited, CliqueTriangle, Consistency, EdgeMap, Factor, InversePotts,
                           Local, Potts, _CountKernel)
from .semiring import INF, SemiringSpec, get_semiring


# ---------------------------------------------------------------- dense tables

def dense_message(s: SemiringSpec, table: np.ndarray, incoming: Sequence[np.ndarray], pos: int) -> np.ndarray:
    """out(x_pos) = (+)_{x without pos} table(x) (x) prod_{j != pos} in_j(x_j)."""
    nd = table.ndim
    acc = table
    for j, m in enumerate(incoming):
        if j == pos:
            continue
        shape = [1] * nd
        shape[j] = len(m)
        acc = s.otimes(acc, np.reshape(m, shape))
    axes = tuple(a for a in range(nd) if a != pos)
    if not axes:
        return np.array(acc, dtype=float).reshape(-1)
    return np.asarray(s.reduce_oplus(acc, axis=axes), dtype=float).reshape(-1)


def dense_messages(s: SemiringSpec, table: np.ndarray, incoming: Sequence[np.ndarray]) -> list:
    return [dense_message(s, table, incoming, p) for p in range(table.ndim)]


# ------------------------------------------------------------ K-of-N family

def _count_valid(mode: str, K: int, total):
    if mode == "exactly":
        return total == K
    if mode == "at_least":
        return total >= K
    if mode == "at_most":
        return total <= K
    raise ValueError(f"unknown count mode {mode!r}")


def _rescale_row(s, row):
    if s.name in ("sum_product", "max_product"):
        m = row.max()
        if m > 0 and np.isfinite(m):
            return row / m
    elif s.name == "min_sum":
        m = row.min()
        if np.isfinite(m):
            return row - m
    return row


def _count_polys(s: SemiringSpec, vals: np.ndarray, L: int, reverse: bool) -> np.ndarray:
    """Row t holds the count distribution of the first t variables (or last t when reverse).

    Buckets 0..L-2 are exact counts, bucket L-1 means "at least L-1". Rows are
    rescaled independently; only ratios inside a row matter downstream.
    """
    n = len(vals)
    out = np.empty((n + 1, L))
    row = np.full(L, float(s.one_oplus))
    row[0] = s.one_otimes
    out[0] = row
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t, j in enumerate(order, start=1):
        v0, v1 = vals[j, 0], vals[j, 1]
        stay = s.otimes(row, v0)
        up = np.full(L, float(s.one_oplus))
        up[1:] = s.otimes(row[:-1], v1)
        # the saturating bucket also absorbs a one from itself
        up[-1] = s.oplus(up[-1], s.otimes(row[-1], v1))
        row = _rescale_row(s, np.asarray(s.oplus(stay, up), dtype=float))
        out[t] = row
    if reverse:
        out = out[::-1]
    return out


def count_messages(s: SemiringSpec, mode: str, K: int, incoming: Sequence[np.ndarray]) -> list:
    """All outgoing messages of a cardinality factor in any semiring.

    Counts of the variables before and after each target are combined with a
    saturating convolution, so hard zeros in the incoming messages need no
    special treatment.
    """
    n = len(incoming)
    if n == 0:
        return []
    vals = np.asarray([np.asarray(m, dtype=float) for m in incoming]).reshape(n, 2)
    L = max(K, 0) + 2
    pre = _count_polys(s, vals, L, reverse=False)   # pre[t]: vars 0..t-1
    suf = _count_polys(s, vals, L, reverse=True)    # suf[t]: vars t..n-1
    a = np.arange(L)[:, None]
    b = np.arange(L)[None, :]
    outs = np.empty((n, 2))
    left = pre[:n]            # before target t
    right = suf[1:]           # after target t
    outer = s.otimes(left[:, :, None], right[:, None, :])
    for x in (0, 1):
        total = np.minimum(a + b + x, L - 1)
        mask = _count_valid(mode, K, total)
        masked = np.where(mask[None], outer, s.one_oplus)
        outs[:, x] = s.reduce_oplus(masked.reshape(n, -1), axis=1)
    return [outs[t].copy() for t in range(n)]


def kofn_sumproduct_msg(mode: str, K: int, ratios: Sequence[float]) -> float:
    """Outgoing ratio nu(1)/nu(0) of a K-of-N factor from incoming ratios nu_j(1)/nu_j(0).

    An infinite ratio stands for nu_j(0) = 0 (variable forced on).
    """
    from .semiring import SUM_PRODUCT
    vals = [np.array([0.0, 1.0]) if r == INF else np.array([1.0, float(r)]) for r in ratios]
    n = len(vals)
    L = max(K, 0) + 2
    if n == 0:
        row = np.zeros(L)
        row[0] = 1.0
    else:
        row = _count_polys(SUM_PRODUCT, np.asarray(vals), L, reverse=False)[n]
    nu = []
    for x in (0, 1):
        tot = np.minimum(np.arange(L) + x, L - 1)
        nu.append(float(row[_count_valid(mode, K, tot)].sum()))
    if nu[0] == 0.0:
        return INF if nu[1] > 0 else float("nan")
    return nu[1] / nu[0]


def kofn_minsum_msg(mode: str, K: int, m: Sequence[float]) -> float:
    """Outgoing normalised min-sum message nu(1) - nu(0) of a K-of-N factor.

    ``m`` holds the other variables' normalised messages nu_j(1) - nu_j(0);
    -inf means the variable is forced on, +inf forced off. The result is the
    cost of the best completion with the target on minus the best with it off.
    """
    m = np.asarray(m, dtype=float)
    forced_on = int(np.sum(m == -INF))
    free = np.sort(m[np.isfinite(m)])
    prefix = np.concatenate([[0.0], np.cumsum(free)])   # prefix[c]: sum of c smallest
    c = np.arange(len(free) + 1)
    cost = []
    for x in (0, 1):
        ok = _count_valid(mode, K, c + forced_on + x)
        cost.append(float(prefix[ok].min()) if ok.any() else INF)
    if cost[0] == INF and cost[1] == INF:
        return float("nan")
    if cost[0] == INF:
        return -INF
    if cost[1] == INF:
        return INF
    return cost[1] - cost[0]


def kofn_minsum_messages(mode: str, K: int, incoming: Sequence[np.ndarray]) -> list:
    """Min-sum K-of-N messages for every target via the sorted-sum formula."""
    d = np.array([_diff(v) for v in incoming])
    outs = []
    for t in range(len(d)):
        delta = kofn_minsum_msg(mode, K, np.delete(d, t))
        outs.append(_from_diff(delta))
    return outs


def _diff(v):
    v0, v1 = float(v[0]), float(v[1])
    if v0 == INF and v1 == INF:
        return float("nan")
    if v0 == INF:
        return -INF
    if v1 == INF:
        return INF
    return v1 - v0


def _from_diff(delta):
    if delta != delta:
        return np.array([INF, INF])
    if delta == INF:
        return np.array([0.0, INF])
    if delta == -INF:
        return np.array([INF, 0.0])
    return np.array([0.0, delta])


# ------------------------------------------------------------------ others

def _exclusive_oplus(s, v):
    """e[x] = (+)_{y != x} v[y], via prefix and suffix scans."""
    n = len(v)
    out = np.full(n, float(s.one_oplus))
    if n == 1:
        return out
    pre = s.accumulate_oplus(v)
    suf = s.accumulate_oplus(v[::-1])[::-1]
    out[1:] = pre[:-1]
    out[:-1] = s.oplus(out[:-1], suf[1:])
    return out


def inverse_potts_message(s, v, diag=None):
    v = np.asarray(v, dtype=float)
    out = _exclusive_oplus(s, v)
    if diag is not None:
        out = s.oplus(out, s.otimes(diag, v))
    return np.asarray(out, dtype=float)


def potts_message(s, v):
    return np.array(v, dtype=float)


def clique_triangle_messages(s, incoming):
    outs = []
    for t in range(3):
        j, k = [p for p in range(3) if p != t]
        a0, a1 = incoming[j]
        b0, b1 = incoming[k]
        o0 = s.oplus(s.oplus(s.otimes(a0, b0), s.otimes(a1, b0)), s.otimes(a0, b1))
        o1 = s.oplus(s.otimes(a0, b0), s.otimes(a1, b1))
        outs.append(np.array([o0, o1], dtype=float))
    return outs


def clique_triangle_msg(a, b):
    """Min-sum message of a triangle factor from two normalised incoming values (elementwise)."""
    out = np.minimum(0.0, np.add(a, b)) - np.minimum(0.0, np.minimum(a, b))
    return float(out) if np.ndim(out) == 0 else out


def consistency_messages(s, incoming):
    n = len(incoming)
    vals = np.asarray([np.asarray(m, dtype=float) for m in incoming]).reshape(n, 2)
    s0, s1 = vals[0]
    others = vals[1:]
    outs = [None] * n
    if n == 1:
        outs[0] = np.full(2, float(s.one_otimes))
        return outs
    both = np.asarray(s.oplus(others[:, 0], others[:, 1]), dtype=float)
    zero = others[:, 0]
    outs[0] = np.array([s.reduce_otimes(zero), s.reduce_otimes(both)], dtype=float)
    ex_both = _exclusive_otimes(s, both)
    ex_zero = _exclusive_otimes(s, zero)
    for k in range(n - 1):
        on = s.otimes(s1, ex_both[k])
        off = s.oplus(on, s.otimes(s0, ex_zero[k]))
        outs[k + 1] = np.array([off, on], dtype=float)
    return outs


def _exclusive_otimes(s, v):
    n = len(v)
    out = np.full(n, float(s.one_otimes))
    if n == 1:
        return out
    pre = s.accumulate_otimes(v)
    suf = s.accumulate_otimes(v[::-1])[::-1]
    out[1:] = pre[:-1]
    out[:-1] = s.otimes(out[:-1], suf[1:])
    return out


def edge_map_message(s, mask, v, pos):
    m = mask if pos == 0 else mask.T
    masked = np.where(m, np.asarray(v, dtype=float)[None, :], s.one_oplus)
    return np.asarray(s.reduce_oplus(masked, axis=1), dtype=float)


def band_limited_message(s, n, fwd, bwd, v, pos):
    """Message of the time-step factor to position ``pos`` in O(n)."""
    v = np.asarray(v, dtype=float)
    if pos == 0:
        fwd, bwd = bwd, fwd
    # to position 1: out(x) = rest(x) (+) fwd (x) v(x-1) (+) bwd (x) v(x+1)
    rest = np.full(n, float(s.one_oplus))
    if n > 3:
        pre = s.accumulate_oplus(v)
        suf = s.accumulate_oplus(v[::-1])[::-1]
        for x in range(1, n - 1):
            acc = float(s.one_oplus)
            if x - 2 >= 0:
                acc = s.oplus(acc, pre[x - 2])
            if x + 2 <= n - 1:
                acc = s.oplus(acc, suf[x + 2])
            rest[x] = acc
        rest[0] = s.reduce_oplus(v[2:n - 1])
        rest[n - 1] = s.reduce_oplus(v[1:n - 2])
    prev = np.roll(v, 1)
    nxt = np.roll(v, -1)
    out = s.oplus(rest, s.oplus(s.otimes(fwd, prev), s.otimes(bwd, nxt)))
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------- dispatch

def factor_messages(s: SemiringSpec, factor: Factor, domains: Sequence[int],
                    incoming: Sequence[np.ndarray]) -> list:
    """All outgoing (unnormalised) messages of ``factor``; ``domains`` is per scope position."""
    s = get_semiring(s)
    if factor.table is not None:
        return dense_messages(s, factor.table, incoming)
    k = factor.kernel
    if isinstance(k, _CountKernel):
        return count_messages(s, k.mode, k.k, incoming)
    if isinstance(k, Potts):
        return [potts_message(s, incoming[1]), potts_message(s, incoming[0])]
    if isinstance(k, InversePotts):
        return [inverse_potts_message(s, incoming[1], k.diag), inverse_potts_message(s, incoming[0], k.diag)]
    if isinstance(k, CliqueTriangle):
        return clique_triangle_messages(s, incoming)
    if isinstance(k, Consistency):
        return consistency_messages(s, incoming)
    if isinstance(k, EdgeMap):
        mask = k.mask()
        return [edge_map_message(s, mask, incoming[1], 0), edge_map_message(s, mask, incoming[0], 1)]
    if isinstance(k, BandLimited):
        return [band_limited_message(s, k.n, k.fwd, k.bwd, incoming[1], 0),
                band_limited_message(s, k.n, k.fwd, k.bwd, incoming[0], 1)]
    if isinstance(k, Local):
        return [k.values.copy()]
    raise TypeError(f"no message rule for kernel {k.kind}")


def factor_message(s: SemiringSpec, factor: Factor, domains: Sequence[int],
                   incoming: Sequence[np.ndarray], pos: int) -> np.ndarray:
    """One outgoing message; cheap single-target paths where they exist."""
    s = get_semiring(s)
    if factor.table is not None:
        return dense_message(s, factor.table, incoming, pos)
    k = factor.kernel
    if isinstance(k, (Potts, InversePotts, EdgeMap, BandLimited)):
        other = incoming[1 - pos]
        if isinstance(k, Potts):
            return potts_message(s, other)
        if isinstance(k, InversePotts):
            return inverse_potts_message(s, other, k.diag)
        if isinstance(k, EdgeMap):
            return edge_map_message(s, k.mask(), other, pos)
        return band_limited_message(s, k.n, k.fwd, k.bwd, other, pos)
    if isinstance(k, Local):
        return k.values.copy()
    return factor_messages(s, factor, domains, incoming)[pos]
