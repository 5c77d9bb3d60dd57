"""Compiled sum-product sweeps over flattened factor graphs.

The stochastic solvers spend nearly all their time in per-variable message
updates. Cardinality and consistency kernels keep their closed-form messages;
every other factor is materialised (it must fit the table cap) and stored in
flat arrays so the sweep runs in numba. Random numbers are drawn by the caller
so that this path and the pure-Python one consume identical streams.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .factor_graph import FactorGraph

FLAT_TABLE_CAP = 1 << 16

DENSE, COUNT, CONSISTENCY = 0, 1, 2
COUNT_MODES = {"exactly": 0, "at_least": 1, "at_most": 2}


@dataclass
class FlatGraph:
    n: int
    dom: np.ndarray        # per variable
    evar: np.ndarray       # per edge: variable
    efac: np.ndarray       # per edge: factor
    estride: np.ndarray    # per edge: stride of its position in the factor table
    fptr: np.ndarray       # factor -> first edge, length F+1
    tptr: np.ndarray       # factor -> table offset, length F+1
    tab: np.ndarray        # all tables, row-major, concatenated
    vptr: np.ndarray       # variable -> slice of vedge
    vedge: np.ndarray
    moff: np.ndarray       # edge -> message offset, length E+1
    ftype: np.ndarray      # per factor: DENSE, COUNT or CONSISTENCY
    fmode: np.ndarray      # count mode code
    fk: np.ndarray         # count threshold


def flatten(g: FactorGraph, cap: int = FLAT_TABLE_CAP) -> FlatGraph | None:
    """Flat arrays for ``g`` or None when some dense factor table is too large."""
    tabs, tptr, estride = [], [0], []
    ftype, fmode, fk = [], [], []
    for f in g.factors:
        doms = [g.domains[v] for v in f.scope]
        k = f.kernel
        if k is not None and hasattr(k, "mode") and k.kind != "Consistency":
            ftype.append(COUNT)
            fmode.append(COUNT_MODES[k.mode])
            fk.append(k.k)
        elif k is not None and k.kind == "Consistency":
            ftype.append(CONSISTENCY)
            fmode.append(0)
            fk.append(0)
        else:
            ftype.append(DENSE)
            fmode.append(0)
            fk.append(0)
        if ftype[-1] != DENSE:
            tptr.append(tptr[-1])
            estride.extend([1] * len(doms))
            continue
        size = int(np.prod(doms)) if doms else 1
        if size > cap:
            return None
        t = np.asarray(f.dense("sum_product", doms), dtype=np.float64).reshape(-1)
        tabs.append(t)
        tptr.append(tptr[-1] + len(t))
        stride = 1
        strides = []
        for d in reversed(doms):
            strides.append(stride)
            stride *= d
        estride.extend(reversed(strides))
    fptr = np.zeros(len(g.factors) + 1, dtype=np.int64)
    for fi, es in enumerate(g.factor_edges):
        fptr[fi + 1] = fptr[fi] + len(es)
    vptr = np.zeros(g.num_vars + 1, dtype=np.int64)
    vedge = []
    for i, es in enumerate(g.var_edges):
        vptr[i + 1] = vptr[i] + len(es)
        vedge.extend(es)
    dom = np.asarray(g.domains, dtype=np.int64)
    evar = np.asarray(g.edge_var, dtype=np.int64)
    moff = np.zeros(g.num_edges + 1, dtype=np.int64)
    if g.num_edges:
        moff[1:] = np.cumsum(dom[evar])
    return FlatGraph(g.num_vars, dom, evar, np.asarray(g.edge_factor, dtype=np.int64),
                     np.asarray(estride, dtype=np.int64), fptr, np.asarray(tptr, dtype=np.int64),
                     np.concatenate(tabs) if tabs else np.zeros(0), vptr,
                     np.asarray(vedge, dtype=np.int64), moff, np.asarray(ftype, dtype=np.int64),
                     np.asarray(fmode, dtype=np.int64), np.asarray(fk, dtype=np.int64))


@numba.njit(cache=True)
def _count_ok(mode, k, c):
    # c == k + 1 stands for "more than k"
    if mode == 0:
        return c == k
    if mode == 1:
        return c >= k
    return c <= k


@numba.njit(cache=True)
def _count_to_edge(e, e0, e1, mode, k, moff, vf, out):
    L = k + 2
    dp = np.zeros(L)
    dp[0] = 1.0
    nxt = np.empty(L)
    for e2 in range(e0, e1):
        if e2 == e:
            continue
        p0 = vf[moff[e2]]
        p1 = vf[moff[e2] + 1]
        for c in range(L):
            nxt[c] = dp[c] * p0
        for c in range(L):
            c2 = c + 1 if c + 1 < L else L - 1
            nxt[c2] += dp[c] * p1
        z = 0.0
        for c in range(L):
            z += nxt[c]
        if z <= 0.0:
            out[0] = 0.0
            out[1] = 0.0
            return
        for c in range(L):
            dp[c] = nxt[c] / z
    out[0] = 0.0
    out[1] = 0.0
    for c in range(L):
        if _count_ok(mode, k, c):
            out[0] += dp[c]
        c1 = c + 1 if c + 1 < L else L - 1
        if _count_ok(mode, k, c1):
            out[1] += dp[c]


@numba.njit(cache=True)
def _consistency_to_edge(e, e0, e1, moff, vf, out):
    # scope (self, followers...): valid iff self is on or no follower is on
    s0 = vf[moff[e0]]
    s1 = vf[moff[e0] + 1]
    all0 = 1.0
    anyv = 1.0
    for e2 in range(e0 + 1, e1):
        if e2 == e:
            continue
        p0 = vf[moff[e2]]
        p1 = vf[moff[e2] + 1]
        z = p0 + p1
        if z <= 0.0:
            out[0] = 0.0
            out[1] = 0.0
            return
        all0 *= p0 / z
    if e == e0:
        out[0] = all0
        out[1] = anyv
    else:
        out[0] = s1 * anyv + s0 * all0
        out[1] = s1 * anyv


@numba.njit(cache=True)
def _message(e, dom, evar, efac, estride, fptr, tptr, tab, moff, ftype, fmode, fk, vf, out):
    fi = efac[e]
    t = ftype[fi]
    if t == 1:
        _count_to_edge(e, fptr[fi], fptr[fi + 1], fmode[fi], fk[fi], moff, vf, out)
    elif t == 2:
        _consistency_to_edge(e, fptr[fi], fptr[fi + 1], moff, vf, out)
    else:
        _factor_to_edge(e, dom, evar, efac, estride, fptr, tptr, tab, moff, vf, out)


@numba.njit(cache=True)
def _factor_ok(fi, evar, estride, fptr, tptr, tab, ftype, fmode, fk, xhat):
    t = ftype[fi]
    if t == 1:
        c = 0
        for e2 in range(fptr[fi], fptr[fi + 1]):
            c += xhat[evar[e2]]
        if c > fk[fi] + 1:
            c = fk[fi] + 1
        return _count_ok(fmode[fi], fk[fi], c)
    if t == 2:
        e0 = fptr[fi]
        if xhat[evar[e0]] == 1:
            return True
        for e2 in range(e0 + 1, fptr[fi + 1]):
            if xhat[evar[e2]] != 0:
                return False
        return True
    idx = 0
    for e2 in range(fptr[fi], fptr[fi + 1]):
        idx += xhat[evar[e2]] * estride[e2]
    return tab[tptr[fi] + idx] > 0.0


@numba.njit(cache=True)
def _factor_to_edge(e, dom, evar, efac, estride, fptr, tptr, tab, moff, vf, out):
    fi = efac[e]
    e0, e1 = fptr[fi], fptr[fi + 1]
    d = dom[evar[e]]
    for x in range(d):
        out[x] = 0.0
    size = tptr[fi + 1] - tptr[fi]
    base = tptr[fi]
    st = estride[e]
    for idx in range(size):
        v = tab[base + idx]
        if v == 0.0:
            continue
        for e2 in range(e0, e1):
            if e2 == e:
                continue
            x2 = (idx // estride[e2]) % dom[evar[e2]]
            v *= vf[moff[e2] + x2]
            if v == 0.0:
                break
        if v != 0.0:
            out[(idx // st) % d] += v


@numba.njit(cache=True)
def perturbed_sweeps(dom, evar, efac, estride, fptr, tptr, tab, vptr, vedge, moff,
                     ftype, fmode, fk, vf, fv, xhat, gammas, perms, uniforms, check_every):
    """Run len(gammas) sweeps of perturbed BP in place.

    Returns (status, sweeps_done): status 1 means xhat satisfies every factor,
    -1 a contradiction (a variable with an all-zero belief), 0 neither.
    """
    n = dom.shape[0]
    F = fptr.shape[0] - 1
    dmax = 1
    for i in range(n):
        if dom[i] > dmax:
            dmax = dom[i]
    out = np.empty(dmax)
    belief = np.empty(dmax)
    prod = np.empty(dmax)
    T = gammas.shape[0]
    for t in range(T):
        g = gammas[t]
        for k in range(n):
            i = perms[t, k]
            d = dom[i]
            a, b = vptr[i], vptr[i + 1]
            for x in range(d):
                belief[x] = 1.0
            for q in range(a, b):
                e = vedge[q]
                _message(e, dom, evar, efac, estride, fptr, tptr, tab, moff, ftype, fmode, fk, vf, out)
                z = 0.0
                for x in range(d):
                    z += out[x]
                if z <= 0.0:
                    return -1, t + 1
                for x in range(d):
                    fv[moff[e] + x] = out[x] / z
                    belief[x] *= out[x] / z
            z = 0.0
            for x in range(d):
                z += belief[x]
            if not z > 0.0:
                return -1, t + 1
            # sample from the belief
            u = uniforms[t, k] * z
            acc = 0.0
            pick = d - 1
            for x in range(d):
                acc += belief[x]
                if u < acc and belief[x] > 0.0:
                    pick = x
                    break
            while belief[pick] == 0.0 and pick > 0:
                pick -= 1
            xhat[i] = pick
            for q in range(a, b):
                e = vedge[q]
                for x in range(d):
                    prod[x] = 1.0
                for q2 in range(a, b):
                    if q2 == q:
                        continue
                    e2 = vedge[q2]
                    for x in range(d):
                        prod[x] *= fv[moff[e2] + x]
                z = 0.0
                for x in range(d):
                    z += prod[x]
                for x in range(d):
                    m = prod[x] / z if z > 0.0 else 1.0 / d
                    vf[moff[e] + x] = (1.0 - g) * m + (g if x == pick else 0.0)
        if check_every and (t + 1) % check_every == 0 or t == T - 1:
            ok = True
            for fi in range(F):
                if not _factor_ok(fi, evar, estride, fptr, tptr, tab, ftype, fmode, fk, xhat):
                    ok = False
                    break
            if ok:
                return 1, t + 1
    return 0, T
