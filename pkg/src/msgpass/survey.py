"""Counting survey propagation for constraint problems.

An SP message is a distribution over warning patterns: nonempty subsets of a
variable's domain, stored as bitmasks (bit x set when value x is allowed).
Index 0, the empty pattern, always carries probability zero.

Variable side: the outgoing pattern is the AND of the other incoming
patterns; the distribution is built one incoming message at a time. Factor
side: the outgoing pattern allows x_i when some completion consistent with
the incoming patterns satisfies the factor; every combination of incoming
patterns is enumerated (factors must be small).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .factor_graph import FactorGraph, Local, kernel_factor
from .stochastic import (DecimationPolicy, SolveResult, RestartPolicy, _sample, bp_decimate_solve,
                         gamma_ramp, is_solution)
from .bp import BPConfig

DOMAIN_CAP = 4
COMBO_CAP = 200_000


def pattern_bits(p: int, d: int) -> np.ndarray:
    return np.array([(p >> x) & 1 for x in range(d)], dtype=bool)


def _and_table(d: int) -> np.ndarray:
    P = 1 << d
    a = np.arange(P)
    return (a[:, None] & a[None, :]).ravel()


def _normalize_patterns(m: np.ndarray) -> tuple:
    m = np.asarray(m, dtype=float).copy()
    m[0] = 0.0
    z = m.sum()
    if not z > 0:
        u = np.ones_like(m)
        u[0] = 0.0
        return u / u.sum(), False
    return m / z, True


class SPModel:
    """Precomputed pattern tables for a constraint factor graph."""

    def __init__(self, g: FactorGraph, domain_cap: int = DOMAIN_CAP, combo_cap: int = COMBO_CAP):
        if any(d > domain_cap for d in g.domains):
            raise ValueError(f"domain larger than {domain_cap} is unsupported by survey propagation")
        self.g = g
        self.P = [1 << d for d in g.domains]
        self.and_tables = {d: _and_table(d) for d in set(g.domains)}
        self.tables = []
        self.out_maps = []      # per factor, per position: output pattern for each combo of the others
        for f in g.factors:
            doms = [g.domains[v] for v in f.scope]
            t = np.asarray(f.dense("sum_product", doms)) > 0
            self.tables.append(t)
            ncombo = math.prod((1 << d) - 1 for d in doms)
            if ncombo > combo_cap:
                raise ValueError(f"factor with {ncombo} pattern combinations exceeds the cap {combo_cap}")
            maps = []
            for pos in range(len(doms)):
                others = [p for p in range(len(doms)) if p != pos]
                outs = []
                for combo in itertools.product(*[range(1, 1 << doms[p]) for p in others]):
                    allowed = t
                    for p, pat in zip(others, combo):
                        shape = [1] * t.ndim
                        shape[p] = doms[p]
                        allowed = allowed & pattern_bits(pat, doms[p]).reshape(shape)
                    axes = tuple(a for a in range(t.ndim) if a != pos)
                    row = allowed.any(axis=axes) if axes else allowed
                    outs.append(int(sum(1 << x for x in range(doms[pos]) if row[x])))
                maps.append(np.asarray(outs, dtype=np.int64))
            self.out_maps.append(maps)
        self._full_ok = {}

    def factor_full_ok(self, fi: int) -> np.ndarray:
        """For every combo of all incoming patterns: True when every outgoing pattern is nonempty."""
        if fi not in self._full_ok:
            f = self.g.factors[fi]
            doms = [self.g.domains[v] for v in f.scope]
            t = self.tables[fi]
            ok = []
            for combo in itertools.product(*[range(1, 1 << d) for d in doms]):
                good = True
                for pos in range(len(doms)):
                    allowed = t
                    for p, pat in enumerate(combo):
                        if p == pos:
                            continue
                        shape = [1] * t.ndim
                        shape[p] = doms[p]
                        allowed = allowed & pattern_bits(pat, doms[p]).reshape(shape)
                    if not allowed.any():
                        good = False
                        break
                ok.append(good)
            self._full_ok[fi] = np.asarray(ok, dtype=bool)
        return self._full_ok[fi]


@dataclass
class SpState:
    sp_vf: list
    sp_fv: list
    pinned: dict = field(default_factory=dict)     # variable -> pattern its outgoing messages are fixed to
    iteration: int = 0
    max_delta: float = np.inf
    converged: bool = False
    contradiction: bool = False


def init_sp_state(model: SPModel, seed: int | None = None) -> SpState:
    g = model.g
    rng = np.random.default_rng(seed) if seed is not None else None
    vf, fv = [], []
    for e in range(g.num_edges):
        P = model.P[g.edge_var[e]]
        for store in (vf, fv):
            m = np.ones(P)
            if rng is not None:
                m = m * (0.5 + rng.random(P))
            store.append(_normalize_patterns(m)[0])
    return SpState(vf, fv)


def _and_conv(model, d, a, b):
    return np.bincount(model.and_tables[d], weights=np.outer(a, b).ravel(), minlength=1 << d)


def sp_factor_to_var(model: SPModel, state: SpState, e: int) -> tuple:
    """Normalized SP message along edge e from its factor; second item False on contradiction."""
    g = model.g
    fi, pos = g.edge_factor[e], g.edge_pos[e]
    edges = g.factor_edges[fi]
    w = np.ones(1)
    for p, e2 in enumerate(edges):
        if p == pos:
            continue
        w = np.outer(w, state.sp_vf[e2][1:]).ravel()
    out = np.bincount(model.out_maps[fi][pos], weights=w, minlength=model.P[g.edge_var[e]])
    return _normalize_patterns(out)


def _var_products(model, state, i):
    """Prefix/suffix AND-convolutions of the incoming SP messages of variable i."""
    g = model.g
    d = g.domains[i]
    P = 1 << d
    full = np.zeros(P)
    full[P - 1] = 1.0
    inc = [state.sp_fv[e] for e in g.var_edges[i]]
    pre = [full]
    for m in inc:
        pre.append(_and_conv(model, d, pre[-1], m))
    suf = [full]
    for m in reversed(inc):
        suf.append(_and_conv(model, d, suf[-1], m))
    suf = suf[::-1]
    return inc, pre, suf


def sp_var_outgoing(model: SPModel, state: SpState, i: int) -> tuple:
    """(unnormalized pattern marginal, list of normalized outgoing messages, ok flag)."""
    g = model.g
    d = g.domains[i]
    inc, pre, suf = _var_products(model, state, i)
    marg = pre[-1].copy()
    marg[0] = 0.0
    outs, ok = [], True
    for k in range(len(inc)):
        m, good = _normalize_patterns(_and_conv(model, d, pre[k], suf[k + 1]))
        ok &= good
        outs.append(m)
    return marg, outs, ok and marg.sum() > 0


def sp_var_to_factor(model: SPModel, state: SpState, e: int) -> tuple:
    g = model.g
    i = g.edge_var[e]
    _, outs, ok = sp_var_outgoing(model, state, i)
    return outs[g.var_edges[i].index(e)], ok


def sp_update(model: SPModel, state: SpState, e: int, direction: str = "factor_to_var") -> np.ndarray:
    """One SP message for edge e, in the requested direction (not stored)."""
    if direction == "factor_to_var":
        return sp_factor_to_var(model, state, e)[0]
    return sp_var_to_factor(model, state, e)[0]


def _delta_pattern(P: int, p: int) -> np.ndarray:
    m = np.zeros(P)
    m[p] = 1.0
    return m


def _visit(model: SPModel, state: SpState, i: int, damping: float = 0.0) -> float:
    g = model.g
    delta = 0.0
    for e in g.var_edges[i]:
        new, ok = sp_factor_to_var(model, state, e)
        if not ok:
            state.contradiction = True
        if damping:
            new = _normalize_patterns(damping * state.sp_fv[e] + (1 - damping) * new)[0]
        delta = max(delta, float(np.abs(new - state.sp_fv[e]).max()))
        state.sp_fv[e] = new
    if i in state.pinned:
        pinned = _delta_pattern(model.P[i], state.pinned[i])
        for e in g.var_edges[i]:
            state.sp_vf[e] = pinned
        return delta
    marg, outs, ok = sp_var_outgoing(model, state, i)
    if not ok:
        state.contradiction = True
    for e, m in zip(g.var_edges[i], outs):
        delta = max(delta, float(np.abs(m - state.sp_vf[e]).max()))
        state.sp_vf[e] = m
    return delta


def run_sp(model: SPModel, state: SpState | None = None, eps: float = 1e-3, max_iters: int = 1000,
           seed: int = 0, damping: float = 0.0) -> tuple:
    """Asynchronous SP sweeps in shuffled variable order until the L-inf change is below eps."""
    state = state or init_sp_state(model)
    rng = np.random.default_rng(seed)
    state.converged = False
    for _ in range(max_iters):
        delta = 0.0
        for i in rng.permutation(model.g.num_vars):
            delta = max(delta, _visit(model, state, int(i), damping))
        state.iteration += 1
        state.max_delta = delta
        if delta < eps:
            state.converged = True
            break
    return state, state.converged


def pattern_marginals(model: SPModel, state: SpState) -> list:
    """SP marginal over warning patterns for every variable (normalized)."""
    out = []
    for i in range(model.g.num_vars):
        if i in state.pinned:
            out.append(_delta_pattern(model.P[i], state.pinned[i]))
            continue
        _, pre, _ = _var_products(model, state, i)
        out.append(_normalize_patterns(pre[-1])[0])
    return out


def implied_marginals(model: SPModel, state: SpState) -> list:
    """P(x_i) = sum_p P(p) * p(x_i) / |p|: each pattern spreads its mass evenly over its values."""
    res = []
    for i, pm in enumerate(pattern_marginals(model, state)):
        d = model.g.domains[i]
        px = np.zeros(d)
        for p in range(1, 1 << d):
            if pm[p] > 0:
                bits = pattern_bits(p, d)
                px += pm[p] * bits / bits.sum()
        z = px.sum()
        res.append(px / z if z > 0 else np.full(d, 1.0 / d))
    return res


def sp_integral(model: SPModel, state: SpState) -> float:
    """Bethe-style estimate of the number of nonempty warning-propagation fixed points.

    Variable terms sum incoming pattern products whose AND is nonempty; factor
    terms sum incoming pattern products for which every outgoing pattern is
    nonempty; edge terms sum pairs of opposite messages that intersect.
    """
    g = model.g
    logz = 0.0
    for i in range(g.num_vars):
        if not g.var_edges[i]:
            continue
        _, pre, _ = _var_products(model, state, i)
        z = pre[-1][1:].sum()
        if not z > 0:
            return 0.0
        logz += math.log(z)
    for fi in range(len(g.factors)):
        edges = g.factor_edges[fi]
        if not edges:
            continue
        w = np.ones(1)
        for e in edges:
            w = np.outer(w, state.sp_vf[e][1:]).ravel()
        z = float(w[model.factor_full_ok(fi)].sum())
        if not z > 0:
            return 0.0
        logz += math.log(z)
    for e in range(g.num_edges):
        d = g.domains[g.edge_var[e]]
        P = 1 << d
        a, b = state.sp_vf[e], state.sp_fv[e]
        inter = (np.arange(P)[:, None] & np.arange(P)[None, :]) != 0
        z = float((np.outer(a, b) * inter).sum())
        if not z > 0:
            return 0.0
        logz -= math.log(z)
    return math.exp(logz)


# ---------------------------------------------------------------- solvers

def restriction_factors(g: FactorGraph, patterns: dict) -> list:
    """Unary 0/1 factors limiting each variable to the values allowed by its pattern."""
    out = []
    for i, p in patterns.items():
        out.append(kernel_factor((i,), Local(pattern_bits(p, g.domains[i]).astype(float))))
    return out


@dataclass
class SpDecResult:
    status: str
    assignment: list | None
    cluster: dict                 # variable -> pattern fixed by decimation
    fixed_before_handoff: int = 0
    sp_iterations: int = 0


def sp_dec_solve(g: FactorGraph, flavor: str = "S", policy: DecimationPolicy | None = None,
                 eps: float = 1e-3, max_iters: int = 1000, seed: int = 0,
                 uniform_tol: float = 0.01, handoff_attempts: int = 3) -> SpDecResult:
    """SP-guided decimation, flavor S (fix a value) or C (fix a pattern).

    When every free variable's implied marginal is within ``uniform_tol`` of
    uniform, the remaining problem, with the decimated variables restricted to
    their patterns, goes to BP-guided decimation.
    """
    flavor = flavor.upper()
    if flavor not in ("S", "C"):
        raise ValueError("flavor is 'S' or 'C'")
    policy = policy or DecimationPolicy(rho=0.05)
    model = SPModel(g)
    rng = np.random.default_rng(seed)
    state = init_sp_state(model)
    total_iters = 0
    while True:
        state, _ = run_sp(model, state, eps=eps, max_iters=max_iters, seed=int(rng.integers(2**31)))
        total_iters += state.iteration
        state.iteration = 0
        if state.contradiction:
            return SpDecResult("contradiction", None, dict(state.pinned), len(state.pinned), total_iters)
        free = [i for i in range(g.num_vars) if i not in state.pinned]
        if not free:
            break
        px = implied_marginals(model, state)
        bias = np.array([px[i].max() - 1.0 / g.domains[i] for i in free])
        if bias.max() < uniform_tol:
            break
        k = max(1, math.ceil(policy.rho * len(free)))
        order = sorted(range(len(free)), key=lambda t: (-bias[t], free[t]))[:k]
        pms = pattern_marginals(model, state) if flavor == "C" else None
        for t in order:
            if bias[t] < uniform_tol:
                continue
            i = free[t]
            if flavor == "S":
                state.pinned[i] = 1 << int(np.argmax(px[i]))
            else:
                state.pinned[i] = int(np.argmax(pms[i]))
    cluster = dict(state.pinned)
    sub = g.with_factors(restriction_factors(g, cluster))
    for attempt in range(handoff_attempts):
        res = bp_decimate_solve(sub, DecimationPolicy(rho=policy.rho),
                                BPConfig(max_iters=200, eps=1e-4), seed=seed + 7919 * attempt)
        if res.assignment is not None and is_solution(g, res.assignment):
            return SpDecResult("solved", res.assignment, cluster, len(cluster), total_iters)
    return SpDecResult("unsolved", None, cluster, len(cluster), total_iters)


def perturbed_sp_run(model: SPModel, gammas, rng: np.random.Generator, check_every: int = 1) -> tuple:
    g = model.g
    state = init_sp_state(model)
    xhat = [0] * g.num_vars
    T = len(gammas)
    for t in range(T):
        gam = gammas[t]
        for i in rng.permutation(g.num_vars):
            i = int(i)
            d = g.domains[i]
            u = rng.random()
            for e in g.var_edges[i]:
                new, ok = sp_factor_to_var(model, state, e)
                if not ok:
                    return "contradiction", None, t + 1
                state.sp_fv[e] = new
            marg, outs, ok = sp_var_outgoing(model, state, i)
            if not ok:
                return "contradiction", None, t + 1
            pm = marg / marg.sum()
            px = np.zeros(d)
            for p in range(1, 1 << d):
                if pm[p] > 0:
                    bits = pattern_bits(p, d)
                    px += pm[p] * bits / bits.sum()
            x = _sample(px, u)
            xhat[i] = x
            for e, m in zip(g.var_edges[i], outs):
                mixed = (1.0 - gam) * m
                mixed[1 << x] += gam
                state.sp_vf[e] = mixed
        if (check_every and (t + 1) % check_every == 0) or t == T - 1:
            if is_solution(g, xhat):
                return "solved", list(xhat), t + 1
    return "unsolved", list(xhat), T


def perturbed_sp_solve(g: FactorGraph, T: int | None = None, seed: int = 0,
                       restart: RestartPolicy | None = None, gamma: float | None = None) -> SolveResult:
    """Perturbed SP: SP messages blended toward the sampled value's singleton pattern."""
    model = SPModel(g)
    rng = np.random.default_rng(seed)
    budgets = [T] if (T is not None and restart is None) else list((restart or RestartPolicy()).budgets())
    total = 0
    status = "unsolved"
    for attempt, TT in enumerate(budgets, start=1):
        gammas = np.full(TT, float(gamma)) if gamma is not None else gamma_ramp(TT)
        status, x, sweeps = perturbed_sp_run(model, gammas, rng)
        total += sweeps
        if status == "solved":
            return SolveResult("solved", x, total, attempt, TT)
    return SolveResult(status, None, total, len(budgets), budgets[-1] if budgets else 0)
