"""Sampling and decimation solvers for constraint problems.

* ``gibbs_step``: sample one variable from the conditional formed by its
  incoming factor messages and emit delta messages.
* ``perturbed_bp_solve``: blend the BP operator with the Gibbs operator,
  moving the blend weight gamma linearly from 0 (pure BP) to 1 (pure Gibbs).
* ``bp_decimate_solve``: run BP, fix the most biased (or sampled) variables,
  clamp and repeat; optionally accumulates the chain-rule integral estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fastpath
from .bp import BPConfig, BPEngine
from .factor_graph import FactorGraph, clamp, evaluate_joint
from .semiring import SUM_PRODUCT


@dataclass
class SolveResult:
    status: str                  # solved | contradiction | unsolved
    assignment: list | None
    iterations: int = 0          # sweeps summed over attempts
    attempts: int = 0
    T: int = 0                   # sweep budget of the last attempt
    extra: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == "solved"


@dataclass
class RestartPolicy:
    T0: int = 10
    growth: int = 4
    max_attempts: int = 10
    max_T: int | None = None

    def budgets(self):
        T = self.T0
        for _ in range(self.max_attempts):
            if self.max_T is not None and T > self.max_T:
                return
            yield T
            T *= self.growth


@dataclass
class DecimationPolicy:
    rho: float = 0.1
    selection: str = "max_bias"     # or sample_from_belief
    restart: RestartPolicy = field(default_factory=RestartPolicy)

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.selection not in ("max_bias", "sample_from_belief"):
            raise ValueError(f"unknown selection {self.selection!r}")


def gamma_ramp(T: int) -> np.ndarray:
    """gamma_t = t / (T - 1) for t = 0..T-1."""
    if T <= 1:
        return np.zeros(max(T, 0))
    return np.arange(T) / (T - 1)


def is_solution(g: FactorGraph, x) -> bool:
    return x is not None and evaluate_joint(g, SUM_PRODUCT, x) > 0


# ------------------------------------------------------------------ Gibbs

def _sample(belief: np.ndarray, u: float) -> int:
    z = belief.sum()
    acc = 0.0
    target = u * z
    for x, b in enumerate(belief):
        acc += b
        if target < acc and b > 0:
            return x
    nz = np.flatnonzero(belief > 0)
    return int(nz[-1])


def gibbs_step(g: FactorGraph, engine: BPEngine, i: int, rng: np.random.Generator) -> tuple:
    """Sample x_i from its current conditional and send delta messages.

    Returns (value, messages) where messages are the new variable-to-factor
    messages of i; value is None when the conditional is all zero.
    """
    for e in g.var_edges[i]:
        engine.state.msg_fv[e] = engine.factor_to_var(g.edge_factor[e], g.edge_pos[e])
    belief, _ = engine.var_outgoing(i)
    raw = np.prod([engine.state.msg_fv[e] for e in g.var_edges[i]], axis=0) if g.var_edges[i] \
        else np.ones(g.domains[i])
    if not raw.sum() > 0:
        return None, []
    x = _sample(raw, rng.random())
    delta = np.zeros(g.domains[i])
    delta[x] = 1.0
    msgs = [delta.copy() for _ in g.var_edges[i]]
    for e, m in zip(g.var_edges[i], msgs):
        engine.state.msg_vf[e] = m
    engine.state.beliefs[i] = belief
    return x, msgs


# ---------------------------------------------------------- perturbed BP

def perturbed_bp_run(g: FactorGraph, gammas, rng: np.random.Generator, backend: str = "auto",
                     check_every: int = 1) -> tuple:
    """One perturbed-BP run with the given gamma per sweep.

    Returns (status, assignment, sweeps). Each sweep visits the variables in a
    fresh random order; per variable the incoming factor messages and belief
    are computed, the BP outgoing messages formed, a value sampled, and the
    outgoing messages set to (1 - gamma) * BP + gamma * delta(sample).
    """
    gammas = np.asarray(gammas, dtype=float)
    T = len(gammas)
    n = g.num_vars
    perms = np.empty((T, n), dtype=np.int64)
    unis = np.empty((T, n))
    for t in range(T):
        perms[t] = rng.permutation(n)
        unis[t] = rng.random(n)
    flat = fastpath.flatten(g) if backend in ("auto", "numba") else None
    if backend == "numba" and flat is None:
        raise ValueError("factor tables too large for the compiled path")
    if flat is not None:
        vf = np.empty(int(flat.moff[-1]))
        for e in range(g.num_edges):
            d = g.domains[g.edge_var[e]]
            vf[flat.moff[e]:flat.moff[e + 1]] = 1.0 / d
        fv = vf.copy()
        xhat = np.zeros(n, dtype=np.int64)
        code, sweeps = fastpath.perturbed_sweeps(
            flat.dom, flat.evar, flat.efac, flat.estride, flat.fptr, flat.tptr, flat.tab,
            flat.vptr, flat.vedge, flat.moff, flat.ftype, flat.fmode, flat.fk, vf, fv, xhat, gammas, perms, unis, check_every)
        x = [int(v) for v in xhat]
    else:
        code, x, sweeps = _perturbed_python(g, gammas, perms, unis, check_every)
    if code < 0:
        return "contradiction", None, sweeps
    if code > 0 and is_solution(g, x):
        return "solved", x, sweeps
    return "unsolved", x, sweeps


def _perturbed_python(g, gammas, perms, unis, check_every):
    eng = BPEngine(g, BPConfig(semiring=SUM_PRODUCT))
    st = eng.state
    xhat = [0] * g.num_vars
    T = len(gammas)
    for t in range(T):
        gam = gammas[t]
        for k in range(g.num_vars):
            i = int(perms[t, k])
            edges = g.var_edges[i]
            d = g.domains[i]
            raw = np.ones(d)
            for e in edges:
                f = g.factors[g.edge_factor[e]]
                msg = eng.factor_to_var(g.edge_factor[e], g.edge_pos[e])
                if st.contradiction:
                    return -1, xhat, t + 1
                st.msg_fv[e] = msg
                raw = raw * msg
            if not raw.sum() > 0:
                return -1, xhat, t + 1
            x = _sample(raw, unis[t, k])
            xhat[i] = x
            _, outs = eng.var_outgoing(i)
            for e, m in zip(edges, outs):
                mixed = (1.0 - gam) * m
                mixed[x] += gam
                st.msg_vf[e] = mixed
        if (check_every and (t + 1) % check_every == 0) or t == T - 1:
            if is_solution(g, xhat):
                return 1, list(xhat), t + 1
    return 0, list(xhat), T


def perturbed_bp_solve(g: FactorGraph, T: int | None = None, seed: int = 0,
                       restart: RestartPolicy | None = None, gamma: float | None = None,
                       backend: str = "auto", check_every: int = 1) -> SolveResult:
    """Perturbed BP with restarts; only certified assignments are returned as solved.

    With ``T`` given and no restart policy a single run of T sweeps is made.
    ``gamma`` fixes the blend weight instead of ramping it.
    """
    rng = np.random.default_rng(seed)
    if restart is None:
        budgets = [T] if T is not None else list(RestartPolicy().budgets())
    else:
        budgets = list(restart.budgets())
    total, last = 0, None
    status = "unsolved"
    for attempt, TT in enumerate(budgets, start=1):
        gammas = np.full(TT, float(gamma)) if gamma is not None else gamma_ramp(TT)
        status, x, sweeps = perturbed_bp_run(g, gammas, rng, backend, check_every)
        total += sweeps
        last = x
        if status == "solved":
            return SolveResult("solved", x, total, attempt, TT)
    return SolveResult(status, None, total, len(budgets), budgets[-1] if budgets else 0,
                       {"last_sample": last})


# -------------------------------------------------------------- decimation

@dataclass
class DecimationResult:
    status: str
    assignment: list | None
    integral: float | None = None
    rounds: int = 0
    order: list = field(default_factory=list)    # (variable, value) in fixing order


def _bias(b: np.ndarray) -> float:
    if len(b) < 2:
        return 1.0
    top = np.sort(b)[::-1]
    return float(top[0] - top[1])


def bp_decimate_solve(g: FactorGraph, policy: DecimationPolicy | None = None,
                      cfg: BPConfig | None = None, want_integral: bool = False,
                      seed: int = 0, evidence: dict | None = None) -> DecimationResult:
    """BP-guided decimation.

    Each round runs BP on the clamped graph, fixes ceil(rho * remaining)
    variables and clamps them. The chain-rule integral estimate is the joint
    value of the final assignment divided by the product of the beliefs of the
    fixed values at the time they were fixed. The chain rule needs fresh
    beliefs for every fixed variable, so with ``want_integral`` one variable is
    fixed per round whatever ``rho`` says.
    """
    policy = policy or DecimationPolicy()
    cfg = cfg or BPConfig(semiring=SUM_PRODUCT, max_iters=200, eps=1e-6)
    s = cfg.semiring
    if not s.has_inverse:
        raise ValueError("decimation needs a semiring with an inverse")
    rng = np.random.default_rng(seed)
    fixed = dict(evidence or {})
    log_p = 0.0
    order = []
    rounds = 0
    while len(fixed) < g.num_vars:
        red = clamp(g, fixed, s)
        sub = red.graph
        rounds += 1
        st, _ = BPEngine(sub, BPConfig(semiring=s, schedule=cfg.schedule, damping=cfg.damping,
                                       max_iters=cfg.max_iters, eps=cfg.eps,
                                       seed=int(rng.integers(2**31)), init=cfg.init)).run()
        if st.contradiction:
            return DecimationResult("contradiction", None, None, rounds, order)
        beliefs = [_as_prob(s, b) for b in st.beliefs]
        k = 1 if want_integral else max(1, math.ceil(policy.rho * sub.num_vars))
        if policy.selection == "max_bias":
            biases = np.array([_bias(b) for b in beliefs])
            cand = sorted(range(sub.num_vars), key=lambda v: (-biases[v], v))[:k]
        else:
            cand = list(rng.permutation(sub.num_vars)[:k])
        for v in cand:
            b = beliefs[v]
            if policy.selection == "max_bias":
                best = b.max()
                ties = np.flatnonzero(b >= best - 1e-12)
                x = int(ties[rng.integers(len(ties))])
            else:
                x = _sample(b, rng.random())
            if not b[x] > 0:
                continue
            log_p += math.log(b[x])
            old = red.index_map[v]
            fixed[old] = x
            order.append((old, x))
        if not any(red.index_map[v] in fixed for v in cand):
            return DecimationResult("contradiction", None, None, rounds, order)
    x = [fixed[i] for i in range(g.num_vars)]
    val = evaluate_joint(g, s, x)
    integral = None
    if want_integral:
        if s.name == "sum_product":
            integral = val / math.exp(log_p) if val > 0 else 0.0
        else:
            integral = val
    status = "solved" if _valid(s, val) else "unsolved"
    return DecimationResult(status, x, integral, rounds, order)


def _valid(s, val) -> bool:
    return val != s.one_oplus


def _as_prob(s, b):
    b = np.asarray(b, dtype=float)
    if s.name == "min_sum":
        p = np.exp(-(b - b.min())) if np.isfinite(b.min()) else np.ones_like(b)
        p = np.where(np.isinf(b), 0.0, p)
        return p / p.sum()
    return b / b.sum() if b.sum() > 0 else np.full(len(b), 1.0 / len(b))
