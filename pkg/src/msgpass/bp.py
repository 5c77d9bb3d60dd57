"""Loopy belief propagation over an arbitrary commutative semiring.

Three schedules are supported:

* ``async``: variables are visited in a freshly shuffled order each sweep;
  a visited variable first refreshes all messages from its factors, then
  sends its outgoing messages.
* ``var_sync``: all factor messages are computed from the previous state,
  then each variable forms its belief once and derives its outgoing messages
  by dividing out each incoming message (when the semiring allows it).
* ``factor_sync``: all variable messages first, then every factor computes
  all of its outgoing messages in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .factor_graph import FactorGraph
from .kernels import factor_message, factor_messages
from .semiring import INF, SemiringSpec, get_semiring

SCHEDULES = ("async", "var_sync", "factor_sync")


@dataclass
class BPConfig:
    semiring: SemiringSpec | str = "sum_product"
    schedule: str = "async"
    damping: float = 0.0
    max_iters: int = 200
    eps: float = 1e-9
    seed: int = 0
    init: str = "uniform"

    def __post_init__(self):
        self.semiring = get_semiring(self.semiring)
        self.schedule = self.schedule.replace("-", "_")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.init not in ("uniform", "random"):
            raise ValueError("init is 'uniform' or 'random'")


@dataclass
class MessageState:
    msg_vf: list            # per edge, variable -> factor
    msg_fv: list            # per edge, factor -> variable
    beliefs: list           # per variable
    iteration: int = 0
    max_delta: float = INF
    contradiction: bool = False
    converged: bool = False
    degenerate: bool = False

    def copy(self) -> "MessageState":
        return MessageState([m.copy() for m in self.msg_vf], [m.copy() for m in self.msg_fv],
                            [b.copy() for b in self.beliefs], self.iteration, self.max_delta,
                            self.contradiction, self.converged, self.degenerate)


def _max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    with np.errstate(invalid="ignore"):
        d = np.abs(a - b)
    d = np.where(np.isnan(d), 0.0, d)
    return float(d.max()) if d.size else 0.0


class BPEngine:
    """Holds a graph, a configuration and a message state; exposes single updates."""

    def __init__(self, g: FactorGraph, cfg: BPConfig, state: MessageState | None = None):
        self.g = g
        self.cfg = cfg
        self.s = cfg.semiring
        self.rng = np.random.default_rng(cfg.seed)
        self.fdoms = [[g.domains[v] for v in f.scope] for f in g.factors]
        self.state = state if state is not None else self.initial_state()

    # ------------------------------------------------------------ setup
    def initial_state(self) -> MessageState:
        g, s = self.g, self.s
        vf, fv = [], []
        for e in range(g.num_edges):
            d = g.domains[g.edge_var[e]]
            vf.append(self._init_msg(d))
            fv.append(self._init_msg(d))
        beliefs = [s.uniform(d) for d in g.domains]
        return MessageState(vf, fv, beliefs)

    def _init_msg(self, d: int) -> np.ndarray:
        s = self.s
        m = np.full(d, float(s.one_otimes))
        if self.cfg.init == "random":
            noise = self.rng.random(d)
            if s.name in ("sum_product", "max_product"):
                m = m * (0.5 + noise)
            elif s.name == "min_sum":
                m = m + noise
        return self.normalize(m)[0]

    # ---------------------------------------------------------- helpers
    def normalize(self, m: np.ndarray) -> tuple:
        """Normalized message and a flag that is False for a contradiction."""
        out, ok = self.s.normalize(np.asarray(m, dtype=float))
        if not ok:
            return self.s.uniform(len(m)), False
        return out, True

    def damp(self, old: np.ndarray, new: np.ndarray) -> np.ndarray:
        lam = self.cfg.damping
        if lam == 0.0:
            return new
        with np.errstate(invalid="ignore"):
            mixed = lam * old + (1.0 - lam) * new
        mixed = np.where(np.isnan(mixed), INF, mixed)
        return self.normalize(mixed)[0]

    def incoming_to_factor(self, fi: int) -> list:
        return [self.state.msg_vf[e] for e in self.g.factor_edges[fi]]

    # ---------------------------------------------------------- updates
    def factor_to_var(self, fi: int, pos: int) -> np.ndarray:
        """Normalized (undamped) message from factor ``fi`` to its scope position ``pos``."""
        raw = factor_message(self.s, self.g.factors[fi], self.fdoms[fi], self.incoming_to_factor(fi), pos)
        out, ok = self.normalize(raw)
        if not ok:
            self.state.contradiction = True
        return out

    def factor_all(self, fi: int) -> list:
        raws = factor_messages(self.s, self.g.factors[fi], self.fdoms[fi], self.incoming_to_factor(fi))
        outs = []
        for raw in raws:
            out, ok = self.normalize(raw)
            if not ok:
                self.state.contradiction = True
            outs.append(out)
        return outs

    def set_fv(self, e: int, new: np.ndarray) -> float:
        old = self.state.msg_fv[e]
        new = self.damp(old, new)
        self.state.msg_fv[e] = new
        return _max_abs_diff(old, new)

    def var_outgoing(self, i: int, use_inverse: bool = False) -> tuple:
        """Belief of variable i and its outgoing messages (one per adjacent edge)."""
        s = self.s
        edges = self.g.var_edges[i]
        d = self.g.domains[i]
        if not edges:
            return s.uniform(d), []
        inc = np.array([self.state.msg_fv[e] for e in edges])
        raw_belief = np.asarray(s.reduce_otimes(inc, axis=0), dtype=float)
        outs = None
        if use_inverse and s.has_inverse and not np.any(inc == s.one_oplus):
            outs = [s.divide(raw_belief, inc[k]) for k in range(len(edges))]
        if outs is None:
            outs = self._exclusive_products(inc)
        belief, ok = self.normalize(raw_belief)
        if not ok:
            self.state.contradiction = True
        normed = []
        for o in outs:
            m, ok = self.normalize(o)
            if not ok:
                self.state.contradiction = True
            normed.append(m)
        return belief, normed

    def _exclusive_products(self, inc: np.ndarray) -> list:
        s = self.s
        n, d = inc.shape
        if n == 1:
            return [np.full(d, float(s.one_otimes))]
        pre = s.accumulate_otimes(inc, axis=0)
        suf = s.accumulate_otimes(inc[::-1], axis=0)[::-1]
        outs = []
        for k in range(n):
            if k == 0:
                outs.append(suf[1].copy())
            elif k == n - 1:
                outs.append(pre[n - 2].copy())
            else:
                outs.append(np.asarray(s.otimes(pre[k - 1], suf[k + 1]), dtype=float))
        return outs

    def set_var(self, i: int, belief: np.ndarray, outs: Sequence[np.ndarray]) -> float:
        delta = 0.0
        self.state.beliefs[i] = belief
        for e, m in zip(self.g.var_edges[i], outs):
            delta = max(delta, _max_abs_diff(self.state.msg_vf[e], m))
            self.state.msg_vf[e] = m
        return delta

    # ------------------------------------------------------------ sweeps
    def visit_variable(self, i: int) -> float:
        """Refresh the factor messages into i, then i's belief and outgoing messages."""
        g = self.g
        delta = 0.0
        for e in g.var_edges[i]:
            new = self.factor_to_var(g.edge_factor[e], g.edge_pos[e])
            delta = max(delta, self.set_fv(e, new))
        belief, outs = self.var_outgoing(i)
        return max(delta, self.set_var(i, belief, outs))

    def sweep(self) -> float:
        g, sched = self.g, self.cfg.schedule
        delta = 0.0
        if sched == "async":
            for i in self.rng.permutation(g.num_vars):
                delta = max(delta, self.visit_variable(int(i)))
        elif sched == "var_sync":
            new_fv = [None] * g.num_edges
            for fi in range(len(g.factors)):
                for e, m in zip(g.factor_edges[fi], self.factor_all(fi)):
                    new_fv[e] = m
            for e in range(g.num_edges):
                delta = max(delta, self.set_fv(e, new_fv[e]))
            for i in range(g.num_vars):
                belief, outs = self.var_outgoing(i, use_inverse=True)
                delta = max(delta, self.set_var(i, belief, outs))
        else:
            pending = [self.var_outgoing(i) for i in range(g.num_vars)]
            for i, (belief, outs) in enumerate(pending):
                delta = max(delta, self.set_var(i, belief, outs))
            for fi in range(len(g.factors)):
                for e, m in zip(g.factor_edges[fi], self.factor_all(fi)):
                    delta = max(delta, self.set_fv(e, m))
            for i in range(g.num_vars):
                self.state.beliefs[i] = self.var_outgoing(i)[0]
        self.state.iteration += 1
        self.state.max_delta = delta
        return delta

    def run(self, callback: Callable | None = None) -> tuple:
        st = self.state
        st.converged = False
        for _ in range(self.cfg.max_iters):
            delta = self.sweep()
            if callback is not None:
                callback(self)
            if delta < self.cfg.eps:
                st.converged = True
                break
        return st, st.converged


# ------------------------------------------------------------ public API

def init_state(g: FactorGraph, cfg: BPConfig) -> MessageState:
    return BPEngine(g, cfg).state


def update_factor_to_var(g: FactorGraph, s, state: MessageState, fi: int, i: int) -> np.ndarray:
    """Normalized message from factor ``fi`` to variable ``i`` given the current state."""
    cfg = BPConfig(semiring=s)
    eng = BPEngine(g, cfg, state)
    pos = g.factors[fi].scope.index(i)
    return eng.factor_to_var(fi, pos)


def update_var_to_factor(g: FactorGraph, s, state: MessageState, i: int, fi: int,
                         use_inverse: bool = False) -> np.ndarray:
    cfg = BPConfig(semiring=s)
    eng = BPEngine(g, cfg, state)
    _, outs = eng.var_outgoing(i, use_inverse=use_inverse)
    for e, m in zip(g.var_edges[i], outs):
        if g.edge_factor[e] == fi:
            return m
    raise ValueError(f"variable {i} is not in the scope of factor {fi}")


def run(g: FactorGraph, cfg: BPConfig, state: MessageState | None = None) -> tuple:
    """Iterate until the largest message change drops below eps or max_iters sweeps pass."""
    eng = BPEngine(g, cfg, state)
    return eng.run()



def bethe_integral(g: FactorGraph, s, state: MessageState, log: bool = False) -> float:
    """Integral estimate assembled from factor, variable and edge local integrals.

    For semirings with an inverse this is prod Z_I prod Z_i / prod Z_iI. Without
    an inverse (min_max, or_and), messages are never normalized, so the
    (+)-marginal of any unnormalized variable belief is returned, which is exact
    on trees. With ``log=True`` the sum-product value is returned as a log.
    A state flagged as a contradiction has no mass: the annihilator is returned.
    """
    s = get_semiring(s)
    if state.contradiction:
        if log and s.name == "sum_product":
            return -INF
        return float(s.one_oplus)
    eng = BPEngine(g, BPConfig(semiring=s), state)
    if not s.has_inverse:
        return _noninverse_integral(g, s, state, eng)
    zf, zv, ze = [], [], []
    for fi, f in enumerate(g.factors):
        if not f.scope:
            zf.append(float(f.table.reshape(-1)[0]) if f.table is not None else float(s.one_otimes))
            continue
        inc = eng.incoming_to_factor(fi)
        out0 = factor_message(s, f, eng.fdoms[fi], inc, 0)
        zf.append(float(s.reduce_oplus(s.otimes(out0, inc[0]))))
    for i in range(g.num_vars):
        edges = g.var_edges[i]
        if not edges:
            zv.append(float(s.reduce_oplus(np.full(g.domains[i], float(s.one_otimes)))))
            continue
        inc = np.array([state.msg_fv[e] for e in edges])
        zv.append(float(s.reduce_oplus(s.reduce_otimes(inc, axis=0))))
    for e in range(g.num_edges):
        ze.append(float(s.reduce_oplus(s.otimes(state.msg_vf[e], state.msg_fv[e]))))
    if any(z == s.one_oplus for z in ze):
        state.degenerate = True
        return float("nan")
    if s.name == "min_sum":
        total = _sat_sum(zf + zv) if zf or zv else 0.0
        if total == INF:
            return INF
        return total - sum(ze)
    # sum_product / max_product: multiply in the log domain to avoid overflow
    with np.errstate(divide="ignore"):
        lz = float(np.sum(np.log(zf)) + np.sum(np.log(zv)) - np.sum(np.log(ze)))
    if log:
        return lz
    return float(np.exp(lz))


def _sat_sum(vals):
    if any(v == INF for v in vals):
        return INF
    return float(np.sum(vals))


def _noninverse_integral(g, s, state, eng):
    consts = [float(f.table.reshape(-1)[0]) for f in g.factors if not f.scope]
    total = float(s.one_otimes)
    for c in consts:
        total = s.otimes(total, c)
    # each connected component contributes the (+) of one unnormalized belief
    seen = set()
    for i in range(g.num_vars):
        if i in seen:
            continue
        comp = _component(g, i)
        seen |= comp
        edges = g.var_edges[i]
        if edges:
            inc = np.array([state.msg_fv[e] for e in edges])
            b = s.reduce_otimes(inc, axis=0)
        else:
            b = np.full(g.domains[i], float(s.one_otimes))
        total = s.otimes(total, s.reduce_oplus(b))
    return float(total)


def _component(g, start):
    comp, stack = {start}, [start]
    while stack:
        i = stack.pop()
        for e in g.var_edges[i]:
            for j in g.factors[g.edge_factor[e]].scope:
                if j not in comp:
                    comp.add(j)
                    stack.append(j)
    return comp


def extract_assignment(state: MessageState, tie_seed: int = 0, s=None) -> list:
    """Per-variable best value of the belief under the semiring order; ties broken by seed."""
    s = get_semiring(s if s is not None else "sum_product")
    rng = np.random.default_rng(tie_seed)
    out = []
    for b in state.beliefs:
        b = np.asarray(b, dtype=float)
        best = b[s.extremum_index(b)]
        if np.isfinite(best):
            ties = np.flatnonzero(np.abs(b - best) <= 1e-12 * max(1.0, abs(best)))
        else:
            ties = np.flatnonzero(b == best)
        out.append(int(ties[rng.integers(len(ties))]) if len(ties) > 1 else int(ties[0]))
    return out
