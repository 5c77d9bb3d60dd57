"""Min-max problems through thresholded CSPs and through rank exponents.

``py_reduce`` turns a min-max factor graph into the 0/1 constraint problem
"every factor value is at most y". Satisfiable reductions are monotone in y,
so bisection over the sorted set of factor values finds the optimum given a
complete solver. With an incomplete solver a failure only suggests
infeasibility, so the returned value is an upper bound certified by a witness.

``minsum_reduce`` replaces each value by base**rank with base = |F| + 1, so a
single larger-rank value outweighs any sum of smaller ones and min-sum
argmins are min-max argmins.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .factor_graph import (BandLimited, Factor, FactorGraph, InversePotts, Local, dense_factor,
                           evaluate_joint, kernel_factor)
from .semiring import MIN_MAX

# kernels whose min-max table only holds the two identities; they reduce to themselves
_VALUE_KERNELS = ("InversePotts", "BandLimited", "Local")
MAX_LADDER_RANKS = 52


def _finite(values) -> list:
    a = np.asarray(values, dtype=float).ravel()
    return a[np.isfinite(a)].tolist()


def factor_values(f: Factor, domains) -> list:
    """Finite values a min-max factor can take, read from kernel parameters when possible."""
    if f.is_dense:
        return _finite(f.table)
    k = f.kernel
    if k.kind == "InversePotts":
        return _finite([k.diag]) if k.diag is not None else []
    if k.kind == "BandLimited":
        return _finite([k.fwd, k.bwd])
    if k.kind == "Local":
        return _finite(k.values)
    return []


@dataclass
class RangeLadder:
    """Sorted distinct finite factor values."""

    values: list

    @classmethod
    def from_graph(cls, g: FactorGraph) -> "RangeLadder":
        vals = set()
        for f in g.factors:
            vals.update(factor_values(f, [g.domains[v] for v in f.scope]))
        return cls(sorted(vals))

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def index(self, y: float) -> int:
        """Position of the largest ladder value <= y."""
        return bisect.bisect_right(self.values, y) - 1

    def rank(self, y: float) -> int:
        k = bisect.bisect_left(self.values, y)
        if k == len(self.values) or self.values[k] != y:
            raise KeyError(y)
        return k


def _reduce_factor(f: Factor, domains, y: float) -> Factor | None:
    """Thresholded 0/1 version of one factor; None when every cell is allowed."""
    if f.is_dense:
        t = (np.asarray(f.table, dtype=float) <= y).astype(float)
        return None if t.all() else dense_factor(f.scope, t)
    k = f.kernel
    if k.kind == "InversePotts":
        if k.diag is not None and k.diag <= y:
            return None
        return kernel_factor(f.scope, InversePotts())
    if k.kind == "BandLimited":
        return kernel_factor(f.scope, BandLimited(k.n, float(k.fwd <= y), float(k.bwd <= y)))
    if k.kind == "Local":
        t = (k.values <= y).astype(float)
        return None if t.all() else kernel_factor(f.scope, Local(t))
    return f


def py_reduce(g: FactorGraph, y: float) -> FactorGraph:
    """Constraint problem whose solutions are the assignments with min-max value <= y."""
    out = []
    for f in g.factors:
        r = _reduce_factor(f, [g.domains[v] for v in f.scope], y)
        if r is not None:
            out.append(r)
    return FactorGraph(g.domains, out, semiring="sum_product", var_names=g.var_names)


def minmax_value(g: FactorGraph, x) -> float:
    return float(evaluate_joint(g, MIN_MAX, x))


CspSolver = Callable[[FactorGraph, int], "list | None"]


def perturbed_bp_solver(restart=None, check_every: int = 1) -> CspSolver:
    from .stochastic import RestartPolicy, perturbed_bp_solve

    def solve(csp: FactorGraph, seed: int):
        res = perturbed_bp_solve(csp, seed=seed, restart=restart or RestartPolicy(max_attempts=6),
                                 check_every=check_every)
        return res.assignment if res.solved else None
    return solve


def bp_dec_solver(rho: float = 0.1) -> CspSolver:
    from .stochastic import DecimationPolicy, bp_decimate_solve

    def solve(csp: FactorGraph, seed: int):
        res = bp_decimate_solve(csp, DecimationPolicy(rho=rho), seed=seed)
        return res.assignment if res.status == "solved" else None
    return solve


SOLVERS = {"perturbed-bp": perturbed_bp_solver, "bp-dec": bp_dec_solver}


@dataclass
class MinMaxResult:
    status: str                 # solved | infeasible
    value: float | None
    assignment: list | None
    probes: list = field(default_factory=list)   # (y, found) in probe order


def minmax_binary_search(g: FactorGraph, solver: CspSolver | None = None,
                         ladder: RangeLadder | None = None, attempts: int = 2,
                         seed: int = 0) -> MinMaxResult:
    """Bisect the ladder with an incomplete CSP solver.

    A witness at y moves the upper end to the witness's own value; a failure
    after ``attempts`` tries is treated as infeasible at y and moves the lower
    end up. The answer is the best witness found, rechecked on ``g``.
    """
    solver = solver or perturbed_bp_solver()
    ladder = ladder or RangeLadder.from_graph(g)
    if not len(ladder):
        raise ValueError("min-max graph has no finite factor values")
    probes = []
    counter = [seed]

    def attempt(y):
        for _ in range(attempts):
            x = solver(py_reduce(g, y), counter[0])
            counter[0] += 1
            if x is not None:
                v = minmax_value(g, x)
                if v <= y:
                    probes.append((y, True))
                    return x, v
        probes.append((y, False))
        return None, None

    lo, hi = 0, len(ladder) - 1
    best_x, best_v = attempt(ladder[hi])
    if best_x is None:
        return MinMaxResult("infeasible", None, None, probes)
    if best_v == -np.inf:
        return MinMaxResult("solved", best_v, [int(a) for a in best_x], probes)
    hi = ladder.index(best_v)
    while lo < hi:
        mid = (lo + hi) // 2
        x, v = attempt(ladder[mid])
        if x is None:
            lo = mid + 1
        else:
            best_x, best_v = x, v
            if v == -np.inf:
                break
            hi = ladder.index(v)
    if best_v == ladder[0]:
        # the ladder holds finite values only; an all -inf assignment sits below it
        x, v = attempt(-np.inf)
        if x is not None:
            best_x, best_v = x, v
    return MinMaxResult("solved", best_v, [int(a) for a in best_x], probes)


def minsum_reduce(g: FactorGraph, ladder: RangeLadder | None = None) -> FactorGraph:
    """Min-sum graph with every finite value replaced by (|F| + 1) ** rank.

    The min-max identities map to the min-sum identities (-inf to 0, +inf
    stays +inf), so constraint kernels carry over unchanged.
    """
    ladder = ladder or RangeLadder.from_graph(g)
    if len(ladder) > MAX_LADDER_RANKS:
        raise ValueError(f"{len(ladder)} distinct values exceed {MAX_LADDER_RANKS}; use the binary search")
    base = len(g.factors) + 1
    if (len(ladder) - 1) * math.log2(base) > 1000:
        raise ValueError("rank exponents overflow double precision; use the binary search")
    vals = np.asarray(ladder.values, dtype=float)

    def remap(a):
        a = np.asarray(a, dtype=float)
        out = np.where(a == np.inf, np.inf, 0.0)
        fin = np.isfinite(a)
        if fin.any():
            ranks = np.searchsorted(vals, a[fin])
            out[fin] = np.power(float(base), ranks)
        return out

    out = []
    for f in g.factors:
        if f.is_dense:
            out.append(dense_factor(f.scope, remap(f.table)))
            continue
        k = f.kernel
        if k.kind == "InversePotts":
            diag = None if k.diag is None else float(remap([k.diag])[0])
            out.append(kernel_factor(f.scope, InversePotts(diag)))
        elif k.kind == "BandLimited":
            fwd, bwd = remap([k.fwd, k.bwd])
            out.append(kernel_factor(f.scope, BandLimited(k.n, fwd, bwd)))
        elif k.kind == "Local":
            out.append(kernel_factor(f.scope, Local(remap(k.values))))
        else:
            out.append(f)
    return FactorGraph(g.domains, out, semiring="min_sum", var_names=g.var_names)
