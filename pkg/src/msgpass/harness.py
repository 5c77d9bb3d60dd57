"""Experiment grids: (generator x solver x seed) cells, one row per cell.

Generators and solvers are looked up by name so cells can be shipped to
worker processes. Rows come back in grid order whatever the worker count;
only ``time_ms`` differs between reruns.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from .problems.csp import (build_coloring, build_sat, generate_random_kcol, generate_random_ksat,
                           validate_coloring, validate_sat)
from .stochastic import DecimationPolicy, RestartPolicy, bp_decimate_solve, perturbed_bp_solve
from .survey import perturbed_sp_solve, sp_dec_solve


def _ksat(n, alpha, K=3, seed=0):
    cnf = generate_random_ksat(n, alpha, K, seed)
    return build_sat(cnf), lambda x: validate_sat(cnf, x)[0]


def _kcol(n, alpha, K=3, seed=0):
    graph = generate_random_kcol(n, alpha, K, seed)
    return build_coloring(graph, K), lambda x: validate_coloring(graph, K, x)[0]


GENERATORS = {"ksat": _ksat, "kcol": _kcol}


def _solve(name: str, g, seed: int, max_T: int | None):
    """(assignment or None, iterations) for a named CSP solver."""
    if name == "perturbed-bp":
        r = perturbed_bp_solve(g, seed=seed, restart=RestartPolicy(max_T=max_T))
        return r.assignment, r.iterations
    if name == "perturbed-sp":
        r = perturbed_sp_solve(g, seed=seed, restart=RestartPolicy(max_T=max_T))
        return r.assignment, r.iterations
    if name == "bp-dec":
        r = bp_decimate_solve(g, DecimationPolicy(rho=0.1), seed=seed)
        return (r.assignment if r.status == "solved" else None), r.rounds
    if name in ("sp-dec-s", "sp-dec-c"):
        r = sp_dec_solve(g, flavor=name[-1], seed=seed)
        return (r.assignment if r.status == "solved" else None), r.sp_iterations
    raise KeyError(f"unknown solver {name!r}")


SOLVER_NAMES = ("perturbed-bp", "bp-dec", "sp-dec-s", "sp-dec-c", "perturbed-sp")


@dataclass
class GridSpec:
    generator: str
    params: dict
    solvers: list
    seeds: list
    max_T: int | None = None
    workers: int | None = None


@dataclass
class Row:
    generator: str
    solver: str
    seed: int
    success: bool
    iterations: int
    time_ms: float
    params: dict = field(default_factory=dict)


def run_cell(generator: str, params: dict, solver: str, seed: int, max_T: int | None = None) -> Row:
    g, check = GENERATORS[generator](seed=seed, **params)
    t0 = time.perf_counter()
    x, iters = _solve(solver, g, seed, max_T)
    ms = (time.perf_counter() - t0) * 1e3
    ok = x is not None and bool(check(x))
    return Row(generator, solver, int(seed), ok, int(iters), ms, dict(params))


def _run_cell(args):
    return run_cell(*args)


def max_workers() -> int:
    env = os.environ.get("MP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_grid(spec: GridSpec) -> list:
    if spec.generator not in GENERATORS:
        raise KeyError(f"unknown generator {spec.generator!r}")
    for s in spec.solvers:
        if s not in SOLVER_NAMES:
            raise KeyError(f"unknown solver {s!r}")
    cells = [(spec.generator, spec.params, s, seed, spec.max_T)
             for s in spec.solvers for seed in spec.seeds]
    workers = min(spec.workers or max_workers(), max_workers(), len(cells))
    if workers <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_cell, cells))


def summarize(rows: list) -> list:
    """Per (generator, solver): runs, success rate, mean iterations of the successful runs."""
    out, groups = [], {}
    for r in rows:
        groups.setdefault((r.generator, r.solver), []).append(r)
    for (gen, solver), rs in groups.items():
        ok = [r for r in rs if r.success]
        out.append({"generator": gen, "solver": solver, "runs": len(rs),
                    "success_rate": len(ok) / len(rs),
                    "avg_iters": sum(r.iterations for r in ok) / len(ok) if ok else None,
                    "avg_time_ms": sum(r.time_ms for r in rs) / len(rs)})
    return out


def format_table(summary: list) -> str:
    head = f"{'generator':<10}{'solver':<14}{'runs':>6}{'success':>9}{'avg iters':>11}{'avg ms':>10}"
    lines = [head, "-" * len(head)]
    for s in summary:
        it = "-" if s["avg_iters"] is None else f"{s['avg_iters']:.1f}"
        lines.append(f"{s['generator']:<10}{s['solver']:<14}{s['runs']:>6}{s['success_rate']:>9.2f}"
                     f"{it:>11}{s['avg_time_ms']:>10.1f}")
    return "\n".join(lines)


def rows_as_dicts(rows: list) -> list:
    return [asdict(r) for r in rows]
