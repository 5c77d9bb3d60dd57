"""Command line front end. Every solving subcommand prints one JSON result record.

Exit status: 0 when the answer was certified by the problem's validator or
the command is an estimator, 1 otherwise, 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import harness, io, oracle
from .bp import BPConfig, BPEngine, extract_assignment
from .minmax import bp_dec_solver, minmax_binary_search, perturbed_bp_solver
from .problems import clustering as clu
from .problems import csp
from .problems import permutation as perm
from .semiring import MIN_SUM
from .stochastic import DecimationPolicy, RestartPolicy, bp_decimate_solve, perturbed_bp_solve
from .survey import perturbed_sp_solve, sp_dec_solve


# Largest perturbed sweep budget by default: 10, 40, ..., 10240 (six attempts).
MAX_T = 10240


class Usage(Exception):
    pass


# ------------------------------------------------------------------ inputs

def _text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def read_graph(path: str) -> csp.GraphInstance:
    return io.parse_edges(_text(path))


def read_matrix(path: str) -> np.ndarray:
    """Distance or score matrix from a TSPLIB file (.tsp) or a CSV matrix."""
    text = _text(path)
    if path.endswith(".tsp") or text.lstrip().startswith("NAME"):
        return io.parse_tsplib(text).D
    return io.parse_matrix_csv(text)


def _pair(g: csp.GraphInstance) -> tuple:
    return g.n, list(g.edges)


def _csp_solve(g, method: str, seed: int, max_T: int | None):
    """(assignment or None, iterations) for the named CSP method."""
    if method == "perturbed-bp":
        r = perturbed_bp_solve(g, seed=seed, restart=RestartPolicy(max_T=max_T))
        return r.assignment, r.iterations
    if method == "perturbed-sp":
        r = perturbed_sp_solve(g, seed=seed, restart=RestartPolicy(max_T=max_T))
        return r.assignment, r.iterations
    if method == "bp-dec":
        r = bp_decimate_solve(g, DecimationPolicy(rho=0.1), seed=seed)
        return (r.assignment if r.status == "solved" else None), r.rounds
    if method in ("sp-dec-s", "sp-dec-c"):
        r = sp_dec_solve(g, flavor=method[-1], seed=seed)
        return (r.assignment if r.status == "solved" else None), r.sp_iterations
    raise Usage(f"unknown method {method!r}")


def _minmax_solver(method: str):
    return bp_dec_solver() if method == "bp-dec" else perturbed_bp_solver()


def _status(ok: bool, x) -> str:
    if x is None:
        return "unsolved"
    return "solved" if ok else "invalid"


# ---------------------------------------------------------------- commands

def cmd_solve_sat(a):
    cnf = io.parse_cnf(_text(a.input))
    x, it = _csp_solve(csp.build_sat(cnf), a.method, a.seed, a.max_T)
    ok, sat = csp.validate_sat(cnf, x) if x is not None else (False, None)
    return io.result_record(_status(ok, x), sat, x, it, certified=ok)


def cmd_solve_col(a):
    graph = read_graph(a.input)
    if a.k is None:
        k, x = csp.chromatic_number(graph, lambda g: _csp_solve(g, a.method, a.seed, a.max_T)[0])
        ok = x is not None and csp.validate_coloring(graph, k, x)[0]
        return io.result_record(_status(ok, x), k, x, None, certified=ok)
    x, it = _csp_solve(csp.build_coloring(graph, a.k), a.method, a.seed, a.max_T)
    ok = x is not None and csp.validate_coloring(graph, a.k, x)[0]
    return io.result_record(_status(ok, x), a.k if ok else None, x, it, certified=ok)


def cmd_clique_cover(a):
    graph = read_graph(a.input)
    x, it = _csp_solve(csp.build_clique_cover(graph, a.k), a.method, a.seed, a.max_T)
    ok = x is not None and csp.validate_clique_cover(graph, a.k, x)[0]
    return io.result_record(_status(ok, x), len(set(x)) if ok else None, x, it, certified=ok)


def _cover(a, directed: bool):
    g0 = read_graph(a.input)
    graph = csp.GraphInstance(g0.n, g0.edges, directed=directed)
    fg = csp.build_set_cover(graph, a.k) if directed else csp.build_dominating_set(graph, a.k)
    x, it = _csp_solve(fg, a.method, a.seed, a.max_T)
    if x is None:
        return io.result_record("unsolved", None, None, it)
    D = csp.decode_leaders(fg, x)
    ok, size = csp.validate_set_cover(graph, a.k, D)
    return io.result_record(_status(ok, D), size, D, it, certified=ok)


def cmd_set_cover(a):
    return _cover(a, True)


def cmd_dominating_set(a):
    return _cover(a, False)


def _min_sum_subset(fg, seed: int):
    st, _ = BPEngine(fg, BPConfig(semiring=MIN_SUM, schedule="var_sync", damping=0.5,
                                  max_iters=500, eps=1e-9, seed=seed)).run()
    x = extract_assignment(st, tie_seed=seed, s=MIN_SUM)
    return [i for i, v in enumerate(x) if v == 1], st.iteration


def cmd_independent_set(a):
    graph = read_graph(a.input)
    S, it = _min_sum_subset(csp.build_max_independent_set(graph), a.seed)
    chosen = set(S)
    for u, v in sorted(graph.edges):              # drop one end of any violated edge
        if u in chosen and v in chosen:
            chosen.discard(max(u, v))
    S = sorted(chosen)
    ok, size = csp.validate_independent_set(graph, S)
    return io.result_record(_status(ok, S), size, S, it, certified=ok)


def cmd_vertex_cover(a):
    graph = read_graph(a.input)
    S, it = _min_sum_subset(csp.build_min_vertex_cover(graph), a.seed)
    chosen = set(S)
    for u, v in sorted(graph.edges):              # cover any uncovered edge
        if u not in chosen and v not in chosen:
            chosen.add(min(u, v))
    S = sorted(chosen)
    ok, size = csp.validate_vertex_cover(graph, S)
    return io.result_record(_status(ok, S), size, S, it, certified=ok)


def cmd_pack(a):
    A = read_matrix(a.input)
    g = csp.build_packing_binary(A, a.k)
    res = minmax_binary_search(g, _minmax_solver(a.method), attempts=a.attempts, seed=a.seed)
    if res.assignment is None:
        return io.result_record("infeasible", None, None, len(res.probes))
    chosen = [i for i, v in enumerate(res.assignment) if v == 1]
    ok, dmin = csp.validate_packing(A, a.k, chosen)
    return io.result_record(_status(ok, chosen), dmin, chosen, len(res.probes), certified=ok)


def cmd_sphere_pack(a):
    g = csp.build_sphere_packing_hamming(a.q, a.n, a.k, a.y)
    r = perturbed_bp_solve(g, seed=a.seed, restart=RestartPolicy(max_T=a.max_T))
    if not r.solved:
        return io.result_record("unsolved", None, None, r.iterations)
    words = csp.decode_code(r.assignment, a.n, a.k)
    ok, dmin = csp.validate_code(words, a.y)
    return io.result_record(_status(ok, words), dmin, words, r.iterations, certified=ok)


def cmd_kmedians(a):
    A = read_matrix(a.input)
    if a.preference is not None:
        A = A.copy()
        np.fill_diagonal(A, a.preference)
    res = clu.solve_kmedians(A, seed=a.seed)
    ok = res.objective == clu.kmedians_objective(A, res.centers) and len(res.centers) > 0
    return io.result_record(res.status, res.objective, res.assignment, res.extra.get("iterations"),
                            certified=ok, centers=res.centers)


def cmd_kclustering(a):
    A = read_matrix(a.input)
    res = clu.solve_kclustering(A, a.k, _minmax_solver(a.method), a.attempts, a.seed)
    ok = (res.status == "solved" and len(set(res.assignment)) <= a.k
          and res.objective == clu.kclustering_value(A, res.assignment))
    return io.result_record(res.status, res.objective, res.assignment,
                            len(res.extra.get("probes", [])), certified=ok)


def cmd_kcenter(a):
    A = read_matrix(a.input)
    res = clu.solve_kcenter(A, a.k, _minmax_solver(a.method), a.attempts, a.seed)
    ok = (res.status == "solved" and 0 < len(res.centers) <= a.k
          and res.objective == clu.kcenter_radius(A, res.centers))
    return io.result_record(res.status, res.objective, res.assignment,
                            len(res.extra.get("probes", [])), certified=ok, centers=res.centers)


def cmd_modularity(a):
    if a.input:
        g = read_graph(a.input)
        w = g.weights or [1.0] * len(g.edges)
        n, weights = g.n, {(min(u, v), max(u, v)): float(x) for (u, v), x in zip(g.edges, w)}
    else:
        n, weights = clu.load_karate()
    res = clu.solve_modularity(n, weights, zeta=a.zeta, alpha=a.alpha, seed=a.seed)
    q = clu.modularity(n, weights, res.labels, a.zeta)
    ok = abs(q - res.modularity) < 1e-9
    return io.result_record("solved", res.modularity, res.labels, res.rounds, certified=ok,
                            constraints_added=res.constraints_added,
                            total_triangles=res.total_triangles)


def cmd_match(a):
    A = read_matrix(a.input)
    res = perm.solve_bipartite_matching(A)
    ok = sorted(res.permutation) == list(range(A.shape[0]))
    return io.result_record("solved" if ok else "invalid", res.value, res.permutation, None,
                            certified=ok, converged=res.converged, repaired=res.repaired)


def cmd_permanent(a):
    A = read_matrix(a.input)
    est = perm.estimate_permanent(A)
    return io.result_record("estimated" if est is not None else "not-converged", est, None, None,
                            certified=False, estimator=True)


def cmd_tsp(a):
    D = read_matrix(a.input)
    res = perm.solve_tsp(D)
    ok, _ = perm.validate_tour(D.shape[0], res.tour)
    length = perm.tour_length(D, res.tour)
    return io.result_record(_status(ok, res.tour), length, res.tour, res.rounds, certified=ok,
                            subtours=len(res.subtours), fixed=res.fixed, completed=res.completed)


def cmd_btsp(a):
    D = read_matrix(a.input)
    res = perm.solve_btsp(D, _minmax_solver(a.method), a.attempts, a.seed)
    if res.tour is None:
        return io.result_record(res.status, None, None, len(res.probes), lower_bound=res.lower_bound)
    ok = perm.validate_tour(D.shape[0], res.tour)[0] and perm.bottleneck(D, res.tour) == res.value
    return io.result_record(_status(ok, res.tour), res.value, res.tour, len(res.probes),
                            certified=ok, lower_bound=res.lower_bound)


def cmd_morph(a):
    G, G2 = _pair(read_graph(a.input)), _pair(read_graph(a.target))
    if a.count:
        est = perm.count_homomorphisms(G, G2, a.mode)
        return io.result_record("estimated", est.estimate, None, None, certified=False,
                                estimator=True, converged=est.converged)
    x = perm.find_morphism(G, G2, a.mode, a.method, a.seed)
    ok = x is not None and perm.validate_morphism(G, G2, a.mode, x)[0]
    return io.result_record(_status(ok, x), None, x, None, certified=ok)


def cmd_orbits(a):
    G = _pair(read_graph(a.input))
    chk = perm.check_orbits(G, a.method, seed=a.seed) if a.method == "gibbs" else perm.check_orbits(G, a.method)
    return io.result_record("solved", len(chk.predicted), chk.predicted, None, certified=chk.agree,
                            automorphism_orbits=chk.automorphism)


PRESETS = {"homo": perm.homomorphism_preferences, "iso": perm.isomorphism_preferences,
           "mcs": perm.mcs_preferences}


def cmd_align(a):
    G, G2 = _pair(read_graph(a.input)), _pair(read_graph(a.target))
    prefs = PRESETS[a.preset]()
    res = perm.solve_alignment(G, G2, prefs, restarts=a.restarts, seed=a.seed)
    if res.mapping is None:
        return io.result_record(res.status, None, None, None)
    score = perm.alignment_score(G, G2, prefs, res.mapping)
    ok = res.status == "solved" and np.isfinite(score) and abs(score - res.score) < 1e-9
    return io.result_record(res.status, res.score, res.mapping, None, certified=ok)


def cmd_gen(a):
    if a.kind == "ksat":
        text = io.write_cnf(csp.generate_random_ksat(a.n, a.alpha, a.k, a.seed),
                            f"random {a.k}-SAT n={a.n} alpha={a.alpha} seed={a.seed}")
    elif a.kind == "kcol":
        text = io.write_edges(csp.generate_random_kcol(a.n, a.alpha, a.k, a.seed))
    else:
        rng = np.random.default_rng(a.seed)
        coords = np.round(rng.random((a.n, 2)) * a.scale)
        text = io.write_tsplib(io.TspInstance(f"rand{a.n}_{a.seed}", io.euc_2d(coords), coords, "EUC_2D"))
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return None


def cmd_oracle(a):
    if a.problem == "sat":
        cnf = io.parse_cnf(_text(a.input))
        sols = oracle.enumerate_solutions(csp.build_sat(cnf))
        return io.result_record("solved" if sols else "unsat", len(sols),
                                list(sols[0]) if sols else None, None, certified=True)
    if a.problem == "permanent":
        return io.result_record("solved", oracle.exact_permanent(read_matrix(a.input)), None, None,
                                certified=True)
    if a.problem in ("tsp", "btsp"):
        D = read_matrix(a.input)
        if a.problem == "tsp":
            val, tour = oracle.held_karp(D)
            tour = tour[:D.shape[0]]
        else:
            val, tour = oracle.brute_force_tsp(D, bottleneck=True)
        return io.result_record("solved", val, tour, None, certified=True)
    g = read_graph(a.input)
    orbits = oracle.automorphism_orbits(g.n, list(g.edges))
    return io.result_record("solved", len(orbits), orbits, None, certified=True)


def cmd_bench(a):
    params = {"n": a.n, "alpha": a.alpha, "K": a.k}
    spec = harness.GridSpec(a.generator, params, a.solvers, list(range(a.seed, a.seed + a.seeds)),
                            max_T=a.max_T, workers=a.workers)
    rows = harness.run_grid(spec)
    summary = harness.summarize(rows)
    if a.table:
        print(harness.format_table(summary))
        return None
    return {"schema": io.SCHEMA, "rows": harness.rows_as_dicts(rows), "summary": summary}


# ------------------------------------------------------------------ parser

CSP_METHODS = ("perturbed-bp", "bp-dec", "sp-dec-s", "sp-dec-c", "perturbed-sp")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="msgpass", description="Message-passing combinatorial solvers.")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_, inp=True, seed=True):
        sp = sub.add_parser(name, help=help_)
        if inp:
            sp.add_argument("--input", "-i", required=True, help="instance file ('-' for stdin)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(fn=fn)
        return sp

    def csp_opts(sp, k_required=True):
        sp.add_argument("--k", type=int, required=k_required)
        sp.add_argument("--method", choices=CSP_METHODS, default="perturbed-bp")
        sp.add_argument("--max-T", dest="max_T", type=int, default=MAX_T,
                        help="largest perturbed sweep budget")

    def minmax_opts(sp, with_k=True):
        if with_k:
            sp.add_argument("--k", type=int, required=True)
        sp.add_argument("--method", choices=("perturbed-bp", "bp-dec"), default="perturbed-bp")
        sp.add_argument("--attempts", type=int, default=2, help="solver tries per probe")

    sp = cmd("solve-sat", cmd_solve_sat, "satisfy a DIMACS CNF formula")
    sp.add_argument("--method", choices=CSP_METHODS, default="perturbed-bp")
    sp.add_argument("--max-T", dest="max_T", type=int, default=MAX_T)
    csp_opts(cmd("solve-col", cmd_solve_col, "K-colour a graph (chromatic search without --k)"),
             k_required=False)
    csp_opts(cmd("clique-cover", cmd_clique_cover, "cover the nodes with K cliques"))
    csp_opts(cmd("set-cover", cmd_set_cover, "induced K-set-cover of a directed graph"))
    csp_opts(cmd("dominating-set", cmd_dominating_set, "dominating set of size at most K"))
    cmd("independent-set", cmd_independent_set, "maximum independent set (min-sum BP)")
    cmd("vertex-cover", cmd_vertex_cover, "minimum vertex cover (min-sum BP)")
    minmax_opts(cmd("pack", cmd_pack, "choose K points maximising the smallest distance"))
    sp = cmd("sphere-pack", cmd_sphere_pack, "K q-ary words of length n at distance >= y", inp=False)
    for flag, default in (("--q", 2), ("--n", None), ("--k", None), ("--y", None)):
        sp.add_argument(flag, type=int, default=default, required=default is None)
    sp.add_argument("--max-T", dest="max_T", type=int, default=MAX_T)
    sp = cmd("kmedians", cmd_kmedians, "exemplar clustering of a distance matrix")
    sp.add_argument("--preference", type=float, default=None, help="cost of becoming a center")
    minmax_opts(cmd("kclustering", cmd_kclustering, "K blocks minimising the largest in-block distance"))
    minmax_opts(cmd("kcenter", cmd_kcenter, "K centers minimising the largest distance"))
    sp = cmd("modularity", cmd_modularity, "modularity clustering (karate club without --input)", inp=False)
    sp.add_argument("--input", "-i", default=None)
    sp.add_argument("--zeta", type=float, default=1.0, help="resolution")
    sp.add_argument("--alpha", type=float, default=None, help="sampled null-model density")
    cmd("match", cmd_match, "maximum-product bipartite matching", seed=False)
    cmd("permanent", cmd_permanent, "Bethe estimate of the permanent", seed=False)
    cmd("tsp", cmd_tsp, "travelling salesman tour", seed=False)
    minmax_opts(cmd("btsp", cmd_btsp, "bottleneck travelling salesman tour"), with_k=False)
    sp = cmd("morph", cmd_morph, "find or count graph morphisms")
    sp.add_argument("--target", "-t", required=True)
    sp.add_argument("--mode", choices=perm.MORPHISMS, default="homo")
    sp.add_argument("--method", choices=("perturbed-bp", "bp-dec"), default="perturbed-bp")
    sp.add_argument("--count", action="store_true", help="Bethe estimate of the number of mappings")
    sp = cmd("orbits", cmd_orbits, "node orbits from endomorphism marginals")
    sp.add_argument("--method", choices=("exact", "bp", "gibbs"), default="exact")
    sp = cmd("align", cmd_align, "graph alignment by max-sum BP")
    sp.add_argument("--target", "-t", required=True)
    sp.add_argument("--preset", choices=sorted(PRESETS), default="iso")
    sp.add_argument("--restarts", type=int, default=10)
    sp = cmd("gen", cmd_gen, "write a random instance", inp=False)
    sp.add_argument("kind", choices=("ksat", "kcol", "tsp"))
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=4.2)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--scale", type=float, default=1000.0, help="coordinate range for tsp")
    sp.add_argument("--output", "-o", default=None)
    sp = cmd("oracle", cmd_oracle, "exact answer by enumeration", seed=False)
    sp.add_argument("problem", choices=("sat", "permanent", "tsp", "btsp", "orbits"))
    sp = cmd("bench", cmd_bench, "run a generator x solver x seed grid", inp=False)
    sp.add_argument("--generator", choices=sorted(harness.GENERATORS), default="ksat")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--alpha", type=float, default=3.8)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--solvers", nargs="+", choices=CSP_METHODS, default=["perturbed-bp"])
    sp.add_argument("--seeds", type=int, default=5, help="number of seeds, starting at --seed")
    sp.add_argument("--max-T", dest="max_T", type=int, default=MAX_T)
    sp.add_argument("--workers", type=int, default=None, help="capped by MP_THREADS")
    sp.add_argument("--table", action="store_true", help="print a summary table instead of JSON")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        rec = a.fn(a)
    except (io.FormatError, Usage, OSError, ValueError) as e:
        print(f"msgpass {a.command}: error: {e}", file=sys.stderr)
        return 2
    if rec is None:
        return 0
    if "status" in rec:
        rec["time_ms"] = round((time.perf_counter() - t0) * 1e3, 3)
    print(json.dumps(rec))
    if a.command == "bench" or rec.get("estimator"):
        return 0
    return 0 if rec.get("certified") else 1


if __name__ == "__main__":
    sys.exit(main())
