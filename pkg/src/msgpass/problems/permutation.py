"""Problems over permutations and graph mappings.

* bipartite matching (max-product) and the Bethe permanent (sum-product) on
  the redundant x/z model with pairwise consistency factors;
* TSP by min-sum message passing on binary edge variables, with degree
  factors from the start and subtour factors added by augmentation;
* bottleneck TSP by bisection over the time-step model's thresholded CSPs;
* graph morphisms (homo/mono/iso/super), orbit detection from endomorphism
  marginals, and max-sum graph alignment.

Graphs are given as ``(n, edges)`` with 0-based undirected edge pairs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import oracle
from ..bp import BPConfig, BPEngine, bethe_integral, extract_assignment
from ..factor_graph import (BandLimited, EdgeMap, FactorGraph, InversePotts, Local, NonEdgeMap,
                            dense_factor, kernel_factor)
from ..minmax import RangeLadder, minmax_binary_search, minmax_value, perturbed_bp_solver
from ..semiring import INF, MAX_PRODUCT, MIN_MAX, MIN_SUM, SUM_PRODUCT
from ..stochastic import DecimationPolicy, bp_decimate_solve, perturbed_bp_solve


def _adj(n: int, edges) -> np.ndarray:
    a = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop at node {i}")
        a[i, j] = a[j, i] = True
    return a


def _union_find_groups(n: int, pairs) -> list:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        parent[find(a)] = find(b)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(sorted(v) for v in groups.values())


# ------------------------------------------------------------------ matching

def build_matching(A, semiring=SUM_PRODUCT) -> FactorGraph:
    """Variables x_0..x_{N-1} (row i picks a column) then z_0..z_{N-1} (column j picks a row).

    Each (i, j) pair has a consistency factor on (x_i, z_j); both sides carry
    a local factor sqrt(A) so a consistent assignment scores prod_i A[i, x_i].
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matching needs a square matrix")
    if (A < 0).any():
        raise ValueError("matching weights must be non-negative")
    root = np.sqrt(A)
    factors = []
    a = np.arange(n)
    for i in range(n):
        for j in range(n):
            table = ((a[:, None] == j) == (a[None, :] == i)).astype(float)
            factors.append(dense_factor((i, n + j), table))
    for i in range(n):
        factors.append(kernel_factor((i,), Local(root[i, :])))
    for j in range(n):
        factors.append(kernel_factor((n + j,), Local(root[:, j])))
    names = [f"x{i}" for i in range(n)] + [f"z{j}" for j in range(n)]
    return FactorGraph([n] * (2 * n), factors, semiring, names)


@dataclass
class MatchingResult:
    permutation: list          # permutation[i] = column matched to row i
    value: float               # product of the matched entries
    converged: bool
    repaired: bool = False     # BP argmax was not a permutation and was completed greedily


def _greedy_permutation(scores: np.ndarray) -> list:
    n = scores.shape[0]
    perm = [-1] * n
    used = set()
    for flat in np.argsort(-scores, axis=None, kind="stable"):
        i, j = divmod(int(flat), n)
        if perm[i] < 0 and j not in used:
            perm[i] = j
            used.add(j)
    return perm


def solve_bipartite_matching(A, cfg: BPConfig | None = None) -> MatchingResult:
    """Max-weight (product) perfect matching by max-product BP."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    cfg = cfg or BPConfig(semiring=MAX_PRODUCT, schedule="var_sync", damping=0.5, max_iters=500)
    g = build_matching(A, cfg.semiring)
    st, conv = BPEngine(g, cfg).run()
    x = extract_assignment(st, s=MAX_PRODUCT)[:n]
    repaired = sorted(x) != list(range(n))
    if repaired:
        beliefs = np.array([np.asarray(b, dtype=float) for b in st.beliefs[:n]])
        x = _greedy_permutation(beliefs / np.maximum(beliefs.max(axis=1, keepdims=True), 1e-300))
    return MatchingResult(x, float(np.prod(A[np.arange(n), x])), conv, repaired)


def estimate_permanent(A, cfg: BPConfig | None = None) -> float | None:
    """Bethe estimate of perm(A) at a sum-product fixed point; None when BP does not converge."""
    cfg = cfg or BPConfig(semiring=SUM_PRODUCT, schedule="var_sync", damping=0.5,
                          max_iters=2000, eps=1e-10)
    g = build_matching(A, cfg.semiring)
    st, conv = BPEngine(g, cfg).run()
    if not conv:
        return None
    z = bethe_integral(g, SUM_PRODUCT, st)
    return None if z != z else float(z)


# ----------------------------------------------------------------------- TSP

@dataclass
class TspConfig:
    damping: float = 0.2
    max_iters: int = 200
    eps: float | None = None          # default: median of the off-diagonal distances
    decimate: float = 0.1             # fraction of N fixed per decimation step
    max_rounds: int = 500


@dataclass
class TourState:
    """Edges chosen by one round, their connected components and the subtour registry."""

    n: int
    selected: list
    components: list
    subtours: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        if len(self.components) != 1 or len(self.selected) != self.n:
            return False
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.selected:
            deg[i] += 1
            deg[j] += 1
        return bool((deg == 2).all())


@dataclass
class TspResult:
    tour: list
    length: float
    rounds: int
    subtours: list                    # node sets of the subtour factors, in the order added
    audit: list = field(default_factory=list)   # per added subtour: crossing edges of that round's solution
    fixed: int = 0                    # edges fixed by decimation
    completed: bool = False           # fallback completion was needed


def _components(n: int, edges) -> list:
    return _union_find_groups(n, edges)


def _second_smallest_excl(v: np.ndarray) -> np.ndarray:
    """For each k, the second smallest of v with v[k] removed (+inf if fewer than two remain)."""
    m = len(v)
    pad = np.concatenate([v, [INF, INF]]) if m < 3 else v
    order = np.argpartition(pad, 2)[:3]
    order = order[np.argsort(pad[order], kind="stable")]
    s2, s3 = pad[order[1]], pad[order[2]]
    out = np.full(m, s2)
    for k in order[:2]:
        if k < m:
            out[k] = s3
    return out


def tour_length(D, tour) -> float:
    D = np.asarray(D, dtype=float)
    return float(sum(D[tour[t], tour[(t + 1) % len(tour)]] for t in range(len(tour))))


def validate_tour(n: int, tour) -> tuple:
    if sorted(tour) != list(range(n)):
        return False, "not a permutation of the nodes"
    return True, "ok"


def _edges_to_tour(n: int, edges) -> list:
    nb = [[] for _ in range(n)]
    for i, j in edges:
        nb[i].append(j)
        nb[j].append(i)
    tour, prev = [0], -1
    while len(tour) < n:
        cur = tour[-1]
        nxt = nb[cur][0] if nb[cur][0] != prev else nb[cur][1]
        prev = cur
        tour.append(nxt)
    return tour


def _complete(n: int, D: np.ndarray, fixed: list) -> list:
    """Greedy edge completion of a degree <= 2, cycle-free edge set into a tour."""
    deg = np.zeros(n, dtype=int)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    chosen = list(fixed)
    for i, j in chosen:
        deg[i] += 1
        deg[j] += 1
        parent[find(i)] = find(j)
    cand = sorted(((D[i, j], i, j) for i in range(n) for j in range(i + 1, n)))
    for _, i, j in cand:
        if len(chosen) == n:
            break
        if deg[i] >= 2 or deg[j] >= 2 or (i, j) in chosen:
            continue
        if find(i) == find(j) and len(chosen) < n - 1:
            continue
        chosen.append((i, j))
        deg[i] += 1
        deg[j] += 1
        parent[find(i)] = find(j)
    return chosen


def solve_tsp(D, cfg: TspConfig | None = None) -> TspResult:
    """Augmentative min-sum message passing for the symmetric TSP.

    Binary variables live on all node pairs. Messages are normalized cost
    differences m(1) - m(0); a degree factor sends minus the second smallest
    of its other incoming messages, a subtour factor sends the same clipped
    at zero. Factors are visited in turn and send all their messages at once
    (three smallest incoming values are enough). The bias of an edge is its
    length plus incoming messages; negative bias means "in the tour".

    After each BP round the most preferred edges are taken greedily while
    keeping degrees <= 2. Closed cycles on strict subsets become new subtour
    factors (messages kept, new ones start at zero). When a round adds no new
    factor, a fraction of the chosen edges is fixed (decimation). The result
    is always a Hamiltonian tour.
    """
    cfg = cfg or TspConfig()
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if n < 3:
        raise ValueError("TSP needs at least 3 nodes")
    if n == 3:
        return TspResult([0, 1, 2], tour_length(D, [0, 1, 2]), 0, [])
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    eid = np.full((n, n), -1, dtype=int)
    for e, (i, j) in enumerate(pairs):
        eid[i, j] = eid[j, i] = e
    off = D[~np.eye(n, dtype=bool)]
    eps = float(np.median(off)) if cfg.eps is None else cfg.eps
    big = 1e3 * (float(np.abs(off).max()) + 1.0)
    base = np.array([D[i, j] for i, j in pairs])

    factors = []          # (edge ids, is_subtour)
    msgs = []
    for i in range(n):
        ids = np.array([eid[i, j] for j in range(n) if j != i])
        factors.append((ids, False))
        msgs.append(np.zeros(len(ids)))
    fixed = []            # decimated edges, always part of a partial tour
    fdeg = np.zeros(n, dtype=int)
    subtours, audit, seen = [], [], set()
    lam = cfg.damping

    def cost():
        c = base.copy()
        for i, j in fixed:
            c[eid[i, j]] = -big
        return c

    def extract(pref):
        deg = fdeg.copy()
        chosen = list(fixed)
        taken = set(fixed)
        for e in np.argsort(-pref, kind="stable"):
            if pref[e] <= 0:
                break
            i, j = pairs[e]
            if (i, j) in taken or deg[i] >= 2 or deg[j] >= 2:
                continue
            chosen.append((i, j))
            deg[i] += 1
            deg[j] += 1
        return chosen

    rounds = 0
    for rounds in range(1, cfg.max_rounds + 1):
        c = cost()
        bias = c.copy()
        for (ids, _), m in zip(factors, msgs):
            np.add.at(bias, ids, m)
        for _ in range(cfg.max_iters):
            delta = 0.0
            for (ids, sub), m in zip(factors, msgs):
                inc = bias[ids] - m
                new = -_second_smallest_excl(inc)
                if sub:
                    new = np.minimum(new, 0.0)
                new = np.clip(new, -big, big)
                d = new - m
                m += lam * d
                np.add.at(bias, ids, lam * d)
                delta = max(delta, float(np.abs(d).max()))
            if delta < eps:
                break
        pref = -bias
        chosen = extract(pref)
        state = TourState(n, chosen, _components(n, chosen), subtours)
        if state.feasible:
            tour = _edges_to_tour(n, chosen)
            return TspResult(tour, tour_length(D, tour), rounds, subtours, audit, len(fixed))
        added = 0
        deg = np.zeros(n, dtype=int)
        for i, j in chosen:
            deg[i] += 1
            deg[j] += 1
        for comp in state.components:
            S = frozenset(comp)
            if len(S) == n or len(S) < 3 or S in seen or not (deg[comp] == 2).all():
                continue
            inside = np.zeros(n, dtype=bool)
            inside[comp] = True
            ids = np.array([eid[i, j] for i in comp for j in range(n) if not inside[j]])
            crossing = sum(1 for i, j in chosen if inside[i] != inside[j])
            seen.add(S)
            subtours.append(sorted(S))
            audit.append(crossing)
            factors.append((ids, True))
            msgs.append(np.zeros(len(ids)))
            added += 1
        if added:
            continue
        # decimation: fix the most preferred chosen edges that keep a partial tour
        k = max(1, math.ceil(cfg.decimate * n))
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in fixed:
            parent[find(i)] = find(j)
        order = sorted((e for e in range(len(pairs)) if pairs[e] not in set(fixed)),
                       key=lambda e: (-pref[e], e))
        in_chosen = set(chosen)
        picks = [e for e in order if pairs[e] in in_chosen] + [e for e in order if pairs[e] not in in_chosen]
        newly = 0
        for e in picks:
            if newly >= k:
                break
            i, j = pairs[e]
            if fdeg[i] >= 2 or fdeg[j] >= 2:
                continue
            if find(i) == find(j) and len(fixed) < n - 1:
                continue
            fixed.append((i, j))
            fdeg[i] += 1
            fdeg[j] += 1
            parent[find(i)] = find(j)
            newly += 1
            if newly and pairs[e] not in in_chosen:
                break      # only one edge outside BP's choice per step
        if len(fixed) == n:
            tour = _edges_to_tour(n, fixed)
            return TspResult(tour, tour_length(D, tour), rounds, subtours, audit, len(fixed))
    edges = _complete(n, D, fixed)
    tour = _edges_to_tour(n, edges)
    return TspResult(tour, tour_length(D, tour), rounds, subtours, audit, len(fixed), completed=True)


# --------------------------------------------------------------- bottleneck

def build_btsp(D) -> FactorGraph:
    """Time-step model: x_i is the position of node i; pairwise band-limited factors."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if n < 3:
        raise ValueError("bottleneck TSP needs at least 3 nodes")
    factors = [kernel_factor((i, j), BandLimited(n, D[i, j], D[j, i]))
               for i in range(n) for j in range(i + 1, n)]
    return FactorGraph([n] * n, factors, MIN_MAX, [f"t{i}" for i in range(n)])


def btsp_lower_bound(D) -> float:
    """Max over nodes of the cheapest way to enter and leave them.

    Symmetric matrices: each node needs two distinct neighbours, so the bound
    is the largest second-nearest distance. Otherwise the largest of all the
    cheapest incoming and cheapest outgoing edges.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    M = D + np.diag(np.full(n, INF))
    if np.allclose(D, D.T):
        return float(np.sort(M, axis=1)[:, 1].max())
    return float(max(M.min(axis=0).max(), M.min(axis=1).max()))


def bottleneck(D, tour) -> float:
    D = np.asarray(D, dtype=float)
    return float(max(D[tour[t], tour[(t + 1) % len(tour)]] for t in range(len(tour))))


def positions_to_tour(x) -> list:
    return [int(i) for i in np.argsort(np.asarray(x), kind="stable")]


@dataclass
class BtspResult:
    status: str
    tour: list | None
    value: float | None
    lower_bound: float
    probes: list = field(default_factory=list)


def solve_btsp(D, solver=None, attempts: int = 2, seed: int = 0) -> BtspResult:
    """Bisection over the distances; each probe looks for a Hamiltonian cycle in G(D, y)."""
    g = build_btsp(D)
    res = minmax_binary_search(g, solver or perturbed_bp_solver(), RangeLadder.from_graph(g),
                               attempts=attempts, seed=seed)
    lb = btsp_lower_bound(D)
    if res.status != "solved":
        return BtspResult(res.status, None, None, lb, res.probes)
    tour = positions_to_tour(res.assignment)
    value = bottleneck(D, tour)
    assert value == minmax_value(g, res.assignment)
    return BtspResult("solved", tour, value, lb, res.probes)


# ---------------------------------------------------------------- morphisms

MORPHISMS = ("homo", "mono", "iso", "super")


def build_morphism(G, G2, mode: str = "homo", semiring=SUM_PRODUCT, prune_degree: bool = False) -> FactorGraph:
    """Mapping x_i in V' for every i in V.

    homo: edge factors only. mono: edge factors plus uniqueness on non-edges.
    iso: edge and non-edge factors. super: non-edge factors plus uniqueness on
    edges. ``prune_degree`` restricts x_i to targets of large enough degree
    (iso/mono only).
    """
    if mode not in MORPHISMS:
        raise ValueError(f"mode must be one of {MORPHISMS}")
    n, edges = G
    n2, edges2 = G2
    a, a2 = _adj(n, edges), _adj(n2, edges2)
    factors = []
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j]:
                k = {"homo": EdgeMap(a2), "mono": EdgeMap(a2), "iso": EdgeMap(a2), "super": InversePotts()}[mode]
            else:
                k = {"homo": None, "mono": InversePotts(), "iso": NonEdgeMap(a2), "super": NonEdgeMap(a2)}[mode]
            if k is not None:
                factors.append(kernel_factor((i, j), k))
    if prune_degree and mode in ("iso", "mono"):
        d, d2 = a.sum(axis=1), a2.sum(axis=1)
        one, zero = float(semiring.one_otimes), float(semiring.one_oplus)
        for i in range(n):
            factors.append(kernel_factor((i,), Local(np.where(d2 >= d[i], one, zero))))
    return FactorGraph([n2] * n, factors, semiring)


def validate_morphism(G, G2, mode: str, mapping) -> tuple:
    n, edges = G
    n2, edges2 = G2
    a, a2 = _adj(n, edges), _adj(n2, edges2)
    x = list(mapping)
    if len(x) != n or any(not 0 <= v < n2 for v in x):
        return False, "mapping has the wrong length or targets"
    if mode != "homo" and len(set(x)) != n:
        return False, "mapping is not injective"
    for i in range(n):
        for j in range(i + 1, n):
            img = a2[x[i], x[j]]
            if mode in ("homo", "mono", "iso") and a[i, j] and not img:
                return False, f"edge ({i}, {j}) not mapped to an edge"
            if mode in ("iso", "super") and not a[i, j] and img:
                return False, f"non-edge ({i}, {j}) mapped to an edge"
    return True, "ok"


@dataclass
class CountEstimate:
    estimate: float
    converged: bool


def count_homomorphisms(G, G2, mode: str = "homo", cfg: BPConfig | None = None) -> CountEstimate:
    """Bethe estimate of the number of mappings (exact on trees)."""
    cfg = cfg or BPConfig(semiring=SUM_PRODUCT, schedule="var_sync", damping=0.3,
                          max_iters=1000, eps=1e-10)
    g = build_morphism(G, G2, mode, SUM_PRODUCT)
    st, conv = BPEngine(g, cfg).run()
    return CountEstimate(bethe_integral(g, SUM_PRODUCT, st), conv)


def find_morphism(G, G2, mode: str = "homo", method: str = "perturbed-bp", seed: int = 0,
                  prune_degree: bool = False) -> list | None:
    """One mapping of the requested kind, certified by the validator, or None."""
    g = build_morphism(G, G2, mode, SUM_PRODUCT, prune_degree)
    if method == "perturbed-bp":
        res = perturbed_bp_solve(g, seed=seed)
        x = res.assignment if res.solved else None
    elif method == "bp-dec":
        res = bp_decimate_solve(g, DecimationPolicy(rho=0.1), seed=seed)
        x = res.assignment if res.status == "solved" else None
    else:
        raise ValueError(f"unknown method {method!r}")
    if x is not None and validate_morphism(G, G2, mode, x)[0]:
        return [int(v) for v in x]
    return None


# ------------------------------------------------------------------- orbits

def endomorphism_marginals(G, method: str = "exact", seed: int = 0, sweeps: int = 20000,
                           cfg: BPConfig | None = None) -> np.ndarray:
    """Row i holds p(x_i = k) under the uniform distribution over endomorphisms."""
    n, edges = G
    if method == "exact":
        res = oracle.exact_inference(build_morphism(G, G, "homo"), SUM_PRODUCT)
        return np.array(res.normalized_marginals())
    if method == "bp":
        cfg = cfg or BPConfig(semiring=SUM_PRODUCT, schedule="var_sync", damping=0.3,
                              max_iters=1000, eps=1e-10)
        st, _ = BPEngine(build_morphism(G, G, "homo"), cfg).run()
        P = np.array([np.asarray(b, dtype=float) for b in st.beliefs])
        return P / P.sum(axis=1, keepdims=True)
    if method == "gibbs":
        return _gibbs_marginals(n, edges, sweeps, seed)
    raise ValueError(f"unknown method {method!r}")


def _gibbs_marginals(n: int, edges, sweeps: int, seed: int) -> np.ndarray:
    """Single-site Gibbs over endomorphisms, started from the identity."""
    a = _adj(n, edges)
    nb = [np.flatnonzero(a[i]) for i in range(n)]
    rng = np.random.default_rng(seed)
    x = np.arange(n)
    counts = np.zeros((n, n))
    burn = sweeps // 10
    for t in range(sweeps):
        for i in rng.permutation(n):
            ok = np.ones(n, dtype=bool)
            for j in nb[i]:
                ok &= a[x[j]]
            choices = np.flatnonzero(ok)
            x[i] = choices[rng.integers(len(choices))]
        if t >= burn:
            counts[np.arange(n), x] += 1
    return counts / counts.sum(axis=1, keepdims=True)


ORBIT_TOL = {"exact": 1e-9, "bp": 1e-2, "gibbs": 1e-2}


def orbits_from_marginals(P: np.ndarray, tol: float) -> list:
    """Group i and j when row i equals row j and column i equals column j within tol."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    same = []
    for i in range(n):
        for j in range(i + 1, n):
            if np.abs(P[i] - P[j]).max() <= tol and np.abs(P[:, i] - P[:, j]).max() <= tol:
                same.append((i, j))
    return _union_find_groups(n, same)


def detect_orbits(G, method: str = "exact", tol: float | None = None, **kw) -> list:
    P = endomorphism_marginals(G, method, **kw)
    return orbits_from_marginals(P, ORBIT_TOL[method] if tol is None else tol)


@dataclass
class OrbitCheck:
    agree: bool
    predicted: list
    automorphism: list


def check_orbits(G, method: str = "exact", **kw) -> OrbitCheck:
    """Compare marginal-based orbits with the automorphism oracle (reports, never asserts)."""
    n, edges = G
    pred = detect_orbits(G, method, **kw)
    truth = oracle.automorphism_orbits(n, edges)
    return OrbitCheck(pred == truth, pred, truth)


# Seven-node graph where equal rows of the endomorphism marginals are not
# enough: nodes 1, 7 and 4 (1-based) share rows but 4 sits in its own orbit.
# Found by search over graphs symmetric under 1 <-> 7; see tests.
COUNTER_EXAMPLE = (7, [(0, 1), (0, 3), (0, 6), (1, 4), (1, 5), (2, 4), (2, 5), (2, 6), (3, 6)])


# ---------------------------------------------------------------- alignment

Pref = "float | np.ndarray | Callable"


def _pv(p, *args) -> float:
    if callable(p):
        return float(p(*args))
    if isinstance(p, np.ndarray):
        return float(p[args])
    return float(p)


@dataclass
class AlignmentPreferences:
    """Scores for mapping V into V' plus a NULL target; -inf forbids.

    node_match(i, k'), edge_match(i, j, k', l'), merge(i, j, k'),
    node_delete(i), edge_delete(i, j), edge_insert(k', l'). Each field is a
    constant, an array indexed by those arguments, or a callable.
    """

    node_match: object = 0.0
    edge_match: object = 1.0
    merge: object = 0.0
    node_delete: object = -INF
    edge_delete: object = -INF
    edge_insert: object = 0.0


def homomorphism_preferences() -> AlignmentPreferences:
    return AlignmentPreferences(0.0, 1.0, 0.0, -INF, -INF, 0.0)


def isomorphism_preferences() -> AlignmentPreferences:
    return AlignmentPreferences(0.0, 1.0, -INF, -INF, -INF, -INF)


def mcs_preferences() -> AlignmentPreferences:
    """Maximum-edge common subgraph."""
    return AlignmentPreferences(0.0, 1.0, -INF, 0.0, 0.0, 0.0)


def qap_preferences(flow, dist) -> AlignmentPreferences:
    F = np.asarray(flow, dtype=float)
    L = np.asarray(dist, dtype=float)
    return AlignmentPreferences(0.0, lambda i, j, k, l: F[i, j] * L[k, l], -INF, -INF, -INF, -INF)


def qap_graphs(flow, dist) -> tuple:
    """Graphs whose edges are the positive off-diagonal entries."""
    out = []
    for M in (np.asarray(flow, dtype=float), np.asarray(dist, dtype=float)):
        n = M.shape[0]
        out.append((n, [(i, j) for i in range(n) for j in range(i + 1, n) if M[i, j] > 0 or M[j, i] > 0]))
    return tuple(out)


def qap_objective(flow, dist, perm) -> float:
    F = np.asarray(flow, dtype=float)
    L = np.asarray(dist, dtype=float)
    p = np.asarray(perm)
    return float((F * L[np.ix_(p, p)]).sum())


def _edge_score(prefs, is_edge, a2, i, j, k, l) -> float:
    n2 = a2.shape[0]
    if k == n2 or l == n2:
        return 0.0
    if k == l:
        return _pv(prefs.merge, i, j, k)
    if is_edge:
        return _pv(prefs.edge_match, i, j, k, l) if a2[k, l] else _pv(prefs.edge_delete, i, j)
    return _pv(prefs.edge_insert, k, l) if a2[k, l] else 0.0


def build_alignment(G, G2, prefs: AlignmentPreferences) -> FactorGraph:
    """Min-sum graph whose costs are negated alignment scores; target n' is NULL."""
    n, edges = G
    n2, edges2 = G2
    a, a2 = _adj(n, edges), _adj(n2, edges2)
    d = n2 + 1
    factors = []
    for i in range(n):
        vals = [_pv(prefs.node_match, i, k) for k in range(n2)] + [_pv(prefs.node_delete, i)]
        factors.append(kernel_factor((i,), Local(-np.array(vals))))
    for i in range(n):
        for j in range(i + 1, n):
            t = np.array([[_edge_score(prefs, a[i, j], a2, i, j, k, l) for l in range(d)] for k in range(d)])
            if a[i, j] or np.any(t != 0):
                factors.append(dense_factor((i, j), -t))
    return FactorGraph([d] * n, factors, MIN_SUM)


def alignment_score(G, G2, prefs: AlignmentPreferences, mapping) -> float:
    """Total preference of a mapping (NULL written as None or n')."""
    n, edges = G
    n2, edges2 = G2
    a, a2 = _adj(n, edges), _adj(n2, edges2)
    x = [n2 if v is None else int(v) for v in mapping]
    total = 0.0
    for i in range(n):
        total += _pv(prefs.node_delete, i) if x[i] == n2 else _pv(prefs.node_match, i, x[i])
    for i in range(n):
        for j in range(i + 1, n):
            total += _edge_score(prefs, a[i, j], a2, i, j, x[i], x[j])
    return total


@dataclass
class AlignmentResult:
    status: str                 # solved | infeasible
    mapping: list | None        # target per node, None for NULL
    score: float


def solve_alignment(G, G2, prefs: AlignmentPreferences, cfg: BPConfig | None = None,
                    rho: float = 0.1, restarts: int = 10, seed: int = 0) -> AlignmentResult:
    """Max-sum alignment: damped min-sum BP on negated scores, then decimation.

    The first decimation pass fixes the most biased variables; the remaining
    ``restarts`` passes sample the fixed values from the beliefs. Loopy
    max-sum beliefs can tie or mislead on small dense instances, so the best
    native score over all candidates is kept.
    """
    n2 = G2[0]
    g = build_alignment(G, G2, prefs)
    cfg = cfg or BPConfig(semiring=MIN_SUM, schedule="var_sync", damping=0.2, max_iters=100, eps=1e-9)
    st, _ = BPEngine(g, cfg).run()
    cands = [extract_assignment(st, tie_seed=seed, s=MIN_SUM)]
    for r in range(restarts + 1):
        sel = "max_bias" if r == 0 else "sample_from_belief"
        res = bp_decimate_solve(g, DecimationPolicy(rho=rho, selection=sel), cfg=cfg, seed=seed + r)
        if res.assignment is not None:
            cands.append(res.assignment)
    best = None
    for c in cands:
        sc = alignment_score(G, G2, prefs, c)
        if best is None or sc > best[1]:
            best = (c, sc)
    x, sc = best
    if sc == -INF:
        return AlignmentResult("infeasible", None, -INF)
    return AlignmentResult("solved", [None if v == n2 else int(v) for v in x], sc)
