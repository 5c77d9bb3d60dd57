"""Factor graphs, generators and validators for constraint problems.

Binary variables use index 1 for "true"/"selected". Validators check the
problem's own constraints directly and never consult a factor graph.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..factor_graph import (AtLeastKofN, AtMostKofN, Consistency, ExactlyKofN, Factor, FactorGraph,
                            InversePotts, Leader, Local, dense_factor, kernel_factor)
from ..semiring import INF, MIN_MAX, MIN_SUM, SUM_PRODUCT, SemiringSpec, get_semiring


@dataclass
class CnfInstance:
    num_vars: int
    clauses: list          # each clause: list of nonzero ints, DIMACS style (1-indexed, sign = polarity)

    def __post_init__(self):
        for c in self.clauses:
            if not c:
                raise ValueError("empty clause")
            vs = [abs(l) for l in c]
            if any(l == 0 or abs(l) > self.num_vars for l in c):
                raise ValueError(f"literal out of range in clause {c}")
            if len(set(vs)) != len(vs):
                raise ValueError(f"repeated variable in clause {c}")


@dataclass
class GraphInstance:
    n: int
    edges: list                        # (i, j) pairs, 0-indexed
    weights: list | None = None        # per edge, optional
    directed: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = [(int(a), int(b)) for a, b in self.edges]
        for a, b in self.edges:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a}, {b}) out of range")
            if a == b:
                raise ValueError(f"self-loop at node {a}")

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for a, b in self.edges:
            adj[a, b] = True
            if not self.directed:
                adj[b, a] = True
        return adj

    def complement(self) -> "GraphInstance":
        adj = self.adjacency()
        edges = [(i, j) for i in range(self.n) for j in range(i + 1, self.n) if not adj[i, j]]
        return GraphInstance(self.n, edges)


# ------------------------------------------------------------------- SAT

def clause_table(k: int, falsifying: Sequence[int]) -> np.ndarray:
    t = np.ones((2,) * k)
    t[tuple(falsifying)] = 0.0
    return t


def build_sat(cnf: CnfInstance) -> FactorGraph:
    """One dense factor per clause, zero only at the clause's falsifying assignment."""
    factors = []
    for c in cnf.clauses:
        scope = tuple(abs(l) - 1 for l in c)
        falsify = [0 if l > 0 else 1 for l in c]
        factors.append(dense_factor(scope, clause_table(len(c), falsify)))
    return FactorGraph([2] * cnf.num_vars, factors, SUM_PRODUCT)


def validate_sat(cnf: CnfInstance, x: Sequence[int]) -> tuple:
    """(all clauses satisfied, number of satisfied clauses)."""
    sat = sum(any((x[abs(l) - 1] == 1) == (l > 0) for l in c) for c in cnf.clauses)
    return sat == len(cnf.clauses), sat


def example_sat() -> CnfInstance:
    """Three variables i, j, k and five clauses whose solutions are TTT, FFF and FFT."""
    i, j, k = 1, 2, 3
    return CnfInstance(3, [[-i, -j, k], [-i, j, k], [i, -j, k], [-i, j, -k], [i, -j, -k]])


def generate_random_ksat(N: int, alpha: float, K: int = 3, seed: int = 0) -> CnfInstance:
    """round(alpha * N) clauses, each over K distinct random variables with random signs."""
    rng = np.random.default_rng(seed)
    M = int(round(alpha * N))
    clauses = []
    for _ in range(M):
        vs = rng.choice(N, size=K, replace=False) + 1
        signs = rng.integers(0, 2, size=K) * 2 - 1
        clauses.append([int(v * s) for v, s in zip(vs, signs)])
    return CnfInstance(N, clauses)


# --------------------------------------------------------------- colouring

def build_coloring(graph: GraphInstance, K: int, clamp_first: bool = False) -> FactorGraph:
    """Inverse-Potts factor on every edge; optionally pin the first node to color 0."""
    factors = [kernel_factor((a, b), InversePotts()) for a, b in _undirected(graph)]
    if clamp_first and graph.n:
        v = np.zeros(K)
        v[0] = 1.0
        factors.append(kernel_factor((0,), Local(v)))
    return FactorGraph([K] * graph.n, factors, SUM_PRODUCT)


def _undirected(graph: GraphInstance) -> list:
    seen, out = set(), []
    for a, b in graph.edges:
        key = (min(a, b), max(a, b))
        if key not in seen:
            seen.add(key)
            out.append(key)
    return out


def validate_coloring(graph: GraphInstance, K: int, colors: Sequence[int]) -> tuple:
    bad = sum(colors[a] == colors[b] for a, b in graph.edges)
    ok = bad == 0 and all(0 <= c < K for c in colors) and len(colors) == graph.n
    return ok, bad


def generate_random_kcol(N: int, alpha: float, K: int = 3, seed: int = 0) -> GraphInstance:
    """round(alpha * N / 2) distinct edges between uniformly drawn node pairs."""
    rng = np.random.default_rng(seed)
    M = int(round(alpha * N / 2))
    if M > N * (N - 1) // 2:
        raise ValueError("too many edges requested")
    seen, edges = set(), []
    while len(edges) < M:
        a, b = (int(v) for v in rng.choice(N, size=2, replace=False))
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        edges.append((a, b))
    return GraphInstance(N, edges, meta={"K": K})


def chromatic_number(graph: GraphInstance, solver) -> tuple:
    """Smallest K for which ``solver(factor_graph)`` returns an assignment (binary search).

    The search range is [1, max degree + 1]; returns (K, colouring).
    """
    deg = graph.adjacency().sum(axis=1) if graph.n else np.zeros(0)
    lo, hi = 1, int(deg.max()) + 1 if graph.n else 1
    best = None
    while lo < hi:
        mid = (lo + hi) // 2
        x = solver(build_coloring(graph, mid))
        if x is not None and validate_coloring(graph, mid, x)[0]:
            hi, best = mid, x
        else:
            lo = mid + 1
    if best is None or len(set(best)) > lo:
        best = solver(build_coloring(graph, lo))
    return lo, best


# ------------------------------------------------------------ clique cover

def build_clique_cover(graph: GraphInstance, K: int, clamp_first: bool = False) -> FactorGraph:
    """Nodes not joined by an edge must take different clique labels."""
    return build_coloring(graph.complement(), K, clamp_first)


def validate_clique_cover(graph: GraphInstance, K: int, labels: Sequence[int]) -> tuple:
    adj = graph.adjacency()
    bad = sum(1 for i in range(graph.n) for j in range(i + 1, graph.n)
              if labels[i] == labels[j] and not adj[i, j])
    return bad == 0 and all(0 <= c < K for c in labels), bad


# ---------------------------------------------------- set cover / dominating

def leader_variables(graph: GraphInstance) -> list:
    """Binary variables (i, j): node i picks node j as its leader, for i -> j edges and i = j."""
    adj = graph.adjacency()
    names = []
    for i in range(graph.n):
        names.append((i, i))
        for j in range(graph.n):
            if adj[i, j]:
                names.append((i, j))
    return names


def _leader_structure(graph: GraphInstance, exact_leader: bool, s: SemiringSpec):
    names = leader_variables(graph)
    index = {nm: v for v, nm in enumerate(names)}
    factors = []
    for i in range(graph.n):
        scope = tuple(index[nm] for nm in names if nm[0] == i)
        factors.append(kernel_factor(scope, Leader(exact=exact_leader)))
    for j in range(graph.n):
        followers = tuple(index[(i, j)] for i in range(graph.n) if i != j and (i, j) in index)
        if followers:
            factors.append(kernel_factor((index[(j, j)],) + followers, Consistency()))
    return names, index, factors


def build_set_cover(graph: GraphInstance, K: int) -> FactorGraph:
    """Induced K-set-cover of a directed graph: leader, consistency and at-most-K factors."""
    names, index, factors = _leader_structure(graph, False, SUM_PRODUCT)
    selves = tuple(index[(i, i)] for i in range(graph.n))
    factors.append(kernel_factor(selves, AtMostKofN(K)))
    return FactorGraph([2] * len(names), factors, SUM_PRODUCT, names)


def build_dominating_set(graph: GraphInstance, K: int) -> FactorGraph:
    undirected = GraphInstance(graph.n, graph.edges, graph.weights, directed=False)
    return build_set_cover(undirected, K)


def decode_leaders(g: FactorGraph, x: Sequence[int]) -> list:
    return sorted(nm[0] for nm, v in zip(g.var_names, x) if nm[0] == nm[1] and v == 1)


def validate_set_cover(graph: GraphInstance, K: int | None, D: Sequence[int]) -> tuple:
    """Every node is in D or has an edge into D; |D| <= K. Objective |D|."""
    adj = graph.adjacency()
    Dset = set(D)
    covered = all(i in Dset or any(adj[i, j] for j in Dset) for i in range(graph.n))
    ok = covered and (K is None or len(Dset) <= K)
    return ok, len(Dset)


def build_min_set_cover(graph: GraphInstance, costs: Sequence[float] | None = None) -> FactorGraph:
    """Min-sum variant: leader and consistency constraints plus a cost for each chosen leader."""
    s = MIN_SUM
    names, index, factors = _leader_structure(graph, False, s)
    costs = np.ones(graph.n) if costs is None else np.asarray(costs, dtype=float)
    for i in range(graph.n):
        factors.append(kernel_factor((index[(i, i)],), Local([0.0, costs[i]])))
    return FactorGraph([2] * len(names), factors, s, names)


def set_cover_example() -> tuple:
    """Six-node directed graph where D = {i, k} is an induced 2-set-cover.

    Nodes 0..5 stand for i, j, k, l, m, n.
    """
    i, j, k, l, m, n = range(6)
    edges = [(n, i), (m, i), (i, j), (j, k), (l, k), (m, l), (n, l)]
    return GraphInstance(6, edges, directed=True), [i, k]


# --------------------------------------------- independent set, vertex cover

def build_max_independent_set(graph: GraphInstance, weights: Sequence[float] | None = None) -> FactorGraph:
    """Min-sum: cost -w_i for a selected node, pairwise 1(x_i = 0 or x_j = 0) on edges."""
    s = MIN_SUM
    w = np.ones(graph.n) if weights is None else np.asarray(weights, dtype=float)
    factors = [kernel_factor((i,), Local([0.0, -w[i]])) for i in range(graph.n)]
    t = np.array([[s.one_otimes, s.one_otimes], [s.one_otimes, s.one_oplus]])
    factors += [dense_factor((a, b), t) for a, b in _undirected(graph)]
    return FactorGraph([2] * graph.n, factors, s)


def build_min_vertex_cover(graph: GraphInstance, weights: Sequence[float] | None = None) -> FactorGraph:
    """Min-sum: cost w_i for a selected node, pairwise 1(x_i = 1 or x_j = 1) on edges."""
    s = MIN_SUM
    w = np.ones(graph.n) if weights is None else np.asarray(weights, dtype=float)
    factors = [kernel_factor((i,), Local([0.0, w[i]])) for i in range(graph.n)]
    t = np.array([[s.one_oplus, s.one_otimes], [s.one_otimes, s.one_otimes]])
    factors += [dense_factor((a, b), t) for a, b in _undirected(graph)]
    return FactorGraph([2] * graph.n, factors, s)


def validate_independent_set(graph: GraphInstance, S: Sequence[int], weights=None) -> tuple:
    Sset = set(S)
    ok = not any(a in Sset and b in Sset for a, b in graph.edges)
    w = np.ones(graph.n) if weights is None else np.asarray(weights, dtype=float)
    return ok, float(sum(w[i] for i in Sset))


def validate_vertex_cover(graph: GraphInstance, S: Sequence[int], weights=None) -> tuple:
    Sset = set(S)
    ok = all(a in Sset or b in Sset for a, b in graph.edges)
    w = np.ones(graph.n) if weights is None else np.asarray(weights, dtype=float)
    return ok, float(sum(w[i] for i in Sset))


# ---------------------------------------------------------------- packing

def build_packing_binary(A, K: int) -> FactorGraph:
    """Min-max model: x_i = 1 selects point i; pairwise -A_ij when both selected, exactly K selected."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    s = MIN_MAX
    factors = []
    for i in range(n):
        for j in range(i + 1, n):
            t = np.full((2, 2), float(s.one_otimes))
            t[1, 1] = -A[i, j]
            factors.append(dense_factor((i, j), t))
    factors.append(kernel_factor(tuple(range(n)), ExactlyKofN(K)))
    return FactorGraph([2] * n, factors, s)


def build_packing_categorical(A, K: int) -> FactorGraph:
    """Min-max model: K variables over the N points; pairwise -A between distinct choices."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    t = -A.copy()
    np.fill_diagonal(t, INF)
    factors = [dense_factor((a, b), t) for a in range(K) for b in range(a + 1, K)]
    return FactorGraph([n] * K, factors, MIN_MAX)


def validate_packing(A, K: int, chosen: Sequence[int]) -> tuple:
    """(K distinct points, smallest pairwise distance)."""
    A = np.asarray(A, dtype=float)
    ch = list(chosen)
    ok = len(set(ch)) == K == len(ch)
    dmin = min((A[i, j] for i, j in itertools.combinations(ch, 2)), default=INF)
    return ok, float(dmin)


# -------------------------------------------------------- Hamming packing

def build_sphere_packing_hamming(q: int, n: int, K: int, y: int) -> FactorGraph:
    """K code words of n q-ary digits pairwise at Hamming distance >= y.

    Variables 0..K*n-1 are the digits (word-major); then one binary z per word
    pair and digit marks a difference, and an at-least-y-of-n factor sits on
    each pair's z vector.
    """
    z_table = np.zeros((q, q, 2))
    for a in range(q):
        for b in range(q):
            z_table[a, b, int(a != b)] = 1.0
    domains = [q] * (K * n)
    names = [("x", w, k) for w in range(K) for k in range(n)]
    factors = []
    for w1, w2 in itertools.combinations(range(K), 2):
        zs = []
        for k in range(n):
            z = len(domains)
            domains.append(2)
            names.append(("z", w1, w2, k))
            zs.append(z)
            factors.append(dense_factor((w1 * n + k, w2 * n + k, z), z_table))
        factors.append(kernel_factor(tuple(zs), AtLeastKofN(y)))
    return FactorGraph(domains, factors, SUM_PRODUCT, names)


def decode_code(x: Sequence[int], n: int, K: int) -> list:
    return [list(x[w * n:(w + 1) * n]) for w in range(K)]


def validate_code(words: Sequence[Sequence[int]], y: int) -> tuple:
    """(all pairwise Hamming distances >= y, smallest pairwise distance)."""
    dmin = min((sum(a != b for a, b in zip(u, v)) for u, v in itertools.combinations(words, 2)),
               default=len(words[0]) if words else 0)
    return dmin >= y, dmin
