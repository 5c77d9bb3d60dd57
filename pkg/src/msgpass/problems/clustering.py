"""Clustering problems: K-medians, K-clustering, K-center and modularity.

K-medians is a min-sum model over "i follows j" edge variables. K-clustering
and K-center are min-max models solved by bisection over thresholded CSPs
(clique cover and set cover respectively). Modularity uses binary edge
variables with clique constraints added only once they are violated.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..bp import BPConfig, BPEngine
from ..factor_graph import (AtMostKofN, Consistency, FactorGraph, InversePotts, Leader, Local,
                            kernel_factor)
from ..kernels import clique_triangle_msg
from ..minmax import MinMaxResult, minmax_binary_search, perturbed_bp_solver
from ..semiring import INF, MIN_MAX, MIN_SUM
from .csp import GraphInstance, leader_variables


def _edges_of(A) -> GraphInstance:
    """Directed graph with an edge i -> j wherever A[i, j] is finite, i != j."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    edges = [(i, j) for i in range(n) for j in range(n) if i != j and np.isfinite(A[i, j])]
    return GraphInstance(n, edges, directed=True)


def _exemplar_model(A, semiring, exact_leader: bool, K: int | None) -> FactorGraph:
    """Leader, consistency and local factors on the follower variables x_(i,j)."""
    A = np.asarray(A, dtype=float)
    graph = _edges_of(A)
    names = leader_variables(graph)
    index = {nm: v for v, nm in enumerate(names)}
    s = semiring
    factors = []
    for i in range(graph.n):
        scope = tuple(index[nm] for nm in names if nm[0] == i)
        factors.append(kernel_factor(scope, Leader(exact=exact_leader)))
    for j in range(graph.n):
        followers = tuple(index[(i, j)] for i in range(graph.n) if i != j and (i, j) in index)
        if followers:
            factors.append(kernel_factor((index[(j, j)],) + followers, Consistency()))
    for v, (i, j) in enumerate(names):
        factors.append(kernel_factor((v,), Local([float(s.one_otimes), A[i, j]])))
    if K is not None:
        selves = tuple(index[(i, i)] for i in range(graph.n))
        factors.append(kernel_factor(selves, AtMostKofN(K)))
    return FactorGraph([2] * len(names), factors, s, names)


def _nearest(A, centers) -> list:
    A = np.asarray(A, dtype=float)
    cs = list(centers)
    return [i if i in cs else cs[int(np.argmin(A[i, cs]))] for i in range(A.shape[0])]


# ---------------------------------------------------------------- K-medians

def default_preference(A) -> np.ndarray:
    """A copy of A whose diagonal is the median off-diagonal finite distance."""
    A = np.array(A, dtype=float)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    off = off[np.isfinite(off)]
    np.fill_diagonal(A, float(np.median(off)) if len(off) else 0.0)
    return A


@dataclass
class ClusteringResult:
    status: str
    centers: list
    assignment: list          # cluster label (center index, or block index) per node
    objective: float
    extra: dict = field(default_factory=dict)


def kmedians_objective(A, centers) -> float:
    A = np.asarray(A, dtype=float)
    lab = _nearest(A, centers)
    return float(sum(A[i, lab[i]] for i in range(A.shape[0])))


def solve_kmedians(A, cfg: BPConfig | None = None, seed: int = 0) -> ClusteringResult:
    """Exemplar clustering by min-sum BP; A's diagonal is the cost of becoming a center.

    Exemplars are the nodes whose self variable prefers 1; every other node
    joins its nearest exemplar. When BP proposes no exemplar the node with the
    strongest self preference is used.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    g = _exemplar_model(A, MIN_SUM, exact_leader=True, K=None)
    cfg = cfg or BPConfig(semiring=MIN_SUM, schedule="var_sync", damping=0.5, max_iters=500,
                          eps=1e-9, seed=seed)
    state, _ = BPEngine(g, cfg).run()
    bias = {}
    for v, (i, j) in enumerate(g.var_names):
        if i == j:
            b = state.beliefs[v]
            bias[i] = float(b[1] - b[0]) if np.isfinite(b).all() else (-INF if b[0] == INF else INF)
    centers = [i for i in range(n) if bias[i] < 0]
    if not centers:
        centers = [min(range(n), key=lambda i: (bias[i], i))]
    lab = _nearest(A, centers)
    return ClusteringResult("solved", centers, lab, kmedians_objective(A, centers),
                            {"converged": state.converged, "iterations": state.iteration})


# ------------------------------------------------------------- K-clustering

def build_kclustering(A, K: int) -> FactorGraph:
    """Min-max model: x_i in 0..K-1; a pair in the same block costs A[i, j].

    The first node is pinned to block 0 to break the label symmetry.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    s = MIN_MAX
    factors = [kernel_factor((i, j), InversePotts(diag=A[i, j]))
               for i in range(n) for j in range(i + 1, n)]
    if n and K > 1:
        pin = np.full(K, float(s.one_oplus))
        pin[0] = float(s.one_otimes)
        factors.append(kernel_factor((0,), Local(pin)))
    return FactorGraph([K] * n, factors, s)


def kclustering_value(A, labels) -> float:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return max((A[i, j] for i in range(n) for j in range(i + 1, n) if labels[i] == labels[j]),
               default=-INF)


def solve_kclustering(A, K: int, solver=None, attempts: int = 2, seed: int = 0) -> ClusteringResult:
    """Minimise the largest within-block distance over partitions into at most K blocks."""
    g = build_kclustering(A, K)
    res: MinMaxResult = minmax_binary_search(g, solver or perturbed_bp_solver(), attempts=attempts,
                                             seed=seed)
    if res.assignment is None:
        return ClusteringResult("infeasible", [], [], INF, {"probes": res.probes})
    lab = res.assignment
    return ClusteringResult("solved", sorted(set(lab)), lab, kclustering_value(A, lab),
                            {"probes": res.probes})


# ----------------------------------------------------------------- K-center

def build_kcenter(A, K: int) -> FactorGraph:
    """Min-max model: node i uses center j at cost A[i, j]; at most K centers.

    A may be asymmetric; an infinite entry means i cannot use j.
    """
    return _exemplar_model(A, MIN_MAX, exact_leader=False, K=K)


def kcenter_radius(A, centers) -> float:
    A = np.asarray(A, dtype=float)
    if not centers:
        return INF
    return float(A[:, list(centers)].min(axis=1).max())


def solve_kcenter(A, K: int, solver=None, attempts: int = 2, seed: int = 0) -> ClusteringResult:
    A = np.asarray(A, dtype=float)
    g = build_kcenter(A, K)
    res = minmax_binary_search(g, solver or perturbed_bp_solver(), attempts=attempts, seed=seed)
    if res.assignment is None:
        return ClusteringResult("infeasible", [], [], INF, {"probes": res.probes})
    centers = sorted(i for (i, j), v in zip(g.var_names, res.assignment) if i == j and v == 1)
    return ClusteringResult("solved", centers, _nearest(A, centers), kcenter_radius(A, centers),
                            {"probes": res.probes, "witness_value": res.value})


# --------------------------------------------------------------- modularity

def load_karate() -> tuple:
    """(n, {(i, j): 1.0}) for the 34-node karate club graph."""
    text = resources.files("msgpass").joinpath("data/karate.edges").read_text()
    weights = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, b = map(int, line.split()[:2])
        weights[(min(a, b), max(a, b))] = 1.0
    return 34, weights


def _degrees(n: int, weights: dict) -> np.ndarray:
    d = np.zeros(n)
    for (i, j), w in weights.items():
        d[i] += w
        d[j] += w
    return d


def modularity(n: int, weights: dict, labels, zeta: float = 1.0) -> float:
    """Newman modularity with resolution zeta for an undirected weighted graph."""
    d = _degrees(n, weights)
    two_m = d.sum()
    if two_m == 0:
        return 0.0
    labels = list(labels)
    inside = sum(w for (i, j), w in weights.items() if labels[i] == labels[j])
    tot = {}
    for i in range(n):
        tot[labels[i]] = tot.get(labels[i], 0.0) + d[i]
    return float(2 * inside / two_m - zeta * sum(t * t for t in tot.values()) / two_m ** 2)


def build_sparse_null(n: int, weights: dict, alpha: float, seed: int = 0) -> dict:
    """Sampled null model with round(alpha * M) draws.

    Both endpoints are drawn with probability proportional to sqrt(degree) and
    the pair gains weight sqrt(d_i d_j), so the expected weight is
    proportional to d_i d_j. Draws with i == j are discarded. Weights are
    normalised to sum to 1.
    """
    rng = np.random.default_rng(seed)
    d = _degrees(n, weights)
    draws = int(round(alpha * len(weights)))
    if draws <= 0 or d.sum() == 0:
        return {}
    p = np.sqrt(d)
    p = p / p.sum()
    a = rng.choice(n, size=draws, p=p)
    b = rng.choice(n, size=draws, p=p)
    null = {}
    for i, j in zip(a.tolist(), b.tolist()):
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        null[key] = null.get(key, 0.0) + float(np.sqrt(d[i] * d[j]))
    z = sum(null.values())
    return {k: v / z for k, v in null.items()} if z > 0 else {}


def full_null(n: int, weights: dict) -> dict:
    """Every pair with weight d_i d_j, normalised to sum to 1."""
    d = _degrees(n, weights)
    null = {(i, j): d[i] * d[j] for i in range(n) for j in range(i + 1, n) if d[i] * d[j] > 0}
    z = sum(null.values())
    return {k: v / z for k, v in null.items()} if z > 0 else {}


def _triangles(pairs: list, index: dict) -> int:
    nb = {}
    for i, j in pairs:
        nb.setdefault(i, set()).add(j)
        nb.setdefault(j, set()).add(i)
    count = 0
    for i, j in pairs:
        count += sum(1 for k in nb[i] & nb[j] if k > j)
    return count


@dataclass
class ModularityResult:
    labels: list
    modularity: float
    rounds: int
    constraints_added: int
    total_triangles: int
    extra: dict = field(default_factory=dict)


def _components(n: int, pairs) -> list:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = {}
    return [roots.setdefault(find(i), len(roots)) for i in range(n)]


def solve_modularity(n: int, weights: dict, zeta: float = 1.0, alpha: float | None = None,
                     seed: int = 0, damping: float = 0.1, max_iters: int = 10,
                     eps: float | None = None, max_rounds: int = 1000) -> ModularityResult:
    """Modularity maximisation with clique constraints added by augmentation.

    Each edge of E plus the null model carries a binary variable with cost
    zeta * A_null - A when present. Each round runs up to ``max_iters``
    sequential min-sum sweeps over the edge variables; a variable's outgoing
    messages move a fraction ``damping`` of the way to their new values. The
    sweeps stop early once no cost bias moves by ``eps`` (default: median
    absolute cost). Edges with non-positive bias are kept; for every node,
    each pair of kept edges whose closing edge exists but is dropped yields a
    new triangle constraint, and messages restart from zero. Clusters are the
    connected components of kept edges and the reported modularity is exact.
    ``alpha=None`` uses the full null model.
    """
    wsum = sum(weights.values())
    A = {k: v / wsum for k, v in weights.items()} if wsum > 0 else {}
    null = full_null(n, weights) if alpha is None else build_sparse_null(n, weights, alpha, seed)
    pairs = sorted(set(A) | set(null))
    index = {p: v for v, p in enumerate(pairs)}
    cost = np.array([zeta * null.get(p, 0.0) - A.get(p, 0.0) for p in pairs])
    if eps is None:
        eps = float(np.median(np.abs(cost))) if len(cost) else 0.0
    adj = {}
    for i, j in pairs:
        adj.setdefault(i, set()).add(j)
        adj.setdefault(j, set()).add(i)
    tris = []                                  # triangles as triples of edge-variable indices
    var_tris = [[] for _ in pairs]             # per edge variable: (triangle, position)
    tri_set = set()
    bias = cost.copy()
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        vf = np.zeros((len(tris), 3))          # edge variable -> triangle, cost differences
        bias = cost.copy()
        for it in range(max_iters):
            delta = 0.0
            for v in range(len(pairs)):
                b = cost[v]
                msgs = []
                for t, p in var_tris[v]:
                    m = clique_triangle_msg(vf[t, (p + 1) % 3], vf[t, (p + 2) % 3])
                    msgs.append(m)
                    b += m
                delta = max(delta, abs(b - bias[v]))
                bias[v] = b
                for (t, p), m in zip(var_tris[v], msgs):
                    vf[t, p] = damping * (b - m) + (1 - damping) * vf[t, p]
            if it > 0 and delta < eps:
                break
        on = bias <= 0
        added = 0
        for i in range(n):
            kept = sorted(j for j in adj.get(i, ()) if on[index[(min(i, j), max(i, j))]])
            for j, k in itertools.combinations(kept, 2):
                jk = (min(j, k), max(j, k))
                if jk in index and not on[index[jk]]:
                    t = tuple(sorted((i, j, k)))
                    if t not in tri_set:
                        tri_set.add(t)
                        a, b, c = t
                        vs = (index[(a, b)], index[(b, c)], index[(a, c)])
                        for p, v in enumerate(vs):
                            var_tris[v].append((len(tris), p))
                        tris.append(vs)
                        added += 1
        if not added:
            break
    kept_pairs = [p for p, v in zip(pairs, bias <= 0) if v]
    labels = _components(n, kept_pairs)
    return ModularityResult(labels, modularity(n, weights, labels, zeta), rounds, len(tri_set),
                            _triangles(pairs, index), {"null_edges": len(null)})
