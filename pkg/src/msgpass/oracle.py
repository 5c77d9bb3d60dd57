"""Brute-force ground truth used to check the message-passing solvers.

Nothing here calls the message code: joint tables are built from factor
definitions and every answer comes from exhaustive enumeration or a classic
exact algorithm (Held-Karp, Ryser).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .factor_graph import FactorGraph
from .semiring import SemiringSpec, get_semiring

ENUM_CAP = 2 * 10**7


@dataclass
class ExactResult:
    integral: float
    marginals: list         # raw (+)-marginals, one vector per variable
    joint: np.ndarray | None = None

    def normalized_marginals(self) -> list:
        out = []
        for m in self.marginals:
            z = m.sum()
            out.append(m / z if z > 0 else m)
        return out


def joint_table(g: FactorGraph, s: SemiringSpec | str, cap: int = ENUM_CAP) -> np.ndarray:
    """(x) of every factor over the full assignment space, shape = domains."""
    s = get_semiring(s)
    size = math.prod(g.domains) if g.domains else 1
    if size > cap:
        raise ValueError(f"{size} assignments exceed the enumeration cap {cap}")
    n = g.num_vars
    joint = np.full(tuple(g.domains), float(s.one_otimes))
    for f in g.factors:
        t = f.dense(s, [g.domains[v] for v in f.scope], cap=cap)
        if not f.scope:
            joint = s.otimes(joint, float(np.asarray(t).reshape(-1)[0]))
            continue
        # move the factor's axes into place and broadcast
        order = np.argsort(f.scope)
        t = np.transpose(t, order)
        shape = [1] * n
        for v in f.scope:
            shape[v] = g.domains[v]
        joint = s.otimes(joint, t.reshape(shape))
    return np.asarray(joint, dtype=float)


def exact_inference(g: FactorGraph, s: SemiringSpec | str, cap: int = ENUM_CAP,
                    keep_joint: bool = False) -> ExactResult:
    s = get_semiring(s)
    joint = joint_table(g, s, cap)
    n = g.num_vars
    integral = float(s.reduce_oplus(joint)) if n else float(joint)
    margs = []
    for i in range(n):
        axes = tuple(a for a in range(n) if a != i)
        margs.append(np.asarray(s.reduce_oplus(joint, axis=axes) if axes else joint, dtype=float).reshape(-1))
    return ExactResult(integral, margs, joint if keep_joint else None)


def count_solutions(g: FactorGraph, cap: int = ENUM_CAP) -> int:
    joint = joint_table(g, "sum_product", cap)
    return int(np.count_nonzero(joint > 0))


def enumerate_solutions(g: FactorGraph, cap: int = ENUM_CAP) -> list:
    joint = joint_table(g, "sum_product", cap)
    return [tuple(int(v) for v in idx) for idx in np.argwhere(joint > 0)]


def exact_argopt(g: FactorGraph, s: SemiringSpec | str, cap: int = ENUM_CAP) -> tuple:
    """(best value, list of all optimal assignments) under the semiring order."""
    s = get_semiring(s)
    joint = joint_table(g, s, cap)
    best = float(s.reduce_oplus(joint))
    idx = np.argwhere(joint == best)
    return best, [tuple(int(v) for v in r) for r in idx]


# ------------------------------------------------------ warning propagation

def _patterns(d: int) -> list:
    return [p for p in range(1, 1 << d)]


def _bits(p: int, d: int) -> np.ndarray:
    return np.array([(p >> x) & 1 for x in range(d)], dtype=bool)


def enumerate_wp_fixed_points(g: FactorGraph, max_slots: int = 12) -> int:
    """Number of warning-propagation fixed points with no empty pattern on any edge.

    Factors must be constraints (values 0 or 1). Each factor-to-variable
    pattern is enumerated; variable-to-factor patterns follow from them and the
    fixed-point equations are checked directly.
    """
    E = g.num_edges
    if E > max_slots:
        raise ValueError(f"{E} pattern slots exceed the oracle limit {max_slots}")
    tables = [np.asarray(f.dense("sum_product", [g.domains[v] for v in f.scope]) > 0) for f in g.factors]
    choices = [_patterns(g.domains[g.edge_var[e]]) for e in range(E)]
    count = 0
    for combo in itertools.product(*choices):
        fv = [_bits(p, g.domains[g.edge_var[e]]) for e, p in enumerate(combo)]
        vf = []
        ok = True
        for e in range(E):
            i = g.edge_var[e]
            pat = np.ones(g.domains[i], dtype=bool)
            for e2 in g.var_edges[i]:
                if e2 != e:
                    pat &= fv[e2]
            if not pat.any():
                ok = False
                break
            vf.append(pat)
        if not ok:
            continue
        for fi, f in enumerate(g.factors):
            t = tables[fi]
            for pos, e in enumerate(g.factor_edges[fi]):
                allowed = t.copy()
                for p2, e2 in enumerate(g.factor_edges[fi]):
                    if p2 == pos:
                        continue
                    shape = [1] * t.ndim
                    shape[p2] = len(vf[e2])
                    allowed = allowed & vf[e2].reshape(shape)
                axes = tuple(a for a in range(t.ndim) if a != pos)
                out = allowed.any(axis=axes) if axes else allowed
                if not np.array_equal(out, fv[e]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            count += 1
    return count


# ---------------------------------------------------------- permanents

def exact_permanent(A) -> float:
    """Ryser's inclusion-exclusion formula with Gray-code updates, O(2^n n)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n == 0:
        return 1.0
    if n > 20:
        raise ValueError("exact permanent limited to n <= 20")
    row_sums = np.zeros(n)
    total = 0.0
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        j = (gray ^ prev_gray).bit_length() - 1
        if gray & (1 << j):
            row_sums += A[:, j]
        else:
            row_sums -= A[:, j]
        prev_gray = gray
        bits = bin(gray).count("1")
        term = np.prod(row_sums)
        total += term if (n - bits) % 2 == 0 else -term
    return float(total)


def naive_permanent(A) -> float:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return float(sum(np.prod([A[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n))))


# ---------------------------------------------------------------- graphs

def _adjacency(n: int, edges) -> np.ndarray:
    adj = np.zeros((n, n), dtype=bool)
    for a, b in edges:
        adj[a, b] = adj[b, a] = True
    return adj


def automorphisms(n: int, edges, prune: bool = True) -> list:
    """All automorphisms of an undirected graph by backtracking over images."""
    adj = _adjacency(n, edges)
    deg = adj.sum(axis=1)
    result = []
    image = [-1] * n
    used = [False] * n

    def extend(i):
        if i == n:
            result.append(tuple(image))
            return
        for c in range(n):
            if used[c] or (prune and deg[c] != deg[i]):
                continue
            if all(adj[i, j] == adj[c, image[j]] for j in range(i)):
                image[i] = c
                used[c] = True
                extend(i + 1)
                used[c] = False
        image[i] = -1

    extend(0)
    return result


def automorphism_orbits(n: int, edges, prune: bool = True) -> list:
    """Orbits of the automorphism group as a sorted list of sorted node lists."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for perm in automorphisms(n, edges, prune):
        for i, j in enumerate(perm):
            parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(sorted(v) for v in groups.values())


def homomorphism_count(n: int, edges, n2: int, edges2) -> int:
    """Maps V -> V' sending every edge to an edge, counted by backtracking."""
    adj2 = _adjacency(n2, edges2)
    nbrs = [[] for _ in range(n)]
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    image = [-1] * n

    def extend(i):
        if i == n:
            return 1
        total = 0
        for c in range(n2):
            if all(image[j] < 0 or adj2[c, image[j]] for j in nbrs[i] if j < i):
                image[i] = c
                total += extend(i + 1)
        image[i] = -1
        return total

    return extend(0)


# ------------------------------------------------------------ optimisation

def held_karp(D) -> tuple:
    """Exact TSP tour length and tour by dynamic programming over subsets."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if n <= 1:
        return 0.0, list(range(n))
    if n == 2:
        return float(D[0, 1] + D[1, 0]), [0, 1]
    if n > 16:
        raise ValueError("Held-Karp limited to n <= 16")
    full = 1 << (n - 1)
    cost = np.full((full, n - 1), np.inf)
    back = np.full((full, n - 1), -1, dtype=int)
    for j in range(n - 1):
        cost[1 << j, j] = D[0, j + 1]
    for mask in range(1, full):
        for j in range(n - 1):
            if not mask & (1 << j) or not np.isfinite(cost[mask, j]):
                continue
            base = cost[mask, j]
            for k in range(n - 1):
                if mask & (1 << k):
                    continue
                nm = mask | (1 << k)
                c = base + D[j + 1, k + 1]
                if c < cost[nm, k]:
                    cost[nm, k] = c
                    back[nm, k] = j
    last = full - 1
    ends = cost[last] + D[1:, 0]
    j = int(np.argmin(ends))
    best = float(ends[j])
    tour = []
    mask = last
    while j >= 0:
        tour.append(j + 1)
        pj = back[mask, j]
        mask ^= 1 << j
        j = pj
    tour.append(0)
    return best, tour[::-1]


def brute_force_tsp(D, bottleneck: bool = False) -> tuple:
    """Exhaustive search over tours starting at node 0 (sum or max objective)."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    best, best_tour = np.inf, None
    for perm in itertools.permutations(range(1, n)):
        if n > 2 and perm[0] > perm[-1]:
            continue
        tour = (0,) + perm
        legs = [D[tour[t], tour[(t + 1) % n]] for t in range(n)]
        val = max(legs) if bottleneck else sum(legs)
        if val < best:
            best, best_tour = val, list(tour)
    return float(best), best_tour


def kcenter_optimum(A, K: int) -> tuple:
    """Min over K-subsets of centers of the largest node-to-nearest-center distance.

    ``A[i, j]`` is the cost of node i using center j; a center serves itself at
    A[j, j].
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    best, arg = np.inf, None
    for centers in itertools.combinations(range(n), min(K, n)):
        val = float(A[:, list(centers)].min(axis=1).max())
        if val < best:
            best, arg = val, list(centers)
    return best, arg


def set_partitions(n: int, max_blocks: int):
    """Restricted-growth strings of length n with at most max_blocks blocks."""
    labels = [0] * n

    def rec(i, used):
        if i == n:
            yield tuple(labels)
            return
        for c in range(min(used + 1, max_blocks)):
            labels[i] = c
            yield from rec(i + 1, max(used, c + 1))

    if n == 0:
        yield ()
        return
    yield from rec(1, 1)


def kclustering_optimum(A, K: int) -> tuple:
    """Partition into at most K blocks minimising the largest within-block distance."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    best, arg = np.inf, None
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for lab in set_partitions(n, K):
        val = max((A[i, j] for i, j in pairs if lab[i] == lab[j]), default=-np.inf)
        if val < best:
            best, arg = val, list(lab)
    return float(best), arg


def packing_optimum(A, K: int) -> tuple:
    """K-subset maximising the smallest pairwise distance; returns (min-max value, subset).

    The min-max value is the negated packing distance.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    best, arg = np.inf, None
    for sub in itertools.combinations(range(n), K):
        val = max((-A[i, j] for i, j in itertools.combinations(sub, 2)), default=-np.inf)
        if val < best:
            best, arg = val, list(sub)
    return float(best), arg


def kmedians_optimum(A) -> tuple:
    """Exemplar set minimising sum of member-to-exemplar cost plus exemplar self-costs."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    best, arg = np.inf, None
    for r in range(1, n + 1):
        for ex in itertools.combinations(range(n), r):
            ex = list(ex)
            cost = float(A[ex, ex].sum())
            rest = [i for i in range(n) if i not in ex]
            if rest:
                cost += float(A[np.ix_(rest, ex)].min(axis=1).sum())
            if cost < best:
                best, arg = cost, ex
    return best, arg


def modularity_optimum(n: int, weights: dict) -> tuple:
    """Best modularity over all set partitions of a small graph (Bell-number scan)."""
    from .problems.clustering import modularity
    best, arg = -np.inf, None
    for lab in set_partitions(n, n):
        q = modularity(n, weights, lab)
        if q > best:
            best, arg = q, list(lab)
    return best, arg


def hamming_code_count(q: int, n: int, K: int, y: int) -> int:
    """Ordered K-tuples of q-ary words of length n with all pairwise distances >= y."""
    words = list(itertools.product(range(q), repeat=n))
    count = 0
    for tup in itertools.product(words, repeat=K):
        if all(sum(a != b for a, b in zip(tup[i], tup[j])) >= y
               for i in range(K) for j in range(i + 1, K)):
            count += 1
    return count
