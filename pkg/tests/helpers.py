"""Random instances and comparison helpers shared by the tests."""
import numpy as np

from msgpass.factor_graph import FactorGraph, dense_factor


def random_values(s, shape, rng, zeros: float = 0.0):
    """Random factor entries suited to the semiring; ``zeros`` is the chance of an annihilator."""
    if s.name in ("sum_product", "max_product"):
        v = rng.random(shape) + 0.05
    elif s.name == "or_and":
        v = rng.integers(0, 2, shape).astype(float)
    else:
        v = rng.normal(size=shape)
    if zeros:
        v = np.where(rng.random(shape) < zeros, s.one_oplus, v)
    return np.asarray(v, dtype=float)


def random_tree(s, rng, max_vars: int = 10, max_dom: int = 4) -> FactorGraph:
    """Pairwise tree plus optional unary factors, factors shuffled."""
    n = int(rng.integers(1, max_vars + 1))
    doms = [int(rng.integers(1, max_dom + 1)) for _ in range(n)]
    fs = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        fs.append(dense_factor((u, v), random_values(s, (doms[u], doms[v]), rng)))
    for v in range(n):
        if rng.random() < 0.5:
            fs.append(dense_factor((v,), random_values(s, (doms[v],), rng)))
    order = rng.permutation(len(fs))
    return FactorGraph(doms, [fs[i] for i in order], s)


def normalized(s, v):
    v = np.asarray(v, dtype=float)
    if s.name == "sum_product":
        t = v.sum()
        return v / t if t > 0 else v
    if s.name == "max_product":
        t = v.max()
        return v / t if t > 0 else v
    if s.name == "min_sum":
        m = v.min()
        return v - m if np.isfinite(m) else v
    return v


def close(a, b, rtol: float) -> bool:
    """Elementwise relative closeness; infinite entries must match exactly."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return False
    inf = ~np.isfinite(a) | ~np.isfinite(b)
    if not np.array_equal(a[inf], b[inf]):
        return False
    fa, fb = a[~inf], b[~inf]
    return bool(np.all(np.abs(fa - fb) <= rtol * np.maximum(1.0, np.maximum(np.abs(fa), np.abs(fb)))))


def random_euclidean(n: int, rng) -> np.ndarray:
    pts = rng.random((n, 2))
    return np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))


def random_symmetric(n: int, rng, integer: bool = True) -> np.ndarray:
    A = rng.integers(1, 100, (n, n)).astype(float) if integer else rng.random((n, n))
    A = np.triu(A, 1)
    A = A + A.T
    return A


def random_message(s, d, rng):
    v = random_values(s, (d,), rng)
    if rng.random() < 0.2:
        v[rng.integers(d)] = s.one_oplus
    return v


def kernel_cases(rng, count: int):
    """Yield (semiring, factor, per-scope domains, incoming messages) for random kernel factors."""
    from msgpass.factor_graph import (AtLeastKofN, AtMostKofN, BandLimited, CliqueTriangle, Consistency,
                                      EdgeMap, ExactlyKofN, Factor, InversePotts, Leader, Local,
                                      NonEdgeMap, Potts, Subtour, TspDegree)
    from msgpass.semiring import SEMIRING_NAMES, get_semiring

    made = 0
    while made < count:
        s = get_semiring(SEMIRING_NAMES[int(rng.integers(len(SEMIRING_NAMES)))])
        kind = int(rng.integers(14))
        if kind < 8:
            n = int(rng.integers(1, 8))
            K = int(rng.integers(0, n + 1))
            opts = [ExactlyKofN(K), AtLeastKofN(K), AtMostKofN(K), Consistency(), Leader(True),
                    Leader(False), TspDegree() if n >= 2 else Leader(True), Subtour()]
            if n == 3:
                opts.append(CliqueTriangle())
            k = opts[int(rng.integers(len(opts)))]
            doms = [2] * n
        else:
            q = int(rng.integers(1, 7))
            adj = rng.random((q, q)) < 0.5
            adj = adj | adj.T
            c = float(random_values(s, (1,), rng)[0])
            opts = [InversePotts(), InversePotts(c), EdgeMap(adj), NonEdgeMap(adj), Potts()]
            if q >= 3:
                opts.append(BandLimited(q, c, float(random_values(s, (1,), rng)[0])))
            k = opts[int(rng.integers(len(opts)))]
            doms = [q, q]
            if rng.random() < 0.1:
                k, doms = Local(random_values(s, (q,), rng)), [q]
        f = Factor(tuple(range(len(doms))), kernel=k)
        inc = [random_message(s, d, rng) for d in doms]
        made += 1
        yield s, f, doms, inc


def kernel_matches_dense(s, f, doms, inc, rtol: float = 1e-9) -> bool:
    from msgpass.kernels import dense_messages, factor_message, factor_messages

    table = f.dense(s, doms)
    fast = factor_messages(s, f, doms, inc)
    slow = dense_messages(s, table, inc)
    ok = all(close(normalized(s, a), normalized(s, b), rtol) for a, b in zip(fast, slow))
    for pos in range(len(doms)):
        one = factor_message(s, f, doms, inc, pos)
        ok = ok and close(normalized(s, one), normalized(s, slow[pos]), rtol)
    return ok


def two_cluster_points(rng, n: int = 10, gap: float = 10.0) -> np.ndarray:
    """Two well separated blobs; squared-distance matrix with a median-distance diagonal."""
    pts = np.vstack([rng.normal(size=(n // 2, 2)), rng.normal(size=(n - n // 2, 2)) + gap])
    return ((pts[:, None] - pts[None]) ** 2).sum(-1)
