"""Variables with finite domains, factors, and their bipartite adjacency.

A factor is either a dense table (row-major over its scope) or a sparse
kernel: a named family of factors whose values are computed analytically and
whose messages have fast paths in ``msgpass.kernels``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .semiring import INF, SemiringSpec, get_semiring

DEFAULT_TABLE_CAP = 10**6


class Kernel:
    """Base class for sparse factor kinds."""

    kind = "kernel"
    binary = False
    arity: int | None = None

    def params(self) -> dict:
        return {}

    def check(self, domains: Sequence[int]) -> None:
        if self.arity is not None and len(domains) != self.arity:
            raise ValueError(f"{self.kind} needs {self.arity} variables, got {len(domains)}")
        if self.binary and any(d != 2 for d in domains):
            raise ValueError(f"{self.kind} requires binary variables")

    def table(self, s: SemiringSpec, domains: Sequence[int]) -> np.ndarray:
        """Dense table, vectorised over all joint assignments."""
        grids = np.indices(tuple(domains)) if domains else np.zeros((0,), dtype=int)
        return self._table(s, grids, tuple(domains))

    def _table(self, s, grids, domains):
        raise NotImplementedError

    def value(self, s: SemiringSpec, xs: Sequence[int]) -> float:
        grids = np.array(xs, dtype=int).reshape((len(xs),))
        return float(self._table(s, grids, tuple(1 for _ in xs)))

    def __eq__(self, other):
        return type(self) is type(other) and _params_equal(self.params(), other.params())

    def __hash__(self):
        return hash(self.kind)

    def __repr__(self):
        ps = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({ps})"


def _params_equal(a: dict, b: dict) -> bool:
    if a.keys() != b.keys():
        return False
    for k in a:
        va, vb = a[k], b[k]
        if isinstance(va, np.ndarray) or isinstance(vb, np.ndarray):
            if not np.array_equal(np.asarray(va), np.asarray(vb)):
                return False
        elif va != vb:
            return False
    return True


class _CountKernel(Kernel):
    binary = True
    mode = "exactly"

    def __init__(self, k: int):
        self.k = int(k)

    def params(self):
        return {"k": self.k}

    def check(self, domains):
        super().check(domains)
        if self.k < 0:
            raise ValueError("K must be non-negative")
        if self.mode == "exactly" and self.k > len(domains):
            raise ValueError(f"K={self.k} exceeds scope size {len(domains)}")

    def satisfied(self, count):
        if self.mode == "exactly":
            return count == self.k
        if self.mode == "at_least":
            return count >= self.k
        return count <= self.k

    def _table(self, s, grids, domains):
        count = grids.sum(axis=0) if grids.ndim > 0 and len(grids) else np.int64(0)
        return s.indicator(np.asarray(self.satisfied(count)))


class ExactlyKofN(_CountKernel):
    kind = "ExactlyKofN"
    mode = "exactly"


class AtLeastKofN(_CountKernel):
    kind = "AtLeastKofN"
    mode = "at_least"


class AtMostKofN(_CountKernel):
    kind = "AtMostKofN"
    mode = "at_most"


class TspDegree(_CountKernel):
    """Exactly two of the incident edge variables are on."""

    kind = "TspDegree"
    mode = "exactly"

    def __init__(self):
        super().__init__(2)

    def params(self):
        return {}


class Subtour(_CountKernel):
    """At least two edges leave a node subset."""

    kind = "Subtour"
    mode = "at_least"

    def __init__(self):
        super().__init__(2)

    def params(self):
        return {}


class Leader(_CountKernel):
    """Each node picks at least one (or exactly one) leader among its edge variables."""

    kind = "Leader"

    def __init__(self, exact: bool = False):
        self.exact = bool(exact)
        self.mode = "exactly" if self.exact else "at_least"
        super().__init__(1)

    def params(self):
        return {"exact": self.exact}


class Consistency(Kernel):
    """Scope (x_{i:i}, x_{j:i}, ...): if anyone follows i then i follows itself."""

    kind = "Consistency"
    binary = True

    def check(self, domains):
        super().check(domains)
        if len(domains) < 1:
            raise ValueError("Consistency needs the self variable")

    def _table(self, s, grids, domains):
        if len(grids) == 1:
            return s.indicator(np.ones(grids[0].shape, dtype=bool))
        others = grids[1:].sum(axis=0)
        return s.indicator(np.asarray((grids[0] == 1) | (others == 0)))


class CliqueTriangle(Kernel):
    """Three edge variables of a triangle: zero, one or all three are on."""

    kind = "CliqueTriangle"
    binary = True
    arity = 3

    def _table(self, s, grids, domains):
        return s.indicator(np.asarray(grids.sum(axis=0) != 2))


class Potts(Kernel):
    kind = "Potts"
    arity = 2

    def _table(self, s, grids, domains):
        return s.indicator(np.asarray(grids[0] == grids[1]))


class InversePotts(Kernel):
    """1(x_i != x_j); when ``diag`` is given the equal cells take that value instead."""

    kind = "InversePotts"
    arity = 2

    def __init__(self, diag: float | None = None):
        self.diag = None if diag is None else float(diag)

    def params(self):
        return {"diag": self.diag}

    def check(self, domains):
        super().check(domains)
        if domains[0] != domains[1]:
            raise ValueError("InversePotts needs equal domains")

    def _table(self, s, grids, domains):
        eq = np.asarray(grids[0] == grids[1])
        t = np.asarray(s.indicator(~eq), dtype=float)
        if self.diag is not None:
            t = np.where(eq, self.diag, t)
        return t


class EdgeMap(Kernel):
    """Pairwise map constraint: (x_i, x_j) must be an edge of the target graph."""

    kind = "EdgeMap"
    arity = 2

    def __init__(self, adj):
        self.adj = np.asarray(adj, dtype=bool)

    def params(self):
        return {"adj": self.adj}

    def check(self, domains):
        super().check(domains)
        n = self.adj.shape[0]
        if tuple(domains) != (n, n):
            raise ValueError("EdgeMap domains must match target graph size")

    def mask(self):
        return self.adj

    def _table(self, s, grids, domains):
        return s.indicator(self.mask()[grids[0], grids[1]])


class NonEdgeMap(EdgeMap):
    """(x_i, x_j) must be a non-edge of the target graph with x_i != x_j."""

    kind = "NonEdgeMap"

    def mask(self):
        return ~self.adj & ~np.eye(self.adj.shape[0], dtype=bool)


class BandLimited(Kernel):
    """Time-step pairwise factor on two positions modulo n.

    Equal positions give the annihilator, consecutive positions give ``fwd``
    (first variable right before the second) or ``bwd``; anything else is
    neutral.
    """

    kind = "BandLimited"
    arity = 2

    def __init__(self, n: int, fwd: float, bwd: float):
        self.n = int(n)
        self.fwd = float(fwd)
        self.bwd = float(bwd)

    def params(self):
        return {"n": self.n, "fwd": self.fwd, "bwd": self.bwd}

    def check(self, domains):
        super().check(domains)
        if self.n < 3 or tuple(domains) != (self.n, self.n):
            raise ValueError("BandLimited needs two variables over n >= 3 positions")

    def _table(self, s, grids, domains):
        a, b = grids[0], grids[1]
        n = self.n
        t = np.full(np.shape(a), float(s.one_otimes))
        t = np.where((b - a) % n == 1, self.fwd, t)
        t = np.where((a - b) % n == 1, self.bwd, t)
        t = np.where(a == b, float(s.one_oplus), t)
        return t


class Local(Kernel):
    """Unary factor with explicit values."""

    kind = "Local"
    arity = 1

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)

    def params(self):
        return {"values": self.values}

    def check(self, domains):
        super().check(domains)
        if domains[0] != len(self.values):
            raise ValueError("Local values must match the domain size")

    def _table(self, s, grids, domains):
        return self.values[grids[0]]


KERNELS = {cls.kind: cls for cls in (ExactlyKofN, AtLeastKofN, AtMostKofN, TspDegree, Subtour,
                                     Leader, Consistency, CliqueTriangle, Potts, InversePotts,
                                     EdgeMap, NonEdgeMap, BandLimited, Local)}


@dataclass(frozen=True, eq=False)
class Factor:
    scope: tuple
    table: np.ndarray | None = None
    kernel: Kernel | None = None

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(v) for v in self.scope))
        if (self.table is None) == (self.kernel is None):
            raise ValueError("a factor has either a table or a kernel")
        if self.table is not None:
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))
        if len(set(self.scope)) != len(self.scope):
            raise ValueError(f"repeated variable in scope {self.scope}")

    @property
    def is_dense(self) -> bool:
        return self.table is not None

    def value(self, s: SemiringSpec, xs: Sequence[int]) -> float:
        if self.table is not None:
            return float(self.table[tuple(xs)])
        return self.kernel.value(s, xs)

    def dense(self, s: SemiringSpec, domains: Sequence[int], cap: int = DEFAULT_TABLE_CAP) -> np.ndarray:
        if self.table is not None:
            return self.table
        return materialize_kernel(self.kernel, self.scope, domains, s, cap=cap)

    def describe(self) -> str:
        return "table" if self.table is not None else self.kernel.kind


def dense_factor(scope, table) -> Factor:
    return Factor(tuple(scope), table=np.asarray(table, dtype=float))


def kernel_factor(scope, kernel: Kernel) -> Factor:
    return Factor(tuple(scope), kernel=kernel)


class FactorGraph:
    """Variables 0..n-1 with domain sizes, and a list of factors.

    Edges are numbered factor by factor in scope order; ``edge_var``,
    ``edge_factor`` and ``edge_pos`` describe each edge, ``var_edges[i]`` lists
    the edges touching variable i.
    """

    def __init__(self, domains: Sequence[int], factors: Sequence[Factor] = (),
                 semiring: SemiringSpec | str | None = None, var_names: Sequence | None = None):
        self.domains = [int(d) for d in domains]
        if any(d < 1 for d in self.domains):
            raise ValueError("every domain needs at least one value")
        self.factors = list(factors)
        self.semiring = get_semiring(semiring) if semiring is not None else None
        self.var_names = list(var_names) if var_names is not None else None
        self._index()

    def _index(self):
        n = len(self.domains)
        self.var_edges = [[] for _ in range(n)]
        self.factor_edges = []
        edge_var, edge_factor, edge_pos = [], [], []
        for fi, f in enumerate(self.factors):
            ids = []
            for p, v in enumerate(f.scope):
                if not 0 <= v < n:
                    raise ValueError(f"factor {fi} references variable {v} outside 0..{n - 1}")
                e = len(edge_var)
                edge_var.append(v)
                edge_factor.append(fi)
                edge_pos.append(p)
                self.var_edges[v].append(e)
                ids.append(e)
            self.factor_edges.append(ids)
            doms = [self.domains[v] for v in f.scope]
            if f.table is not None:
                if tuple(f.table.shape) != tuple(doms):
                    raise ValueError(f"factor {fi} table shape {f.table.shape} != domains {tuple(doms)}")
            else:
                f.kernel.check(doms)
        self.edge_var = edge_var
        self.edge_factor = edge_factor
        self.edge_pos = edge_pos

    @property
    def num_vars(self) -> int:
        return len(self.domains)

    @property
    def num_edges(self) -> int:
        return len(self.edge_var)

    def var_to_factors(self, i: int) -> list:
        return [self.edge_factor[e] for e in self.var_edges[i]]

    def factor_to_vars(self, fi: int) -> tuple:
        return self.factors[fi].scope

    def with_factors(self, extra: Sequence[Factor]) -> "FactorGraph":
        return FactorGraph(self.domains, self.factors + list(extra), self.semiring, self.var_names)

    def __repr__(self):
        return f"FactorGraph(vars={self.num_vars}, factors={len(self.factors)})"


def materialize_kernel(kernel: Kernel, scope, domains, s: SemiringSpec,
                       cap: int = DEFAULT_TABLE_CAP) -> np.ndarray:
    """Dense table of a kernel over ``scope``; ``domains`` may be the full domain list or per-scope."""
    s = get_semiring(s)
    doms = list(domains)
    if len(doms) != len(scope):
        doms = [doms[v] for v in scope]
    size = int(np.prod(doms)) if doms else 1
    if size > cap:
        raise ValueError(f"table of {size} entries exceeds the cap of {cap}")
    kernel.check(doms)
    return np.asarray(kernel.table(s, doms), dtype=float).reshape(doms)


def evaluate_joint(g: FactorGraph, s: SemiringSpec | str, x: Sequence[int]) -> float:
    """Expanded form: otimes of all factors at the full assignment x."""
    s = get_semiring(s)
    if len(x) != g.num_vars:
        raise ValueError(f"assignment has {len(x)} values for {g.num_vars} variables")
    for i, v in enumerate(x):
        if not 0 <= int(v) < g.domains[i]:
            raise ValueError(f"value {v} outside the domain of variable {i}")
    acc = s.one_otimes
    for f in g.factors:
        acc = s.otimes(acc, f.value(s, [int(x[v]) for v in f.scope]))
    return float(acc)


@dataclass
class ClampedGraph:
    graph: FactorGraph
    index_map: list          # new variable index -> old index
    evidence: dict           # old index -> clamped value

    def lift(self, assignment: Sequence[int]) -> list:
        """Translate an assignment of the reduced graph back to the original indices."""
        n = len(self.index_map) + len(self.evidence)
        out = [0] * n
        for old, val in self.evidence.items():
            out[old] = int(val)
        for new, old in enumerate(self.index_map):
            out[old] = int(assignment[new])
        return out


def clamp(g: FactorGraph, evidence: Mapping[int, int], s: SemiringSpec | str | None = None,
          cap: int = DEFAULT_TABLE_CAP) -> ClampedGraph:
    """Restrict every factor to the evidence and drop the clamped variables.

    Remaining variables are re-indexed densely; ``index_map`` keeps the
    original indices. Factors that lose all their variables become constants
    with an empty scope.
    """
    s = get_semiring(s if s is not None else (g.semiring or "sum_product"))
    ev = {int(k): int(v) for k, v in evidence.items()}
    for k, v in ev.items():
        if not 0 <= k < g.num_vars or not 0 <= v < g.domains[k]:
            raise ValueError(f"bad evidence {k}={v}")
    keep = [i for i in range(g.num_vars) if i not in ev]
    new_idx = {old: new for new, old in enumerate(keep)}
    factors = []
    for f in g.factors:
        hit = [p for p, v in enumerate(f.scope) if v in ev]
        if not hit:
            factors.append(Factor(tuple(new_idx[v] for v in f.scope), table=f.table, kernel=f.kernel))
            continue
        factors.append(_clamp_factor(f, hit, ev, new_idx, g.domains, s, cap))
    return ClampedGraph(FactorGraph([g.domains[i] for i in keep], factors, g.semiring), keep, ev)


def _clamp_factor(f, hit, ev, new_idx, domains, s, cap):
    rest = [p for p in range(len(f.scope)) if p not in hit]
    new_scope = tuple(new_idx[f.scope[p]] for p in rest)
    k = f.kernel
    if isinstance(k, _CountKernel):
        ones = sum(ev[f.scope[p]] for p in hit)
        kk = k.k - ones
        n_rest = len(rest)
        mode = k.mode
        if mode == "at_least" and kk <= 0 or mode == "at_most" and kk >= n_rest:
            return Factor((), table=np.array(float(s.one_otimes)))
        if kk < 0 or (mode != "at_most" and kk > n_rest):
            return Factor((), table=np.array(float(s.one_oplus)))
        if not rest:
            return Factor((), table=np.array(float(s.indicator(kk == 0))))
        cls = {"exactly": ExactlyKofN, "at_least": AtLeastKofN, "at_most": AtMostKofN}[mode]
        return Factor(new_scope, kernel=cls(kk))
    if isinstance(k, Consistency) and len(f.scope) > 4:
        if 0 in hit:
            if ev[f.scope[0]] == 1:
                return Factor((), table=np.array(float(s.one_otimes)))
            others_on = sum(ev[f.scope[p]] for p in hit if p != 0)
            if others_on:
                return Factor((), table=np.array(float(s.one_oplus)))
            return Factor(new_scope, kernel=AtMostKofN(0))
        if any(ev[f.scope[p]] for p in hit):
            # someone follows: self must be on
            return Factor((new_idx[f.scope[0]],), table=s.indicator(np.array([False, True])).astype(float))
        return Factor(new_scope, kernel=Consistency())
    table = f.dense(s, [domains[v] for v in f.scope], cap=cap)
    index = tuple(ev[f.scope[p]] if p in hit else slice(None) for p in range(len(f.scope)))
    return Factor(new_scope, table=np.array(table[index], dtype=float))


def dump(g: FactorGraph) -> str:
    """Line-oriented text dump: a header, domain sizes, then one line per factor."""
    lines = ["msgpass-factor-graph v1", f"vars {g.num_vars}",
             "domains " + " ".join(str(d) for d in g.domains)]
    if g.semiring is not None:
        lines.append(f"semiring {g.semiring.name}")
    for f in g.factors:
        scope = ",".join(str(v) for v in f.scope) or "-"
        if f.table is not None:
            payload = {"values": _jsonable(f.table.reshape(-1))}
            lines.append(f"factor {scope} table {json.dumps(payload)}")
        else:
            payload = {k: _jsonable(v) for k, v in f.kernel.params().items()}
            lines.append(f"factor {scope} {f.kernel.kind} {json.dumps(payload)}")
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        if v.dtype == bool:
            return v.astype(int).tolist()
        return [_num(x) for x in v.tolist()] if v.ndim == 1 else [_jsonable(r) for r in v]
    if isinstance(v, float):
        return _num(v)
    return v


def _num(x):
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return x


def _unnum(x):
    if isinstance(x, list):
        return [_unnum(y) for y in x]
    if x == "inf":
        return INF
    if x == "-inf":
        return -INF
    return x


def load_dump(text: str) -> FactorGraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("msgpass-factor-graph"):
        raise ValueError("line 1: missing factor graph header")
    domains, semiring, factors = None, None, []
    for no, ln in enumerate(lines[1:], start=2):
        head, _, rest = ln.partition(" ")
        if head == "vars":
            continue
        if head == "domains":
            domains = [int(t) for t in rest.split()]
        elif head == "semiring":
            semiring = rest.strip()
        elif head == "factor":
            scope_s, kind, payload = rest.split(" ", 2)
            scope = () if scope_s == "-" else tuple(int(t) for t in scope_s.split(","))
            params = {k: _unnum(v) for k, v in json.loads(payload).items()}
            if kind == "table":
                shape = [domains[v] for v in scope]
                factors.append(Factor(scope, table=np.array(params["values"], dtype=float).reshape(shape)))
            else:
                if kind not in KERNELS:
                    raise ValueError(f"line {no}: unknown kernel {kind}")
                cls = KERNELS[kind]
                if "adj" in params:
                    params["adj"] = np.array(params["adj"], dtype=bool)
                factors.append(Factor(scope, kernel=cls(**params)))
        else:
            raise ValueError(f"line {no}: unexpected record {head!r}")
    if domains is None:
        raise ValueError("missing domains line")
    return FactorGraph(domains, factors, semiring)


def all_assignments(domains: Sequence[int]):
    return itertools.product(*[range(d) for d in domains])
