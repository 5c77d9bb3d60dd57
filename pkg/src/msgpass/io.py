"""Instance file formats: DIMACS CNF and edge lists, TSPLIB-lite, CSV matrices, JSON results.

Every parser raises ``FormatError`` carrying the 1-based line number of the
offending input.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .problems.csp import CnfInstance, GraphInstance

SCHEMA = "v1"


class FormatError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s:
            yield no, s


def _ints(tokens, no):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise FormatError(f"expected integers, got {' '.join(tokens)!r}", no) from None


# ---------------------------------------------------------------- DIMACS CNF

def parse_cnf(text: str) -> CnfInstance:
    """DIMACS CNF; clauses may span lines and end with 0. Comment lines start with 'c'."""
    header = None
    clauses, cur = [], []
    for no, s in _lines(text):
        if s.startswith("c") or s.startswith("%"):
            continue
        if s.startswith("p"):
            parts = s.split()
            if header is not None:
                raise FormatError("duplicate problem line", no)
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormatError("expected 'p cnf <vars> <clauses>'", no)
            header = (*_ints(parts[2:], no), no)
            continue
        if header is None:
            raise FormatError("clause before the problem line", no)
        for lit in _ints(s.split(), no):
            if lit == 0:
                if not cur:
                    raise FormatError("empty clause", no)
                clauses.append(cur)
                cur = []
            else:
                if abs(lit) > header[0]:
                    raise FormatError(f"literal {lit} exceeds {header[0]} variables", no)
                cur.append(lit)
    if header is None:
        raise FormatError("missing 'p cnf' line")
    if cur:
        clauses.append(cur)
    if len(clauses) != header[1]:
        raise FormatError(f"header declares {header[1]} clauses, found {len(clauses)}", header[2])
    return CnfInstance(header[0], clauses)


def write_cnf(cnf: CnfInstance, comment: str | None = None) -> str:
    out = [f"c {line}" for line in (comment or "").splitlines()]
    out.append(f"p cnf {cnf.num_vars} {len(cnf.clauses)}")
    out += [" ".join(str(l) for l in c) + " 0" for c in cnf.clauses]
    return "\n".join(out) + "\n"


# --------------------------------------------------------------- DIMACS edge

def parse_edges(text: str) -> GraphInstance:
    """'p edge <n> <m>' then 'e <u> <v> [w]' lines, 1-based nodes."""
    header = None
    edges, weights = [], []
    for no, s in _lines(text):
        parts = s.split()
        if parts[0] == "c":
            continue
        if parts[0] == "p":
            if header is not None:
                raise FormatError("duplicate problem line", no)
            if len(parts) != 4 or parts[1] not in ("edge", "col"):
                raise FormatError("expected 'p edge <nodes> <edges>'", no)
            header = (*_ints(parts[2:], no), no)
        elif parts[0] == "e":
            if header is None:
                raise FormatError("edge before the problem line", no)
            if len(parts) not in (3, 4):
                raise FormatError("expected 'e <u> <v> [weight]'", no)
            u, v = _ints(parts[1:3], no)
            if not (1 <= u <= header[0] and 1 <= v <= header[0]) or u == v:
                raise FormatError(f"bad edge ({u}, {v})", no)
            edges.append((u - 1, v - 1))
            if len(parts) == 4:
                try:
                    weights.append(float(parts[3]))
                except ValueError:
                    raise FormatError(f"bad weight {parts[3]!r}", no) from None
        else:
            raise FormatError(f"unknown line type {parts[0]!r}", no)
    if header is None:
        raise FormatError("missing 'p edge' line")
    if len(edges) != header[1]:
        raise FormatError(f"header declares {header[1]} edges, found {len(edges)}", header[2])
    if weights and len(weights) != len(edges):
        raise FormatError("either all edges carry weights or none do")
    return GraphInstance(header[0], edges, weights or None)


def write_edges(graph: GraphInstance) -> str:
    out = [f"p edge {graph.n} {len(graph.edges)}"]
    for k, (u, v) in enumerate(graph.edges):
        w = f" {graph.weights[k]!r}" if graph.weights else ""
        out.append(f"e {u + 1} {v + 1}{w}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------- TSPLIB-lite

@dataclass
class TspInstance:
    name: str
    D: np.ndarray
    coords: np.ndarray | None = None
    weight_type: str = "EXPLICIT"
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.D.shape[0]


def euc_2d(coords) -> np.ndarray:
    """TSPLIB EUC_2D: Euclidean distance rounded to the nearest integer."""
    c = np.asarray(coords, dtype=float)
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
    return np.floor(d + 0.5)


def parse_tsplib(text: str) -> TspInstance:
    """NAME/TYPE/DIMENSION/EDGE_WEIGHT_TYPE in {EUC_2D, EXPLICIT (FULL_MATRIX)}."""
    spec = {}
    section, nums, coords = None, [], {}
    sec_line = None
    for no, s in _lines(text):
        if s == "EOF":
            break
        key = s.split(":")[0].strip() if ":" in s else s.split()[0]
        if section is None or key in ("NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION") or (
                ":" in s and not s[0].isdigit() and not s[0] == "-"):
            if key in ("NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION"):
                section, sec_line = key, no
                continue
            if ":" not in s:
                raise FormatError(f"expected 'KEY : value', got {s!r}", no)
            k, v = s.split(":", 1)
            spec[k.strip()] = (v.strip(), no)
            continue
        parts = s.split()
        if section == "NODE_COORD_SECTION":
            if len(parts) != 3:
                raise FormatError("expected '<id> <x> <y>'", no)
            try:
                coords[int(parts[0])] = (float(parts[1]), float(parts[2]))
            except ValueError:
                raise FormatError(f"bad coordinate line {s!r}", no) from None
        else:
            try:
                nums += [float(t) for t in parts]
            except ValueError:
                raise FormatError(f"bad weight line {s!r}", no) from None
    if "DIMENSION" not in spec:
        raise FormatError("missing DIMENSION")
    try:
        n = int(spec["DIMENSION"][0])
    except ValueError:
        raise FormatError("DIMENSION must be an integer", spec["DIMENSION"][1]) from None
    kind = spec.get("TYPE", ("TSP", None))[0]
    if kind not in ("TSP", "ATSP"):
        raise FormatError(f"unsupported TYPE {kind}", spec["TYPE"][1])
    wt, wline = spec.get("EDGE_WEIGHT_TYPE", ("EXPLICIT", None))
    name = spec.get("NAME", ("unnamed", None))[0]
    if wt == "EUC_2D":
        if sorted(coords) != list(range(1, n + 1)):
            raise FormatError(f"need coordinates for nodes 1..{n}", sec_line)
        c = np.array([coords[i] for i in range(1, n + 1)])
        return TspInstance(name, euc_2d(c), c, wt)
    if wt == "EXPLICIT":
        fmt = spec.get("EDGE_WEIGHT_FORMAT", ("FULL_MATRIX", None))
        if fmt[0] != "FULL_MATRIX":
            raise FormatError(f"unsupported EDGE_WEIGHT_FORMAT {fmt[0]}", fmt[1])
        if len(nums) != n * n:
            raise FormatError(f"expected {n * n} weights, found {len(nums)}", sec_line)
        return TspInstance(name, np.array(nums).reshape(n, n), None, wt)
    raise FormatError(f"unsupported EDGE_WEIGHT_TYPE {wt}", wline)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_tsplib(inst: TspInstance) -> str:
    out = [f"NAME : {inst.name}", "TYPE : TSP", f"DIMENSION : {inst.n}"]
    if inst.weight_type == "EUC_2D" and inst.coords is not None:
        out += ["EDGE_WEIGHT_TYPE : EUC_2D", "NODE_COORD_SECTION"]
        out += [f"{i + 1} {_fmt(x)} {_fmt(y)}" for i, (x, y) in enumerate(inst.coords)]
    else:
        out += ["EDGE_WEIGHT_TYPE : EXPLICIT", "EDGE_WEIGHT_FORMAT : FULL_MATRIX", "EDGE_WEIGHT_SECTION"]
        out += [" ".join(_fmt(v) for v in row) for row in inst.D]
    out.append("EOF")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- CSV matrix

def parse_matrix_csv(text: str) -> np.ndarray:
    """First line N, then N comma-separated rows of N numbers ('inf' allowed)."""
    rows = list(_lines(text))
    if not rows:
        raise FormatError("empty matrix file")
    no, head = rows[0]
    try:
        n = int(head.split(",")[0])
    except ValueError:
        raise FormatError(f"expected the matrix size, got {head!r}", no) from None
    if len(rows) - 1 != n:
        raise FormatError(f"expected {n} rows, found {len(rows) - 1}", no)
    M = np.empty((n, n))
    for r, (no, s) in enumerate(rows[1:]):
        parts = [p.strip() for p in s.split(",")]
        if len(parts) != n:
            raise FormatError(f"expected {n} values, found {len(parts)}", no)
        try:
            M[r] = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"bad number in {s!r}", no) from None
    return M


def write_matrix_csv(M) -> str:
    M = np.asarray(M, dtype=float)
    out = [str(M.shape[0])]
    out += [",".join(repr(float(v)) for v in row) for row in M]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------- JSON

def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return None if math.isnan(v) else v
    return v


def result_record(status: str, objective=None, assignment=None, iterations=None,
                  time_ms: float | None = None, certified: bool = False, **extra) -> dict:
    rec = {"schema": SCHEMA, "status": status, "objective": objective, "assignment": assignment,
           "iterations": iterations, "time_ms": time_ms, "certified": bool(certified)}
    rec.update(extra)
    return _plain(rec)


def dumps_result(rec: dict) -> str:
    return json.dumps(_plain(rec), sort_keys=False)


def loads_result(text: str) -> dict:
    rec = json.loads(text)
    if rec.get("schema") != SCHEMA:
        raise FormatError(f"unsupported result schema {rec.get('schema')!r}")
    return rec
