"""Weighted capacitated graphs: representation, text format, validation,
and trivial-vertex preprocessing.

Vertices are labeled 1..n.  Every edge is an unordered pair {i, j} with a
weight; every vertex i carries a positive integer capacity b_i.  A matching
here means a subgraph whose degrees are bounded by (non-perfect mode) or
equal to (perfect mode) the capacities.

All weights are exact rationals by default.  Float mode exists only for
benchmarking and is rejected by every certification path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

PERFECT = "perfect"
NONPERFECT = "nonperfect"
MODES = (PERFECT, NONPERFECT)

EXACT = "exact"
FLOAT = "float"


class GraphError(Exception):
    pass


class GraphParseError(GraphError):
    def __init__(self, message, line=None, field=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if field is not None:
                loc += f", field {field}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.field = field


class ValidationError(GraphError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


def edge_key(i: int, j: int) -> tuple[int, int]:
    """Canonical (small, large) form of an undirected edge; self-loops rejected."""
    if i == j:
        raise GraphError(f"self-loop at vertex {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: tuple
    message: str


class Graph:
    """Immutable simple undirected graph with edge weights and vertex capacities."""

    def __init__(self, n, capacities, edges, numeric_mode=EXACT):
        if n < 0:
            raise GraphError("vertex count must be >= 0")
        if numeric_mode not in (EXACT, FLOAT):
            raise GraphError(f"unknown numeric mode {numeric_mode!r}")
        capacities = tuple(capacities)
        if len(capacities) != n:
            raise GraphError(f"expected {n} capacities, got {len(capacities)}")
        for i, b in enumerate(capacities, start=1):
            if not isinstance(b, int) or isinstance(b, bool) or b < 1:
                raise GraphError(f"capacity of vertex {i} must be a positive integer, got {b!r}")
        weights = {}
        for i, j, w in edges:
            if not (1 <= i <= n and 1 <= j <= n):
                raise GraphError(f"edge ({i},{j}) references a vertex outside 1..{n}")
            e = edge_key(i, j)
            if e in weights:
                raise GraphError(f"duplicate edge {e}")
            if numeric_mode == EXACT:
                w = Fraction(w)
            else:
                w = float(w)
                if not math.isfinite(w):
                    raise GraphError(f"non-finite weight on edge {e}")
            weights[e] = w
        self.n = n
        self.numeric_mode = numeric_mode
        self._b = capacities
        self._w = weights
        adj = {i: [] for i in range(1, n + 1)}
        for (i, j) in weights:
            adj[i].append(j)
            adj[j].append(i)
        self._adj = {i: tuple(sorted(nbrs)) for i, nbrs in adj.items()}
        self._edges = tuple(sorted(weights))
        self._directed = tuple(sorted((i, j) for (a, b) in self._edges for (i, j) in ((a, b), (b, a))))

    # -- basic accessors -------------------------------------------------

    @property
    def m(self) -> int:
        return len(self._edges)

    def vertices(self):
        return range(1, self.n + 1)

    def edges(self) -> tuple:
        return self._edges

    def directed_edges(self) -> tuple:
        return self._directed

    def neighbors(self, i) -> tuple:
        return self._adj[i]

    def degree(self, i) -> int:
        return len(self._adj[i])

    def cap(self, i) -> int:
        return self._b[i - 1]

    def capacities(self) -> tuple:
        return self._b

    def has_edge(self, i, j) -> bool:
        return edge_key(i, j) in self._w

    def weight(self, i, j):
        return self._w[edge_key(i, j)]

    def weights(self) -> dict:
        return dict(self._w)

    def zero(self):
        """Additive zero in the graph's numeric field."""
        return Fraction(0) if self.numeric_mode == EXACT else 0.0

    def to_float(self) -> "Graph":
        return Graph(self.n, self._b, [(i, j, float(w)) for (i, j), w in self._w.items()],
                     numeric_mode=FLOAT)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and self._b == other._b
                and self._w == other._w and self.numeric_mode == other.numeric_mode)

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, mode={self.numeric_mode})"


# -- text format ----------------------------------------------------------

def parse_graph(text: str) -> Graph:
    """Parse the plain-text graph format.

    Line 1: "n m".  Line 2: n capacities (omitted when n = 0).  Then m lines
    "i j w" with 1-based vertex ids; w is a decimal or "p/q" rational.
    Anything after '#' on a line is a comment; blank lines are skipped.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = body.split()
        if tokens:
            rows.append((lineno, tokens))
    if not rows:
        raise GraphParseError("empty graph file")

    def _int(tok, lineno, fieldno, what):
        try:
            return int(tok)
        except ValueError:
            raise GraphParseError(f"expected integer {what}, got {tok!r}", lineno, fieldno) from None

    lineno, header = rows[0]
    if len(header) != 2:
        raise GraphParseError("header must be 'n m'", lineno)
    n = _int(header[0], lineno, 1, "vertex count")
    m = _int(header[1], lineno, 2, "edge count")
    if n < 0 or m < 0:
        raise GraphParseError("n and m must be non-negative", lineno)

    cursor = 1
    caps = []
    if n > 0:
        if len(rows) < 2:
            raise GraphParseError("missing capacity line", lineno)
        lineno, tokens = rows[1]
        if len(tokens) != n:
            raise GraphParseError(f"capacity line has {len(tokens)} entries, expected {n}", lineno)
        for k, tok in enumerate(tokens, start=1):
            b = _int(tok, lineno, k, "capacity")
            if b < 1:
                raise GraphParseError(f"capacity must be positive, got {b}", lineno, k)
            caps.append(b)
        cursor = 2

    edge_rows = rows[cursor:]
    if len(edge_rows) != m:
        raise GraphParseError(f"expected {m} edge lines, found {len(edge_rows)}",
                              edge_rows[m][0] if len(edge_rows) > m else None)
    edges = []
    seen = set()
    for lineno, tokens in edge_rows:
        if len(tokens) != 3:
            raise GraphParseError("edge line must be 'i j w'", lineno)
        i = _int(tokens[0], lineno, 1, "vertex id")
        j = _int(tokens[1], lineno, 2, "vertex id")
        if not (1 <= i <= n and 1 <= j <= n):
            raise GraphParseError(f"vertex id out of range 1..{n}", lineno)
        if i == j:
            raise GraphParseError(f"self-loop at vertex {i}", lineno)
        e = edge_key(i, j)
        if e in seen:
            raise GraphParseError(f"duplicate edge {e}", lineno)
        seen.add(e)
        try:
            w = Fraction(tokens[2])
        except (ValueError, ZeroDivisionError):
            raise GraphParseError(f"bad weight {tokens[2]!r}", lineno, 3) from None
        edges.append((i, j, w))
    return Graph(n, caps, edges)


def serialize_graph(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    if g.n > 0:
        lines.append(" ".join(str(b) for b in g.capacities()))
    for (i, j) in g.edges():
        lines.append(f"{i} {j} {g.weight(i, j)}")
    return "\n".join(lines) + "\n"


# -- validation -----------------------------------------------------------

def validate(g: Graph, mode: str) -> list[Violation]:
    """Check mode-dependent invariants; returns violations instead of raising."""
    if mode not in MODES:
        raise GraphError(f"unknown mode {mode!r}")
    out = []
    for i in g.vertices():
        if g.cap(i) > g.degree(i):
            out.append(Violation("capacity_exceeds_degree", (i,),
                                 f"vertex {i}: capacity {g.cap(i)} exceeds degree {g.degree(i)}"))
    if mode == NONPERFECT:
        for (i, j) in g.edges():
            if g.weight(i, j) > 0:
                out.append(Violation("positive_weight", (i, j),
                                     f"edge {(i, j)}: positive weight {g.weight(i, j)} in non-perfect mode"))
    return out


def require_valid(g: Graph, mode: str) -> None:
    violations = validate(g, mode)
    if violations:
        raise ValidationError(violations)


# -- matchings ------------------------------------------------------------

@dataclass(frozen=True)
class Matching:
    edges: frozenset
    mode: str
    weight: object

    @classmethod
    def from_edges(cls, g: Graph, edges, mode: str) -> "Matching":
        keys = frozenset(edge_key(i, j) for (i, j) in edges)
        for e in keys:
            if not g.has_edge(*e):
                raise GraphError(f"matching edge {e} not in graph")
        total = sum((g.weight(*e) for e in keys), g.zero())
        return cls(keys, mode, total)

    def degree_violations(self, g: Graph) -> list[str]:
        deg = {i: 0 for i in g.vertices()}
        for (i, j) in self.edges:
            deg[i] += 1
            deg[j] += 1
        out = []
        for i in g.vertices():
            if self.mode == PERFECT and deg[i] != g.cap(i):
                out.append(f"vertex {i}: degree {deg[i]} != capacity {g.cap(i)}")
            elif self.mode == NONPERFECT and deg[i] > g.cap(i):
                out.append(f"vertex {i}: degree {deg[i]} > capacity {g.cap(i)}")
        return out

    def is_valid(self, g: Graph) -> bool:
        return not self.degree_violations(g)


# -- trivial-vertex reduction ----------------------------------------------

@dataclass(frozen=True)
class Reduction:
    """Result of removing trivial vertices (degree equal to capacity).

    ``graph`` is relabeled 1..n'; ``vertex_map`` maps reduced labels back to
    original ones; ``forced`` holds original-label edges that belong to every
    perfect matching.  When ``infeasible`` is set the reduced graph is empty
    and only the flag is meaningful.
    """
    graph: Graph
    forced: frozenset
    vertex_map: dict
    infeasible: bool
    original_n: int

    @property
    def is_identity(self) -> bool:
        return not self.forced and not self.infeasible and self.graph.n == self.original_n

    def to_original(self, reduced_edges) -> frozenset:
        """Map an edge set of the reduced graph back and re-insert forced edges."""
        mapped = {edge_key(self.vertex_map[i], self.vertex_map[j]) for (i, j) in reduced_edges}
        return frozenset(mapped | set(self.forced))


def reduce_trivial(g: Graph) -> Reduction:
    """Iteratively remove trivial vertices until none remain.

    Forcing an edge consumes one unit of the neighbor's capacity, so
    neighbors are decremented and the cascade repeats: vertices whose
    capacity reaches zero are deleted along with their remaining edges.
    Any vertex ending with fewer edges than capacity, or negative capacity,
    proves the perfect matching infeasible.
    """
    alive = set(g.vertices())
    b = {i: g.cap(i) for i in alive}
    adj = {i: set(g.neighbors(i)) for i in alive}
    forced = set()
    infeasible = False

    def drop(v):
        for u in adj[v]:
            adj[u].discard(v)
        adj.pop(v)
        alive.discard(v)

    while True:
        if any(b[i] < 0 for i in alive):
            infeasible = True
            break
        exhausted = sorted(i for i in alive if b[i] == 0)
        if exhausted:
            for v in exhausted:
                if v in alive:
                    drop(v)
            continue
        if any(len(adj[i]) < b[i] for i in alive):
            infeasible = True
            break
        trivial = [i for i in sorted(alive) if len(adj[i]) == b[i]]
        if not trivial:
            break
        v = trivial[0]
        for u in sorted(adj[v]):
            forced.add(edge_key(v, u))
            b[u] -= 1
        drop(v)

    if infeasible:
        return Reduction(Graph(0, (), ()), frozenset(forced), {}, True, g.n)

    remaining = sorted(alive)
    relabel = {orig: k for k, orig in enumerate(remaining, start=1)}
    vertex_map = {k: orig for orig, k in relabel.items()}
    edges = []
    for (i, j) in g.edges():
        if i in alive and j in alive:
            edges.append((relabel[i], relabel[j], g.weight(i, j)))
    reduced = Graph(len(remaining), [b[v] for v in remaining], edges, numeric_mode=g.numeric_mode)
    return Reduction(reduced, frozenset(forced), vertex_map, False, g.n)
