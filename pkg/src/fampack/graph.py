"""Graphs, pattern families and vertex partitions.

Graphs are simple and undirected with vertices ``0..n-1``.  Edges are stored
as ordered pairs ``(u, v)`` with ``u < v``.  Every object here is immutable
once built; randomised operations take an explicit seed.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from ._random import derive_rng

log = logging.getLogger(__name__)

Edge = tuple[int, int]


class GraphFormatError(ValueError):
    """Raised for malformed edge-list documents."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PartitionError(ValueError):
    pass


def norm_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[Edge]

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        for u, v in self.edges:
            if u == v:
                raise GraphFormatError(f"loop at vertex {u}")
            if not (0 <= u < v < self.n):
                raise GraphFormatError(f"edge ({u}, {v}) out of range for n={self.n}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        out = set()
        for u, v in edges:
            if u == v:
                raise GraphFormatError(f"loop at vertex {u}")
            out.add(norm_edge(int(u), int(v)))
        return cls(n, frozenset(out))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, frozenset((u, v) for u in range(n) for v in range(u + 1, n)))

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, frozenset())

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adj(self) -> tuple[frozenset[int], ...]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return tuple(frozenset(s) for s in nbrs)

    @cached_property
    def sorted_edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(self.edges))

    @cached_property
    def edge_ids(self) -> dict[Edge, int]:
        return {e: i for i, e in enumerate(self.sorted_edges)}

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and norm_edge(u, v) in self.edges

    def isolated_vertices(self) -> list[int]:
        """Vertices of degree zero (allowed, but they never join a copy)."""
        return [v for v in range(self.n) if not self.adj[v]]

    def spanning_subgraph(self, edges: Iterable[Edge]) -> "Graph":
        keep = frozenset(norm_edge(*e) for e in edges)
        if not keep <= self.edges:
            raise ValueError("spanning subgraph uses edges not in the host")
        return Graph(self.n, keep)

    def adjacency_matrix(self):
        import numpy as np

        a = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            us, vs = zip(*self.edges)
            a[us, vs] = True
            a[vs, us] = True
        return a

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def parse_graph(text: str) -> Graph:
    """Parse an edge-list document: ``n m`` then one ``u v`` per line.

    Blank lines and lines starting with ``#`` are skipped.  Duplicate edges
    are collapsed; the number collapsed is logged as a warning.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line))
    if not rows:
        raise GraphFormatError("empty document")

    lineno, header = rows[0]
    parts = header.split()
    if len(parts) != 2:
        raise GraphFormatError("header must be 'n m'", lineno)
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise GraphFormatError("header must hold two integers", lineno) from None
    if n < 0 or m < 0:
        raise GraphFormatError("negative count in header", lineno)

    body = rows[1:]
    if len(body) != m:
        raise GraphFormatError(f"header announces {m} edges, found {len(body)}", lineno)

    edges: set[Edge] = set()
    dupes = 0
    for lineno, line in body:
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"expected 'u v', got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"non-integer vertex in {line!r}", lineno) from None
        if u == v:
            raise GraphFormatError(f"loop at vertex {u}", lineno)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"vertex out of range 0..{n - 1} in {line!r}", lineno)
        e = norm_edge(u, v)
        if e in edges:
            dupes += 1
        edges.add(e)
    if dupes:
        log.warning("collapsed %d duplicate edge(s)", dupes)
    return Graph(n, frozenset(edges))


def format_graph(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in g.sorted_edges)
    return "\n".join(lines) + "\n"


def read_graph(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


_PATTERN_RE = re.compile(r"^([KCPS])(\d+)$")


def named_pattern(name: str) -> Graph:
    """Build ``K<k>``, ``C<k>``, ``P<k>`` (path on k vertices) or ``S<k>`` (k leaves)."""
    match = _PATTERN_RE.match(name.strip())
    if not match:
        raise ValueError(f"unknown pattern {name!r}; supported: K<k>, C<k>, P<k>, S<k>")
    kind, k = match.group(1), int(match.group(2))
    if kind == "K":
        if k < 1:
            raise ValueError("K<k> needs k >= 1")
        return Graph.complete(k)
    if kind == "C":
        if k < 3:
            raise ValueError("C<k> needs k >= 3")
        return Graph.from_edges(k, [(i, (i + 1) % k) for i in range(k)])
    if kind == "P":
        if k < 1:
            raise ValueError("P<k> needs k >= 1")
        return Graph.from_edges(k, [(i, i + 1) for i in range(k - 1)])
    if k < 1:
        raise ValueError("S<k> needs k >= 1")
    return Graph.from_edges(k + 1, [(0, i) for i in range(1, k + 1)])


@dataclass(frozen=True)
class Family:
    """A finite, ordered family of pairwise non-isomorphic patterns."""

    patterns: tuple[Graph, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        from .copies import are_isomorphic

        if not self.patterns:
            raise ValueError("family must contain at least one pattern")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"H{i}" for i in range(len(self.patterns))))
        if len(self.names) != len(self.patterns):
            raise ValueError("one name per pattern required")
        for name, p in zip(self.names, self.patterns):
            if p.m == 0:
                raise ValueError(f"pattern {name} has no edges")
            if p.m == 1:
                raise ValueError(f"pattern {name} is a single edge (K2); K2 is not allowed in a family")
        for i in range(len(self.patterns)):
            for j in range(i):
                if are_isomorphic(self.patterns[i], self.patterns[j]):
                    raise ValueError(f"patterns {self.names[j]} and {self.names[i]} are isomorphic")

    @classmethod
    def of(cls, *names: str) -> "Family":
        return cls(tuple(named_pattern(s) for s in names), tuple(names))

    @property
    def k_infinity(self) -> int:
        return max(p.n for p in self.patterns)

    @property
    def min_edges(self) -> int:
        return min(p.m for p in self.patterns)

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __getitem__(self, i: int) -> Graph:
        return self.patterns[i]

    @cached_property
    def pattern_edges(self) -> tuple[tuple[Edge, ...], ...]:
        return tuple(p.sorted_edges for p in self.patterns)


def parse_family(spec: str) -> Family:
    """Parse ``"K3,C5,path:my_pattern.g"`` into a family."""
    patterns, names = [], []
    for token in (t.strip() for t in spec.split(",")):
        if not token:
            continue
        if token.startswith("path:"):
            patterns.append(read_graph(token[5:]))
        else:
            patterns.append(named_pattern(token))
        names.append(token)
    return Family(tuple(patterns), tuple(names))


def density(g: Graph, a: Iterable[int], b: Iterable[int]) -> Fraction:
    """Exact edge density e(A, B) / (|A| |B|) between disjoint vertex sets."""
    a, b = set(a), set(b)
    if not a or not b:
        raise ValueError("density needs non-empty vertex sets")
    if a & b:
        raise ValueError("density needs disjoint vertex sets")
    if len(a) > len(b):
        a, b = b, a
    e = sum(len(g.adj[u] & b) for u in a)
    return Fraction(e, len(a) * len(b))


@dataclass(frozen=True)
class VertexPartition:
    classes: tuple[tuple[int, ...], ...]
    origin: str = "equitable"
    n: int = field(default=-1)

    def __post_init__(self):
        classes = tuple(tuple(sorted(c)) for c in self.classes)
        object.__setattr__(self, "classes", classes)
        total = sum(len(c) for c in classes)
        if self.n < 0:
            object.__setattr__(self, "n", total)
        seen = set()
        for c in classes:
            if not c:
                raise PartitionError("empty class")
            seen.update(c)
        if len(seen) != total:
            raise PartitionError("classes overlap")
        if seen != set(range(self.n)):
            raise PartitionError("classes do not cover the vertex set")

    @property
    def m(self) -> int:
        return len(self.classes)

    @cached_property
    def class_of(self) -> tuple[int, ...]:
        out = [0] * self.n
        for i, c in enumerate(self.classes):
            for v in c:
                out[v] = i
        return tuple(out)

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.classes]

    def to_json(self) -> str:
        return json.dumps([list(c) for c in self.classes])

    @classmethod
    def from_json(cls, text: str, origin: str = "equitable") -> "VertexPartition":
        return cls(tuple(tuple(c) for c in json.loads(text)), origin)


def _split_even(items: Sequence[int], parts: int) -> list[list[int]]:
    q, r = divmod(len(items), parts)
    out, pos = [], 0
    for i in range(parts):
        size = q + (1 if i < r else 0)
        out.append(list(items[pos:pos + size]))
        pos += size
    return out


def equitable_partition(n: int, m: int, seed) -> VertexPartition:
    """Uniformly random partition of ``range(n)`` into ``m`` near-equal classes."""
    if m < 1 or m > n:
        raise PartitionError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = derive_rng(seed, "equitable", n, m)
    order = [int(v) for v in rng.permutation(n)]
    return VertexPartition(tuple(tuple(c) for c in _split_even(order, m)), "equitable", n)


def refine_partition(p: VertexPartition, factor: int, seed) -> VertexPartition:
    """Split every class independently at random into ``factor`` near-equal parts.

    Refined class ``i * factor + j`` is the ``j``-th part of class ``i``.
    """
    if factor < 1:
        raise PartitionError("refinement factor must be >= 1")
    for i, c in enumerate(p.classes):
        if len(c) < factor:
            raise PartitionError(f"class {i} has {len(c)} vertices, cannot split into {factor} parts")
    out = []
    for i, c in enumerate(p.classes):
        # one stream per class keeps the splits independent of each other
        rng = derive_rng(seed, "refine", i)
        shuffled = [c[int(j)] for j in rng.permutation(len(c))]
        out.extend(tuple(part) for part in _split_even(shuffled, factor))
    return VertexPartition(tuple(out), "refined", p.n)


def ideal_class_size(n: int, m: int) -> int:
    """``t = floor(n/m)``, the class size diagnostics use when m does not divide n."""
    return n // m


def is_equitable(p: VertexPartition) -> bool:
    sizes = p.sizes
    return max(sizes) - min(sizes) <= 1

