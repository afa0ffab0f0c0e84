"""Enumeration of pattern copies (non-induced subgraphs) in a host graph.

A copy is recorded *labeled*: ``Copy(pattern_id, vertices)`` where
``vertices[i]`` is the host vertex playing pattern vertex ``i``.  An unlabeled
copy is represented by the labeled copy whose vertex tuple is
lexicographically smallest among its automorphic relabelings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

from .graph import Edge, Family, Graph, norm_edge

DEFAULT_CAP = 10**7
MAX_AUT_ORDER = 10


class CapExceeded(RuntimeError):
    """Copy enumeration hit its count limit."""


class Copy(NamedTuple):
    pattern_id: int
    vertices: tuple[int, ...]

    def edges(self, family: Family) -> tuple[Edge, ...]:
        vs = self.vertices
        return tuple(norm_edge(vs[i], vs[j]) for i, j in family.pattern_edges[self.pattern_id])

    def dump(self) -> str:
        return f"{self.pattern_id}: " + " ".join(map(str, self.vertices))


def parse_copy(line: str) -> Copy:
    head, _, tail = line.partition(":")
    if not _:
        raise ValueError(f"copy line needs 'pattern_id: v1 ... vk', got {line!r}")
    return Copy(int(head), tuple(int(x) for x in tail.split()))


def _search_order(pattern: Graph) -> list[int]:
    # highest degree first, then always the vertex most attached to those placed
    order: list[int] = []
    remaining = set(range(pattern.n))
    while remaining:
        placed = set(order)
        best = max(
            remaining,
            key=lambda v: (len(pattern.adj[v] & placed), pattern.degree(v), -v),
        )
        order.append(best)
        remaining.discard(best)
    return order


def iter_embeddings(
    host: Graph,
    pattern: Graph,
    domains: Sequence[Sequence[int]] | None = None,
) -> Iterator[tuple[int, ...]]:
    """Yield every injective edge-preserving map pattern -> host.

    ``domains[i]``, if given, restricts the host vertices pattern vertex ``i``
    may use.  Results come out in search order, not sorted.
    """
    k = pattern.n
    if k == 0 or k > host.n:
        return
    order = _search_order(pattern)
    back = [[u for u in pattern.adj[v] if u in set(order[:pos])] for pos, v in enumerate(order)]
    if domains is None:
        cand0 = [
            [x for x in range(host.n) if host.degree(x) >= pattern.degree(v)]
            for v in range(k)
        ]
    else:
        cand0 = [[x for x in domains[v] if host.degree(x) >= pattern.degree(v)] for v in range(k)]
    allowed = [frozenset(c) for c in cand0]
    image = [-1] * k
    used: set[int] = set()

    def extend(pos: int):
        if pos == k:
            yield tuple(image)
            return
        v = order[pos]
        placed_nbrs = back[pos]
        if placed_nbrs:
            # intersect host neighbourhoods of already-mapped pattern neighbours
            sets = sorted((host.adj[image[u]] for u in placed_nbrs), key=len)
            cands = set(sets[0])
            for s in sets[1:]:
                cands &= s
            cands &= allowed[v]
            cands = sorted(cands)
        else:
            cands = cand0[v]
        for x in cands:
            if x in used:
                continue
            image[v] = x
            used.add(x)
            yield from extend(pos + 1)
            used.discard(x)
        image[v] = -1

    yield from extend(0)


def automorphisms(pattern: Graph) -> list[tuple[int, ...]]:
    if pattern.n > MAX_AUT_ORDER:
        raise ValueError(f"automorphism search limited to {MAX_AUT_ORDER} vertices")
    # an edge-preserving bijection of a finite graph onto itself is an automorphism
    return sorted(iter_embeddings(pattern, pattern))


def automorphism_count(pattern: Graph) -> int:
    return len(automorphisms(pattern))


def are_isomorphic(g: Graph, h: Graph) -> bool:
    if g.n != h.n or g.m != h.m:
        return False
    if sorted(map(len, g.adj)) != sorted(map(len, h.adj)):
        return False
    return next(iter_embeddings(h, g), None) is not None


def canonical_vertices(vertices: Sequence[int], auts: Sequence[tuple[int, ...]]) -> tuple[int, ...]:
    """Lexicographically smallest relabeling ``v o sigma`` over automorphisms sigma."""
    return min(tuple(vertices[s[i]] for i in range(len(vertices))) for s in auts)


@dataclass
class CopyIndex:
    """Copies of family members in a host, indexed by the host edges they use."""

    host: Graph
    family: Family
    copies: list[Copy]
    labeled: bool
    capped: bool = False
    per_edge: dict[Edge, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.per_edge:
            per_edge: dict[Edge, list[int]] = {}
            for cid, c in enumerate(self.copies):
                for e in c.edges(self.family):
                    per_edge.setdefault(e, []).append(cid)
            self.per_edge = per_edge

    def __len__(self) -> int:
        return len(self.copies)

    def copy_edges(self, cid: int) -> tuple[Edge, ...]:
        return self.copies[cid].edges(self.family)

    def dump(self) -> str:
        return "".join(c.dump() + "\n" for c in self.copies)


def copies_through_edge(index: CopyIndex, e: Sequence[int]) -> set[int]:
    """Ids of the copies whose pattern-edge images include ``e``."""
    u, v = e
    if u == v:
        return set()
    return set(index.per_edge.get(norm_edge(u, v), ()))


def enumerate_labeled_copies(g: Graph, family: Family, cap: int = DEFAULT_CAP) -> CopyIndex:
    found: list[Copy] = []
    capped = False
    for pid, pattern in enumerate(family):
        for emb in iter_embeddings(g, pattern):
            if len(found) >= cap:
                capped = True
                break
            found.append(Copy(pid, emb))
        if capped:
            break
    found.sort()
    return CopyIndex(g, family, found, labeled=True, capped=capped)


def enumerate_unlabeled_copies(g: Graph, family: Family | Graph, cap: int = DEFAULT_CAP) -> CopyIndex:
    """One canonical representative per unlabeled copy of each family member.

    The count is the labeled count divided by ``|Aut(pattern)|``.  If more
    than ``cap`` copies exist, the partial index is returned with
    ``capped=True``.
    """
    if isinstance(family, Graph):
        family = _single(family)
    found: list[Copy] = []
    capped = False
    for pid, pattern in enumerate(family):
        if pattern.n > g.n:
            continue
        auts = automorphisms(pattern)
        for emb in iter_embeddings(g, pattern):
            if canonical_vertices(emb, auts) != emb:
                continue
            if len(found) >= cap:
                capped = True
                break
            found.append(Copy(pid, emb))
        if capped:
            break
    found.sort()
    return CopyIndex(g, family, found, labeled=False, capped=capped)


def enumerate_partite_copies(
    w: Graph,
    pattern: Graph,
    classes: Sequence[Sequence[int]],
    pattern_id: int = 0,
) -> list[Copy]:
    """Copies placing pattern vertex ``i`` inside ``classes[i]``.

    Only host pairs that carry a pattern edge are inspected, so edges inside
    a class or between classes with no pattern edge are ignored.
    """
    if len(classes) != pattern.n:
        raise ValueError(f"need {pattern.n} classes, got {len(classes)}")
    seen: set[int] = set()
    for c in classes:
        if seen & set(c):
            raise ValueError("classes must be disjoint")
        seen.update(c)
    out = [Copy(pattern_id, emb) for emb in iter_embeddings(w, pattern, classes)]
    out.sort()
    return out


def partite_index(w: Graph, pattern: Graph, classes: Sequence[Sequence[int]]) -> CopyIndex:
    fam = _single(pattern)
    return CopyIndex(w, fam, enumerate_partite_copies(w, pattern, classes), labeled=True)


def _single(pattern: Graph) -> Family:
    # bypasses the K2 restriction: partite/counting helpers accept any pattern
    fam = object.__new__(Family)
    object.__setattr__(fam, "patterns", (pattern,))
    object.__setattr__(fam, "names", ("H0",))
    return fam


def parse_copy_dump(text: str) -> list[Copy]:
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append(parse_copy(line))
    return out
