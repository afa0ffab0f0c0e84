"""Integer packings: exact branch-and-bound, a random greedy baseline, and verification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ._random import derive_rng
from .copies import DEFAULT_CAP, CapExceeded, Copy, enumerate_unlabeled_copies
from .graph import Edge, Family, Graph
from .lp import FLOAT, Verdict, solve_packing_lp

OPTIMAL = "optimal"
LOWER_BOUND = "lower-bound"
DEFAULT_BUDGET = 10**6
LP_MARGIN = 1e-6


@dataclass
class IntegerPacking:
    copies: list[Copy] = field(default_factory=list)

    def __post_init__(self):
        self.copies = sorted(self.copies)

    @property
    def size(self) -> int:
        return len(self.copies)

    def __len__(self) -> int:
        return len(self.copies)

    def dump(self) -> str:
        return "".join(c.dump() + "\n" for c in self.copies)

    def used_edges(self, family: Family) -> set[Edge]:
        return {e for c in self.copies for e in c.edges(family)}


@dataclass
class ExactResult:
    size: int
    packing: IntegerPacking
    status: str
    nodes: int
    upper_bound: int


def _masks(g: Graph, family: Family, copies: list[Copy]) -> list[int]:
    eid = g.edge_ids
    out = []
    for c in copies:
        m = 0
        for e in c.edges(family):
            m |= 1 << eid[e]
        out.append(m)
    return out


def exact_packing(
    g: Graph,
    family: Family,
    budget: int = DEFAULT_BUDGET,
    cap: int = DEFAULT_CAP,
) -> ExactResult:
    """Maximum edge-disjoint packing by branch-and-bound over copies.

    Copies are tried in order (edge count descending, canonical id); each
    node branches on using or forbidding the next copy.  A node is pruned
    when ``chosen + (edges still coverable) // min_edges`` or
    ``chosen + floor(LP + 1e-6)`` cannot beat the incumbent.  When the node
    budget runs out the best packing found is returned as a lower bound.
    """
    index = enumerate_unlabeled_copies(g, family, cap)
    if index.capped:
        raise CapExceeded(f"more than {cap} copies")
    copies = sorted(index.copies, key=lambda c: (-len(family.pattern_edges[c.pattern_id]), c))
    masks = _masks(g, family, copies)
    min_edges = family.min_edges

    def lp_bound(ids: list[int]) -> int:
        value = solve_packing_lp(g, family, [copies[i] for i in ids], FLOAT)[0]
        return math.floor(value + LP_MARGIN)

    all_ids = list(range(len(copies)))
    root_ub = min(lp_bound(all_ids), g.m // min_edges) if copies else 0
    best: list[int] = []
    nodes = 0
    exhausted = False

    class _Done(Exception):
        pass

    def search(avail: list[int], chosen: list[int]):
        nonlocal best, nodes, exhausted
        if len(chosen) > len(best):
            best = list(chosen)
            if len(best) >= root_ub:
                raise _Done
        for pos in range(len(avail)):
            nodes += 1
            if nodes > budget:
                exhausted = True
                raise _Done
            rest = avail[pos:]
            union = 0
            for i in rest:
                union |= masks[i]
            room = len(best) - len(chosen)
            if union.bit_count() // min_edges <= room:
                return
            if len(rest) > 1 and lp_bound(rest) <= room:
                return
            c = rest[0]
            mc = masks[c]
            chosen.append(c)
            search([i for i in rest[1:] if not masks[i] & mc], chosen)
            chosen.pop()

    if copies:
        try:
            search(all_ids, [])
        except _Done:
            pass
    status = LOWER_BOUND if exhausted else OPTIMAL
    packing = IntegerPacking([copies[i] for i in best])
    return ExactResult(len(best), packing, status, nodes, root_ub)


def greedy_packing(g: Graph, family: Family, seed, cap: int = DEFAULT_CAP) -> IntegerPacking:
    """Maximal packing built by taking copies in uniformly random order."""
    index = enumerate_unlabeled_copies(g, family, cap)
    if index.capped:
        raise CapExceeded(f"more than {cap} copies")
    return greedy_from_copies(g, family, index.copies, derive_rng(seed, "greedy"))


def greedy_from_copies(g: Graph, family: Family, copies: list[Copy], rng, used=()) -> IntegerPacking:
    used = set(used)
    chosen = []
    for k in rng.permutation(len(copies)):
        c = copies[int(k)]
        es = c.edges(family)
        if used.isdisjoint(es):
            used.update(es)
            chosen.append(c)
    return IntegerPacking(chosen)


def verify_integer_packing(g: Graph, family: Family, p: IntegerPacking | list[Copy]) -> Verdict:
    """Check every copy is a genuine copy of its pattern and copies are edge-disjoint."""
    copies = p.copies if isinstance(p, IntegerPacking) else list(p)
    owner: dict[Edge, Copy] = {}
    for c in copies:
        if not 0 <= c.pattern_id < len(family):
            return Verdict(False, f"copy {c.dump()}: unknown pattern id {c.pattern_id}", c)
        pattern = family[c.pattern_id]
        vs = c.vertices
        if len(vs) != pattern.n:
            return Verdict(False, f"copy {c.dump()}: expected {pattern.n} vertices", c)
        if len(set(vs)) != len(vs):
            return Verdict(False, f"copy {c.dump()}: repeated vertex", c)
        if any(not 0 <= v < g.n for v in vs):
            return Verdict(False, f"copy {c.dump()}: vertex out of range", c)
        for e in c.edges(family):
            if e not in g.edges:
                return Verdict(False, f"copy {c.dump()}: {e} is not an edge of the host", c)
            if e in owner:
                return Verdict(False, f"copies {owner[e].dump()} and {c.dump()} share edge {e}", e)
        for e in c.edges(family):
            owner[e] = c
    return Verdict(True)

