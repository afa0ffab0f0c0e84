"""Uniform hypergraphs and near-perfect matchings via the semi-random nibble."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._random import derive_rng
from .lp import Verdict

DEFAULT_BITE = 0.1
DEFAULT_ROUNDS = 200
DEFAULT_MU = 0.1


@dataclass(frozen=True)
class UniformHypergraph:
    q: int
    r: int
    hyperedges: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("uniformity must be >= 1")
        seen = set()
        normed = []
        for h in self.hyperedges:
            h = tuple(sorted(int(v) for v in h))
            if len(h) != self.r or len(set(h)) != self.r:
                raise ValueError(f"hyperedge {h} does not have {self.r} distinct vertices")
            if h[0] < 0 or h[-1] >= self.q:
                raise ValueError(f"hyperedge {h} out of range for q={self.q}")
            if h in seen:
                raise ValueError(f"duplicate hyperedge {h}")
            seen.add(h)
            normed.append(h)
        object.__setattr__(self, "hyperedges", tuple(normed))

    @classmethod
    def complete(cls, q: int, r: int) -> "UniformHypergraph":
        return cls(q, r, tuple(itertools.combinations(range(q), r)))

    def __len__(self) -> int:
        return len(self.hyperedges)

    def degrees(self) -> list[int]:
        deg = [0] * self.q
        for h in self.hyperedges:
            for v in h:
                deg[v] += 1
        return deg

    def codegrees(self) -> Counter:
        """Co-degree of every vertex pair that shares at least one hyperedge."""
        out: Counter = Counter()
        for h in self.hyperedges:
            out.update(itertools.combinations(h, 2))
        return out

    def as_array(self) -> np.ndarray:
        return np.asarray(self.hyperedges, dtype=np.int64).reshape(len(self.hyperedges), self.r)


def parse_hypergraph(text: str) -> UniformHypergraph:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise ValueError("first line must be 'q r'")
    q, r = int(lines[0][0]), int(lines[0][1])
    return UniformHypergraph(q, r, tuple(tuple(int(x) for x in ln) for ln in lines[1:]))


def format_hypergraph(h: UniformHypergraph) -> str:
    out = [f"{h.q} {h.r}"]
    out.extend(" ".join(map(str, e)) for e in h.hyperedges)
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class DegreeProfile:
    d_min: int
    d_max: int
    max_codegree: int
    suggested_d: float


def degree_profile(h: UniformHypergraph) -> DegreeProfile:
    deg = h.degrees()
    cod = h.codegrees()
    return DegreeProfile(
        min(deg) if deg else 0,
        max(deg) if deg else 0,
        max(cod.values(), default=0),
        sum(deg) / h.q if h.q else 0.0,
    )


def check_pippenger_conditions(h: UniformHypergraph, mu: float, d: float) -> Verdict:
    """Near-regularity ``(1-mu)d < deg(x) < (1+mu)d`` and co-degrees ``< mu d``."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    for x, dx in enumerate(h.degrees()):
        if not (1 - mu) * d < dx < (1 + mu) * d:
            return Verdict(False, f"degree of vertex {x} is {dx}, outside ({(1 - mu) * d}, {(1 + mu) * d})", x)
    for pair, c in sorted(h.codegrees().items()):
        if not c < mu * d:
            return Verdict(False, f"co-degree of {pair} is {c}, not below {mu * d}", pair)
    return Verdict(True)


def verify_matching(h: UniformHypergraph, matching: Sequence[int]) -> Verdict:
    used: dict[int, int] = {}
    for k in matching:
        if not 0 <= k < len(h):
            return Verdict(False, f"hyperedge id {k} out of range", k)
        for v in h.hyperedges[k]:
            if v in used:
                return Verdict(False, f"hyperedges {used[v]} and {k} share vertex {v}", v)
            used[v] = k
    return Verdict(True)


def _greedy_fill(edges: np.ndarray, order: np.ndarray, covered: np.ndarray) -> list[int]:
    taken = []
    for k in order:
        row = edges[k]
        if not covered[row].any():
            covered[row] = True
            taken.append(int(k))
    return taken


def greedy_matching(h: UniformHypergraph, seed) -> list[int]:
    """Maximal matching taking hyperedges in uniformly random order."""
    if not len(h):
        return []
    rng = derive_rng(seed, "greedy-matching")
    edges = h.as_array()
    covered = np.zeros(h.q, dtype=bool)
    return sorted(_greedy_fill(edges, rng.permutation(len(h)), covered))


def nibble_matching(
    h: UniformHypergraph,
    beta: float = 0.1,
    bite_fraction: float = DEFAULT_BITE,
    seed=0,
    max_rounds: int = DEFAULT_ROUNDS,
) -> list[int]:
    """Semi-random nibble followed by a greedy sweep; returns sorted hyperedge ids.

    Each round keeps every surviving hyperedge independently with
    probability ``bite_fraction / D`` (``D`` the current average degree of
    live vertices), accepts the sampled hyperedges that meet no other
    sampled one, and deletes the vertices they cover.  Rounds stop once the
    live part has fewer than ``beta * q`` vertices, nothing survives, or
    ``max_rounds`` is reached; a random greedy sweep then finishes.
    """
    if not len(h):
        return []
    rng = derive_rng(seed, "nibble")
    edges = h.as_array()
    covered = np.zeros(h.q, dtype=bool)
    alive = np.ones(len(h), dtype=bool)
    matching: list[int] = []
    stop_live = beta * h.q

    for _ in range(max_rounds):
        ids = np.flatnonzero(alive)
        if ids.size == 0:
            break
        live_vertices = np.unique(edges[ids])
        if live_vertices.size < stop_live:
            break
        avg_deg = ids.size * h.r / live_vertices.size
        p = min(1.0, bite_fraction / avg_deg)
        picked = ids[rng.random(ids.size) < p]
        if picked.size:
            hits = np.bincount(edges[picked].ravel(), minlength=h.q)
            ok = picked[(hits[edges[picked]] == 1).all(axis=1)]
            if ok.size:
                matching.extend(int(k) for k in ok)
                covered[edges[ok].ravel()] = True
                alive &= ~covered[edges].any(axis=1)

    rest = np.flatnonzero(alive & ~covered[edges].any(axis=1))
    matching.extend(_greedy_fill(edges, rest[rng.permutation(rest.size)], covered))
    return sorted(matching)
