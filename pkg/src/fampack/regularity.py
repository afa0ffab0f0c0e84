"""Regular pairs, regularity-style partitions, the reduced graph, and projection onto it.

Deciding gamma-regularity exactly means looking at every subset pair, so two
one-sided tests are offered and every verdict records which one was used:

``sampling``
    Neighbourhood pairs (``X = N(b0) & A``, ``Y = N(a0) & B`` for pivots
    ``b0`` and ``a0 in X``) plus ``samples`` random subset pairs at the
    threshold sizes.  A pair is declared irregular only with an explicit
    witness; "regular" means no witness was found.

``degree-codegree``
    With ``N = M - d J`` the centred bipartite adjacency matrix, the top
    eigenvalue of ``N^T N`` (the centred co-degree matrix) bounds
    ``|d(X,Y) - d| <= ||N|| / sqrt(|X||Y|)``.  A pair is certified regular
    when that bound is below gamma at the threshold sizes.  Otherwise an
    optimising witness search (best-response prefixes seeded at vertex
    neighbourhoods) runs, and the pair is reported irregular, with a
    witness when one turns up.

``none`` skips the test and treats every pair as regular, leaving only the
density threshold.  At a few dozen vertices per class no pair passes a real
test, so desk-scale pipeline runs use it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from ._random import derive_rng
from .copies import Copy, enumerate_partite_copies
from .graph import Edge, Graph, VertexPartition, equitable_partition, norm_edge
from .lp import FractionalPacking

SAMPLING = "sampling"
CODEGREE = "degree-codegree"
ASSUME = "none"
METHODS = (SAMPLING, CODEGREE, ASSUME)
DEFAULT_SAMPLES = 200
_PIVOTS = 64


@dataclass
class PairVerdict:
    pair: tuple[int, int]
    density: Fraction
    regular: bool
    method: str
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    bound: float | None = None


def _check_gamma(gamma: float):
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")


def _bipartite(g: Graph, a: Sequence[int], b: Sequence[int]) -> np.ndarray:
    bpos = {v: k for k, v in enumerate(b)}
    m = np.zeros((len(a), len(b)), dtype=np.int64)
    for r, u in enumerate(a):
        for w in g.adj[u]:
            k = bpos.get(w)
            if k is not None:
                m[r, k] = 1
    return m


def _best_prefix(scores: np.ndarray, counts_fn, kmin: int, base: float):
    """Best prefix (by |density - base|) of vertices sorted by ``scores`` either way."""
    best = (-1.0, None)
    for order in (np.argsort(-scores, kind="stable"), np.argsort(scores, kind="stable")):
        cum = np.cumsum(scores[order])
        sizes = np.arange(1, len(order) + 1)
        dens = cum / counts_fn(sizes)
        dev = np.abs(dens - base)
        dev[: kmin - 1] = -1.0
        # largest size attaining the maximum deviation
        k = int(len(dev) - 1 - np.argmax(dev[::-1]))
        if dev[k] > best[0] + 1e-12:
            best = (float(dev[k]), order[: k + 1])
    return best


def _find_witness(m: np.ndarray, gamma: float, rng, samples: int, optimise: bool):
    """Subset pair (row ids, column ids) with maximal observed density deviation."""
    na, nb = m.shape
    d = m.mean()
    kx = math.floor(gamma * na) + 1
    ky = math.floor(gamma * nb) + 1
    if kx > na or ky > nb:
        return 0.0, None
    best_dev, best = -1.0, None

    def consider(xs, ys):
        nonlocal best_dev, best
        if len(xs) < kx or len(ys) < ky:
            return
        dev = abs(m[np.ix_(xs, ys)].mean() - d)
        if dev > best_dev + 1e-12:
            best_dev, best = dev, (np.sort(xs), np.sort(ys))

    def improve(xs):
        # alternate best responses: columns given rows, then rows given columns
        for _ in range(2):
            if len(xs) < kx:
                return
            dev, ys = _best_prefix(m[xs].sum(axis=0).astype(float), lambda s: s * len(xs), ky, d)
            if ys is None:
                return
            consider(xs, ys)
            dev, xs = _best_prefix(m[:, ys].sum(axis=1).astype(float), lambda s: s * len(ys), kx, d)
            if xs is None:
                return
            consider(xs, ys)

    piv_b = np.arange(nb) if nb <= _PIVOTS else np.sort(rng.choice(nb, _PIVOTS, replace=False))
    if not optimise:
        for b0 in piv_b:
            xs = np.flatnonzero(m[:, b0])
            if len(xs):
                consider(xs, np.flatnonzero(m[xs[0]]))
        piv_a = np.arange(na) if na <= _PIVOTS else np.sort(rng.choice(na, _PIVOTS, replace=False))
        for a0 in piv_a:
            ys = np.flatnonzero(m[a0])
            if len(ys):
                consider(np.flatnonzero(m[:, ys[0]]), ys)
    else:
        for b0 in piv_b:
            col = m[:, b0].astype(bool)
            improve(np.flatnonzero(col))
            improve(np.flatnonzero(~col))
        piv_a = np.arange(na) if na <= _PIVOTS else np.sort(rng.choice(na, _PIVOTS, replace=False))
        for a0 in piv_a:
            row = m[a0].astype(bool)
            for ys in (np.flatnonzero(row), np.flatnonzero(~row)):
                if len(ys) >= ky:
                    _, xs = _best_prefix(m[:, ys].sum(axis=1).astype(float), lambda s: s * len(ys), kx, d)
                    if xs is not None:
                        consider(xs, ys)
                        improve(xs)

    for _ in range(samples):
        xs = rng.choice(na, kx, replace=False)
        ys = rng.choice(nb, ky, replace=False)
        consider(xs, ys)
    return best_dev, best


def _codegree_bound(m: np.ndarray, gamma: float) -> float:
    na, nb = m.shape
    n = m - m.mean()
    lam = float(np.linalg.eigvalsh(n.T @ n)[-1]) if nb <= na else float(np.linalg.eigvalsh(n @ n.T)[-1])
    kx = math.floor(gamma * na) + 1
    ky = math.floor(gamma * nb) + 1
    return math.sqrt(max(lam, 0.0)) / math.sqrt(kx * ky) * (1 + 1e-9)


def check_regular_pair(
    g: Graph,
    a: Sequence[int],
    b: Sequence[int],
    gamma: float,
    method: str = SAMPLING,
    seed=0,
    samples: int = DEFAULT_SAMPLES,
    pair: tuple[int, int] = (0, 1),
) -> PairVerdict:
    """Judge whether ``(A, B)`` is gamma-regular; see the module docstring for methods."""
    _check_gamma(gamma)
    a, b = sorted(a), sorted(b)
    if not a or not b or set(a) & set(b):
        raise ValueError("pair classes must be non-empty and disjoint")
    m = _bipartite(g, a, b)
    dens = Fraction(int(m.sum()), len(a) * len(b))
    if method == ASSUME:
        return PairVerdict(pair, dens, True, method)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    rng = derive_rng(seed, "pair", *pair)
    bound = None
    if method == CODEGREE:
        bound = _codegree_bound(m, gamma)
        if bound < gamma:
            return PairVerdict(pair, dens, True, method, None, bound)
    _, wit = _find_witness(m, gamma, rng, samples, optimise=method == CODEGREE)
    if wit is not None:
        xs, ys = wit
        sub = Fraction(int(m[np.ix_(xs, ys)].sum()), len(xs) * len(ys))
        if abs(sub - dens) >= Fraction(gamma):
            witness = (tuple(a[i] for i in xs), tuple(b[j] for j in ys))
            return PairVerdict(pair, dens, False, method, witness, bound)
    return PairVerdict(pair, dens, method == SAMPLING, method, None, bound)


def witness_violates(g: Graph, a: Sequence[int], b: Sequence[int], gamma: float, witness) -> bool:
    """Independent re-check that a witness breaks gamma-regularity of ``(A, B)``."""
    from .graph import density

    x, y = witness
    if not set(x) <= set(a) or not set(y) <= set(b):
        return False
    if not (len(x) > gamma * len(a) and len(y) > gamma * len(b)):
        return False
    return abs(density(g, x, y) - density(g, a, b)) >= gamma


def pair_verdicts(
    g: Graph,
    p: VertexPartition,
    gamma: float,
    method: str = SAMPLING,
    seed=0,
    samples: int = DEFAULT_SAMPLES,
) -> dict[tuple[int, int], PairVerdict]:
    out = {}
    for i, j in combinations(range(p.m), 2):
        out[(i, j)] = check_regular_pair(
            g, p.classes[i], p.classes[j], gamma, method, seed, samples, pair=(i, j)
        )
    return out


def verdicts_csv(verdicts: dict[tuple[int, int], PairVerdict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "density", "regular", "method"])
    for (i, j), v in sorted(verdicts.items()):
        w.writerow([i, j, str(v.density), int(v.regular), v.method])
    return buf.getvalue()


@dataclass
class PartitionVerdict:
    certified: bool
    m: int
    irregular_pairs: int
    irregular_fraction: float
    rounds: int
    method: str


def _refine_by_witnesses(g: Graph, p: VertexPartition, irregular: list[PairVerdict], new_m: int):
    # Each witness (X, Y) becomes two global vertex features: "behaves like X
    # towards Y" and "behaves like Y towards X".  Vertices are ordered by the
    # leading principal component of the feature matrix, which lines up
    # features that encode the same split whatever their orientation, and
    # then cut into equal chunks.
    adj = g.adjacency_matrix().astype(np.float64)
    feats = []
    for v in irregular:
        if v.witness is None:
            continue
        x, y = (np.asarray(s) for s in v.witness)
        base = float(v.density)
        mid = (adj[np.ix_(x, y)].mean() + base) / 2
        feats.append(adj[:, y].mean(axis=1) > mid)
        feats.append(adj[:, x].mean(axis=1) > mid)
    score = np.zeros(g.n)
    if feats:
        f = np.column_stack(feats).astype(np.float64)
        f -= f.mean(axis=0)
        if np.any(f):
            u, sv, _ = np.linalg.svd(f, full_matrices=False)
            lead = u[:, 0] * sv[0]
            # fix the sign so the ordering is reproducible
            pivot = int(np.argmax(np.abs(lead)))
            score = np.round(lead * np.sign(lead[pivot]), 9)
    order = np.lexsort([np.arange(g.n), np.asarray(p.class_of), score])
    q, r = divmod(g.n, new_m)
    classes, pos = [], 0
    for k in range(new_m):
        size = q + (1 if k < r else 0)
        classes.append(tuple(int(v) for v in order[pos:pos + size]))
        pos += size
    return VertexPartition(tuple(classes), "regularized", g.n)


def regularity_partition(
    g: Graph,
    gamma: float,
    max_classes: int,
    seed=0,
    method: str = SAMPLING,
    samples: int = DEFAULT_SAMPLES,
) -> tuple[VertexPartition, PartitionVerdict]:
    """Best-effort gamma-regular equitable partition by witness-driven refinement.

    Starts from a random equitable partition with ``ceil(1/gamma)`` classes
    and doubles the class count (capped by ``max_classes``) after each round
    with too many irregular pairs.  Certified means at most
    ``gamma * C(m, 2)`` pairs were judged irregular.
    """
    _check_gamma(gamma)
    m = math.ceil(1 / gamma - 1e-12)
    if m > max_classes:
        raise ValueError(f"max_classes={max_classes} is below ceil(1/gamma)={m}")
    m = min(m, g.n)
    p = equitable_partition(g.n, m, seed)
    rounds = 0
    while True:
        rounds += 1
        verdicts = pair_verdicts(g, p, gamma, method, (seed, "round", rounds), samples)
        irregular = [v for v in verdicts.values() if not v.regular]
        n_pairs = max(1, math.comb(p.m, 2))
        frac = len(irregular) / n_pairs
        if len(irregular) <= gamma * math.comb(p.m, 2):
            part = VertexPartition(p.classes, "regularized", g.n)
            return part, PartitionVerdict(True, p.m, len(irregular), frac, rounds, method)
        new_m = min(2 * p.m, max_classes, g.n)
        if new_m <= p.m:
            part = VertexPartition(p.classes, "regularized", g.n)
            return part, PartitionVerdict(False, p.m, len(irregular), frac, rounds, method)
        p = _refine_by_witnesses(g, p, irregular, new_m)


@dataclass
class DiscardReport:
    internal: int
    irregular: int
    sparse: int
    kept: int
    bound: float
    n: int
    delta: float

    @property
    def discarded(self) -> int:
        return self.internal + self.irregular + self.sparse

    @property
    def within_bound(self) -> bool:
        return self.discarded < self.bound

    def to_json_obj(self) -> dict:
        return {
            "internal": self.internal,
            "irregular": self.irregular,
            "sparse": self.sparse,
            "kept": self.kept,
            "discarded": self.discarded,
            "bound_0_72_delta_n2": self.bound,
            "within_bound": self.within_bound,
        }


@dataclass
class ReducedGraph:
    base: Graph
    densities: dict[Edge, Fraction]
    partition: VertexPartition
    gamma: float
    delta: float
    verdicts: dict[tuple[int, int], PairVerdict] = field(default_factory=dict)

    @property
    def pair_volume(self) -> int:
        return pair_volume(self.partition)


def pair_volume(p: VertexPartition) -> int:
    """Largest ``|V_i||V_j|`` over distinct classes; equals ``(n/m)^2`` when m divides n."""
    sizes = sorted(p.sizes, reverse=True)
    return sizes[0] * sizes[1] if len(sizes) > 1 else sizes[0] ** 2


def discard_edges(
    g: Graph,
    p: VertexPartition,
    gamma: float,
    delta,
    verdicts: dict[tuple[int, int], PairVerdict] | None = None,
    method: str = SAMPLING,
    seed=0,
) -> tuple[Graph, DiscardReport]:
    """Keep only edges across distinct classes forming a regular pair of density >= delta."""
    if verdicts is None:
        verdicts = pair_verdicts(g, p, gamma, method, seed)
    cls = p.class_of
    internal = irregular = sparse = 0
    kept = []
    for u, v in g.sorted_edges:
        i, j = cls[u], cls[v]
        if i == j:
            internal += 1
            continue
        verdict = verdicts[norm_edge(i, j)]
        if verdict.density < _as_fraction(delta):
            sparse += 1
        elif not verdict.regular:
            irregular += 1
        else:
            kept.append((u, v))
    report = DiscardReport(internal, irregular, sparse, len(kept), 0.72 * float(delta) * g.n**2, g.n, float(delta))
    return Graph(g.n, frozenset(kept)), report


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def build_reduced_graph(
    g: Graph,
    p: VertexPartition,
    gamma: float,
    delta,
    verdicts: dict[tuple[int, int], PairVerdict] | None = None,
    method: str = SAMPLING,
    seed=0,
) -> ReducedGraph:
    if verdicts is None:
        verdicts = pair_verdicts(g, p, gamma, method, seed)
    dlt = _as_fraction(delta)
    edges, dens = [], {}
    for (i, j), v in sorted(verdicts.items()):
        if v.regular and v.density >= dlt:
            edges.append((i, j))
            dens[(i, j)] = v.density
    return ReducedGraph(Graph(p.m, frozenset(edges)), dens, p, gamma, float(delta), verdicts)


def project_packing_to_reduced(psi_star: FractionalPacking, p: VertexPartition, r: ReducedGraph) -> FractionalPacking:
    """Collapse a labeled packing of good copies onto labeled copies of patterns in R.

    Each copy contributes ``psi*(H) / pair_volume`` to the R-copy given by
    the classes of its vertices.
    """
    if not psi_star.labeled:
        raise ValueError("projection needs a labeled packing")
    vol = pair_volume(p)
    cls = p.class_of
    fam = psi_star.family
    out: dict[Copy, Fraction] = {}
    for c, w in sorted(psi_star.weights.items()):
        classes = tuple(cls[v] for v in c.vertices)
        if len(set(classes)) != len(classes):
            raise ValueError(f"copy {c.dump()} is not good: two vertices share a class")
        rc = Copy(c.pattern_id, classes)
        for e in rc.edges(fam):
            if e not in r.base.edges:
                raise ValueError(f"copy {c.dump()} uses class pair {e} that is not an edge of R")
        share = w / vol if not isinstance(w, int) else Fraction(w, vol)
        out[rc] = out.get(rc, 0) + share
    return FractionalPacking(r.base, fam, out, labeled=True)


def reduced_load_excess(psi_prime: FractionalPacking, r: ReducedGraph) -> dict[Edge, object]:
    """R-edges whose load exceeds their density (empty when the projection is legal)."""
    loads = psi_prime.edge_loads()
    return {e: load for e, load in loads.items() if load > r.densities.get(e, 0)}


def edge_copy_counts(w: Graph, pattern: Graph, classes: Sequence[Sequence[int]]):
    """``[(edge, pattern_edge, c(e))]`` for every W-edge lying on a pattern-edge class pair.

    ``c(e)`` counts partite copies through ``e``.  Three-vertex patterns use
    matrix products; larger ones enumerate copies.
    """
    k = pattern.n
    if len(classes) != k:
        raise ValueError(f"need {k} classes, got {len(classes)}")
    classes = [sorted(c) for c in classes]
    pedges = pattern.sorted_edges
    out = []
    if k == 3:
        adj = w.adjacency_matrix().astype(np.int64)
        idx = [np.asarray(c, dtype=np.int64) for c in classes]
        pset = set(pedges)
        for a, b in pedges:
            c = 3 - a - b
            mab = adj[np.ix_(idx[a], idx[b])]
            if norm_edge(a, c) in pset and norm_edge(b, c) in pset:
                cnt = adj[np.ix_(idx[a], idx[c])] @ adj[np.ix_(idx[b], idx[c])].T
            elif norm_edge(a, c) in pset:
                cnt = np.repeat(adj[np.ix_(idx[a], idx[c])].sum(axis=1)[:, None], len(idx[b]), axis=1)
            elif norm_edge(b, c) in pset:
                cnt = np.repeat(adj[np.ix_(idx[b], idx[c])].sum(axis=1)[None, :], len(idx[a]), axis=0)
            else:
                cnt = np.full(mab.shape, len(idx[c]), dtype=np.int64)
            rows, cols = np.nonzero(mab)
            vals = cnt[rows, cols]
            for r_, c_, val in zip(idx[a][rows].tolist(), idx[b][cols].tolist(), vals.tolist()):
                out.append((norm_edge(r_, c_), (a, b), int(val)))
        return out
    counts: dict[Edge, int] = {}
    for cp in enumerate_partite_copies(w, pattern, classes):
        for i, j in pedges:
            e = norm_edge(cp.vertices[i], cp.vertices[j])
            counts[e] = counts.get(e, 0) + 1
    for a, b in pedges:
        cb = set(classes[b])
        for u in classes[a]:
            for v in sorted(w.adj[u] & cb):
                e = norm_edge(u, v)
                out.append((e, (a, b), counts.get(e, 0)))
    return out


@dataclass
class CountingReport:
    t: int
    n_edges: int
    n_ok: int
    max_rel_deviation: float
    tolerance: float
    survivors_fraction: float
    survives: bool
    densities: dict[tuple[int, int], float] = field(default_factory=dict)

    @property
    def fraction_ok(self) -> float:
        return self.n_ok / self.n_edges if self.n_edges else 1.0

    def to_json_obj(self) -> dict:
        return {
            "t": self.t,
            "edges": self.n_edges,
            "edges_ok": self.n_ok,
            "fraction_ok": self.fraction_ok,
            "max_rel_deviation": self.max_rel_deviation,
            "tolerance": self.tolerance,
            "survivors_fraction": self.survivors_fraction,
            "survives": self.survives,
            "densities": {f"{i}-{j}": d for (i, j), d in sorted(self.densities.items())},
        }


def counting_lemma_check(
    w: Graph,
    pattern: Graph,
    classes: Sequence[Sequence[int]],
    zeta: float,
    delta: float = 0.0,
) -> CountingReport:
    """Share of edges whose partite-copy count is within ``zeta t^(k-2)`` of its density prediction.

    The prediction for an edge on class pair ``(i, j)`` is
    ``t^(k-2) * prod d(s, p) / d(i, j)`` over the pattern edges.  Dropping
    the failing edges stands in for the cleaned subgraph; it "survives" when
    at least a ``1 - zeta`` fraction of edges remain.
    """
    sizes = {len(c) for c in classes}
    if len(sizes) != 1:
        raise ValueError("counting check needs classes of equal size")
    t = sizes.pop()
    k = pattern.n
    dens = {}
    for a, b in pattern.sorted_edges:
        e = int(_bipartite(w, sorted(classes[a]), sorted(classes[b])).sum())
        d = e / (t * t)
        if d <= 0 or d < delta:
            raise ValueError(f"class pair {(a, b)} has density {d} below delta={delta}")
        dens[(a, b)] = d
    prod = math.prod(dens.values())
    scale = float(t) ** (k - 2)
    tol = zeta * scale
    counts = edge_copy_counts(w, pattern, classes)
    ok = 0
    worst = 0.0
    for _, pe, c in counts:
        expected = scale * prod / dens[pe]
        dev = abs(c - expected)
        if dev < tol:
            ok += 1
        worst = max(worst, dev / expected)
    frac = ok / len(counts) if counts else 1.0
    return CountingReport(t, len(counts), ok, worst, tol, frac, frac >= 1 - zeta, dens)


def report_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)
