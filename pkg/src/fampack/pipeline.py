"""The randomized packing pipeline: LP, partition, projection to R, coloring, nibble.

Stages, in order:

1. solve the packing LP and spread weights over labeled copies (``psi``);
2. partition ``V`` into ``m'`` classes and refine each class at random into
   ``factor`` parts (``m = m' * factor`` classes);
3. keep good copies (``psi**``), discard edges inside classes and on
   irregular or sparse pairs, keep copies that survive (``psi*``);
4. project onto the reduced graph R (``psi'``);
5. color every kept edge with a labeled R-copy ``H`` with probability
   ``psi'(H) / d(i, j)``;
6. for every color above the threshold, match the hypergraph whose vertices
   are the edges colored ``H`` and whose hyperedges are the partite copies
   they form;
7. map matchings back to copies, optionally top up greedily, and verify.

All weights after the LP are exact fractions, so the projection identity and
the coloring mass bounds are checked without tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

import numpy as np

from ._random import derive_rng
from .copies import (
    DEFAULT_CAP,
    CapExceeded,
    Copy,
    automorphisms,
    canonical_vertices,
    enumerate_partite_copies,
    enumerate_unlabeled_copies,
)
from .exact import IntegerPacking, greedy_from_copies, verify_integer_packing
from .graph import Edge, Family, Graph, VertexPartition, equitable_partition, ideal_class_size, refine_partition
from .hypergraph import DEFAULT_BITE, DEFAULT_MU, DEFAULT_ROUNDS, UniformHypergraph, nibble_matching
from .lp import EXACT, FLOAT, FractionalPacking, labeled_normalize, rationalize, restrict_packing, solve_packing_lp
from .regularity import (
    ASSUME,
    METHODS,
    SAMPLING,
    ReducedGraph,
    build_reduced_graph,
    discard_edges,
    edge_copy_counts,
    pair_verdicts,
    pair_volume,
    project_packing_to_reduced,
    reduced_load_excess,
    regularity_partition,
)

PRACTICAL = "practical"
THEORETICAL = "theoretical"
EQUITABLE = "equitable"
REGULARITY = "regularity"
INFEASIBLE = "parameters infeasible at this n"


class PipelineError(RuntimeError):
    """A stage precondition failed; ``stage`` names the stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class PrecondError(PipelineError):
    pass


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def _s(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(x)


# --------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class TheoreticalConstants:
    epsilon: Fraction
    k_infinity: float
    k0: int
    delta: Fraction
    beta: Fraction
    mu: Fraction
    zeta: Fraction
    gamma: Fraction
    refinement_factor: int
    gamma_prime: Fraction

    def psi_threshold(self, m: int) -> Fraction:
        """``m^(1 - k0)``: colors at or below it are not matched."""
        return Fraction(1, m ** (self.k0 - 1))

    @property
    def min_prime_classes(self) -> int:
        """Fewest classes a gamma'-regular partition can start from."""
        return math.ceil(1 / self.gamma_prime)

    def to_json_obj(self) -> dict:
        # zeta underflows a float for large k0, so its base-10 log goes along
        z = self.zeta
        log10_zeta = (math.log10(z.numerator) - math.log10(z.denominator)) if z else None
        return {
            "epsilon": str(self.epsilon),
            "k_infinity": "inf" if math.isinf(self.k_infinity) else int(self.k_infinity),
            "k0": self.k0,
            "delta": str(self.delta),
            "beta": str(self.beta),
            "mu": str(self.mu),
            "zeta": repr(float(z)),
            "log10_zeta": log10_zeta,
            "gamma": str(self.gamma),
            "refinement_factor": self.refinement_factor,
            "gamma_prime": str(self.gamma_prime),
            "notes": [
                "the partition size M(gamma') and the threshold N are non-constructive;"
                " no desk-scale value is claimed",
            ],
        }


def compute_constants(epsilon, family: Family | int | float | None = None, mu=DEFAULT_MU, gamma=0.1) -> TheoreticalConstants:
    """Derive the parameter cascade from ``epsilon``.

    ``family`` may be a :class:`Family`, its largest pattern order, or
    ``None``/``inf`` for an unbounded family.
    """
    eps = _frac(epsilon)
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if isinstance(family, Family):
        k_inf: float = family.k_infinity
    elif family is None:
        k_inf = math.inf
    else:
        k_inf = family
    k0 = math.ceil(20 / eps)
    if not math.isinf(k_inf):
        k0 = min(int(k_inf), k0)
    delta = eps / 4
    mu_f = _frac(mu)
    gamma_f = _frac(gamma)
    zeta = mu_f * delta ** (k0 * k0) / 2
    factor = Fraction(25 * k0 * k0) / eps
    return TheoreticalConstants(
        epsilon=eps,
        k_infinity=k_inf,
        k0=k0,
        delta=delta,
        beta=delta,
        mu=mu_f,
        zeta=zeta,
        gamma=gamma_f,
        refinement_factor=math.ceil(factor),
        gamma_prime=gamma_f * eps / (25 * k0 * k0),
    )


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class PipelineConfig:
    """Run parameters.  Practical mode uses the values as given; theoretical
    mode derives ``factor``, ``delta``, ``beta``, ``zeta`` and the threshold
    from ``epsilon``, ``mu`` and ``gamma``."""

    mode: str = PRACTICAL
    epsilon: float = 0.5
    m_prime: int = 6
    factor: int = 2
    gamma: float = 0.25
    delta: float = 0.2
    beta: float = 0.1
    mu: float = DEFAULT_MU
    zeta: float = 0.05
    bite_fraction: float = DEFAULT_BITE
    psi_threshold: float | None = None
    pair_check: str = ASSUME
    partition: str = EQUITABLE
    lp_mode: str = FLOAT
    copy_cap: int = DEFAULT_CAP
    max_rounds: int = DEFAULT_ROUNDS
    samples: int = 200
    final_greedy: bool = True

    def __post_init__(self):
        if self.mode not in (PRACTICAL, THEORETICAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.pair_check not in METHODS:
            raise ValueError(f"pair_check must be one of {METHODS}")
        if self.partition not in (EQUITABLE, REGULARITY):
            raise ValueError(f"partition must be {EQUITABLE!r} or {REGULARITY!r}")
        if self.lp_mode not in (EXACT, FLOAT):
            raise ValueError(f"lp_mode must be {EXACT!r} or {FLOAT!r}")
        if self.m_prime < 1 or self.factor < 1:
            raise ValueError("m_prime and factor must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        obj = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**obj)


# --------------------------------------------------------------------------
# stages


def restrict_to_good(psi: FractionalPacking, p: VertexPartition, k0: int | None = None) -> FractionalPacking:
    """``psi**``: zero out copies with more than ``k0`` vertices or two vertices in one class."""
    if not psi.labeled:
        raise ValueError("restrict_to_good expects a labeled packing")
    cls = p.class_of

    def good(c: Copy) -> bool:
        if k0 is not None and len(c.vertices) > k0:
            return False
        return len({cls[v] for v in c.vertices}) == len(c.vertices)

    return restrict_packing(psi, good)


@dataclass
class ColorAssignment:
    """Edge colors drawn from the labeled R-copies; uncolored edges are absent."""

    colors: dict[Edge, Copy]
    palette: list[Copy]
    probabilities: dict[Edge, list[tuple[Copy, Fraction]]]
    partition: VertexPartition

    def pair_of(self, e: Edge) -> Edge:
        cls = self.partition.class_of
        i, j = cls[e[0]], cls[e[1]]
        return (i, j) if i < j else (j, i)

    def mass(self) -> dict[Edge, Fraction]:
        """Total color probability on every R-edge."""
        return {rp: sum((pr for _, pr in opts), Fraction(0)) for rp, opts in self.probabilities.items()}

    def edges_of(self, h: Copy) -> list[Edge]:
        return sorted(e for e, c in self.colors.items() if c == h)


def random_coloring(
    g_star: Graph,
    r: ReducedGraph,
    psi_prime: FractionalPacking,
    seed,
) -> ColorAssignment:
    """Give every edge of ``g_star`` color ``H`` with probability ``psi'(H) / d(i, j)``.

    The draws are independent across edges; an edge stays uncolored with
    the leftover probability.
    """
    excess = reduced_load_excess(psi_prime, r)
    if excess:
        e = min(excess)
        raise PrecondError("coloring", f"load {excess[e]} on R-edge {e} exceeds density {r.densities.get(e, 0)}")
    fam = psi_prime.family
    palette = sorted(psi_prime.weights)
    probs: dict[Edge, list[tuple[Copy, Fraction]]] = {}
    for h in palette:
        for e in h.edges(fam):
            probs.setdefault(e, []).append((h, _frac(psi_prime.weights[h]) / r.densities[e]))
    for e, opts in probs.items():
        if sum((pr for _, pr in opts), Fraction(0)) > 1:
            raise PrecondError("coloring", f"color probabilities on R-edge {e} sum above 1")

    cum = {e: np.cumsum([float(pr) for _, pr in opts]) for e, opts in probs.items()}
    cls = r.partition.class_of
    edges = g_star.sorted_edges
    draws = derive_rng(seed, "coloring").random(len(edges))
    colors: dict[Edge, Copy] = {}
    for e, u in zip(edges, draws):
        i, j = cls[e[0]], cls[e[1]]
        rp = (i, j) if i < j else (j, i)
        if rp not in r.base.edges:
            raise PrecondError("coloring", f"edge {e} lies on class pair {rp}, which is not an edge of R")
        c = cum.get(rp)
        if c is None:
            continue
        k = int(np.searchsorted(c, u, side="right"))
        if k < len(c):
            colors[e] = probs[rp][k][0]
    return ColorAssignment(colors, palette, probs, r.partition)


def build_color_subgraph(assignment: ColorAssignment, h: Copy, family: Family) -> Graph:
    """``X_H``: edges colored ``h`` that lie on the class pairs of ``h``'s pattern edges."""
    pairs = set(h.edges(family))
    keep = [e for e in assignment.edges_of(h) if assignment.pair_of(e) in pairs]
    return Graph(assignment.partition.n, frozenset(keep))


@dataclass
class ConcentrationReport:
    n_edges: int
    n_ok: int
    expected: float
    tolerance: float
    max_rel_deviation: float

    @property
    def fraction_ok(self) -> float:
        return self.n_ok / self.n_edges if self.n_edges else 1.0

    def to_json_obj(self) -> dict:
        return {
            "edges": self.n_edges,
            "edges_ok": self.n_ok,
            "fraction_ok": self.fraction_ok,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "max_rel_deviation": self.max_rel_deviation,
        }


def concentration_check(x_h: Graph, pattern: Graph, classes, psi_prime_h, mu: float, t: int) -> ConcentrationReport:
    """How many edges of ``X_H`` lie in about ``t^(k-2) psi'(H)^(r-1)`` copies.

    An edge passes when its partite-copy count is within
    ``mu * psi'(H)^(r-1) * t^(k-2)`` of that value.
    """
    k, r = pattern.n, pattern.m
    expected = float(t) ** (k - 2) * float(psi_prime_h) ** (r - 1)
    tol = mu * expected
    counts = edge_copy_counts(x_h, pattern, classes) if x_h.m else []
    ok, worst = 0, 0.0
    for _, _, c in counts:
        dev = abs(c - expected)
        if dev < tol:
            ok += 1
        if expected > 0:
            worst = max(worst, dev / expected)
    return ConcentrationReport(len(counts), ok, expected, tol, worst)


# --------------------------------------------------------------------------
# report


@dataclass
class ColorRecord:
    color: Copy
    psi_prime: Fraction
    matched: bool
    x_edges: int = 0
    edge_bound: float = 0.0
    hyperedges: int = 0
    matching: int = 0
    target: float = 0.0
    concentration: ConcentrationReport | None = None

    @property
    def edge_bound_ok(self) -> bool:
        return self.x_edges > self.edge_bound

    def to_json_obj(self) -> dict:
        out = {
            "color": self.color.dump(),
            "psi_prime": str(self.psi_prime),
            "matched": self.matched,
        }
        if self.matched:
            out.update(
                {
                    "x_edges": self.x_edges,
                    "edge_count_bound": self.edge_bound,
                    "edge_count_ok": self.edge_bound_ok,
                    "hyperedges": self.hyperedges,
                    "matching": self.matching,
                    "matching_target": self.target,
                    "concentration": self.concentration.to_json_obj() if self.concentration else None,
                }
            )
        return out


@dataclass
class PipelineTrace:
    """Stage outputs kept for inspection; never serialized."""

    partition: VertexPartition
    g_star: Graph
    reduced: ReducedGraph
    psi_star: FractionalPacking
    psi_prime: FractionalPacking
    coloring: ColorAssignment


@dataclass
class PipelineReport:
    seed: int
    mode: str
    config: PipelineConfig
    status: str = "ok"
    message: str = ""
    n: int = 0
    m: int = 0
    constants: dict | None = None
    lp_value: Fraction | float | None = None
    lp_arithmetic: str = ""
    w_psi: Fraction = Fraction(0)
    w_psi_good: Fraction = Fraction(0)
    w_psi_star: Fraction = Fraction(0)
    w_psi_prime: Fraction = Fraction(0)
    pair_volume: int = 0
    projection_identity: bool = True
    reduced_load_ok: bool = True
    good_loss_ok: bool | None = None
    partition_verdict: dict | None = None
    discard: dict | None = None
    reduced_edges: int = 0
    colored_edges: int = 0
    uncolored_edges: int = 0
    psi_threshold: Fraction | float = Fraction(0)
    colors: list[ColorRecord] = field(default_factory=list)
    pipeline_size: int = 0
    greedy_extra: int = 0
    final_size: int = 0
    verified: bool = False
    trace: PipelineTrace | None = field(default=None, repr=False, compare=False)

    def to_json_obj(self) -> dict:
        matched = [c for c in self.colors if c.matched]
        conc = [c.concentration for c in matched if c.concentration]
        return {
            "seed": self.seed,
            "mode": self.mode,
            "status": self.status,
            "message": self.message,
            "config": asdict(self.config),
            "constants": self.constants,
            "n": self.n,
            "m": self.m,
            "lp": {
                "value": None if self.lp_value is None else _s(self.lp_value),
                "arithmetic": self.lp_arithmetic,
            },
            "weights": {
                "psi": str(self.w_psi),
                "psi_good": str(self.w_psi_good),
                "psi_star": str(self.w_psi_star),
                "psi_prime": str(self.w_psi_prime),
            },
            "pair_volume": self.pair_volume,
            "checks": {
                "projection_identity": self.projection_identity,
                "reduced_load_within_density": self.reduced_load_ok,
                "good_loss_within_0_07_eps_n2": self.good_loss_ok,
                "edge_count_bound_pass_rate": _rate([c.edge_bound_ok for c in matched]),
                "concentration_mean_fraction": (
                    sum(c.fraction_ok for c in conc) / len(conc) if conc else None
                ),
            },
            "partition": self.partition_verdict,
            "discard": self.discard,
            "reduced_edges": self.reduced_edges,
            "colored_edges": self.colored_edges,
            "uncolored_edges": self.uncolored_edges,
            "psi_threshold": _s(self.psi_threshold),
            "colors": [c.to_json_obj() for c in self.colors],
            "pipeline_size": self.pipeline_size,
            "greedy_extra": self.greedy_extra,
            "final_size": self.final_size,
            "verified": self.verified,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)


def _rate(flags: list[bool]):
    return sum(flags) / len(flags) if flags else None


# --------------------------------------------------------------------------
# driver


def _partition(g: Graph, cfg: PipelineConfig, m_prime: int, gamma: float, seed, report: PipelineReport) -> VertexPartition:
    if cfg.partition == REGULARITY or cfg.mode == THEORETICAL:
        method = cfg.pair_check if cfg.pair_check != ASSUME else SAMPLING
        p, verdict = regularity_partition(g, gamma, max(m_prime, math.ceil(1 / gamma)), (seed, "partition"), method, cfg.samples)
        report.partition_verdict = asdict(verdict)
        return p
    if m_prime > g.n:
        raise PipelineError("partition", f"m'={m_prime} exceeds n={g.n}")
    return equitable_partition(g.n, m_prime, (seed, "partition"))


def run_pipeline(g: Graph, family: Family, config: PipelineConfig, seed: int) -> tuple[IntegerPacking, PipelineReport]:
    """Run every stage and return the verified packing with its report."""
    cfg = config
    report = PipelineReport(seed=seed, mode=cfg.mode, config=cfg, n=g.n)

    k0 = min(family.k_infinity, math.ceil(20 / _frac(cfg.epsilon)))
    factor, m_prime, gamma = cfg.factor, cfg.m_prime, cfg.gamma
    delta, beta, zeta, mu = cfg.delta, cfg.beta, cfg.zeta, cfg.mu
    threshold = None if cfg.psi_threshold is None else _frac(cfg.psi_threshold)
    consts = None
    if cfg.mode == THEORETICAL:
        consts = compute_constants(cfg.epsilon, family, cfg.mu, cfg.gamma)
        report.constants = consts.to_json_obj()
        k0, factor = consts.k0, consts.refinement_factor
        delta, beta, zeta, mu = consts.delta, consts.beta, consts.zeta, consts.mu
        gamma = float(consts.gamma_prime)
        m_prime = consts.min_prime_classes
        if m_prime * factor > g.n:
            report.status = "infeasible"
            report.message = (
                f"{INFEASIBLE}: need at least {m_prime} x {factor} = {m_prime * factor} classes, n={g.n}"
            )
            return IntegerPacking([]), report

    # 1. LP and labeled weights
    index = enumerate_unlabeled_copies(g, family, cfg.copy_cap)
    if index.capped:
        raise CapExceeded(f"[lp] more than {cfg.copy_cap} copies")
    value, weights, _, _ = solve_packing_lp(g, family, index.copies, cfg.lp_mode)
    report.lp_value, report.lp_arithmetic = value, cfg.lp_mode
    psi0 = FractionalPacking(g, family, weights)
    if cfg.lp_mode == FLOAT:
        psi0 = rationalize(psi0)
    psi = labeled_normalize(psi0)
    report.w_psi = psi.weight()

    # 2. partition and random refinement
    base = _partition(g, cfg, m_prime, gamma, seed, report)
    try:
        p = refine_partition(base, factor, (seed, "refine"))
    except ValueError as exc:
        raise PipelineError("refine", str(exc)) from exc
    m = p.m
    report.m = m
    vol = pair_volume(p)
    report.pair_volume = vol
    if threshold is None:
        threshold = Fraction(1, m ** (k0 - 1))
    report.psi_threshold = threshold

    # 3. good copies, discarding, surviving copies
    psi_good = restrict_to_good(psi, p, k0)
    report.w_psi_good = psi_good.weight()
    eps = _frac(cfg.epsilon)
    report.good_loss_ok = report.w_psi - report.w_psi_good <= Fraction(7, 100) * eps * g.n**2
    check_gamma = cfg.gamma
    verdicts = pair_verdicts(g, p, check_gamma, cfg.pair_check, (seed, "pairs"), cfg.samples)
    g_star, discard = discard_edges(g, p, check_gamma, delta, verdicts)
    report.discard = discard.to_json_obj()
    kept = g_star.edges
    psi_star = restrict_packing(psi_good, lambda c: all(e in kept for e in c.edges(family)))
    report.w_psi_star = psi_star.weight()

    # 4. projection onto R
    r = build_reduced_graph(g, p, check_gamma, delta, verdicts)
    report.reduced_edges = r.base.m
    psi_prime = project_packing_to_reduced(psi_star, p, r)
    report.w_psi_prime = psi_prime.weight()
    report.projection_identity = report.w_psi_prime * vol == report.w_psi_star
    report.reduced_load_ok = not reduced_load_excess(psi_prime, r)

    # 5. coloring
    colors = random_coloring(g_star, r, psi_prime, seed)
    report.trace = PipelineTrace(p, g_star, r, psi_star, psi_prime, colors)
    report.colored_edges = len(colors.colors)
    report.uncolored_edges = g_star.m - len(colors.colors)

    # 6. per-color hypergraph matching
    t = ideal_class_size(g.n, m)
    copies_out: list[Copy] = []
    aut_cache = {pid: automorphisms(pat) for pid, pat in enumerate(family)}
    for h in colors.palette:
        w_h = _frac(psi_prime.weights[h])
        if w_h <= threshold:
            report.colors.append(ColorRecord(h, w_h, False))
            continue
        pattern = family[h.pattern_id]
        classes = [p.classes[c] for c in h.vertices]
        x_h = build_color_subgraph(colors, h, family)
        rec = ColorRecord(h, w_h, True, x_edges=x_h.m)
        rec.edge_bound = float((1 - 2 * _frac(zeta)) * pattern.m * vol * w_h)
        rec.target = float((1 - 2 * _frac(beta)) * w_h * vol)
        rec.concentration = concentration_check(x_h, pattern, classes, w_h, float(mu), t)
        partite = enumerate_partite_copies(x_h, pattern, classes, h.pattern_id)
        rec.hyperedges = len(partite)
        if partite:
            vid = x_h.edge_ids
            hyper = UniformHypergraph(
                x_h.m, pattern.m, tuple(tuple(vid[e] for e in c.edges(family)) for c in partite)
            )
            chosen = nibble_matching(
                hyper,
                float(beta),
                cfg.bite_fraction,
                (seed, "color", h.pattern_id, *h.vertices),
                cfg.max_rounds,
            )
            rec.matching = len(chosen)
            for k in chosen:
                c = partite[k]
                copies_out.append(Copy(c.pattern_id, canonical_vertices(c.vertices, aut_cache[c.pattern_id])))
        report.colors.append(rec)

    # 7. assemble, top up, verify
    report.pipeline_size = len(copies_out)
    used = {e for c in copies_out for e in c.edges(family)}
    extra: list[Copy] = []
    if cfg.final_greedy:
        free = [c for c in index.copies if used.isdisjoint(c.edges(family))]
        extra = greedy_from_copies(g, family, free, derive_rng(seed, "final-greedy"), used).copies
    packing = IntegerPacking(copies_out + extra)
    report.greedy_extra = len(extra)
    report.final_size = packing.size
    verdict = verify_integer_packing(g, family, packing)
    if not verdict:
        raise PipelineError("verify", verdict.message)
    report.verified = True
    return packing, report

