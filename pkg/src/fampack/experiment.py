"""Integrality-gap experiments on random and complete graphs, written as CSV."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from ._random import derive_rng
from .copies import DEFAULT_CAP
from .exact import DEFAULT_BUDGET, exact_packing, greedy_packing
from .graph import Graph, parse_family
from .lp import EXACT, FLOAT, solve_fractional_packing
from .pipeline import PipelineConfig, PipelineError, run_pipeline

COLUMNS = (
    "n",
    "seed",
    "model",
    "family",
    "nu_star",
    "nu_exact",
    "exact_status",
    "greedy",
    "pipeline",
    "gap_star_exact_over_n2",
    "gap_star_pipeline_over_n2",
    "runtime_ms",
)
SOLVERS = ("lp", "exact", "greedy", "pipeline")


@dataclass(frozen=True)
class GraphModel:
    """``gnp`` (each pair an edge with probability ``p``) or ``complete``."""

    kind: str
    p: Fraction = Fraction(1)

    def __post_init__(self):
        if self.kind not in ("gnp", "complete"):
            raise ValueError(f"unknown graph model {self.kind!r}; use 'gnp:<p>' or 'complete'")
        if not 0 <= self.p <= 1:
            raise ValueError(f"edge probability {self.p} outside [0, 1]")

    @classmethod
    def parse(cls, spec: str) -> "GraphModel":
        kind, _, arg = spec.partition(":")
        if kind == "complete":
            if arg:
                raise ValueError("model 'complete' takes no argument")
            return cls("complete")
        if kind == "gnp":
            try:
                return cls("gnp", Fraction(arg))
            except (ValueError, ZeroDivisionError) as exc:
                raise ValueError(f"bad edge probability in {spec!r}") from exc
        raise ValueError(f"unknown graph model {spec!r}; use 'gnp:<p>' or 'complete'")

    def __str__(self) -> str:
        return "complete" if self.kind == "complete" else f"gnp:{self.p}"

    def sample(self, n: int, seed) -> Graph:
        if self.kind == "complete":
            return Graph.complete(n)
        rng = derive_rng(seed, "gnp", n)
        p = float(self.p)
        draws = rng.random(n * (n - 1) // 2)
        pairs = ((u, v) for u in range(n) for v in range(u + 1, n))
        return Graph.from_edges(n, [e for e, x in zip(pairs, draws) if x < p])


@dataclass
class ExperimentSpec:
    model: str
    family: str
    n: list[int]
    seeds: list[int]
    solvers: list[str] = field(default_factory=lambda: list(SOLVERS))
    lp_mode: str = EXACT
    budget: int = DEFAULT_BUDGET
    cap: int = DEFAULT_CAP
    exact_max_n: int = 18
    pipeline: dict = field(default_factory=lambda: {"m_prime": 2, "factor": 2})
    workers: int = 1

    def __post_init__(self):
        GraphModel.parse(self.model)
        bad = sorted(set(self.solvers) - set(SOLVERS))
        if bad:
            raise ValueError(f"unknown solvers {bad}; choose from {SOLVERS}")
        if self.lp_mode not in (EXACT, FLOAT):
            raise ValueError(f"lp_mode must be {EXACT!r} or {FLOAT!r}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _row(spec: ExperimentSpec, n: int, seed: int, timing: bool) -> dict:
    start = time.perf_counter()
    model = GraphModel.parse(spec.model)
    family = parse_family(spec.family)
    g = model.sample(n, seed)
    row = dict.fromkeys(COLUMNS, "")
    row.update(n=n, seed=seed, model=str(model), family=spec.family)
    nu_star = nu = piped = None
    if "lp" in spec.solvers:
        nu_star = solve_fractional_packing(g, family, spec.lp_mode, spec.cap).value
        row["nu_star"] = _fmt(nu_star)
    if "exact" in spec.solvers and n <= spec.exact_max_n:
        res = exact_packing(g, family, spec.budget, spec.cap)
        nu = res.size
        row["nu_exact"], row["exact_status"] = nu, res.status
    if "greedy" in spec.solvers:
        row["greedy"] = greedy_packing(g, family, (seed, "experiment", n), spec.cap).size
    if "pipeline" in spec.solvers:
        try:
            packing, _ = run_pipeline(g, family, PipelineConfig(**spec.pipeline), seed)
            piped = packing.size
            row["pipeline"] = piped
        except PipelineError:
            row["pipeline"] = ""
    n2 = n * n
    if nu_star is not None and nu is not None:
        row["gap_star_exact_over_n2"] = _fmt((nu_star - nu) / n2)
    if nu_star is not None and piped is not None:
        row["gap_star_pipeline_over_n2"] = _fmt((nu_star - piped) / n2)
    if timing:
        row["runtime_ms"] = round((time.perf_counter() - start) * 1000)
    return row


def gap_experiment(spec: ExperimentSpec, timing: bool = False) -> list[dict]:
    """One row per ``(n, seed)``, sorted by ``(n, seed)`` whatever the worker count."""
    jobs = sorted((n, s) for n in spec.n for s in spec.seeds)
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            rows = list(pool.map(_row, [spec] * len(jobs), [n for n, _ in jobs], [s for _, s in jobs], [timing] * len(jobs)))
    else:
        rows = [_row(spec, n, s, timing) for n, s in jobs]
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()

