"""Fractional packings and the packing LP.

The fractional packing number is ``max sum_H psi(H)`` subject to
``sum_{H containing e} psi(H) <= 1`` for every host edge ``e`` and
``psi >= 0``.  Exact mode runs the rational simplex in :mod:`fampack.simplex`;
float mode calls HiGHS through scipy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

import numpy as np

from . import simplex
from .copies import DEFAULT_CAP, CapExceeded, Copy, automorphisms, enumerate_unlabeled_copies
from .graph import Edge, Family, Graph

Number = Union[Fraction, float]

EXACT = "exact"
FLOAT = "float"


@dataclass
class FractionalPacking:
    """Weights on copies of family members in ``host``.

    Zero weights are never stored.  ``labeled`` records whether keys are
    labeled copies (every vertex role fixed) or canonical unlabeled ones.
    """

    host: Graph
    family: Family
    weights: dict[Copy, Number] = field(default_factory=dict)
    labeled: bool = False

    def __post_init__(self):
        self.weights = {c: w for c, w in self.weights.items() if w != 0}

    @property
    def support(self) -> list[Copy]:
        return sorted(self.weights)

    def weight(self) -> Number:
        return packing_weight(self)

    def edge_loads(self) -> dict[Edge, Number]:
        loads: dict[Edge, Number] = {}
        for c, w in self.weights.items():
            for e in c.edges(self.family):
                loads[e] = loads.get(e, 0) + w
        return loads

    def is_exact(self) -> bool:
        return all(isinstance(w, (Fraction, int)) for w in self.weights.values())

    def to_json_obj(self) -> dict:
        return {
            "labeled": self.labeled,
            "support": [
                {"pattern_id": c.pattern_id, "vertices": list(c.vertices), "weight": _num_str(w)}
                for c, w in sorted(self.weights.items())
            ],
        }


@dataclass
class LPResult:
    value: Number
    packing: FractionalPacking
    dual_value: Number
    arithmetic: str
    cover: dict[Edge, Number] = field(default_factory=dict)
    n_copies: int = 0

    def to_json(self) -> str:
        obj = {
            "arithmetic": self.arithmetic,
            "value": _num_str(self.value),
            "dual_value": _num_str(self.dual_value),
            "n_copies": self.n_copies,
            "cover": [
                {"edge": list(e), "weight": _num_str(w)} for e, w in sorted(self.cover.items()) if w
            ],
        }
        obj.update(self.packing.to_json_obj())
        return json.dumps(obj, indent=2, sort_keys=True)


def _num_str(x: Number) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def parse_number(s: str) -> Number:
    return float(s) if any(ch in s for ch in ".eE") or s in ("nan", "inf", "-inf") else Fraction(s)


def packing_weight(psi: FractionalPacking) -> Number:
    if not psi.weights:
        return Fraction(0) if psi.is_exact() else 0.0
    return sum(psi.weights.values(), Fraction(0) if psi.is_exact() else 0.0)


def _packing_columns(host: Graph, family: Family, copies: list[Copy]):
    eid = host.edge_ids
    return [[(eid[e], 1) for e in c.edges(family)] for c in copies]


def solve_packing_lp(
    host: Graph,
    family: Family,
    copies: list[Copy],
    mode: str = EXACT,
) -> tuple[Number, dict[Copy, Number], Number, dict[Edge, Number]]:
    """Optimal packing over an explicit copy list: (value, weights, dual value, cover)."""
    if not copies:
        zero = Fraction(0) if mode == EXACT else 0.0
        return zero, {}, zero, {}
    cols = _packing_columns(host, family, copies)
    edges = host.sorted_edges
    if mode == EXACT:
        res = simplex.solve(cols, host.m)
        weights = {c: x for c, x in zip(copies, res.x) if x}
        cover = {e: y for e, y in zip(edges, res.y) if y}
        return res.value, weights, res.dual_value, cover
    if mode == FLOAT:
        value, x, y = _highs(cols, host.m)
        weights = {c: float(v) for c, v in zip(copies, x) if v > 1e-12}
        cover = {e: float(v) for e, v in zip(edges, y) if v > 1e-12}
        return value, weights, float(np.sum(y)), cover
    raise ValueError(f"unknown arithmetic mode {mode!r}")


def _highs(cols, n_rows: int):
    from scipy.optimize import linprog
    from scipy.sparse import csc_matrix

    data, rows, indptr = [], [], [0]
    for col in cols:
        for i, a in col:
            rows.append(i)
            data.append(float(a))
        indptr.append(len(rows))
    a = csc_matrix((data, rows, indptr), shape=(n_rows, len(cols)))
    res = linprog(
        -np.ones(len(cols)),
        A_ub=a,
        b_ub=np.ones(n_rows),
        bounds=(0, None),
        method="highs-ipm",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    y = -np.asarray(res.ineqlin.marginals)
    return float(-res.fun), np.asarray(res.x), y


def solve_fractional_packing(
    g: Graph,
    family: Family,
    mode: str = EXACT,
    cap: int = DEFAULT_CAP,
) -> LPResult:
    """Fractional packing number of ``g`` with an optimal packing and dual cover."""
    index = enumerate_unlabeled_copies(g, family, cap)
    if index.capped:
        raise CapExceeded(f"more than {cap} copies; no bound reported")
    value, weights, dual, cover = solve_packing_lp(g, family, index.copies, mode)
    psi = FractionalPacking(g, family, weights, labeled=False)
    return LPResult(value, psi, dual, mode, cover, len(index.copies))


def labeled_normalize(psi: FractionalPacking) -> FractionalPacking:
    """Spread each unlabeled copy's weight evenly over its ``|Aut|`` labelings."""
    if psi.labeled:
        raise ValueError("packing is already labeled")
    auts = [automorphisms(p) for p in psi.family]
    out: dict[Copy, Number] = {}
    for c, w in psi.weights.items():
        group = auts[c.pattern_id]
        share = Fraction(w, len(group)) if isinstance(w, int) else w / len(group)
        for s in group:
            out[Copy(c.pattern_id, tuple(c.vertices[s[i]] for i in range(len(s))))] = share
    return FractionalPacking(psi.host, psi.family, out, labeled=True)


def restrict_packing(psi: FractionalPacking, keep: Callable[[Copy], bool]) -> FractionalPacking:
    return FractionalPacking(
        psi.host, psi.family, {c: w for c, w in psi.weights.items() if keep(c)}, psi.labeled
    )


@dataclass
class Verdict:
    ok: bool
    message: str = ""
    witness: object = None

    def __bool__(self) -> bool:
        return self.ok


def verify_fractional(psi: FractionalPacking, tol: float = 0.0) -> Verdict:
    """Accept iff weights lie in ``[-tol, 1+tol]`` and every edge load is ``<= 1+tol``.

    On rejection the verdict carries the worst offender.
    """
    for c, w in sorted(psi.weights.items()):
        if w < -tol or w > 1 + tol:
            return Verdict(False, f"weight {w} of copy {c.dump()} outside [0, 1]", c)
        for e in c.edges(psi.family):
            if e not in psi.host.edges:
                return Verdict(False, f"copy {c.dump()} uses non-edge {e}", c)
    loads = psi.edge_loads()
    if loads:
        worst = max(sorted(loads), key=lambda e: loads[e])
        if loads[worst] > 1 + tol:
            return Verdict(False, f"edge {worst} has load {loads[worst]}", worst)
    return Verdict(True)


def rationalize(psi: FractionalPacking, max_den: int = 10**9) -> FractionalPacking:
    """Exact rational packing close to a float one, scaled down if needed so it stays feasible."""
    weights: dict[Copy, Fraction] = {}
    for c, w in psi.weights.items():
        f = Fraction(w).limit_denominator(max_den) if not isinstance(w, Fraction) else w
        if f > 0:
            weights[c] = min(f, Fraction(1))
    out = FractionalPacking(psi.host, psi.family, weights, psi.labeled)
    loads = out.edge_loads()
    worst = max(loads.values(), default=Fraction(0))
    if worst > 1:
        out = FractionalPacking(
            psi.host, psi.family, {c: w / worst for c, w in weights.items()}, psi.labeled
        )
    return out


def packing_from_json(text: str, host: Graph, family: Family) -> FractionalPacking:
    obj = json.loads(text)
    weights = {
        Copy(int(s["pattern_id"]), tuple(s["vertices"])): parse_number(s["weight"])
        for s in obj["support"]
    }
    return FractionalPacking(host, family, weights, bool(obj.get("labeled", False)))


def isclose(a: Number, b: Number, rel: float = 1e-9) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return math.isclose(float(a), float(b), rel_tol=rel, abs_tol=rel)
