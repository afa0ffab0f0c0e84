"""Exact rational simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The all-slack basis is feasible because ``b >= 0``, so no phase one is
needed.  The tableau is fraction-free (Edmonds/Bareiss): every entry is an
integer equal to the true rational value times the current basis
determinant ``D``, and each pivot divides exactly by the previous ``D``.

Pricing uses the most negative reduced cost; after ``stall_limit``
consecutive degenerate pivots the solver switches for good to Bland's
smallest-index rule, which cannot cycle, so termination is assured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


class SimplexError(RuntimeError):
    pass


@dataclass
class SimplexResult:
    value: Fraction
    x: list[Fraction]
    y: list[Fraction]
    dual_value: Fraction
    pivots: int
    bland: bool = False


def _integerize(values: Sequence[Fraction]) -> tuple[list[int], int]:
    den = 1
    for v in values:
        den = math.lcm(den, v.denominator)
    return [int(v * den) for v in values], den


def solve(
    columns: Sequence[Sequence[tuple[int, Fraction | int]]],
    n_rows: int,
    c: Sequence[Fraction | int] | None = None,
    b: Sequence[Fraction | int] | None = None,
    max_pivots: int = 1_000_000,
    stall_limit: int = 50,
) -> SimplexResult:
    """Solve the LP given column-wise as sparse ``(row, coefficient)`` lists.

    ``c`` and ``b`` default to all ones, i.e. the packing LP.  Returns the
    optimal primal ``x``, the optimal dual ``y`` (``y >= 0``, ``A^T y >= c``)
    and both objective values, which agree exactly.
    """
    n_cols = len(columns)
    c = [Fraction(1)] * n_cols if c is None else [Fraction(v) for v in c]
    b = [Fraction(1)] * n_rows if b is None else [Fraction(v) for v in b]
    if len(c) != n_cols or len(b) != n_rows:
        raise ValueError("dimension mismatch")
    if any(v < 0 for v in b):
        raise ValueError("right-hand side must be non-negative")

    dense = [[Fraction(0)] * n_cols for _ in range(n_rows)]
    for j, col in enumerate(columns):
        for i, a in col:
            if not 0 <= i < n_rows:
                raise ValueError(f"row index {i} out of range")
            dense[i][j] += Fraction(a)

    # Row i is multiplied by row_scale[i] and the objective by c_scale so the
    # tableau starts integral with D = 1; the slack of a scaled row is the
    # scaled slack, so primal x is unaffected and duals are rescaled at the end.
    width = n_cols + n_rows + 1
    t = np.zeros((n_rows + 1, width), dtype=object)
    t[:, :] = 0
    row_scale = []
    for i in range(n_rows):
        ints, den = _integerize(dense[i] + [b[i]])
        row_scale.append(den)
        t[i, :n_cols] = ints[:n_cols]
        t[i, n_cols + i] = 1
        t[i, -1] = ints[-1]
    c_ints, c_scale = _integerize(c)
    t[n_rows, :n_cols] = [-v for v in c_ints]

    basis = [n_cols + i for i in range(n_rows)]
    d = 1
    pivots = 0
    stalled = 0
    bland = False
    while True:
        obj = t[n_rows]
        neg = [j for j in range(width - 1) if obj[j] < 0]
        if not neg:
            break
        entering = neg[0] if bland else min(neg, key=lambda j: (obj[j], j))
        if pivots >= max_pivots:
            raise SimplexError(f"pivot limit {max_pivots} reached")

        col = t[:n_rows, entering]
        leave = -1
        for i in range(n_rows):
            a = col[i]
            if a <= 0:
                continue
            if leave < 0:
                leave = i
                continue
            # rhs_i / a_i  versus  rhs_leave / a_leave, cross-multiplied
            lhs = t[i, -1] * col[leave]
            rhs = t[leave, -1] * a
            if lhs < rhs or (lhs == rhs and basis[i] < basis[leave]):
                leave = i
        if leave < 0:
            raise SimplexError("unbounded objective")

        if t[leave, -1] == 0:
            stalled += 1
            if stalled >= stall_limit:
                bland = True
        else:
            stalled = 0

        p = t[leave, entering]
        prow = t[leave].copy()
        t = (p * t - np.outer(t[:, entering], prow)) // d
        t[leave] = prow
        d = p
        basis[leave] = entering
        pivots += 1

    obj = t[n_rows]
    x = [Fraction(0)] * n_cols
    for i, j in enumerate(basis):
        if j < n_cols:
            x[j] = Fraction(int(t[i, -1]), int(d))
    y = [Fraction(int(obj[n_cols + i]) * row_scale[i], int(d) * c_scale) for i in range(n_rows)]
    value = Fraction(int(obj[-1]), int(d) * c_scale)
    dual_value = sum((bi * yi for bi, yi in zip(b, y)), Fraction(0))
    return SimplexResult(value, x, y, dual_value, pivots, bland)
