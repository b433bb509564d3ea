"""Exact linear programming for small ``min c.x  s.t.  A x <= b, x >= 0`` problems.

The fast path solves in floating point with HiGHS, takes the optimal basis it
reports and re-solves that basis in exact rationals.  The basis is accepted only
if it is primal and dual feasible in exact arithmetic, in which case the
returned value is the exact optimum.  Otherwise a dense two-phase rational
simplex (Bland's rule) is used; it is also usable on its own as an oracle.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

Row = dict[int, Fraction]


class LPError(RuntimeError):
    pass


class SingularBasis(LPError):
    pass


@dataclass
class LPResult:
    value: Fraction
    x: list[Fraction]
    method: str  # "basis" | "simplex"


@dataclass
class LP:
    """``min c.x`` subject to sparse rows ``A_i . x <= b_i`` and ``x >= 0``."""

    c: list[Fraction]
    rows: list[Row]
    b: list[Fraction]

    @property
    def n_cols(self) -> int:
        return len(self.c)

    def activity(self, x: Sequence[Fraction]) -> list[Fraction]:
        return [sum((v * x[j] for j, v in row.items()), Fraction(0)) for row in self.rows]

    def is_feasible(self, x: Sequence[Fraction]) -> bool:
        return all(v >= 0 for v in x) and all(a <= bi for a, bi in zip(self.activity(x), self.b))


def solve_square(rows: list[Row], rhs: list[Fraction]) -> dict[int, Fraction]:
    """Solve a square sparse system exactly (Markowitz-style pivot choice)."""
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    col_rows: dict[int, set[int]] = defaultdict(set)
    for i, r in enumerate(rows):
        for j in r:
            col_rows[j].add(i)
    if len(col_rows) != len(rows):
        raise SingularBasis(f"{len(rows)} equations in {len(col_rows)} unknowns")
    active = set(range(len(rows)))
    order: list[tuple[int, int]] = []
    while active:
        i = min(active, key=lambda r: (len(rows[r]), r))
        if not rows[i]:
            raise SingularBasis("structurally singular system")
        j = min(rows[i], key=lambda col: (len(col_rows[col]), col))
        piv = rows[i][j]
        active.remove(i)
        for cc in rows[i]:
            col_rows[cc].discard(i)
        for r in list(col_rows[j]):
            f = rows[r][j] / piv
            target = rows[r]
            for cc, v in rows[i].items():
                nv = target.get(cc, 0) - f * v
                if nv == 0:
                    if cc in target:
                        del target[cc]
                        col_rows[cc].discard(r)
                else:
                    if cc not in target:
                        col_rows[cc].add(r)
                    target[cc] = nv
            rhs[r] -= f * rhs[i]
        order.append((i, j))
    x: dict[int, Fraction] = {}
    for i, j in reversed(order):
        s = rhs[i] - sum((v * x[cc] for cc, v in rows[i].items() if cc != j), Fraction(0))
        x[j] = s / rows[i][j]
    return x


def _highs_basis(lp: LP):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("presolve", "off")
    inf = highspy.kHighsInf
    nc = lp.n_cols
    h.addVars(nc, np.zeros(nc), np.full(nc, inf))
    h.changeColsCost(nc, np.arange(nc, dtype=np.int32), np.array([float(v) for v in lp.c]))
    for row, bi in zip(lp.rows, lp.b):
        idx = np.array(sorted(row), dtype=np.int32)
        vals = np.array([float(row[j]) for j in idx])
        h.addRow(-inf, float(bi), len(idx), idx, vals)
    h.run()
    if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
        raise LPError(f"HiGHS status {h.modelStatusToString(h.getModelStatus())}")
    basis = h.getBasis()
    basic = highspy.HighsBasisStatus.kBasic
    cols = [j for j, s in enumerate(basis.col_status) if s == basic]
    tight = [i for i, s in enumerate(basis.row_status) if s != basic]
    return cols, tight


def verify_basis(lp: LP, cols: list[int], tight: list[int]) -> LPResult | None:
    """Exact primal/dual check of a basis; ``None`` if it is not optimal."""
    if len(cols) != len(tight):
        return None
    colset = set(cols)
    try:
        sub = [{j: v for j, v in lp.rows[i].items() if j in colset} for i in tight]
        xb = solve_square(sub, [lp.b[i] for i in tight])
        # duals: for each basic column j, sum_i a_ij y_i = c_j over tight rows
        trows: dict[int, Row] = {j: {} for j in cols}
        for pos, i in enumerate(tight):
            for j, v in lp.rows[i].items():
                if j in colset:
                    trows[j][pos] = v
        y = solve_square([trows[j] for j in cols], [lp.c[j] for j in cols])
    except SingularBasis:
        return None
    x = [Fraction(0)] * lp.n_cols
    for j, v in xb.items():
        x[j] = v
    if not lp.is_feasible(x):
        return None
    if any(y.get(pos, 0) > 0 for pos in range(len(tight))):
        return None
    reduced = list(lp.c)
    for pos, i in enumerate(tight):
        yi = y.get(pos, Fraction(0))
        if yi:
            for j, v in lp.rows[i].items():
                reduced[j] -= v * yi
    if any(reduced[j] < 0 for j in range(lp.n_cols) if j not in colset):
        return None
    value = sum((cj * xj for cj, xj in zip(lp.c, x)), Fraction(0))
    return LPResult(value, x, "basis")


def solve(lp: LP, dense_limit: int = 250_000) -> LPResult:
    try:
        cols, tight = _highs_basis(lp)
        res = verify_basis(lp, cols, tight)
        if res is not None:
            return res
        reason = "HiGHS basis failed exact verification"
    except LPError as exc:
        reason = str(exc)
    size = (len(lp.rows) + 1) * (lp.n_cols + 2 * len(lp.rows) + 1)
    if size > dense_limit:
        raise LPError(f"{reason}; problem too large for the dense exact fallback ({size} cells)")
    return simplex(lp)


# ---------------------------------------------------------------------------
# dense two-phase simplex over the rationals


def simplex(lp: LP) -> LPResult:
    m, nx = len(lp.rows), lp.n_cols
    # columns: x (nx) | slack/surplus (m) | artificial (one per negative-rhs row)
    neg = [i for i in range(m) if lp.b[i] < 0]
    art_of = {i: nx + m + a for a, i in enumerate(neg)}
    ncol = nx + m + len(neg)
    T: list[list[Fraction]] = []
    basis: list[int] = []
    for i, (row, bi) in enumerate(zip(lp.rows, lp.b)):
        sign = -1 if bi < 0 else 1
        r = [Fraction(0)] * (ncol + 1)
        for j, v in row.items():
            r[j] = sign * Fraction(v)
        r[nx + i] = Fraction(sign)
        r[-1] = sign * Fraction(bi)
        if sign < 0:
            r[art_of[i]] = Fraction(1)
            basis.append(art_of[i])
        else:
            basis.append(nx + i)
        T.append(r)
    artificial = set(art_of.values())

    if artificial:
        cost = [Fraction(0)] * ncol
        for a in artificial:
            cost[a] = Fraction(1)
        _run(T, basis, cost, forbidden=set())
        if _objective(T, basis, cost) != 0:
            raise LPError("infeasible")
        # pivot remaining zero-level artificials out of the basis
        for i, bj in enumerate(basis):
            if bj in artificial:
                for j in range(nx + m):
                    if T[i][j] != 0:
                        _pivot(T, basis, i, j)
                        break
    cost = [Fraction(v) for v in lp.c] + [Fraction(0)] * (ncol - nx)
    _run(T, basis, cost, forbidden=artificial)
    x = [Fraction(0)] * nx
    for i, bj in enumerate(basis):
        if bj < nx:
            x[bj] = T[i][-1]
    value = sum((cj * xj for cj, xj in zip(lp.c, x)), Fraction(0))
    return LPResult(value, x, "simplex")


def feasible(lp: LP) -> bool:
    try:
        simplex(LP([Fraction(0)] * lp.n_cols, lp.rows, lp.b))
    except LPError:
        return False
    return True


def _objective(T, basis, cost) -> Fraction:
    return sum((cost[bj] * T[i][-1] for i, bj in enumerate(basis)), Fraction(0))


def _pivot(T, basis, r, j):
    piv = T[r][j]
    T[r] = [v / piv for v in T[r]]
    for i, row in enumerate(T):
        if i != r and row[j] != 0:
            f = row[j]
            pr = T[r]
            T[i] = [a - f * b for a, b in zip(row, pr)]
    basis[r] = j


def _run(T, basis, cost, forbidden: set[int], max_iter: int = 100_000):
    ncol = len(T[0]) - 1
    for _ in range(max_iter):
        # reduced costs: c_j - c_B B^-1 A_j
        inbasis = set(basis)
        entering = None
        for j in range(ncol):
            if j in inbasis or j in forbidden:
                continue
            d = cost[j] - sum((cost[bj] * T[i][j] for i, bj in enumerate(basis) if cost[bj]), Fraction(0))
            if d < 0:
                entering = j  # Bland: lowest index
                break
        if entering is None:
            return
        best = None
        for i, row in enumerate(T):
            if row[entering] > 0:
                ratio = row[-1] / row[entering]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise LPError("unbounded")
        _pivot(T, basis, best[1], entering)
    raise LPError("simplex iteration limit")
