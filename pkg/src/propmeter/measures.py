"""Per-committee proportionality values: alpha-PSC, alpha-EJR+, alpha-LS, alpha-priceability.

Each value is the infimum alpha at which the committee satisfies the
alpha-parameterized axiom; a committee satisfies the plain axiom iff its value
is below 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import lp
from .coalitions import ThresholdConstraint, election_thresholds
from .election import Election, check_committee

MEASURES = ("psc", "ejr", "ls", "price")
DEFAULT_CAP = 10**6


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, count: int, cap: int):
        self.count, self.cap = count, cap
        super().__init__(f"{count} committees to enumerate exceeds the cap of {cap}")


def check_cap(m: int, k: int, cap: int) -> int:
    count = math.comb(m, k)
    if count > cap:
        raise EnumerationCapExceeded(count, cap)
    return count


def psc_value(committee: frozenset[int], thresholds: Sequence[ThresholdConstraint]
              ) -> tuple[Fraction, ThresholdConstraint | None]:
    """Largest threshold whose constraint the committee violates (0 if none).

    ``thresholds`` must be sorted non-increasingly, as returned by
    :func:`propmeter.coalitions.threshold_set`.
    """
    for con in thresholds:
        if not con.satisfied_by(committee):
            return con.threshold, con
    return Fraction(0), None


@dataclass(frozen=True)
class EJRWitness:
    candidate: int
    rank: int
    ell: int
    group_size: int


def ejr_plus_value(election: Election, committee: frozenset[int]) -> tuple[Fraction, EJRWitness | None]:
    n, k, m = election.n, election.k, election.m
    ranks = election.rank_matrix()
    weights = [b.weight for b in election.ballots]
    members = sorted(committee)
    best, witness = Fraction(0), None
    for c in election.candidates:
        if c in committee:
            continue
        for r in range(1, m + 1):
            # seen[t] = committee members voter type t ranks at r or better
            by_seen = [0] * (k + 1)
            any_group = False
            for t, row in enumerate(ranks):
                if row[c - 1] <= r:
                    seen = sum(1 for w in members if row[w - 1] <= r)
                    by_seen[seen] += weights[t]
                    any_group = True
            if not any_group:
                continue
            group = 0
            for ell in range(1, k + 1):
                group += by_seen[ell - 1]
                val = Fraction(group * k, n * ell)
                if group and val > best:
                    best, witness = val, EJRWitness(c, r, ell, group)
    return best, witness


def prefers_to_all(prefix: tuple[int, ...], c: int, committee: frozenset[int]) -> bool:
    """Strict preference of ``c`` over every committee member (unranked = tied last)."""
    if c not in prefix:
        return False
    pos = prefix.index(c)
    return all(w not in prefix or prefix.index(w) > pos for w in committee)


def local_stability_value(election: Election, committee: frozenset[int]) -> tuple[Fraction, int | None]:
    best, witness = Fraction(0), None
    for c in election.candidates:
        if c in committee:
            continue
        group = sum(b.weight for b in election.ballots if prefers_to_all(b.prefix, c, committee))
        val = Fraction(group * election.k, election.n)
        if group and val > best:
            best, witness = val, c
    return best, witness


@dataclass
class PriceSystem:
    price: Fraction
    # payments[(t, c)] is the amount each voter of ballot type t pays candidate c
    payments: dict[tuple[int, int], Fraction] = field(default_factory=dict)

    def violations(self, election: Election, committee: frozenset[int], strict_leftover: bool = False,
                   tol: Fraction = Fraction(0)) -> list[str]:
        """Exact check of every priceability condition; returns the failures."""
        out = []
        ranks = election.rank_matrix()
        pay = self.payments
        for (t, c), v in pay.items():
            if v < 0:
                out.append(f"negative payment {t},{c}")
            if c not in committee and v != 0:
                out.append(f"payment to non-member {c}")
        for t, b in enumerate(election.ballots):
            spent = sum((pay.get((t, c), 0) for c in committee), Fraction(0))
            if spent > 1 + tol:
                out.append(f"type {t} overspends ({spent})")
        for c in committee:
            got = sum((b.weight * pay.get((t, c), 0) for t, b in enumerate(election.ballots)), Fraction(0))
            if got > self.price + tol:
                out.append(f"candidate {c} collects {got} > price")
        for c in election.candidates:
            if c in committee:
                continue
            for r in range(1, election.m + 1):
                left = Fraction(0)
                for t, b in enumerate(election.ballots):
                    if ranks[t][c - 1] > r:
                        continue
                    paid = sum((pay.get((t, w), 0) for w in committee
                                if _counts_toward(ranks[t][w - 1], r, strict_leftover)), Fraction(0))
                    left += b.weight * (1 - paid)
                if left > self.price + tol:
                    out.append(f"supporters of {c} at rank {r} keep {left} > price")
        return out


@dataclass
class PriceabilityResult:
    alpha: Fraction
    price: Fraction
    system: PriceSystem
    method: str


def _counts_toward(member_rank: int, r: int, strict_leftover: bool) -> bool:
    # default reading subtracts payments to members ranked at or above r
    return member_rank > r if strict_leftover else member_rank <= r


def priceability_lp(election: Election, committee: frozenset[int], strict_leftover: bool = False
                    ) -> tuple[lp.LP, list[tuple[int, int]]]:
    """Build the minimum-price LP; column 0 is the price, then one column per (type, member)."""
    members = sorted(committee)
    ranks = election.rank_matrix()
    cols = [(t, c) for t in range(len(election.ballots)) for c in members]
    col = {tc: j + 1 for j, tc in enumerate(cols)}
    rows: list[lp.Row] = []
    rhs: list[Fraction] = []
    seen: set = set()

    def add(row: lp.Row, b: Fraction):
        key = (frozenset(row.items()), b)
        if key not in seen:
            seen.add(key)
            rows.append(row)
            rhs.append(b)

    for t in range(len(election.ballots)):
        add({col[t, c]: Fraction(1) for c in members}, Fraction(1))
    for c in members:
        row = {col[t, c]: Fraction(b.weight) for t, b in enumerate(election.ballots)}
        row[0] = Fraction(-1)
        add(row, Fraction(0))
    for c in election.candidates:
        if c in committee:
            continue
        for r in range(1, election.m + 1):
            group = [t for t in range(len(election.ballots)) if ranks[t][c - 1] <= r]
            if not group:
                continue
            row: lp.Row = {0: Fraction(-1)}
            for t in group:
                w = election.ballots[t].weight
                for mbr in members:
                    if _counts_toward(ranks[t][mbr - 1], r, strict_leftover):
                        row[col[t, mbr]] = Fraction(-w)
            add(row, Fraction(-sum(election.ballots[t].weight for t in group)))
    c_vec = [Fraction(1)] + [Fraction(0)] * len(cols)
    return lp.LP(c_vec, rows, rhs), cols


def priceability_value(election: Election, committee: frozenset[int], strict_leftover: bool = False,
                       exact_simplex: bool = False) -> PriceabilityResult:
    problem, cols = priceability_lp(election, committee, strict_leftover)
    res = lp.simplex(problem) if exact_simplex else lp.solve(problem)
    payments = {tc: res.x[j + 1] for j, tc in enumerate(cols) if res.x[j + 1]}
    system = PriceSystem(res.value, payments)
    bad = system.violations(election, committee, strict_leftover)
    if bad:
        raise lp.LPError("price system failed exact re-verification: " + "; ".join(bad[:3]))
    alpha = res.value * election.k / election.n
    return PriceabilityResult(alpha, res.value, system, res.method)


def satisfies_alpha(election: Election, committee: frozenset[int], measure: str, alpha: Fraction,
                    strict_leftover: bool = False) -> bool:
    """Direct check of the alpha-parameterized axiom, without computing the value.

    PSC, EJR+ and LS ask that no ell_alpha-large group (size >= alpha*ell*n/k)
    is left short; priceability asks for a price system with p <= alpha*n/k.
    """
    n, k, m = election.n, election.k, election.m
    alpha = Fraction(alpha)

    def large(size: int, ell: int) -> bool:
        return size > 0 and size * k >= alpha * ell * n

    if measure == "psc":
        return all(con.satisfied_by(committee) or not large(con.support, con.ell)
                   for con in election_thresholds(election))
    ranks = election.rank_matrix()
    weights = [b.weight for b in election.ballots]
    outside = [c for c in election.candidates if c not in committee]
    if measure == "ejr":
        for c in outside:
            for r in range(1, m + 1):
                for ell in range(1, k + 1):
                    size = sum(w for w, row in zip(weights, ranks)
                               if row[c - 1] <= r and sum(1 for x in committee if row[x - 1] <= r) < ell)
                    if large(size, ell):
                        return False
        return True
    if measure == "ls":
        return not any(large(sum(b.weight for b in election.ballots if prefers_to_all(b.prefix, c, committee)), 1)
                       for c in outside)
    if measure == "price":
        problem, _ = priceability_lp(election, committee, strict_leftover)
        capped = lp.LP(problem.c, problem.rows + [{0: Fraction(1)}], problem.b + [alpha * n / k])
        return lp.feasible(capped)
    raise ValueError(f"unknown measure {measure!r}")


@dataclass
class MeasureReport:
    committee: frozenset[int]
    psc_alpha: Fraction | None = None
    ejr_alpha: Fraction | None = None
    ls_alpha: Fraction | None = None
    price_alpha: Fraction | None = None
    price: Fraction | None = None
    witnesses: dict = field(default_factory=dict)

    def value(self, measure: str) -> Fraction:
        return getattr(self, f"{measure}_alpha")

    def satisfies(self, measure: str) -> bool:
        return self.value(measure) < 1


def evaluate(election: Election, committee: frozenset[int],
             measures: Sequence[str] = MEASURES,
             thresholds: Sequence[ThresholdConstraint] | None = None,
             strict_leftover: bool = False) -> MeasureReport:
    check_committee(committee, election.m, election.k)
    rep = MeasureReport(committee)
    if "psc" in measures:
        if thresholds is None:
            thresholds = election_thresholds(election)
        rep.psc_alpha, rep.witnesses["psc"] = psc_value(committee, thresholds)
    if "ejr" in measures:
        rep.ejr_alpha, rep.witnesses["ejr"] = ejr_plus_value(election, committee)
    if "ls" in measures:
        rep.ls_alpha, rep.witnesses["ls"] = local_stability_value(election, committee)
    if "price" in measures:
        pr = priceability_value(election, committee, strict_leftover)
        rep.price_alpha, rep.price = pr.alpha, pr.price
        rep.witnesses["price"] = pr.system
    return rep


def all_committees(election: Election):
    return (frozenset(c) for c in itertools.combinations(election.candidates, election.k))


@dataclass
class Census:
    total: int
    satisfied: dict[str, int]
    reports: list[MeasureReport]

    def rate(self, measure: str) -> Fraction:
        return Fraction(self.satisfied[measure], self.total)


def axiom_census(election: Election, measures: Sequence[str] = MEASURES, cap: int = DEFAULT_CAP) -> Census:
    """Evaluate every size-k committee and count those with value < 1 per axiom."""
    total = check_cap(election.m, election.k, cap)
    thresholds = election_thresholds(election)
    reports = [evaluate(election, w, measures, thresholds) for w in all_committees(election)]
    satisfied = {ms: sum(1 for r in reports if r.satisfies(ms)) for ms in measures}
    return Census(total, satisfied, reports)
