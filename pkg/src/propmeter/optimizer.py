"""Instance-optimal alpha values and the exact feasibility kernel behind them."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .coalitions import (DivisorFn, SolidCoalition, ThresholdConstraint, batches,
                         election_thresholds, threshold_set, dhondt)
from .election import Election
from .measures import (DEFAULT_CAP, MEASURES, all_committees, check_cap, evaluate)

Constraint = tuple[frozenset[int], int]  # (candidate set, ell): |W & set| >= ell


@dataclass
class Feasibility:
    feasible: bool
    witness: frozenset[int] | None
    nodes: int = 0


def feasible(constraints: Sequence[Constraint], m: int, k: int) -> Feasibility:
    """Decide whether a size-k committee meets every ``|W & C'| >= ell``.

    Depth-first branch and bound over candidates 1..m, include-branch first, so
    the first witness found is the lexicographically smallest one.  Pruning uses
    forced inclusions (a constraint with exactly as many open candidates as it
    still needs) and a greedy packing of candidate-disjoint constraints as a
    lower bound on further inclusions.
    """
    cons = [(frozenset(s), ell) for s, ell in constraints]
    for s, ell in cons:
        if ell > len(s) or ell > k:
            return Feasibility(False, None)
    stats = [0]

    def search(pos: int, inc: frozenset[int], exc: frozenset[int]) -> frozenset[int] | None:
        stats[0] += 1
        # propagate to a fixpoint
        while True:
            forced: set[int] = set()
            for s, ell in cons:
                need = ell - len(s & inc)
                if need <= 0:
                    continue
                open_ = s - inc - exc
                if need > len(open_):
                    return None
                if need == len(open_):
                    forced |= open_
            if not forced:
                break
            inc = inc | forced
            if len(inc) > k:
                return None
        if len(inc) > k or m - len(exc) < k:
            return None
        # disjoint-packing lower bound on additional members
        used: set[int] = set()
        bound = 0
        pending = []
        for s, ell in cons:
            need = ell - len(s & inc)
            if need > 0:
                pending.append((need, s - inc - exc))
        pending.sort(key=lambda p: (len(p[1]) - p[0], -p[0]))
        for need, open_ in pending:
            if not (open_ & used):
                used |= open_
                bound += need
        if len(inc) + bound > k:
            return None
        while pos <= m and (pos in inc or pos in exc):
            pos += 1
        if len(inc) == k:
            return inc if not pending else None
        if pos > m:
            return None
        return (search(pos + 1, inc | {pos}, exc)
                or search(pos + 1, inc, exc | {pos}))

    wit = search(1, frozenset(), frozenset())
    return Feasibility(wit is not None, wit, stats[0])


class ConstraintSystem:
    """Incrementally grown PSC constraint set with cached feasibility witnesses."""

    def __init__(self, m: int, k: int):
        self.m, self.k = m, k
        self.constraints: list[Constraint] = []
        self._witness: frozenset[int] | None = None
        self._infeasible = False

    def push(self, candidates: Iterable[int], ell: int) -> None:
        cand = frozenset(candidates)
        if not 1 <= ell <= min(len(cand), self.k):
            raise ValueError(f"ell={ell} outside 1..min(|C'|, k)")
        self.constraints.append((cand, ell))

    def check(self) -> Feasibility:
        if self._infeasible:
            return Feasibility(False, None)
        w = self._witness
        # lexicographically smallest witness of a superset problem stays smallest
        if w is not None and all(len(w & s) >= ell for s, ell in self.constraints):
            return Feasibility(True, w)
        res = feasible(self.constraints, self.m, self.k)
        if res.feasible:
            self._witness = res.witness
        else:
            self._infeasible = True
        return res


@dataclass
class OptReport:
    measure: str
    alpha: Fraction
    witness: frozenset[int]
    method: str
    trace: list[tuple[Fraction, bool]] = field(default_factory=list)
    optimal_committees: list[frozenset[int]] = field(default_factory=list)
    active: list[ThresholdConstraint] = field(default_factory=list)


def optimal_psc_thresholds(thresholds: Sequence[ThresholdConstraint], m: int, k: int) -> OptReport:
    """Descend through equal-threshold batches until the constraint set turns infeasible."""
    system = ConstraintSystem(m, k)
    res = system.check()
    witness = res.witness
    trace: list[tuple[Fraction, bool]] = []
    active: list[ThresholdConstraint] = []
    for batch in batches(thresholds):
        for con in batch:
            system.push(con.candidates, con.ell)
        active.extend(batch)
        res = system.check()
        trace.append((batch[0].threshold, res.feasible))
        if not res.feasible:
            return OptReport("psc", batch[0].threshold, witness, "descent", trace, active=active)
        witness = res.witness
    return OptReport("psc", Fraction(0), witness, "descent", trace, active=active)


def optimal_psc(election: Election, divisors: DivisorFn | str = dhondt) -> OptReport:
    return optimal_psc_thresholds(election_thresholds(election, divisors), election.m, election.k)


def optimal_bruteforce(election: Election, measure: str, cap: int = DEFAULT_CAP) -> OptReport:
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    check_cap(election.m, election.k, cap)
    thresholds = election_thresholds(election) if measure == "psc" else None
    values = []
    for w in all_committees(election):
        values.append((evaluate(election, w, (measure,), thresholds).value(measure), w))
    best = min(v for v, _ in values)
    optimal = sorted((w for v, w in values if v == best), key=lambda w: tuple(sorted(w)))
    return OptReport(measure, best, optimal[0], "brute-force", optimal_committees=optimal)


def optimal_all(election: Election, cap: int = DEFAULT_CAP, measures: Sequence[str] = MEASURES
                ) -> tuple[dict[str, OptReport], list]:
    """Brute-force optima for several measures sharing one enumeration.

    Returns the reports and the per-committee :class:`MeasureReport` list.
    """
    check_cap(election.m, election.k, cap)
    thresholds = election_thresholds(election)
    reports = [evaluate(election, w, measures, thresholds) for w in all_committees(election)]
    out = {}
    for ms in measures:
        best = min(r.value(ms) for r in reports)
        optimal = sorted((r.committee for r in reports if r.value(ms) == best),
                         key=lambda w: tuple(sorted(w)))
        out[ms] = OptReport(ms, best, optimal[0], "brute-force", optimal_committees=optimal)
    return out, reports


def psc_satisfiable(election: Election, alpha: Fraction) -> Feasibility:
    """Whether some committee satisfies alpha-PSC, i.e. meets every constraint with threshold >= alpha."""
    cons = [(t.candidates, t.ell) for t in election_thresholds(election) if t.threshold >= alpha]
    return feasible(cons, election.m, election.k)


# ---------------------------------------------------------------------------
# hardness instances


def hitting_set_instance(universe: Sequence[str], sets: Sequence[Sequence[str]], h: int
                         ) -> tuple[Election, Fraction]:
    """Election whose alpha-PSC satisfiability encodes a 3-Hitting-Set instance.

    Candidates are the universe elements followed by one dummy per set.  Set
    ``{s1, s2, s3}`` contributes voters ``d > s1 > s2 > s3`` and ``d > s2 > s3 > s1``.
    """
    universe = list(universe)
    if len(set(universe)) != len(universe):
        raise ValueError("universe elements must be distinct")
    for s in sets:
        if len(s) != 3 or len(set(s)) != 3 or any(x not in universe for x in s):
            raise ValueError(f"malformed set {s!r}: need three distinct universe elements")
    if not 0 <= h < len(universe):
        raise ValueError("need 0 <= h < |universe|")
    j = len(sets)
    if j == 0:
        raise ValueError("need at least one set")
    if h + j < 2:
        # k = 1: the lone dummy meets every constraint, so the encoding breaks
        raise ValueError("need h + |sets| >= 2")
    idx = {x: i + 1 for i, x in enumerate(universe)}
    names = [str(x) for x in universe] + [f"d{i}" for i in range(1, j + 1)]
    ballots = []
    for i, (a, b, c) in enumerate(sets):
        d = len(universe) + i + 1
        ballots.append((1, (d, idx[a], idx[b], idx[c])))
        ballots.append((1, (d, idx[b], idx[c], idx[a])))
    k = h + j
    election = Election.build(len(names), k, ballots, names=names, title=f"3-hitting-set h={h}")
    return election, Fraction(k, 2 * j)


def has_hitting_set(universe: Sequence[str], sets: Sequence[Sequence[str]], h: int) -> bool:
    for size in range(0, h + 1):
        for combo in itertools.combinations(universe, size):
            chosen = set(combo)
            if all(chosen & set(s) for s in sets):
                return True
    return False


def random_hitting_set(rng: random.Random, universe_size: int, n_sets: int, h: int | None = None,
                       planted: bool = False):
    universe = [f"s{i}" for i in range(1, universe_size + 1)]
    sets = []
    for _ in range(n_sets):
        if planted:
            rest = rng.sample(universe[1:], 2)
            trio = [universe[0], *rest]
            rng.shuffle(trio)
        else:
            trio = rng.sample(universe, 3)
        sets.append(trio)
    if h is None:
        h = rng.randint(1, min(n_sets - 1, universe_size - 1)) if n_sets > 1 else 1
    return universe, sets, h


# ---------------------------------------------------------------------------
# apportionment with overlapping coalitions


@dataclass
class Guarantee:
    candidates: frozenset[int]
    ell: int
    quotient: Fraction
    support: int


@dataclass
class ApportionTrace:
    accepted: list[Guarantee]
    blocking: Guarantee | None

    def guarantees_for(self, candidates: frozenset[int]) -> int:
        return max((g.ell for g in self.accepted if g.candidates == candidates), default=0)


def apportion_nondisjoint(coalitions: Sequence[SolidCoalition], n: int, k: int,
                          divisors: DivisorFn | str = dhondt, m: int | None = None) -> ApportionTrace:
    """Hand out representation guarantees by descending quotient support/d(ell).

    Stops at the first guarantee that would make the collection infeasible.
    ``m`` defaults to the largest candidate index mentioned by any coalition.
    """
    if m is None:
        m = max(max(co.candidates) for co in coalitions)
    thresholds = threshold_set(coalitions, n, k, divisors)
    system = ConstraintSystem(m, k)
    accepted: list[Guarantee] = []
    for t in thresholds:
        g = Guarantee(t.candidates, t.ell, t.threshold * n / k, t.support)
        system.push(t.candidates, t.ell)
        if not system.check().feasible:
            return ApportionTrace(accepted, g)
        accepted.append(g)
    return ApportionTrace(accepted, None)


def singleton_share(report: OptReport, m: int) -> Fraction | None:
    """Share of non-trivial constraints active at the optimum that are over one candidate."""
    cons = [t for t in report.active if len(t.candidates) < m]
    if not cons:
        return None
    return Fraction(sum(1 for t in cons if len(t.candidates) == 1), len(cons))
