"""Multiwinner voting rules over weighted ballot types.

Every rule returns a :class:`RuleResult` holding the committee and an auditable
round log.  Exact rationals are used everywhere except Meek STV, which iterates
keep factors in floating point and re-checks each round in rationals.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .election import Election, droop_quota


class MeekConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TieBreak:
    """Resolve ties among candidates.

    ``lex`` favours the smallest candidate index, whether the rule is picking a
    winner or a candidate to eliminate.  ``random`` draws from a generator seeded
    per rule run, so a fixed seed reproduces the whole count.
    """

    mode: str = "lex"
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in {"lex", "random"}:
            raise ValueError(f"unknown tie-break mode {self.mode!r}")

    def start(self) -> "_TieState":
        return _TieState(self.mode, random.Random(self.seed if self.seed is not None else 0))


class _TieState:
    def __init__(self, mode: str, rng: random.Random):
        self.mode = mode
        self.rng = rng

    def order(self, cands: Iterable[int]) -> list[int]:
        out = sorted(cands)
        if self.mode == "random":
            self.rng.shuffle(out)
        return out

    def pick(self, cands: Iterable[int]) -> int:
        return self.order(cands)[0]


LEX = TieBreak()


@dataclass
class Round:
    action: str  # elect | eliminate | expand-rank
    candidates: list[int]
    tallies: dict[int, Fraction | float] = field(default_factory=dict)
    quota: Fraction | float | None = None
    factor: Fraction | None = None
    rank: int | None = None
    total_weight: Fraction | float | None = None
    note: str = ""

    def as_dict(self) -> dict:
        def enc(x):
            if isinstance(x, Fraction):
                return str(x)
            return x

        d = {"action": self.action, "candidates": self.candidates}
        if self.tallies:
            d["tallies"] = {str(c): enc(v) for c, v in sorted(self.tallies.items())}
        for key in ("quota", "factor", "rank", "total_weight"):
            val = getattr(self, key)
            if val is not None:
                d[key] = enc(val)
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class RuleResult:
    rule: str
    committee: frozenset[int]
    rounds: list[Round] = field(default_factory=list)

    def log_json(self) -> str:
        doc = {"rule": self.rule, "committee": sorted(self.committee),
               "rounds": [r.as_dict() for r in self.rounds]}
        return json.dumps(doc, indent=2)


def _first_continuing(prefix: tuple[int, ...], continuing: set[int]) -> int | None:
    for c in prefix:
        if c in continuing:
            return c
    return None


def _best(tallies: dict, ties: _TieState, lowest: bool = False, tol: float = 0.0) -> int:
    target = min(tallies.values()) if lowest else max(tallies.values())
    tied = [c for c, v in tallies.items() if abs(v - target) <= tol]
    return ties.pick(tied)


def scottish_stv(election: Election, tiebreak: TieBreak = LEX) -> RuleResult:
    ties = tiebreak.start()
    q = droop_quota(election.n, election.k)
    ballots = election.ballots
    weights = [Fraction(b.weight) for b in ballots]
    continuing = set(election.candidates)
    elected: list[int] = []
    rounds: list[Round] = []

    while len(elected) < election.k:
        seats = election.k - len(elected)
        tallies = {c: Fraction(0) for c in continuing}
        top_of = []
        for b, w in zip(ballots, weights):
            c = _first_continuing(b.prefix, continuing)
            top_of.append(c)
            if c is not None:
                tallies[c] += w
        total = sum(weights)
        if len(continuing) <= seats:
            fill = sorted(continuing, key=lambda c: (-tallies[c], c))
            elected.extend(fill)
            rounds.append(Round("elect", fill, tallies, q, total_weight=total,
                                note="remaining candidates fill remaining seats"))
            break
        top = _best(tallies, ties)
        t = tallies[top]
        if t >= q:
            factor = (t - q) / t
            for i, c in enumerate(top_of):
                if c == top:
                    weights[i] *= factor
            elected.append(top)
            continuing.discard(top)
            rounds.append(Round("elect", [top], tallies, q, factor, total_weight=total))
        else:
            low = _best(tallies, ties, lowest=True)
            continuing.discard(low)
            rounds.append(Round("eliminate", [low], tallies, q, total_weight=total))
    return RuleResult("sstv", frozenset(elected), rounds)


MEEK_DELTA = 1e-9
MEEK_TOL = 1e-9
MEEK_CAP = 1000


def meek_stv(election: Election, tiebreak: TieBreak = LEX,
             delta: float = MEEK_DELTA, tol: float = MEEK_TOL, cap: int = MEEK_CAP) -> RuleResult:
    ties = tiebreak.start()
    k, n = election.k, election.n
    keep = {c: 1.0 for c in election.candidates}
    hopeful = set(election.candidates)
    elected: list[int] = []
    rounds: list[Round] = []

    def distribute(keep_factors, zero, one):
        tallies = {c: zero for c in election.candidates}
        excess = zero
        for b in election.ballots:
            w = one * b.weight
            for c in b.prefix:
                kf = keep_factors[c]
                if kf == 0:
                    continue
                v = w * kf
                tallies[c] += v
                w -= v
                if w == 0:
                    break
            excess += w
        return tallies, excess

    while len(elected) < k:
        seats = k - len(elected)
        if len(hopeful) <= seats:
            fill = sorted(hopeful)
            elected.extend(fill)
            rounds.append(Round("elect", fill, note="remaining candidates fill remaining seats"))
            break
        for _ in range(cap):
            tallies, excess = distribute(keep, 0.0, 1.0)
            quota = (n - excess) / (k + 1) + delta
            if all(abs(tallies[e] - quota) <= tol * max(1.0, quota) for e in elected):
                break
            for e in elected:
                keep[e] = min(1.0, keep[e] * quota / tallies[e])
        else:
            raise MeekConvergenceError(
                f"keep factors did not converge within {cap} iterations "
                f"(elected={elected}, quota={quota})")

        # rational re-check: flows must conserve the n voters exactly
        exact_keep = {c: Fraction(v) for c, v in keep.items()}
        exact_tallies, exact_excess = distribute(exact_keep, Fraction(0), Fraction(1))
        if sum(exact_tallies.values()) + exact_excess != n:
            raise MeekConvergenceError("weight conservation failed in rational re-check")

        over = [h for h in hopeful if tallies[h] >= quota]
        shown = {c: tallies[c] for c in hopeful | set(elected)}
        if over:
            order = ties.order(over)
            over = sorted(order, key=lambda c: -tallies[c])[:seats]
            for c in over:
                hopeful.discard(c)
                elected.append(c)
            rounds.append(Round("elect", over, shown, quota,
                                note="keep=" + json.dumps({str(c): keep[c] for c in elected})))
        else:
            low = _best({h: tallies[h] for h in hopeful}, ties, lowest=True, tol=tol * max(1.0, quota))
            hopeful.discard(low)
            keep[low] = 0.0
            rounds.append(Round("eliminate", [low], shown, quota))
    return RuleResult("meek", frozenset(elected), rounds)


def _ear_tiekey(supports_by_rank: list[dict[int, Fraction]], c: int) -> tuple:
    # earlier-rank support breaks ties at the current rank
    return tuple(-s[c] for s in reversed(supports_by_rank))


def ear(election: Election, tiebreak: TieBreak = LEX) -> RuleResult:
    """Expanding Approvals Rule; unranked candidates join only at rank m."""
    ties = tiebreak.start()
    m, k = election.m, election.k
    q = droop_quota(election.n, k)
    ranks = election.rank_matrix()
    counts = [b.weight for b in election.ballots]
    per_voter = [Fraction(1)] * len(counts)
    selected: list[int] = []
    rounds: list[Round] = []

    def supports(r: int) -> dict[int, Fraction]:
        out = {c: Fraction(0) for c in election.candidates if c not in selected}
        for t, row in enumerate(ranks):
            w = counts[t] * per_voter[t]
            if w == 0:
                continue
            for c in out:
                if row[c - 1] <= r:
                    out[c] += w
        return out

    def choose(cands: list[int], r: int) -> int:
        history = [supports(rr) for rr in range(1, r + 1)]
        prio = {c: i for i, c in enumerate(ties.order(cands))}
        return min(cands, key=lambda c: (_ear_tiekey(history, c), prio[c]))

    for r in range(1, m + 1):
        while len(selected) < k:
            sup = supports(r)
            reach = [c for c, s in sup.items() if s >= q]
            if not reach:
                break
            best_val = max(sup[c] for c in reach)
            c = choose([c for c in reach if sup[c] == best_val], r)
            s = sup[c]
            factor = (s - q) / s
            for t, row in enumerate(ranks):
                if row[c - 1] <= r:
                    per_voter[t] *= factor
            selected.append(c)
            rounds.append(Round("elect", [c], sup, q, factor, rank=r))
        if len(selected) == k:
            break
        if r < m:
            rounds.append(Round("expand-rank", [], rank=r + 1))

    if len(selected) < k:
        while len(selected) < k:
            sup = supports(m)
            best_val = max(sup.values())
            c = choose([c for c in sup if sup[c] == best_val], m)
            selected.append(c)
            rounds.append(Round("elect", [c], sup, q, rank=m, note="fallback fill at rank m"))
    return RuleResult("ear", frozenset(selected), rounds)


def first_place_counts(election: Election, excluded: frozenset[int] = frozenset()) -> dict[int, int]:
    counts = {c: 0 for c in election.candidates if c not in excluded}
    for b in election.ballots:
        c = _first_continuing(b.prefix, set(counts))
        if c is not None:
            counts[c] += b.weight
    return counts


def sntv(election: Election, tiebreak: TieBreak = LEX) -> RuleResult:
    ties = tiebreak.start()
    counts = first_place_counts(election)
    prio = {c: i for i, c in enumerate(ties.order(counts))}
    chosen = sorted(counts, key=lambda c: (-counts[c], prio[c]))[: election.k]
    return RuleResult("sntv", frozenset(chosen),
                      [Round("elect", sorted(chosen), dict(counts))])


def irv(election: Election, tiebreak: TieBreak = LEX,
        excluded: frozenset[int] = frozenset(), _ties: _TieState | None = None) -> tuple[int, list[Round]]:
    ties = _ties or tiebreak.start()
    continuing = set(election.candidates) - set(excluded)
    rounds: list[Round] = []
    while len(continuing) > 1:
        tallies = {c: 0 for c in continuing}
        for b in election.ballots:
            c = _first_continuing(b.prefix, continuing)
            if c is not None:
                tallies[c] += b.weight
        low = _best(tallies, ties, lowest=True)
        continuing.discard(low)
        rounds.append(Round("eliminate", [low], dict(tallies)))
    (winner,) = continuing
    rounds.append(Round("elect", [winner]))
    return winner, rounds


def seq_rcv(election: Election, tiebreak: TieBreak = LEX) -> RuleResult:
    """Run IRV k times, striking each winner from all ballots before the next run."""
    ties = tiebreak.start()
    winners: list[int] = []
    rounds: list[Round] = []
    for _ in range(election.k):
        w, log = irv(election, excluded=frozenset(winners), _ties=ties)
        winners.append(w)
        rounds.extend(log)
    return RuleResult("seqrcv", frozenset(winners), rounds)


RULES: dict[str, Callable[..., RuleResult]] = {
    "sstv": scottish_stv,
    "meek": meek_stv,
    "ear": ear,
    "sntv": sntv,
    "seqrcv": seq_rcv,
}
