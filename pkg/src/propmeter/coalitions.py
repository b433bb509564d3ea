"""Maximal solid coalitions and the PSC threshold constraints they induce."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .election import Election

DivisorFn = Callable[[int], int]


def dhondt(ell: int) -> int:
    return ell


def sainte_lague(ell: int) -> int:
    return 2 * ell - 1


DIVISORS: dict[str, DivisorFn] = {"dhondt": dhondt, "sainte-lague": sainte_lague}


@dataclass(frozen=True)
class SolidCoalition:
    candidates: frozenset[int]
    support: int

    def sort_key(self):
        return (-self.support, tuple(sorted(self.candidates)))


@dataclass(frozen=True)
class ThresholdConstraint:
    """Demand ``|W & candidates| >= ell``, active for every alpha <= threshold."""

    candidates: frozenset[int]
    ell: int
    threshold: Fraction
    support: int

    def satisfied_by(self, committee: frozenset[int]) -> bool:
        return len(committee & self.candidates) >= self.ell

    def sort_key(self):
        return (-self.threshold, -self.support, tuple(sorted(self.candidates)), self.ell)


def maximal_solid_coalitions(election: Election) -> list[SolidCoalition]:
    support: dict[frozenset[int], int] = {}
    for b in election.ballots:
        for t in range(1, len(b.prefix) + 1):
            s = frozenset(b.prefix[:t])
            support[s] = support.get(s, 0) + b.weight
    # the full candidate set is solidly supported by everyone, ranked or not
    support[frozenset(election.candidates)] = election.n
    out = [SolidCoalition(s, w) for s, w in support.items()]
    out.sort(key=SolidCoalition.sort_key)
    return out


def solid_support_bruteforce(election: Election, subset: frozenset[int]) -> int:
    """Supporter weight of ``subset`` straight from the definition (oracle)."""
    total = 0
    outside = [c for c in election.candidates if c not in subset]
    for b in election.ballots:
        pos = {c: i for i, c in enumerate(b.prefix)}

        def beats(x, y):
            if x not in pos:
                return False
            return y not in pos or pos[x] < pos[y]

        if all(beats(x, y) for x in subset for y in outside):
            total += b.weight
    return total


def all_subsets(m: int) -> Iterable[frozenset[int]]:
    for size in range(1, m + 1):
        for combo in itertools.combinations(range(1, m + 1), size):
            yield frozenset(combo)


def threshold_set(
    coalitions: Sequence[SolidCoalition],
    n: int,
    k: int,
    divisors: DivisorFn | str = dhondt,
) -> list[ThresholdConstraint]:
    if isinstance(divisors, str):
        divisors = DIVISORS[divisors]
    out = []
    for co in coalitions:
        for ell in range(1, min(len(co.candidates), k) + 1):
            thr = Fraction(co.support * k, n * divisors(ell))
            out.append(ThresholdConstraint(co.candidates, ell, thr, co.support))
    out.sort(key=ThresholdConstraint.sort_key)
    return out


def election_thresholds(election: Election, divisors: DivisorFn | str = dhondt) -> list[ThresholdConstraint]:
    return threshold_set(maximal_solid_coalitions(election), election.n, election.k, divisors)


def one_large_threshold(n: int, k: int) -> int:
    return -(-n // k)


def is_large(support: int, n: int, k: int, ell: int, alpha: Fraction) -> bool:
    """Whether a group of ``support`` voters is ell_alpha-large."""
    return support * k >= alpha * ell * n


def batches(thresholds: Sequence[ThresholdConstraint]) -> list[list[ThresholdConstraint]]:
    """Group a sorted threshold list into runs of equal threshold."""
    return [list(g) for _, g in itertools.groupby(thresholds, key=lambda t: t.threshold)]
