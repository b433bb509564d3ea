"""Frequency-proportional completion of truncated ballots."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .election import Election


@dataclass(frozen=True)
class CompletionConfig:
    cutoff: Fraction = Fraction(1, 10)
    seed: int = 0

    def __post_init__(self):
        if not 0 < Fraction(self.cutoff) <= 1:
            raise ValueError("cutoff must lie in (0, 1]")


def hamilton_round(quotas: Sequence[Fraction | int]) -> list[int]:
    """Largest-remainder rounding; ties in the remainder go to the smaller index."""
    quotas = [Fraction(q) for q in quotas]
    if any(q < 0 for q in quotas):
        raise ValueError("quotas must be nonnegative")
    total = sum(quotas, Fraction(0))
    if total.denominator != 1:
        raise ValueError(f"quotas must sum to an integer, got {total}")
    floors = [math.floor(q) for q in quotas]
    left = int(total) - sum(floors)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:left]:
        floors[i] += 1
    return floors


def _tail_rng(seed: int, prefix: tuple[int, ...]) -> random.Random:
    return random.Random(f"{seed}:{','.join(map(str, prefix))}")


def complete_ballots(election: Election, config: CompletionConfig = CompletionConfig()) -> Election:
    m = election.m
    cutoff = Fraction(config.cutoff)
    work: dict[tuple[int, ...], int] = {}
    for b in election.ballots:
        work[b.prefix] = work.get(b.prefix, 0) + b.weight

    for r in range(1, m - 1):
        for prefix in sorted(p for p in work if len(p) == r):
            stock = work[prefix]
            nxt: dict[int, int] = {}
            for other, w in work.items():
                if len(other) > r and other[:r] == prefix:
                    nxt[other[r]] = nxt.get(other[r], 0) + w
            agreeing = sum(nxt.values())
            if agreeing == 0 or agreeing < cutoff * stock:
                continue
            cands = sorted(nxt)
            alloc = hamilton_round([Fraction(nxt[c] * stock, agreeing) for c in cands])
            del work[prefix]
            for c, a in zip(cands, alloc):
                if a:
                    ext = prefix + (c,)
                    work[ext] = work.get(ext, 0) + a

    done: dict[tuple[int, ...], int] = {}
    for prefix in sorted(work):
        w = work[prefix]
        if len(prefix) >= m - 1:
            done[prefix] = done.get(prefix, 0) + w
            continue
        rng = _tail_rng(config.seed, prefix)
        rest = [c for c in election.candidates if c not in prefix]
        for _ in range(w):
            full = prefix + tuple(rng.sample(rest, len(rest)))
            done[full] = done.get(full, 0) + 1
    ballots = ((w, p) for p, w in done.items())
    return Election.build(m, election.k, ballots, names=election.names, title=election.title)
