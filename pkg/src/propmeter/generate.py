"""Random ranked-ballot profiles for property tests and sensitivity runs."""

from __future__ import annotations

import random

from .election import Election


def random_election(rng: random.Random, m: int, k: int, n: int, max_len: int | None = None,
                    complete: bool = False) -> Election:
    """Impartial-culture rankings truncated to a uniform random length."""
    max_len = m if max_len is None else max_len
    ballots = []
    for _ in range(n):
        order = rng.sample(range(1, m + 1), m)
        length = m if complete else rng.randint(1, max_len)
        ballots.append((1, tuple(order[:length])))
    return Election.build(m, k, ballots)


def random_small(rng: random.Random, max_m: int = 8, max_k: int = 4, max_n: int = 50,
                 complete: bool = False) -> Election:
    m = rng.randint(3, max_m)
    k = rng.randint(1, min(max_k, m - 1))
    n = rng.randint(1, max_n)
    return random_election(rng, m, k, n, complete=complete)


def quota_regime_election(rng: random.Random, max_m: int = 8, max_k: int = 4, max_n: int = 50,
                          complete: bool = False) -> Election:
    """Like :func:`random_small` but with ``n >= k(k+1)``.

    In that regime the Droop quota never exceeds ``n/k``, which is what the
    STV proportionality guarantee relies on.
    """
    m = rng.randint(3, max_m)
    k = rng.randint(1, min(max_k, m - 1))
    if k * (k + 1) > max_n:
        k = max(j for j in range(1, k + 1) if j * (j + 1) <= max_n)
    n = rng.randint(k * (k + 1), max_n)
    return random_election(rng, m, k, n, complete=complete)
