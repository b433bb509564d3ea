"""Published Midlothian 2012 ward 2 data (coalition supports only; no ballots)."""

from __future__ import annotations

from importlib import resources

from .coalitions import SolidCoalition

N = 5132
M = 7
K = 3
LETTERS = "ABCDEFG"
# letter -> short name; candidate index = position in LETTERS + 1
NAMES = {"A": "JA", "B": "IB", "C": "BC", "D": "EC", "E": "DM", "F": "LM", "G": "TM"}
FIRST_PLACE = {"DM": 1574, "LM": 525, "JA": 382, "BC": 1257, "TM": 358, "IB": 671, "EC": 365}


def index(name: str) -> int:
    """Candidate index for a short name (``"DM"``) or a letter (``"E"``)."""
    if name in NAMES:
        return LETTERS.index(name) + 1
    for letter, short in NAMES.items():
        if short == name:
            return LETTERS.index(letter) + 1
    raise KeyError(name)


def committee(*names: str) -> frozenset[int]:
    return frozenset(index(nm) for nm in names)


def candidate_names() -> tuple[str, ...]:
    return tuple(NAMES[ch] for ch in LETTERS)


def midlothian_coalitions() -> list[SolidCoalition]:
    text = resources.files("propmeter.data").joinpath("midlothian_2012_ward2.txt").read_text()
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        letters, support = line.split()
        out.append(SolidCoalition(frozenset(index(ch) for ch in letters), int(support)))
    return out
