"""Election data model, BLT/JSON (de)serialization and shared primitives.

Candidates are identified by 1-based indices.  Ballots are stored as weighted
types: identical rankings are merged and their weights summed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import jsonschema

Committee = frozenset  # frozenset[int] of candidate indices


class BLTError(ValueError):
    """Malformed BLT input; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ElectionSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class BallotType:
    weight: int
    prefix: tuple[int, ...]

    def __post_init__(self):
        if self.weight < 1:
            raise ElectionSchemaError(f"ballot weight must be >= 1, got {self.weight}")
        if not self.prefix:
            raise ElectionSchemaError("ballot must rank at least one candidate")
        if len(set(self.prefix)) != len(self.prefix):
            raise ElectionSchemaError(f"repeated candidate in ballot {self.prefix}")


@dataclass(frozen=True)
class Election:
    m: int
    k: int
    ballots: tuple[BallotType, ...]
    names: tuple[str, ...]
    title: str = ""
    n: int = field(init=False)

    def __post_init__(self):
        if self.m < 2:
            raise ElectionSchemaError("need at least two candidates")
        if not 1 <= self.k < self.m:
            raise ElectionSchemaError(f"committee size must satisfy 1 <= k < m (k={self.k}, m={self.m})")
        if len(self.names) != self.m:
            raise ElectionSchemaError(f"expected {self.m} candidate names, got {len(self.names)}")
        if not self.ballots:
            raise ElectionSchemaError("election has no ballots")
        for b in self.ballots:
            if len(b.prefix) > self.m or any(not 1 <= c <= self.m for c in b.prefix):
                raise ElectionSchemaError(f"ballot {b.prefix} references a candidate outside 1..{self.m}")
        object.__setattr__(self, "n", sum(b.weight for b in self.ballots))

    @classmethod
    def build(
        cls,
        m: int,
        k: int,
        ballots: Iterable[tuple[int, Sequence[int]]],
        names: Sequence[str] | None = None,
        title: str = "",
    ) -> "Election":
        """Construct from (weight, ranking) pairs, merging identical rankings."""
        merged: dict[tuple[int, ...], int] = {}
        for weight, ranking in ballots:
            merged[tuple(ranking)] = merged.get(tuple(ranking), 0) + weight
        types = tuple(BallotType(w, p) for p, w in sorted(merged.items()))
        if names is None:
            names = default_names(m)
        return cls(m=m, k=k, ballots=types, names=_dedupe_names(names), title=title)

    @property
    def candidates(self) -> range:
        return range(1, self.m + 1)

    @property
    def is_multiwinner(self) -> bool:
        return self.k > 1

    def index_of(self, name: str) -> int:
        return self.names.index(name) + 1

    def committee(self, members: Iterable[int | str]) -> frozenset[int]:
        """Build a validated committee from indices or candidate names."""
        idx = frozenset(self.index_of(c) if isinstance(c, str) else int(c) for c in members)
        check_committee(idx, self.m, self.k)
        return idx

    def label(self, committee: Iterable[int]) -> str:
        return ",".join(self.names[c - 1] for c in sorted(committee))

    def rank_matrix(self) -> list[list[int]]:
        """rank_matrix()[t][c-1] is the rank ballot type t gives candidate c."""
        return [ranks_for(b.prefix, self.m) for b in self.ballots]


def default_names(m: int) -> tuple[str, ...]:
    if m <= 26:
        return tuple(chr(ord("A") + i) for i in range(m))
    return tuple(f"c{i}" for i in range(1, m + 1))


def _dedupe_names(names: Sequence[str]) -> tuple[str, ...]:
    stripped = [nm.strip() for nm in names]
    seen: dict[str, int] = {}
    for nm in stripped:
        seen[nm] = seen.get(nm, 0) + 1
    return tuple(nm if seen[nm] == 1 else f"{nm} ({i})" for i, nm in enumerate(stripped, 1))


def check_committee(committee: frozenset[int], m: int, k: int) -> None:
    if len(committee) != k:
        raise ValueError(f"committee must have exactly {k} members, got {len(committee)}")
    if any(not 1 <= c <= m for c in committee):
        raise ValueError(f"committee {sorted(committee)} has members outside 1..{m}")


def droop_quota(n: int, k: int) -> int:
    return n // (k + 1) + 1


def rank_of(election: Election, ballot: BallotType | Sequence[int], candidate: int) -> int:
    """Position of ``candidate`` in the ballot (1-based); ``m`` when unranked."""
    prefix = ballot.prefix if isinstance(ballot, BallotType) else tuple(ballot)
    try:
        return prefix.index(candidate) + 1
    except ValueError:
        return election.m


def ranks_for(prefix: Sequence[int], m: int) -> list[int]:
    ranks = [m] * m
    for pos, c in enumerate(prefix, 1):
        ranks[c - 1] = pos
    return ranks


def committee_distance(a: Iterable[int], b: Iterable[int]) -> int:
    a, b = frozenset(a), frozenset(b)
    if len(a) != len(b):
        raise ValueError("committees must have equal size")
    return len(a ^ b) // 2


# ---------------------------------------------------------------------------
# BLT

def parse_blt(text: str, lenient: bool = False) -> Election:
    """Parse BLT text.

    ``lenient`` accepts two common dialect extensions found in published
    corpora: a withdrawn-candidates line of negative indices after the header,
    and trailing fields after the quoted name on candidate lines.
    """
    lines = [
        (no, raw.strip())
        for no, raw in enumerate(text.splitlines(), 1)
        if raw.strip() and not raw.lstrip().startswith("#")
    ]
    if not lines:
        raise BLTError("empty input", 1)
    it = iter(lines)

    no, header = next(it)
    parts = header.split()
    if len(parts) != 2 or not all(_is_int(p) for p in parts):
        raise BLTError(f"header must be 'm k', got {header!r}", no)
    m, k = int(parts[0]), int(parts[1])
    if m < 2 or k < 1 or k >= m:
        raise BLTError(f"invalid header values m={m} k={k}", no)

    ballots: list[tuple[int, tuple[int, ...]]] = []
    terminated = False
    for no, line in it:
        toks = line.split()
        if lenient and not ballots and toks and all(_is_int(t) and int(t) < 0 for t in toks):
            continue
        if not all(_is_int(t) for t in toks):
            raise BLTError(f"non-integer token in ballot line {line!r}", no)
        vals = [int(t) for t in toks]
        if vals == [0]:
            terminated = True
            break
        if lenient and len(vals) == 2 and vals[1] == 0:
            continue  # blank ballot
        if len(vals) < 3 or vals[-1] != 0:
            raise BLTError("ballot line must be 'w c1 ... cr 0'", no)
        weight, ranking = vals[0], vals[1:-1]
        if weight < 1:
            raise BLTError(f"ballot weight must be >= 1, got {weight}", no)
        for c in ranking:
            if not 1 <= c <= m:
                raise BLTError(f"candidate index {c} out of range 1..{m}", no)
        if len(set(ranking)) != len(ranking):
            raise BLTError("repeated candidate within one ballot", no)
        ballots.append((weight, tuple(ranking)))
    if not terminated:
        raise BLTError("missing ballot section terminator '0'", lines[-1][0])
    if not ballots:
        raise BLTError("no ballots", no)

    strings = []
    for no, line in it:
        if lenient and line.startswith('"') and line.count('"') >= 2:
            line = line[: line.index('"', 1) + 1]
        if not (len(line) >= 2 and line[0] == '"' and line[-1] == '"'):
            raise BLTError(f"expected a double-quoted string, got {line!r}", no)
        strings.append(line[1:-1])
    if len(strings) != m + 1:
        raise BLTError(f"expected {m} candidate names and a title, got {len(strings)} strings",
                       lines[-1][0])
    return Election.build(m, k, ballots, names=strings[:m], title=strings[m])


def to_blt(election: Election) -> str:
    out = [f"{election.m} {election.k}"]
    for b in election.ballots:
        out.append(" ".join(str(x) for x in (b.weight, *b.prefix, 0)))
    out.append("0")
    out.extend(f'"{nm}"' for nm in election.names)
    out.append(f'"{election.title}"')
    return "\n".join(out) + "\n"


def _is_int(tok: str) -> bool:
    return tok.lstrip("-").isdigit()


# ---------------------------------------------------------------------------
# JSON

ELECTION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["title", "m", "k", "n", "candidates", "ballots"],
    "additionalProperties": False,
    "properties": {
        "title": {"type": "string"},
        "m": {"type": "integer", "minimum": 2},
        "k": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "candidates": {"type": "array", "items": {"type": "string"}},
        "ballots": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["weight", "ranking"],
                "additionalProperties": False,
                "properties": {
                    "weight": {"type": "integer", "minimum": 1},
                    "ranking": {
                        "type": "array",
                        "minItems": 1,
                        "uniqueItems": True,
                        "items": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
    },
}


def to_json(election: Election) -> str:
    doc = {
        "title": election.title,
        "m": election.m,
        "k": election.k,
        "n": election.n,
        "candidates": list(election.names),
        "ballots": [{"weight": b.weight, "ranking": list(b.prefix)} for b in election.ballots],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def from_json(text: str) -> Election:
    try:
        doc = json.loads(text)
        jsonschema.validate(doc, ELECTION_SCHEMA)
    except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
        raise ElectionSchemaError(str(exc).splitlines()[0]) from exc
    if doc["k"] >= doc["m"]:
        raise ElectionSchemaError(f"k must be < m (k={doc['k']}, m={doc['m']})")
    election = Election.build(
        doc["m"], doc["k"],
        ((b["weight"], b["ranking"]) for b in doc["ballots"]),
        names=doc["candidates"], title=doc["title"],
    )
    if election.n != doc["n"]:
        raise ElectionSchemaError(f"n={doc['n']} disagrees with ballot weights ({election.n})")
    return election


# ---------------------------------------------------------------------------
# CSV cast-vote records

def csv_to_election(text: str, k: int, title: str = "", layout: str = "auto") -> Election:
    """Convert a cast-vote-record CSV into an Election.

    Two layouts are understood.  ``candidates``: one column per candidate, cells
    hold that candidate's preference number (blank = unranked).  ``ranks``: one
    column per preference position, cells hold candidate names.  An optional
    ``weight`` / ``count`` column multiplies each row.
    """
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    weight_col = next((i for i, h in enumerate(header) if h.lower() in {"weight", "count"}), None)
    id_cols = {i for i, h in enumerate(header) if h.lower() in {"ballot", "ballotid", "ballot_id", "id"}}
    data_cols = [i for i in range(len(header)) if i != weight_col and i not in id_cols]
    if layout == "auto":
        rank_like = all(
            header[i].lower().startswith(("rank", "pref", "choice")) for i in data_cols
        )
        layout = "ranks" if rank_like else "candidates"

    rows = [r for r in reader if any(cell.strip() for cell in r)]
    ballots: list[tuple[int, tuple[int, ...]]] = []
    if layout == "candidates":
        names = [header[i] for i in data_cols]
        for lineno, row in enumerate(rows, 2):
            prefs = []
            for pos, i in enumerate(data_cols, 1):
                cell = row[i].strip() if i < len(row) else ""
                if cell:
                    prefs.append((int(cell), pos))
            prefs.sort()
            ranks = [r for r, _ in prefs]
            if len(set(ranks)) != len(ranks):
                raise BLTError("tied preference numbers", lineno)
            # keep the valid prefix only: a gap in preference numbers ends the ballot
            ranking = []
            for expected, (r, cand) in enumerate(prefs, 1):
                if r != expected:
                    break
                ranking.append(cand)
            if ranking:
                ballots.append((_row_weight(row, weight_col), tuple(ranking)))
    elif layout == "ranks":
        names = []
        parsed = []
        for lineno, row in enumerate(rows, 2):
            ranking_names = []
            for i in data_cols:
                cell = row[i].strip() if i < len(row) else ""
                if not cell or cell.lower() in {"skipped", "overvote", "undervote"}:
                    break
                ranking_names.append(cell)
            if len(set(ranking_names)) != len(ranking_names):
                raise BLTError("repeated candidate within one ballot", lineno)
            for nm in ranking_names:
                if nm not in names:
                    names.append(nm)
            if ranking_names:
                parsed.append((_row_weight(row, weight_col), ranking_names))
        names.sort()
        ballots = [(w, tuple(names.index(nm) + 1 for nm in r)) for w, r in parsed]
    else:
        raise ValueError(f"unknown CSV layout {layout!r}")
    return Election.build(len(names), k, ballots, names=names, title=title)


def _row_weight(row: list[str], col: int | None) -> int:
    if col is None:
        return 1
    return int(row[col])


def format_alpha(value: Fraction, places: int = 3) -> str:
    """Decimal rendering truncated (not rounded) to ``places`` digits."""
    scaled = math.floor(Fraction(value) * 10**places)
    whole, frac = divmod(scaled, 10**places)
    return f"{whole}.{frac:0{places}d}"
