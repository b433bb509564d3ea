"""Fetching and indexing the public Scottish local-election corpus."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from .election import Election, csv_to_election, parse_blt, to_blt

log = logging.getLogger(__name__)

REPO = "mggg/scot-elex"
REF = "main"
API_TREE = "https://api.github.com/repos/{repo}/git/trees/{ref}?recursive=1"
RAW = "https://raw.githubusercontent.com/{repo}/{ref}/{path}"
SUFFIXES = (".blt", ".csv")

Fetcher = Callable[[str], bytes]


class CorpusError(RuntimeError):
    pass


def cache_dir() -> Path:
    env = os.environ.get("PROPMETER_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "propmeter"


def git_blob_sha(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def http_get(url: str, timeout: float = 30.0) -> bytes:
    req = urllib.request.Request(url, headers={"User-Agent": "propmeter"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise CorpusError(f"network failure fetching {url}: {exc}") from exc


@dataclass
class CorpusEntry:
    id: str
    source: str
    blt: str
    sha256: str
    m: int
    k: int
    n: int
    meta: dict = field(default_factory=dict)


@dataclass
class CorpusIndex:
    root: Path
    entries: list[CorpusEntry]
    errors: list[dict] = field(default_factory=list)
    downloads: int = 0

    def multiwinner(self) -> list[CorpusEntry]:
        return [e for e in self.entries if e.k > 1]

    def load(self, entry: CorpusEntry) -> Election:
        return parse_blt((self.root / entry.blt).read_text(encoding="utf-8"))

    def manifest_hash(self) -> str:
        doc = json.dumps([asdict(e) for e in self.entries], sort_keys=True).encode()
        return sha256(doc)

    def write(self) -> Path:
        path = self.root / "manifest.json"
        doc = {"entries": [asdict(e) for e in self.entries], "errors": self.errors}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, root: Path | str) -> "CorpusIndex":
        root = Path(root)
        path = root / "manifest.json"
        if not path.exists():
            raise CorpusError(f"no corpus manifest at {path}; run `propmeter fetch-scot` first")
        doc = json.loads(path.read_text(encoding="utf-8"))
        return cls(root, [CorpusEntry(**e) for e in doc["entries"]], doc.get("errors", []))


def election_id(path: str) -> str:
    stem = re.sub(r"\.(blt|csv)$", "", path)
    return re.sub(r"[^A-Za-z0-9]+", "_", stem).strip("_").lower()


def _meta_from_path(path: str) -> dict:
    meta: dict = {"path": path}
    year = re.search(r"(19|20)\d{2}", path)
    if year:
        meta["year"] = int(year.group())
    ward = re.search(r"ward[_\- ]?(\d+)", path, re.IGNORECASE)
    if ward:
        meta["ward"] = int(ward.group(1))
    return meta


def convert(path: str, data: bytes, seats: dict[str, int] | None = None) -> Election:
    text = data.decode("utf-8-sig")
    if path.endswith(".blt"):
        return parse_blt(text, lenient=True)
    k = (seats or {}).get(path)
    if k is None:
        raise CorpusError(f"{path}: CSV has no seat count (supply one via the seats map)")
    return csv_to_election(text, k, title=path)


def _ingest(root: Path, path: str, data: bytes, seats, entries: list, errors: list) -> None:
    eid = election_id(path)
    try:
        election = convert(path, data, seats)
    except Exception as exc:  # noqa: BLE001 (conversion failures are recorded per file)
        errors.append({"id": eid, "source": path, "error": str(exc)})
        return
    blt_rel = f"blt/{eid}.blt"
    out = root / blt_rel
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(to_blt(election), encoding="utf-8")
    entries.append(CorpusEntry(eid, path, blt_rel, sha256(data), election.m, election.k, election.n,
                               _meta_from_path(path)))


def fetch_corpus(dest: Path | str | None = None, fetch: Fetcher = http_get, repo: str = REPO,
                 ref: str = REF, seats: dict[str, int] | None = None) -> CorpusIndex:
    """Download the corpus, convert every file to BLT and write ``manifest.json``.

    Raw files are cached under ``dest/raw``; a cached file is reused only when
    its git blob hash matches the repository listing, so reruns download
    nothing and corrupted files are fetched again.
    """
    root = Path(dest) if dest is not None else cache_dir()
    listing = json.loads(fetch(API_TREE.format(repo=repo, ref=ref)))
    blobs = sorted((item["path"], item["sha"]) for item in listing.get("tree", [])
                   if item.get("type") == "blob" and item["path"].lower().endswith(SUFFIXES))
    if not blobs:
        raise CorpusError(f"repository listing for {repo}@{ref} contains no election files")
    entries: list[CorpusEntry] = []
    errors: list[dict] = []
    downloads = 0
    for path, blob_sha in blobs:
        raw = root / "raw" / path
        data = raw.read_bytes() if raw.exists() else None
        if data is None or git_blob_sha(data) != blob_sha:
            data = fetch(RAW.format(repo=repo, ref=ref, path=path))
            downloads += 1
            if git_blob_sha(data) != blob_sha:
                errors.append({"id": election_id(path), "source": path, "error": "hash mismatch"})
                continue
            raw.parent.mkdir(parents=True, exist_ok=True)
            raw.write_bytes(data)
        _ingest(root, path, data, seats, entries, errors)
    index = CorpusIndex(root, entries, errors, downloads)
    index.write()
    log.info("corpus: %d elections, %d errors, %d downloads", len(entries), len(errors), downloads)
    return index


def ingest_local(src: Path | str, dest: Path | str, seats: dict[str, int] | None = None) -> CorpusIndex:
    """Build a corpus index from an already-downloaded checkout."""
    src, root = Path(src), Path(dest)
    entries: list[CorpusEntry] = []
    errors: list[dict] = []
    for p in sorted(src.rglob("*")):
        if p.is_file() and p.suffix.lower() in SUFFIXES:
            rel = p.relative_to(src).as_posix()
            _ingest(root, rel, p.read_bytes(), seats, entries, errors)
    index = CorpusIndex(root, entries, errors)
    index.write()
    return index
