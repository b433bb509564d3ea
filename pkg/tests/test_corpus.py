import json

import pytest

from propmeter.corpus import (API_TREE, RAW, REF, REPO, CorpusError, CorpusIndex, election_id, fetch_corpus,
                              git_blob_sha, ingest_local)

BLT_A = b"3 2\n4 1 2 0\n1 3 0\n0\n\"a\"\n\"b\"\n\"c\"\n\"ward_1_2017\"\n"
BLT_B = b"2 1\n2 1 0\n1 2 0\n0\n\"x\"\n\"y\"\n\"single\"\n"
BROKEN = b"this is not a blt file\n"


class FakeRepo:
    def __init__(self, files: dict[str, bytes], listing_override: dict[str, str] | None = None):
        self.files = files
        self.override = listing_override or {}
        self.calls: list[str] = []

    def __call__(self, url: str) -> bytes:
        self.calls.append(url)
        if url == API_TREE.format(repo=REPO, ref=REF):
            tree = [{"path": p, "type": "blob", "sha": self.override.get(p, git_blob_sha(d))}
                    for p, d in self.files.items()]
            tree.append({"path": "README.md", "type": "blob", "sha": "0"})
            tree.append({"path": "data", "type": "tree", "sha": "1"})
            return json.dumps({"tree": tree}).encode()
        for p, d in self.files.items():
            if url == RAW.format(repo=REPO, ref=REF, path=p):
                return d
        raise AssertionError(url)


def offline(url: str) -> bytes:
    raise CorpusError(f"network failure fetching {url}")


@pytest.fixture
def repo():
    return FakeRepo({"2017/aberdeen/ward_1_2017.blt": BLT_A, "2022/single.blt": BLT_B})


def test_fetch_and_index(tmp_path, repo):
    index = fetch_corpus(tmp_path, fetch=repo)
    assert [e.id for e in index.entries] == ["2017_aberdeen_ward_1_2017", "2022_single"]
    assert index.downloads == 2 and not index.errors
    first = index.entries[0]
    assert (first.m, first.k, first.n) == (3, 2, 5)
    assert first.meta["year"] == 2017 and first.meta["ward"] == 1
    assert [e.id for e in index.multiwinner()] == [first.id]
    assert index.load(first).n == 5


def test_rerun_is_idempotent(tmp_path, repo):
    fetch_corpus(tmp_path, fetch=repo)
    manifest = (tmp_path / "manifest.json").read_bytes()
    again = fetch_corpus(tmp_path, fetch=repo)
    assert again.downloads == 0
    assert (tmp_path / "manifest.json").read_bytes() == manifest
    assert CorpusIndex.read(tmp_path).manifest_hash() == again.manifest_hash()


def test_corrupted_cache_is_refetched(tmp_path, repo):
    fetch_corpus(tmp_path, fetch=repo)
    (tmp_path / "raw" / "2022" / "single.blt").write_bytes(b"garbage")
    again = fetch_corpus(tmp_path, fetch=repo)
    assert again.downloads == 1
    assert (tmp_path / "raw" / "2022" / "single.blt").read_bytes() == BLT_B


def test_hash_mismatch_recorded(tmp_path):
    repo = FakeRepo({"a.blt": BLT_A, "b.blt": BLT_B}, listing_override={"b.blt": "f" * 40})
    index = fetch_corpus(tmp_path, fetch=repo)
    assert [e.id for e in index.entries] == ["a"]
    assert index.errors == [{"id": "b", "source": "b.blt", "error": "hash mismatch"}]


def test_conversion_errors_recorded(tmp_path):
    repo = FakeRepo({"good.blt": BLT_A, "bad.blt": BROKEN, "table.csv": b"c1,c2\na,b\n"})
    index = fetch_corpus(tmp_path, fetch=repo)
    assert [e.id for e in index.entries] == ["good"]
    assert sorted(e["id"] for e in index.errors) == ["bad", "table"]
    assert "seat count" in next(e["error"] for e in index.errors if e["id"] == "table")


def test_csv_with_seats(tmp_path):
    repo = FakeRepo({"t.csv": b"rank1,rank2\na,b\nb,a\na,\n"})
    index = fetch_corpus(tmp_path, fetch=repo, seats={"t.csv": 1})
    (entry,) = index.entries
    assert (entry.m, entry.k, entry.n) == (2, 1, 3)


def test_offline_is_a_corpus_error(tmp_path):
    with pytest.raises(CorpusError, match="network failure"):
        fetch_corpus(tmp_path, fetch=offline)


def test_empty_listing(tmp_path):
    with pytest.raises(CorpusError):
        fetch_corpus(tmp_path, fetch=FakeRepo({}))


def test_missing_manifest(tmp_path):
    with pytest.raises(CorpusError, match="fetch-scot"):
        CorpusIndex.read(tmp_path)


def test_ingest_local(tmp_path):
    src = tmp_path / "src"
    (src / "x").mkdir(parents=True)
    (src / "x" / "one.blt").write_bytes(BLT_A)
    (src / "notes.txt").write_text("skip me")
    index = ingest_local(src, tmp_path / "out")
    assert [e.id for e in index.entries] == ["x_one"]
    assert (tmp_path / "out" / "manifest.json").exists()
    assert CorpusIndex.read(tmp_path / "out").entries == index.entries


def test_election_id():
    assert election_id("2012/Midlothian Ward-2.blt") == "2012_midlothian_ward_2"
