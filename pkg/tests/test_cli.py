import csv
import io
import json

import pytest

from propmeter.cli import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, main
from propmeter.corpus import ingest_local
from propmeter.election import parse_blt, to_blt

from conftest import make

TOY = make(3, 2, [(4, "ab"), (1, "b"), (1, "c")])


@pytest.fixture
def blt(tmp_path):
    path = tmp_path / "toy.blt"
    path.write_text(to_blt(TOY))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_coalitions(capsys, blt):
    code, out, _ = run(capsys, "coalitions", blt)
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["kind", "candidates", "ell", "support", "threshold", "decimal"]
    assert ["coalition", "{a}", "", "4", "", ""] in table
    code, out, _ = run(capsys, "coalitions", blt, "--format", "json", "--divisors", "sainte-lague")
    doc = json.loads(out)
    assert doc["n"] == 6 and doc["thresholds"][0]["decimal"]


def test_rules(capsys, blt):
    code, out, _ = run(capsys, "rules", blt)
    assert code == EXIT_OK
    lines = dict(line.split("\t")[:2] for line in out.splitlines())
    assert lines["sstv"] == "1,2" and set(lines) == {"sstv", "meek", "ear", "sntv", "seqrcv"}
    code, out, _ = run(capsys, "rules", blt, "--rule", "sstv", "--log")
    assert json.loads(out)["committee"] == [1, 2]


def test_alpha(capsys, blt):
    code, out, _ = run(capsys, "alpha", blt, "--committee", "a,c", "--measure", "psc,ls")
    assert code == EXIT_OK
    table = rows(out)
    assert table[0] == ["measure", "alpha", "decimal", "satisfied"]
    assert [r[0] for r in table[1:]] == ["psc", "ls"]
    code, out, _ = run(capsys, "alpha", blt, "--committee", "1,2", "--format", "json")
    assert {d["measure"] for d in json.loads(out)} == {"psc", "ejr", "ls", "price"}


def test_alpha_bad_committee(capsys, blt):
    code, _, err = run(capsys, "alpha", blt, "--committee", "a,zz")
    assert code == EXIT_FATAL and err.startswith("propmeter: error:")


def test_census_and_optimal(capsys, blt):
    code, out, _ = run(capsys, "census", blt, "--measure", "psc")
    assert code == EXIT_OK and rows(out)[1][:3] == ["PSC", rows(out)[1][1], "3"]
    code, out, _ = run(capsys, "optimal", blt)
    assert code == EXIT_OK and rows(out)[1][-1] == "descent"
    code, out, _ = run(capsys, "optimal", blt, "--measure", "all")
    assert [r[0] for r in rows(out)[1:]] == ["psc", "ejr", "ls", "price"]
    code, _, err = run(capsys, "optimal", blt, "--measure", "ls", "--method", "descent")
    assert code == EXIT_FATAL and "descent" in err


def test_census_cap(capsys, tmp_path):
    path = tmp_path / "big.blt"
    path.write_text(to_blt(make(12, 6, [(1, "a")])))
    code, _, err = run(capsys, "census", str(path), "--cap", "10")
    assert code == EXIT_FATAL and "propmeter: error:" in err


def test_gen_hardness(capsys, tmp_path):
    out = tmp_path / "hs.blt"
    code, _, err = run(capsys, "gen-hardness", "--universe", "6", "--sets", "3", "--h", "1",
                       "--planted", "--out", str(out))
    assert code == EXIT_OK and err.startswith("alpha=")
    e = parse_blt(out.read_text())
    meta = json.loads((tmp_path / "hs.blt.json").read_text())
    assert e.m == 9 and e.k == 4 and meta["h"] == 1


def test_apportion(capsys, blt):
    code, out, _ = run(capsys, "apportion", blt)
    assert code == EXIT_OK and rows(out)[0][0] == "status"


def test_complete_and_convert(capsys, tmp_path, blt):
    out = tmp_path / "done.json"
    assert run(capsys, "complete", blt, "--seed", "3", "--out", str(out))[0] == EXIT_OK
    json_path = tmp_path / "toy.json"
    assert run(capsys, "convert", blt, "--to", "json", "--out", str(json_path))[0] == EXIT_OK
    code, text, _ = run(capsys, "convert", str(json_path))
    assert code == EXIT_OK and parse_blt(text) == parse_blt(to_blt(TOY))
    csv_path = tmp_path / "t.csv"
    csv_path.write_text("rank1,rank2\na,b\nb,\n")
    assert run(capsys, "convert", str(csv_path))[0] == EXIT_FATAL
    code, text, _ = run(capsys, "convert", str(csv_path), "--seats", "1")
    assert code == EXIT_OK and parse_blt(text).n == 2


def test_bad_file(capsys, tmp_path):
    path = tmp_path / "bad.blt"
    path.write_text("3 2\n1 9 0\n0\n")
    code, _, err = run(capsys, "rules", str(path))
    assert code == EXIT_FATAL and "line" in err
    assert run(capsys, "rules", str(tmp_path / "missing.blt"))[0] == EXIT_FATAL


def test_experiment_and_plot(capsys, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "a.blt").write_text(to_blt(TOY))
    (src / "b.blt").write_text(to_blt(make(4, 2, [(3, "ab"), (2, "cd"), (1, "d")])))
    ingest_local(src, tmp_path / "corpus")
    code, out, _ = run(capsys, "experiment", str(tmp_path / "corpus"), "--out", str(tmp_path / "res"),
                       "--rules", "sstv,ear", "--measures", "psc,ejr", "--jobs", "1", "--run-id", "r1")
    assert code == EXIT_OK and "2 elections analysed" in out
    run_dir = tmp_path / "res" / "r1"
    assert (run_dir / "tables" / "axiom_census.csv").exists()
    code, out, _ = run(capsys, "plot", str(run_dir), "--figure", "hist-psc", "--figure", "box-ejr")
    assert code == EXIT_OK and out.count(".svg") == 2
    assert (run_dir / "figures" / "box_ejr.svg").exists()
    code, _, _ = run(capsys, "plot", str(run_dir), "--figure", "hist-ls")
    assert code == EXIT_FATAL


def test_experiment_partial_failure(capsys, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "a.blt").write_text(to_blt(TOY))
    (src / "b.blt").write_text(to_blt(make(4, 2, [(3, "ab"), (2, "cd")])))
    index = ingest_local(src, tmp_path / "corpus")
    (index.root / index.entries[1].blt).write_text("junk\n")
    code, out, _ = run(capsys, "experiment", str(index.root), "--out", str(tmp_path / "res"),
                       "--rules", "sstv", "--measures", "psc", "--jobs", "1")
    assert code == EXIT_PARTIAL and "1 errors" in out


def test_experiment_without_corpus(capsys, tmp_path):
    code, _, err = run(capsys, "experiment", str(tmp_path), "--out", str(tmp_path / "res"))
    assert code == EXIT_FATAL and "fetch-scot" in err


def test_fetch_offline(capsys, tmp_path, monkeypatch):
    from propmeter import corpus

    def offline(url, timeout=30.0):
        raise corpus.CorpusError(f"network failure fetching {url}")
    monkeypatch.setattr(corpus, "http_get", offline)
    monkeypatch.setattr(corpus.fetch_corpus, "__defaults__", (None, offline, corpus.REPO, corpus.REF, None))
    code, _, err = run(capsys, "fetch-scot", "--dest", str(tmp_path))
    assert code == EXIT_FATAL and "network failure" in err
