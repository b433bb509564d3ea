import csv
import random
from fractions import Fraction
from pathlib import Path

import pytest

from propmeter.corpus import ingest_local
from propmeter.election import Election, to_blt
from propmeter.experiments import (ElectionResult, RunConfig, analyse_election, election_seed, fig_histogram_data,
                                   five_numbers, load_results, parse_figure, render_figure, round1,
                                   run_completed_suite, run_experiment, table_axiom_census, table_disagreement)
from propmeter.generate import random_small

from conftest import make

FAST = RunConfig(rules=("sstv", "sntv", "seqrcv", "ear"), measures=("psc", "ejr", "ls"))


def tree(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    src = tmp_path_factory.mktemp("src")
    rng = random.Random(99)
    for i in range(8):
        e = random_small(rng, max_m=6, max_n=30)
        e = Election.build(e.m, max(e.k, 2) if e.m > 2 else e.k, [(b.weight, b.prefix) for b in e.ballots])
        (src / f"e{i}.blt").write_text(to_blt(e))
    (src / "single.blt").write_text(to_blt(make(3, 1, [(2, "ab")])))
    return ingest_local(src, tmp_path_factory.mktemp("corpus"))


def test_analyse_single_election():
    e = make(3, 2, [(4, "ab"), (2, "c")])
    res = analyse_election("toy", e, FAST)
    assert res.total == 3 and res.committees["sstv"] == (1, 3)
    # {a,b} leaves {c} short and {a,c} leaves the pair {a,b} one seat short
    assert res.optimal["psc"] == Fraction(2, 3) and res.optimal_committees["psc"] == [(1, 2), (1, 3)]
    assert ElectionResult.from_dict(res.to_dict()) == res


def test_single_prefix_singleton_share_is_one():
    e = make(4, 2, [(5, "a"), (3, "b"), (2, "c"), (1, "d")])
    assert analyse_election("sp", e, FAST).singleton_share == 1


def test_run_layout_and_tables(corpus, tmp_path):
    summary = run_experiment(corpus, tmp_path, FAST)
    assert summary.exit_code == 0 and not summary.errors
    assert summary.run_dir.name.startswith("run-")
    ids = [r.id for r in summary.results]
    assert ids == sorted(ids) and "single" not in ids
    files = tree(summary.run_dir)
    for name in ("axiom_census", "disagreement", "avg_distance", "opt_alignment", "stats"):
        assert f"tables/{name}.csv" in files
    for stem in ("hist_psc", "hist_ejr", "box_psc", "pair_sstv_seqrcv_psc", "pair_sstv_ear_psc"):
        assert f"figures/{stem}.csv" in files and f"figures/{stem}.svg" in files
    census = list(csv.reader((summary.run_dir / "tables" / "axiom_census.csv").open()))
    assert census[0][0] == "axiom" and [row[0] for row in census[1:]] == ["PSC", "EJR+", "LS"]
    assert load_results(summary.run_dir) == summary.results


def test_run_is_byte_identical(corpus, tmp_path):
    a = run_experiment(corpus, tmp_path / "a", FAST, jobs=1)
    b = run_experiment(corpus, tmp_path / "b", FAST, jobs=2)
    assert a.run_dir.name == b.run_dir.name
    assert tree(a.run_dir) == tree(b.run_dir)


def test_partial_failure_is_isolated(corpus, tmp_path):
    broken = corpus.root / corpus.multiwinner()[0].blt
    good = broken.read_text()
    try:
        broken.write_text("not a ballot file\n")
        summary = run_experiment(corpus, tmp_path, FAST)
    finally:
        broken.write_text(good)
    assert summary.exit_code == 2
    assert [e["id"] for e in summary.errors] == [corpus.multiwinner()[0].id]
    assert len(summary.results) == len(corpus.multiwinner()) - 1


def test_svg_rendered_from_csv(corpus, tmp_path):
    summary = run_experiment(corpus, tmp_path, FAST, figures=("hist-psc",))
    csv_path = summary.run_dir / "figures" / "hist_psc.csv"
    svg_path = csv_path.with_suffix(".svg")
    original, emitted = csv_path.read_text(), svg_path.read_bytes()
    csv_path.write_text("value,count\n0.0,1\n0.9,7\n")
    assert render_figure("hist-psc", summary.run_dir).read_bytes() != emitted
    csv_path.write_text(original)
    assert render_figure("hist-psc", summary.run_dir).read_bytes() == emitted


def test_completed_suite_uses_per_election_seeds(corpus, tmp_path):
    plain = run_experiment(corpus, tmp_path, FAST)
    done = run_completed_suite(corpus, tmp_path, seed=5, config=FAST)
    assert done.run_dir.name.startswith("completed-") and done.run_dir != plain.run_dir
    again = run_completed_suite(corpus, tmp_path / "again", seed=5, config=FAST)
    assert tree(done.run_dir) == tree(again.run_dir)
    assert election_seed(5, "x") != election_seed(5, "y") and election_seed(5, "x") == election_seed(5, "x")


def test_census_table_counts():
    def fake(eid, sat):
        return ElectionResult(eid, 3, 2, 3, {}, {}, {"psc": Fraction(0)}, {"psc": []}, {"psc": sat}, 4)
    rows = table_axiom_census([fake("a", 0), fake("b", 1), fake("c", 2), fake("d", 4)])
    assert rows[1] == ["PSC", 1, "25.0", 2, "50.0", 3, "75.0", 4]


def test_disagreement_symmetric(corpus, tmp_path):
    results = run_experiment(corpus, tmp_path, FAST).results
    rows = table_disagreement(results)
    body = [r[1:] for r in rows[1:]]
    assert all(body[i][j] == body[j][i] and body[i][i] == 0 for i in range(len(body)) for j in range(len(body)))


def test_round_and_quantiles():
    assert round1(Fraction(1, 4)) == Fraction(3, 10)
    assert round1(Fraction(3, 20)) == Fraction(2, 10)
    assert five_numbers([1.0, 2.0, 3.0, 4.0, 5.0]) == (1.0, 2.0, 3.0, 4.0, 5.0)
    assert five_numbers([2.0]) == (2.0,) * 5


def test_histogram_bins():
    def fake(v):
        return ElectionResult("x", 3, 2, 3, {}, {}, {"psc": v}, {}, {}, 1)
    rows = fig_histogram_data([fake(Fraction(1, 4)), fake(Fraction(3, 10)), fake(Fraction(0))], "psc")
    assert rows == [["value", "count"], ["0.0", 1], ["0.3", 2]]


def test_parse_figure_errors():
    assert parse_figure("pair:sstv:ear") == ("pair", ("sstv", "ear", "psc"))
    with pytest.raises(ValueError):
        parse_figure("pie-psc")


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(rules=("borda",))
    with pytest.raises(ValueError):
        RunConfig(measures=("pjr",))
