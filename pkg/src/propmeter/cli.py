"""Command-line interface.  Exit codes: 0 success, 2 partial failure, 1 fatal."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .coalitions import DIVISORS, election_thresholds, maximal_solid_coalitions
from .completion import CompletionConfig, complete_ballots
from .corpus import CorpusError, CorpusIndex, cache_dir, fetch_corpus
from .election import (BLTError, Election, ElectionSchemaError, csv_to_election, format_alpha,
                       from_json, parse_blt, to_blt, to_json)
from .experiments import (DEFAULT_FIGURES, MEASURE_LABELS, RULE_ORDER, RunConfig, emit_figure,
                          load_results, render_figure, run_experiment)
from .lp import LPError
from .measures import MEASURES, EnumerationCapExceeded, axiom_census, evaluate
from .optimizer import (apportion_nondisjoint, optimal_all, optimal_bruteforce, optimal_psc,
                        hitting_set_instance, random_hitting_set)
from .rules import RULES, MeekConvergenceError, TieBreak

log = logging.getLogger("propmeter")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


def load_election(path: str, lenient: bool = False) -> Election:
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    if path.endswith(".json"):
        return from_json(text)
    return parse_blt(text, lenient=lenient)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_rows(rows: list[list], fmt: str = "csv") -> None:
    if fmt == "json":
        header, body = rows[0], rows[1:]
        print(json.dumps([dict(zip(header, r)) for r in body], indent=2))
    else:
        csv.writer(sys.stdout, lineterminator="\n").writerows(rows)


def _measures(arg: str) -> tuple[str, ...]:
    return MEASURES if arg == "all" else tuple(arg.split(","))


def _set_label(election: Election, cands) -> str:
    return "{" + election.label(cands) + "}"


# ---------------------------------------------------------------------------


def cmd_coalitions(args) -> int:
    e = load_election(args.file, args.lenient)
    coalitions = maximal_solid_coalitions(e)
    thresholds = election_thresholds(e, args.divisors)
    if args.format == "json":
        doc = {
            "n": e.n, "k": e.k,
            "coalitions": [{"candidates": sorted(c.candidates), "names": e.label(c.candidates),
                            "support": c.support} for c in coalitions],
            "thresholds": [{"candidates": sorted(t.candidates), "names": e.label(t.candidates), "ell": t.ell,
                            "threshold": str(t.threshold), "decimal": format_alpha(t.threshold)}
                           for t in thresholds],
        }
        print(json.dumps(doc, indent=2))
        return EXIT_OK
    rows: list[list] = [["kind", "candidates", "ell", "support", "threshold", "decimal"]]
    rows += [["coalition", _set_label(e, c.candidates), "", c.support, "", ""] for c in coalitions]
    rows += [["threshold", _set_label(e, t.candidates), t.ell, t.support, str(t.threshold),
              format_alpha(t.threshold)] for t in thresholds]
    _write_rows(rows)
    return EXIT_OK


def cmd_rules(args) -> int:
    e = load_election(args.file, args.lenient)
    tb = TieBreak(args.tiebreak, args.seed)
    names = RULE_ORDER if args.rule == "all" else (args.rule,)
    for name in names:
        res = RULES[name](e, tb)
        if args.log:
            print(res.log_json())
        else:
            print(f"{name}\t{','.join(map(str, sorted(res.committee)))}\t{e.label(res.committee)}")
    return EXIT_OK


def cmd_alpha(args) -> int:
    e = load_election(args.file, args.lenient)
    members = [tok.strip() for tok in args.committee.split(",") if tok.strip()]
    committee = e.committee(int(t) if t.isdigit() else t for t in members)
    rep = evaluate(e, committee, _measures(args.measure), strict_leftover=args.strict_leftover)
    rows: list[list] = [["measure", "alpha", "decimal", "satisfied"]]
    for ms in _measures(args.measure):
        v = rep.value(ms)
        rows.append([ms, str(v), format_alpha(v), "yes" if v < 1 else "no"])
    _write_rows(rows, args.format)
    return EXIT_OK


def cmd_census(args) -> int:
    e = load_election(args.file, args.lenient)
    census = axiom_census(e, _measures(args.measure), args.cap)
    rows: list[list] = [["axiom", "satisfied", "committees", "rate_pct"]]
    for ms in _measures(args.measure):
        rows.append([MEASURE_LABELS[ms], census.satisfied[ms], census.total,
                     f"{100 * census.satisfied[ms] / census.total:.1f}"])
    _write_rows(rows, args.format)
    return EXIT_OK


def cmd_optimal(args) -> int:
    e = load_election(args.file, args.lenient)
    measures = _measures(args.measure)
    if args.method == "descent":
        if measures != ("psc",):
            raise UsageError("--method descent applies to --measure psc only")
        reports = {"psc": optimal_psc(e)}
    elif len(measures) > 1:
        reports, _ = optimal_all(e, args.cap, measures)
    else:
        reports = {measures[0]: optimal_bruteforce(e, measures[0], args.cap)}
    rows: list[list] = [["measure", "alpha", "decimal", "witness", "names", "method"]]
    for ms, rep in reports.items():
        rows.append([ms, str(rep.alpha), format_alpha(rep.alpha), ",".join(map(str, sorted(rep.witness))),
                     e.label(rep.witness), rep.method])
    _write_rows(rows, args.format)
    return EXIT_OK


def cmd_gen_hardness(args) -> int:
    rng = random.Random(args.seed)
    universe, sets, h = random_hitting_set(rng, args.universe, args.sets, args.h, planted=args.planted)
    election, alpha = hitting_set_instance(universe, sets, h)
    _emit(to_blt(election), args.out)
    meta = {"universe": universe, "sets": sets, "h": h, "alpha": str(alpha)}
    if args.out:
        Path(args.out + ".json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"alpha={alpha}", file=sys.stderr)
    return EXIT_OK


def cmd_apportion(args) -> int:
    e = load_election(args.file, args.lenient)
    trace = apportion_nondisjoint(maximal_solid_coalitions(e), e.n, e.k, args.divisors, e.m)
    rows: list[list] = [["status", "candidates", "ell", "support", "quotient"]]
    for g in trace.accepted:
        rows.append(["accepted", _set_label(e, g.candidates), g.ell, g.support, str(g.quotient)])
    if trace.blocking:
        g = trace.blocking
        rows.append(["blocking", _set_label(e, g.candidates), g.ell, g.support, str(g.quotient)])
    _write_rows(rows, args.format)
    return EXIT_OK


def cmd_complete(args) -> int:
    e = load_election(args.file, args.lenient)
    done = complete_ballots(e, CompletionConfig(Fraction(args.cutoff), args.seed))
    _emit(to_json(done) if (args.out or "").endswith(".json") else to_blt(done), args.out)
    return EXIT_OK


def cmd_convert(args) -> int:
    text = Path(args.file).read_text(encoding="utf-8-sig")
    if args.file.endswith(".csv"):
        if args.seats is None:
            raise UsageError("--seats is required for CSV input")
        e = csv_to_election(text, args.seats, title=args.title or Path(args.file).stem, layout=args.layout)
    elif args.file.endswith(".json"):
        e = from_json(text)
    else:
        e = parse_blt(text, lenient=args.lenient)
    _emit(to_json(e) if args.to == "json" else to_blt(e), args.out)
    return EXIT_OK


def cmd_fetch_scot(args) -> int:
    dest = Path(args.dest) if args.dest else cache_dir()
    index = fetch_corpus(dest)
    print(f"{len(index.entries)} elections ({len(index.multiwinner())} with k > 1), "
          f"{len(index.errors)} errors, {index.downloads} downloads -> {dest}")
    return EXIT_PARTIAL if index.errors else EXIT_OK


def cmd_experiment(args) -> int:
    corpus = CorpusIndex.read(args.corpus)
    rules = RULE_ORDER if args.rules == "all" else tuple(args.rules.split(","))
    config = RunConfig(rules, _measures(args.measures), args.seed, args.completed,
                       Fraction(args.cutoff), args.cap, args.tiebreak)
    summary = run_experiment(corpus, args.out, config, args.jobs, name=args.run_id)
    print(f"{len(summary.results)} elections analysed, {len(summary.errors)} errors -> {summary.run_dir}")
    return summary.exit_code


def cmd_plot(args) -> int:
    run_dir = Path(args.run_dir)
    specs = args.figure or list(DEFAULT_FIGURES)
    failed = 0
    results = None
    for spec in specs:
        try:
            try:
                print(render_figure(spec, run_dir))
            except FileNotFoundError:
                # derive the figure data from the stored per-election results
                if results is None:
                    results = load_results(run_dir)
                print(emit_figure(spec, results, run_dir))
        except (FileNotFoundError, KeyError) as exc:
            log.error("%s", exc)
            failed += 1
    if failed == len(specs):
        return EXIT_FATAL
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="propmeter", description="Proportionality measurement for ranked-ballot elections.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def election_cmd(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("file", help="BLT or JSON election file ('-' for stdin BLT)")
        sp.add_argument("--lenient", action="store_true", help="accept common BLT dialect extensions")
        sp.set_defaults(func=func)
        return sp

    sp = election_cmd("coalitions", cmd_coalitions, "maximal solid coalitions and PSC thresholds")
    sp.add_argument("--divisors", choices=sorted(DIVISORS), default="dhondt")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = election_cmd("rules", cmd_rules, "run a voting rule")
    sp.add_argument("--rule", choices=(*RULE_ORDER, "all"), default="all")
    sp.add_argument("--tiebreak", choices=("lex", "random"), default="lex")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--log", action="store_true", help="print round logs as JSON")

    sp = election_cmd("alpha", cmd_alpha, "proportionality values of one committee")
    sp.add_argument("--committee", required=True, help="comma-separated indices or names")
    sp.add_argument("--measure", default="all")
    sp.add_argument("--strict-leftover", "--strict-paper-price", dest="strict_leftover", action="store_true",
                    help="subtract payments to members ranked below r in the priceability leftover")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = election_cmd("census", cmd_census, "share of committees satisfying each axiom")
    sp.add_argument("--measure", default="all")
    sp.add_argument("--cap", type=int, default=10**6)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = election_cmd("optimal", cmd_optimal, "instance-optimal alpha values")
    sp.add_argument("--measure", default="psc")
    sp.add_argument("--method", choices=("descent", "bruteforce"), default=None)
    sp.add_argument("--cap", type=int, default=10**6)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("gen-hardness", help="alpha-PSC instance encoding a random 3-Hitting-Set")
    sp.add_argument("--universe", type=int, required=True)
    sp.add_argument("--sets", type=int, required=True)
    sp.add_argument("--h", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--planted", action="store_true", help="guarantee a hitting set of size 1")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_gen_hardness)

    sp = election_cmd("apportion", cmd_apportion, "divisor apportionment over overlapping coalitions")
    sp.add_argument("--divisors", choices=sorted(DIVISORS), default="dhondt")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = election_cmd("complete", cmd_complete, "complete truncated ballots")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cutoff", default="0.1")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("convert", help="convert CSV/BLT/JSON election files")
    sp.add_argument("file")
    sp.add_argument("--to", choices=("blt", "json"), default="blt")
    sp.add_argument("--seats", type=int, default=None)
    sp.add_argument("--title", default=None)
    sp.add_argument("--layout", choices=("auto", "candidates", "ranks"), default="auto")
    sp.add_argument("--lenient", action="store_true")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_convert)

    sp = sub.add_parser("fetch-scot", help="download and index the Scottish election corpus")
    sp.add_argument("--dest", default=None, help="corpus directory (default: cache dir)")
    sp.set_defaults(func=cmd_fetch_scot)

    sp = sub.add_parser("experiment", help="corpus-wide tables and figures")
    sp.add_argument("corpus", help="directory holding manifest.json")
    sp.add_argument("--out", default="results")
    sp.add_argument("--rules", default="all")
    sp.add_argument("--measures", default="all")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    sp.add_argument("--completed", action="store_true", help="complete ballots before analysis")
    sp.add_argument("--cutoff", default="0.1")
    sp.add_argument("--cap", type=int, default=10**6)
    sp.add_argument("--tiebreak", choices=("lex", "random"), default="lex")
    sp.add_argument("--run-id", default=None)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("plot", help="re-render figures from a run directory")
    sp.add_argument("run_dir")
    sp.add_argument("--figure", action="append", help="hist-<measure>, box-<measure> or pair:<a>:<b>[:<measure>]")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "method", "") is None:
        args.method = "descent" if getattr(args, "measure", "") == "psc" else "bruteforce"
    try:
        return args.func(args)
    except (BLTError, ElectionSchemaError, CorpusError, EnumerationCapExceeded, LPError,
            MeekConvergenceError, UsageError, ValueError, OSError) as exc:
        print(f"propmeter: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
