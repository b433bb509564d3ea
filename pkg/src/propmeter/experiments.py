"""Corpus-level experiments: per-election analysis, aggregate tables and figures.

Every artifact is a pure function of the corpus manifest, the run configuration
and the master seed.  Figures are rendered from the CSV files written beside
them, never from in-memory values.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .completion import CompletionConfig, complete_ballots
from .corpus import CorpusIndex
from .election import Election, committee_distance, parse_blt
from .measures import DEFAULT_CAP, MEASURES
from .optimizer import optimal_all, optimal_psc, singleton_share
from .rules import RULES, TieBreak

log = logging.getLogger(__name__)

RULE_ORDER = ("sstv", "meek", "ear", "sntv", "seqrcv")
RULE_LABELS = {"sstv": "S-STV", "meek": "M-STV", "ear": "EAR", "sntv": "SNTV", "seqrcv": "seq-RCV"}
MEASURE_LABELS = {"psc": "PSC", "ejr": "EJR+", "ls": "LS", "price": "Priceability"}
CENSUS_CUTS = (Fraction(1, 4), Fraction(1, 2), Fraction(1))
DEFAULT_FIGURES = ("hist-psc", "hist-ejr", "box-psc", "pair:sstv:seqrcv", "pair:sstv:ear")


@dataclass(frozen=True)
class RunConfig:
    rules: tuple[str, ...] = RULE_ORDER
    measures: tuple[str, ...] = MEASURES
    seed: int = 42
    completed: bool = False
    cutoff: Fraction = Fraction(1, 10)
    cap: int = DEFAULT_CAP
    tiebreak: str = "lex"

    def __post_init__(self):
        bad = [r for r in self.rules if r not in RULES]
        if bad:
            raise ValueError(f"unknown rules {bad}")
        bad = [ms for ms in self.measures if ms not in MEASURES]
        if bad:
            raise ValueError(f"unknown measures {bad}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["cutoff"] = str(self.cutoff)
        d["rules"], d["measures"] = list(self.rules), list(self.measures)
        return d


@dataclass
class ElectionResult:
    id: str
    m: int
    k: int
    n: int
    committees: dict[str, tuple[int, ...]]
    rule_values: dict[str, dict[str, Fraction]]
    optimal: dict[str, Fraction]
    optimal_committees: dict[str, list[tuple[int, ...]]]
    satisfied: dict[str, int]
    total: int
    singleton_share: Fraction | None = None
    meta: dict = field(default_factory=dict)

    def rate(self, measure: str) -> Fraction:
        return Fraction(self.satisfied[measure], self.total)

    def to_dict(self) -> dict:
        return {
            "id": self.id, "m": self.m, "k": self.k, "n": self.n,
            "committees": {r: list(c) for r, c in self.committees.items()},
            "rule_values": {r: {ms: str(v) for ms, v in vals.items()} for r, vals in self.rule_values.items()},
            "optimal": {ms: str(v) for ms, v in self.optimal.items()},
            "optimal_committees": {ms: [list(c) for c in cs] for ms, cs in self.optimal_committees.items()},
            "satisfied": self.satisfied, "total": self.total,
            "singleton_share": None if self.singleton_share is None else str(self.singleton_share),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElectionResult":
        share = d.get("singleton_share")
        return cls(
            d["id"], d["m"], d["k"], d["n"],
            {r: tuple(c) for r, c in d["committees"].items()},
            {r: {ms: Fraction(v) for ms, v in vals.items()} for r, vals in d["rule_values"].items()},
            {ms: Fraction(v) for ms, v in d["optimal"].items()},
            {ms: [tuple(c) for c in cs] for ms, cs in d["optimal_committees"].items()},
            d["satisfied"], d["total"],
            None if share is None else Fraction(share), d.get("meta", {}),
        )


class DescentMismatch(RuntimeError):
    pass


def analyse_election(eid: str, election: Election, config: RunConfig = RunConfig(),
                     meta: dict | None = None) -> ElectionResult:
    """Run every rule and every measure on one election."""
    tb = TieBreak(config.tiebreak, config.seed if config.tiebreak == "random" else None)
    committees = {r: RULES[r](election, tb).committee for r in config.rules}
    optima, reports = optimal_all(election, config.cap, config.measures)
    by_committee = {rep.committee: rep for rep in reports}
    rule_values = {r: {ms: by_committee[w].value(ms) for ms in config.measures}
                   for r, w in committees.items()}
    share = None
    if "psc" in config.measures:
        descent = optimal_psc(election)
        if descent.alpha != optima["psc"].alpha:
            raise DescentMismatch(f"{eid}: descent {descent.alpha} != enumeration {optima['psc'].alpha}")
        share = singleton_share(descent, election.m)
    return ElectionResult(
        eid, election.m, election.k, election.n,
        {r: tuple(sorted(w)) for r, w in committees.items()},
        rule_values,
        {ms: rep.alpha for ms, rep in optima.items()},
        {ms: [tuple(sorted(w)) for w in rep.optimal_committees] for ms, rep in optima.items()},
        {ms: sum(1 for rep in reports if rep.satisfies(ms)) for ms in config.measures},
        len(reports), share, dict(meta or {}),
    )


def election_seed(master: int, eid: str) -> int:
    """Per-election completion seed, independent of scheduling order."""
    return int.from_bytes(hashlib.sha256(f"{master}:{eid}".encode()).digest()[:8], "big")


def _task(args: tuple[str, str, RunConfig, dict]) -> tuple[str, dict | None, str | None]:
    eid, blt, config, meta = args
    try:
        election = parse_blt(blt)
        if config.completed:
            election = complete_ballots(election, CompletionConfig(config.cutoff, election_seed(config.seed, eid)))
        return eid, analyse_election(eid, election, config, meta).to_dict(), None
    except Exception as exc:  # noqa: BLE001 (isolate each election)
        return eid, None, f"{type(exc).__name__}: {exc}"


def analyse_corpus(tasks: Sequence[tuple[str, str, dict]], config: RunConfig, jobs: int = 1
                   ) -> tuple[list[ElectionResult], list[dict]]:
    """Analyse ``(id, blt text, meta)`` tasks; failures go to the error list."""
    work = [(eid, blt, config, meta) for eid, blt, meta in sorted(tasks, key=lambda t: t[0])]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_task, work, chunksize=1))
    else:
        outcomes = [_task(w) for w in work]
    results, errors = [], []
    for eid, doc, err in outcomes:
        if err is not None:
            log.warning("election %s failed: %s", eid, err)
            errors.append({"id": eid, "error": err})
        else:
            results.append(ElectionResult.from_dict(doc))
    return results, errors


# ---------------------------------------------------------------------------
# tables

Table = list[list]


def _pct(count: int, total: int) -> str:
    return f"{100 * count / total:.1f}" if total else "nan"


def _mean(values: Iterable[Fraction]) -> Fraction | None:
    values = list(values)
    return sum(values, Fraction(0)) / len(values) if values else None


def _fmt2(x: Fraction | None) -> str:
    return "nan" if x is None else f"{float(x):.2f}"


def _rules_of(results: Sequence[ElectionResult]) -> list[str]:
    present = set().union(*(r.committees for r in results)) if results else set()
    return [r for r in RULE_ORDER if r in present]


def _measures_of(results: Sequence[ElectionResult]) -> list[str]:
    present = set().union(*(r.optimal for r in results)) if results else set()
    return [ms for ms in MEASURES if ms in present]


def table_axiom_census(results: Sequence[ElectionResult]) -> Table:
    """Per axiom: elections whose committee satisfaction rate is below 25%, 50%, 100%."""
    total = len(results)
    rows: Table = [["axiom", "lt25", "lt25_pct", "lt50", "lt50_pct", "lt100", "lt100_pct", "elections"]]
    for ms in _measures_of(results):
        row: list = [MEASURE_LABELS[ms]]
        for cut in CENSUS_CUTS:
            count = sum(1 for r in results if r.rate(ms) < cut)
            row += [count, _pct(count, total)]
        rows.append(row + [total])
    return rows


def table_disagreement(results: Sequence[ElectionResult]) -> Table:
    rules = _rules_of(results)
    rows: Table = [["rule"] + [RULE_LABELS[r] for r in rules]]
    for a in rules:
        rows.append([RULE_LABELS[a]] + [sum(1 for e in results if e.committees[a] != e.committees[b])
                                        for b in rules])
    return rows


def table_avg_distance(results: Sequence[ElectionResult]) -> Table:
    rules = _rules_of(results)
    rows: Table = [["rule"] + [RULE_LABELS[r] for r in rules]]
    for a in rules:
        rows.append([RULE_LABELS[a]] + [
            _fmt2(_mean(Fraction(committee_distance(e.committees[a], e.committees[b])) for e in results))
            for b in rules])
    return rows


def table_opt_alignment(results: Sequence[ElectionResult]) -> Table:
    """Per rule and measure: elections where the rule attains the optimum, and mean distance to it."""
    rules, measures = _rules_of(results), _measures_of(results)
    header = ["rule"]
    for ms in measures:
        header += [f"{ms}_opt", f"{ms}_dist"]
    rows: Table = [header]
    for r in rules:
        row: list = [RULE_LABELS[r]]
        for ms in measures:
            hits = sum(1 for e in results if e.rule_values[r][ms] == e.optimal[ms])
            dist = _mean(Fraction(min(committee_distance(e.committees[r], w) for w in e.optimal_committees[ms]))
                         for e in results)
            row += [hits, _fmt2(dist)]
        rows.append(row)
    return rows


def round1(x: Fraction) -> Fraction:
    """Round half up to one decimal place."""
    return Fraction(math.floor(x * 10 + Fraction(1, 2)), 10)


def fig_histogram_data(results: Sequence[ElectionResult], measure: str) -> Table:
    counts: dict[Fraction, int] = {}
    for e in results:
        b = round1(e.optimal[measure])
        counts[b] = counts.get(b, 0) + 1
    return [["value", "count"]] + [[f"{float(b):.1f}", counts[b]] for b in sorted(counts)]


def five_numbers(values: Sequence[float]) -> tuple[float, float, float, float, float]:
    qs = statistics.quantiles(values, n=4, method="inclusive") if len(values) > 1 else [values[0]] * 3
    return (min(values), qs[0], qs[1], qs[2], max(values))


def fig_boxplot_data(results: Sequence[ElectionResult], measure: str = "psc") -> Table:
    rows: Table = [["series", "min", "q1", "median", "q3", "max"]]
    series = [(RULE_LABELS[r], [e.rule_values[r][measure] for e in results]) for r in _rules_of(results)]
    series.append(("optimal", [e.optimal[measure] for e in results]))
    for label, vals in series:
        if vals:
            rows.append([label] + [f"{v:.6f}" for v in five_numbers([float(v) for v in vals])])
    return rows


def fig_pairwise_data(results: Sequence[ElectionResult], a: str, b: str, measure: str = "psc") -> Table:
    """Values of both rules on the elections where their committees differ, by optimal value."""
    rows = [e for e in results if e.committees[a] != e.committees[b]]
    rows.sort(key=lambda e: (e.optimal[measure], e.id))
    out: Table = [["id", "optimal", a, b]]
    for e in rows:
        out.append([e.id, str(e.optimal[measure]), str(e.rule_values[a][measure]),
                    str(e.rule_values[b][measure])])
    return out


def stat_singleton_share(results: Sequence[ElectionResult]) -> Fraction | None:
    return _mean(e.singleton_share for e in results if e.singleton_share is not None)


def psc_failures(results: Sequence[ElectionResult], rule: str) -> int:
    """Elections where the rule's committee violates plain (alpha = 1) PSC."""
    return sum(1 for e in results if e.rule_values[rule]["psc"] >= 1)


def price_bound_violations(results: Sequence[ElectionResult]) -> list[str]:
    """Elections whose optimal priceability value falls below k/(k+1)."""
    return [e.id for e in results if e.optimal["price"] < Fraction(e.k, e.k + 1)]


def stats_table(results: Sequence[ElectionResult]) -> Table:
    rows: Table = [["statistic", "value"], ["elections", len(results)]]
    share = stat_singleton_share(results)
    rows.append(["singleton_share", "nan" if share is None else f"{float(share):.4f}"])
    measures = _measures_of(results)
    if "psc" in measures:
        for r in _rules_of(results):
            rows.append([f"psc_failures_{r}", psc_failures(results, r)])
    if "price" in measures:
        rows.append(["price_below_k_over_k_plus_1", len(price_bound_violations(results))])
    return rows


# ---------------------------------------------------------------------------
# CSV / SVG emission


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table)
    return buf.getvalue()


def read_csv(path: Path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "propmeter"
    matplotlib.rcParams["svg.fonttype"] = "none"
    return plt


def _save(plt, fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def render_histogram(csv_path: Path, svg_path: Path, title: str = "") -> None:
    rows = read_csv(csv_path)[1:]
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([float(v) for v, _ in rows], [int(c) for _, c in rows], width=0.08)
    ax.set_xlabel("optimal alpha (one decimal)")
    ax.set_ylabel("elections")
    ax.set_title(title)
    _save(plt, fig, svg_path)


def render_boxplot(csv_path: Path, svg_path: Path, title: str = "") -> None:
    rows = read_csv(csv_path)[1:]
    stats = [{"label": r[0], "whislo": float(r[1]), "q1": float(r[2]), "med": float(r[3]),
              "q3": float(r[4]), "whishi": float(r[5]), "fliers": []} for r in rows]
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bxp(stats, showfliers=False)
    ax.set_ylabel("alpha")
    ax.set_title(title)
    _save(plt, fig, svg_path)


def render_pairwise(csv_path: Path, svg_path: Path, title: str = "") -> None:
    table = read_csv(csv_path)
    header, rows = table[0], table[1:]
    xs = range(len(rows))
    plt = _figure()
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for col, style in ((1, "-"), (2, "."), (3, "x")):
        label = header[col] if col == 1 else RULE_LABELS.get(header[col], header[col])
        ax.plot(xs, [float(Fraction(r[col])) for r in rows], style, label=label, markersize=3)
    ax.set_xlabel("elections where the rules disagree")
    ax.set_ylabel("alpha")
    ax.set_title(title)
    ax.legend()
    _save(plt, fig, svg_path)


def parse_figure(spec: str) -> tuple[str, tuple[str, ...]]:
    """``hist-<measure>``, ``box-<measure>`` or ``pair:<ruleA>:<ruleB>[:<measure>]``."""
    if spec.startswith("pair:"):
        parts = spec.split(":")[1:]
        if len(parts) not in (2, 3) or any(p not in RULES for p in parts[:2]):
            raise ValueError(f"bad pairwise figure {spec!r}")
        measure = parts[2] if len(parts) == 3 else "psc"
        if measure not in MEASURES:
            raise ValueError(f"unknown measure in {spec!r}")
        return "pair", (parts[0], parts[1], measure)
    kind, _, measure = spec.partition("-")
    if kind not in ("hist", "box") or measure not in MEASURES:
        raise ValueError(f"bad figure name {spec!r}")
    return kind, (measure,)


def figure_stem(spec: str) -> str:
    kind, args = parse_figure(spec)
    return f"{kind}_{'_'.join(args)}"


def emit_figure(spec: str, results: Sequence[ElectionResult], run_dir: Path) -> Path:
    kind, args = parse_figure(spec)
    stem = figure_stem(spec)
    figures = run_dir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    data = {"hist": fig_histogram_data, "box": fig_boxplot_data, "pair": fig_pairwise_data}[kind](results, *args)
    (figures / f"{stem}.csv").write_text(table_csv(data), encoding="utf-8")
    return render_figure(spec, run_dir)


def render_figure(spec: str, run_dir: Path) -> Path:
    """Render a figure SVG from its CSV in ``run_dir/figures``."""
    kind, args = parse_figure(spec)
    stem = figure_stem(spec)
    csv_path = run_dir / "figures" / f"{stem}.csv"
    if not csv_path.exists():
        raise FileNotFoundError(f"no data for figure {spec!r} at {csv_path}")
    svg_path = csv_path.with_suffix(".svg")
    if kind == "hist":
        render_histogram(csv_path, svg_path, f"optimal {MEASURE_LABELS[args[0]]} values")
    elif kind == "box":
        render_boxplot(csv_path, svg_path, f"{MEASURE_LABELS[args[0]]} values by rule")
    else:
        a, b, ms = args
        render_pairwise(csv_path, svg_path, f"{RULE_LABELS[a]} vs {RULE_LABELS[b]}, {MEASURE_LABELS[ms]}")
    return svg_path


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunSummary:
    run_dir: Path
    results: list[ElectionResult]
    errors: list[dict]

    @property
    def exit_code(self) -> int:
        return 2 if self.errors else 0


def run_id(manifest_hash: str, config: RunConfig) -> str:
    doc = json.dumps({"manifest": manifest_hash, "config": config.as_dict()}, sort_keys=True)
    prefix = "completed" if config.completed else "run"
    return f"{prefix}-{hashlib.sha256(doc.encode()).hexdigest()[:12]}"


def write_results(run_dir: Path, results: Sequence[ElectionResult], errors: Sequence[dict],
                  manifest: dict, figures: Sequence[str] = DEFAULT_FIGURES) -> None:
    tables = run_dir / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    measures, rules = _measures_of(results), _rules_of(results)
    emitted = {"axiom_census": table_axiom_census(results), "stats": stats_table(results)}
    if rules:
        emitted["disagreement"] = table_disagreement(results)
        emitted["avg_distance"] = table_avg_distance(results)
        emitted["opt_alignment"] = table_opt_alignment(results)
    for name, table in emitted.items():
        (tables / f"{name}.csv").write_text(table_csv(table), encoding="utf-8")
    for spec in figures:
        kind, args = parse_figure(spec)
        if args[-1] not in measures or (kind == "pair" and not set(args[:2]) <= set(rules)):
            continue
        if results:
            emit_figure(spec, results, run_dir)
    lines = "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in results)
    (run_dir / "elections.jsonl").write_text(lines, encoding="utf-8")
    (run_dir / "errors.json").write_text(json.dumps(list(errors), indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")


def run_experiment(corpus: CorpusIndex, out: Path | str, config: RunConfig = RunConfig(), jobs: int = 1,
                   figures: Sequence[str] = DEFAULT_FIGURES, name: str | None = None) -> RunSummary:
    """Analyse every multiwinner election in the corpus and write the run directory."""
    entries = corpus.multiwinner()
    tasks = []
    errors: list[dict] = list(corpus.errors)
    for e in entries:
        try:
            tasks.append((e.id, (corpus.root / e.blt).read_text(encoding="utf-8"), e.meta))
        except OSError as exc:
            errors.append({"id": e.id, "error": f"unreadable: {exc}"})
    results, run_errors = analyse_corpus(tasks, config, jobs)
    errors.extend(run_errors)
    errors.sort(key=lambda d: (d.get("id", ""), d.get("error", "")))
    mhash = corpus.manifest_hash()
    run_dir = Path(out) / (name or run_id(mhash, config))
    manifest = {"manifest_hash": mhash, "config": config.as_dict(), "version": __version__,
                "elections": len(results), "errors": len(errors)}
    write_results(run_dir, results, errors, manifest, figures)
    return RunSummary(run_dir, results, errors)


def run_completed_suite(corpus: CorpusIndex, out: Path | str, seed: int = 42, jobs: int = 1,
                        config: RunConfig | None = None) -> RunSummary:
    """Rerun the experiment after completing every ballot with per-election seeds."""
    base = config or RunConfig()
    cfg = RunConfig(base.rules, base.measures, seed, True, base.cutoff, base.cap, base.tiebreak)
    return run_experiment(corpus, out, cfg, jobs)


def load_results(run_dir: Path | str) -> list[ElectionResult]:
    path = Path(run_dir) / "elections.jsonl"
    with open(path, encoding="utf-8") as fh:
        return [ElectionResult.from_dict(json.loads(line)) for line in fh if line.strip()]


