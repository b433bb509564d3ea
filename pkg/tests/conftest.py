import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from propmeter.election import Election  # noqa: E402


def make(m: int, k: int, spec: list[tuple[int, str]], names: str | None = None) -> Election:
    """Election from ``[(weight, "abc"), ...]`` with candidates named by letters."""
    letters = names or "abcdefghijklmnopqrstuvwxyz"[:m]
    idx = {ch: i + 1 for i, ch in enumerate(letters)}
    return Election.build(m, k, [(w, tuple(idx[ch] for ch in s)) for w, s in spec], names=list(letters))


@pytest.fixture
def rng():
    return random.Random(20240611)


_criteria: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    marker = report.keywords.get("criterion") if hasattr(report, "keywords") else None
    if marker is None or "test_acceptance.py" not in report.nodeid:
        return
    n = int(report.nodeid.rsplit("criterion_", 1)[1].split("_", 1)[0])
    if report.when == "call" or report.outcome != "passed":
        _criteria.setdefault(n, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        verdict = "PASS" if all(o == "passed" for o in _criteria[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}")
