from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from procbench.engine import RunRecord, Workpackage
from procbench.store import ResultStore, StoredRecord

T0 = datetime(2026, 1, 1, tzinfo=timezone.utc)


def make_record(runtime: float, *, run_id: str, benchmark: str = "arbor", nodes: int = 8,
                tags=(), status: str = "success", offset: int = 0) -> StoredRecord:
    wp = Workpackage(benchmark, 0, {"nodes": nodes}, frozenset(tags), nodes, None)
    metrics = {"fom": runtime, "fom_raw": runtime} if status == "success" else {}
    rec = RunRecord(wp, T0 + timedelta(seconds=offset), T0 + timedelta(seconds=offset + 1),
                    runtime, status, {"execute": f"FOM: time={runtime!r} s\n"}, metrics, [])
    return StoredRecord(run_id, "test", "fp", rec)


@pytest.fixture
def store(tmp_path):
    return ResultStore(tmp_path / "store.jsonl")


# one summary line per acceptance criterion
_acceptance: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance[name] = "PASS" if report.outcome == "passed" else report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance.items():
        terminalreporter.write_line(f"{outcome:6s} {name}")
