"""Append-only run history, baselines and regression detection.

The store is a newline-delimited JSON file, one record per line. Lines are
only ever appended. An unterminated last line (a torn write) is moved to
``<store>.quarantine`` before the next append; unreadable lines are skipped
on read and reported in :attr:`ResultStore.quarantined`.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import statistics
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Union

from filelock import FileLock

from .engine import RunRecord, Workpackage
from .metrics import VerificationOutcome
from .specmodel import VerificationRule

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 5
DEFAULT_THRESHOLD = 0.05
SEVERITIES = ("info", "warn", "fail")


class StoreError(RuntimeError):
    pass


class DuplicateRunId(StoreError):
    pass


class NoMatchingRecords(StoreError):
    pass


@dataclass
class StoredRecord:
    run_id: str
    suite_version: str
    system_fingerprint: str
    record: RunRecord

    @property
    def benchmark(self) -> str:
        return self.record.workpackage.benchmark

    @property
    def tags(self) -> frozenset:
        return self.record.workpackage.tags

    @property
    def nodes(self) -> int:
        return self.record.workpackage.nodes

    @property
    def status(self) -> str:
        return self.record.status

    @property
    def runtime_seconds(self) -> float:
        return self.record.runtime_seconds

    @property
    def group(self) -> tuple:
        return (self.benchmark, self.tags, self.nodes)


@dataclass(frozen=True)
class Baseline:
    benchmark: str
    tags: frozenset
    nodes: int
    window: int
    baseline_seconds: float
    samples: int


@dataclass(frozen=True)
class RegressionFinding:
    run_id: str
    baseline: Optional[Baseline]
    relative_slowdown: Optional[float]
    severity: str
    note: str = ""


# --------------------------------------------------------------------------
# (de)serialization

def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_timestamp(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00")).astimezone(timezone.utc)


def record_to_dict(stored: StoredRecord) -> dict:
    rec = stored.record
    wp = rec.workpackage
    return {
        "run_id": stored.run_id,
        "suite_version": stored.suite_version,
        "system_fingerprint": stored.system_fingerprint,
        "benchmark": wp.benchmark,
        "workpackage_index": wp.index,
        "assignment": wp.assignment,
        "tags": sorted(wp.tags),
        "nodes": wp.nodes,
        "workdir": wp.workdir,
        "start": format_timestamp(rec.start),
        "end": format_timestamp(rec.end),
        "wall_seconds": rec.wall_seconds,
        "status": rec.status,
        "raw_output": rec.raw_output,
        "metrics": rec.metrics,
        "verification": [
            {
                "rule": dataclasses.asdict(o.rule) if o.rule is not None else None,
                "observed": o.observed,
                "passed": o.passed,
                "detail": o.detail,
            }
            for o in rec.verification
        ],
    }


def record_from_dict(data: dict) -> StoredRecord:
    outcomes = []
    for o in data.get("verification", []):
        rule = VerificationRule(**o["rule"]) if o.get("rule") else None
        outcomes.append(VerificationOutcome(rule, o.get("observed"), bool(o["passed"]), o.get("detail", "")))
    wp = Workpackage(
        benchmark=data["benchmark"],
        index=int(data["workpackage_index"]),
        assignment=dict(data.get("assignment", {})),
        tags=frozenset(data.get("tags", [])),
        nodes=int(data["nodes"]),
        workdir=data.get("workdir"),
    )
    rec = RunRecord(
        workpackage=wp,
        start=parse_timestamp(data["start"]),
        end=parse_timestamp(data["end"]),
        wall_seconds=float(data["wall_seconds"]),
        status=data["status"],
        raw_output=dict(data.get("raw_output", {})),
        metrics={k: float(v) for k, v in data.get("metrics", {}).items()},
        verification=outcomes,
    )
    return StoredRecord(data["run_id"], data.get("suite_version", ""), data.get("system_fingerprint", ""), rec)


# --------------------------------------------------------------------------
# store

class ResultStore:
    """Single-writer, multi-reader history file.

    Appends from threads of one process go through an in-process lock; a
    file lock next to the store serializes writers across processes.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.quarantine_path = self.path.with_name(self.path.name + ".quarantine")
        self.quarantined: list[str] = []
        self._lock = threading.Lock()
        self._file_lock = FileLock(str(self.path) + ".lock")
        self._ids: set[str] = set()
        self._scanned = 0

    def _scan_ids(self) -> None:
        if not self.path.exists():
            return
        with self.path.open("rb") as fh:
            fh.seek(self._scanned)
            for line in fh:
                if not line.endswith(b"\n"):
                    break
                self._scanned += len(line)
                try:
                    self._ids.add(json.loads(line)["run_id"])
                except (ValueError, KeyError, TypeError):
                    continue

    def _repair_tail(self) -> None:
        if not self.path.exists() or self.path.stat().st_size == 0:
            return
        with self.path.open("rb+") as fh:
            fh.seek(-1, os.SEEK_END)
            if fh.read(1) == b"\n":
                return
            fh.seek(0)
            data = fh.read()
            cut = data.rfind(b"\n") + 1
            torn = data[cut:]
            with self.quarantine_path.open("ab") as q:
                q.write(torn + b"\n")
            fh.truncate(cut)
        log.warning("quarantined torn trailing line of %s (%d bytes)", self.path, len(torn))
        self._scanned = min(self._scanned, cut)

    def append(self, stored: StoredRecord) -> str:
        line = json.dumps(record_to_dict(stored), sort_keys=True, ensure_ascii=False)
        with self._lock, self._file_lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._repair_tail()
            self._scan_ids()
            if stored.run_id in self._ids:
                raise DuplicateRunId(f"run_id {stored.run_id!r} already stored")
            try:
                with self.path.open("ab") as fh:
                    fh.write(line.encode("utf-8") + b"\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreError(f"cannot write {self.path}: {exc}") from exc
            self._ids.add(stored.run_id)
        return stored.run_id

    def extend(self, records: Iterable[StoredRecord]) -> list[str]:
        return [self.append(r) for r in records]

    def records(self) -> list[StoredRecord]:
        """Every readable record in append order."""
        if not self.path.exists():
            return []
        out, bad = [], []
        with self.path.open("rb") as fh:
            for lineno, line in enumerate(fh, 1):
                text = line.decode("utf-8", errors="replace").rstrip("\n")
                if not text.strip():
                    continue
                try:
                    out.append(record_from_dict(json.loads(text)))
                except (ValueError, KeyError, TypeError) as exc:
                    bad.append(text)
                    log.warning("%s:%d: skipping unreadable record (%s)", self.path, lineno, exc)
        self.quarantined = bad
        return out

    def get(self, run_id: str) -> StoredRecord:
        for r in self.records():
            if r.run_id == run_id:
                return r
        raise KeyError(run_id)

    def query(self, benchmark: Optional[str] = None, tags: Optional[Iterable[str]] = None,
              nodes: Optional[int] = None, status: Optional[str] = None) -> list[StoredRecord]:
        tagset = frozenset(tags) if tags is not None else None
        return [
            r for r in self.records()
            if (benchmark is None or r.benchmark == benchmark)
            and (tagset is None or r.tags == tagset)
            and (nodes is None or r.nodes == nodes)
            and (status is None or r.status == status)
        ]


def append_record(store: ResultStore, stored: StoredRecord) -> str:
    return store.append(stored)


# --------------------------------------------------------------------------
# baselines and regressions

def _records(source) -> list[StoredRecord]:
    return source.records() if isinstance(source, ResultStore) else list(source)


def compute_baseline(source, benchmark: str, tags: Iterable[str], nodes: int,
                     window: int = DEFAULT_WINDOW) -> Baseline:
    """Median runtime of the last ``window`` successful runs of one group."""
    if window < 1:
        raise ValueError("window must be a positive integer")
    key = (benchmark, frozenset(tags), nodes)
    passing = [r.runtime_seconds for r in _records(source) if r.group == key and r.status == "success"]
    if not passing:
        raise NoMatchingRecords(f"no successful runs for {benchmark} tags={sorted(key[1])} nodes={nodes}")
    recent = passing[-window:]
    return Baseline(benchmark, key[1], nodes, window, float(statistics.median(recent)), len(recent))


def detect_regression(stored: StoredRecord, baseline: Baseline, threshold: float = DEFAULT_THRESHOLD,
                      warn_threshold: Optional[float] = None) -> RegressionFinding:
    """Classify a run against its baseline.

    ``fail`` when the relative slowdown exceeds ``threshold``; ``warn`` when it
    exceeds ``warn_threshold`` (off unless given); ``info`` otherwise,
    including every improvement.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    base = baseline.baseline_seconds
    excess = stored.runtime_seconds - base
    slowdown = stored.runtime_seconds / base - 1.0
    # compare in absolute seconds so a run exactly at the threshold is not rounded into a failure
    if excess > threshold * base:
        severity = "fail"
    elif warn_threshold is not None and excess > warn_threshold * base:
        severity = "warn"
    else:
        severity = "info"
    return RegressionFinding(stored.run_id, baseline, slowdown, severity)


def check_latest(source, window: int = DEFAULT_WINDOW, threshold: float = DEFAULT_THRESHOLD,
                 warn_threshold: Optional[float] = None) -> list[RegressionFinding]:
    """One finding per (benchmark, tags, nodes) group, for its most recent record.

    The baseline comes from the group's earlier successful runs. A most
    recent run that did not succeed is reported as ``fail``.
    """
    groups: dict[tuple, list[StoredRecord]] = {}
    for r in _records(source):
        groups.setdefault(r.group, []).append(r)
    findings = []
    for key in sorted(groups, key=lambda k: (k[0], sorted(k[1]), k[2])):
        history = groups[key]
        latest, earlier = history[-1], history[:-1]
        if latest.status != "success":
            findings.append(RegressionFinding(latest.run_id, None, None, "fail", f"run status {latest.status}"))
            continue
        try:
            baseline = compute_baseline(earlier, *key, window=window)
        except NoMatchingRecords:
            findings.append(RegressionFinding(latest.run_id, None, None, "info", "no baseline yet"))
            continue
        findings.append(detect_regression(latest, baseline, threshold, warn_threshold))
    return findings
