"""``procbench`` command line: run, analyze, evaluate, report, ci check, validate.

Exit status: 0 success, 1 benchmark or regression failure, 2 usage or
definition error. Every file the commands write goes under ``--output-dir``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform as host
import statistics
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .engine import (ExpansionError, WorkdirCollision, execute, expand_parameters, make_backend,
                     new_run_id, plan)
from .procurement import ProcurementError, evaluate_model, parse_procurement_model
from .scaling import (ScalingError, ScalingSeries, dumps_series, fit_amdahl, load_series, relative_series,
                      strong_speedup_efficiency, weak_efficiency)
from .specmodel import SpecError, bundled_definitions_dir, load_definitions, resolve_platform, schema_reference
from .store import (DEFAULT_THRESHOLD, DEFAULT_WINDOW, NoMatchingRecords, ResultStore, StoredRecord,
                    check_latest, compute_baseline)

log = logging.getLogger("procbench")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
RESULT_COLUMNS = ("benchmark", "tags", "nodes", "fom_s", "status")


@dataclass
class CommandOutcome:
    exit_status: int
    summary: str
    artifacts: list[str] = field(default_factory=list)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers

def _tags(text: Optional[str]) -> frozenset:
    return frozenset(t.strip() for t in (text or "").split(",") if t.strip())


def _tag_label(tags) -> str:
    return "+".join(sorted(tags)) or "-"


def _output_dir(args) -> Path:
    path = Path(args.output_dir or "bench-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _store(args) -> ResultStore:
    return ResultStore(args.store or Path(args.output_dir or "bench-out") / "store.jsonl")


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _text_table(header: Sequence[str], rows) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str, artifacts: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    artifacts.append(str(path))


def _fingerprint(profile) -> str:
    payload = asdict(profile)
    if profile.backend != "simulated":
        payload["host"] = host.node()
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def result_rows(records) -> list[tuple]:
    rows = []
    for r in records:
        fom = r.metrics.get("fom")
        rows.append((r.workpackage.benchmark, _tag_label(r.workpackage.tags), r.workpackage.nodes,
                     "" if fom is None else repr(fom), r.status))
    return rows


# --------------------------------------------------------------------------
# commands

def cmd_run(args) -> CommandOutcome:
    try:
        specs = load_definitions(args.definitions)
        if args.benchmark:
            wanted = set(args.benchmark)
            unknown = wanted - {s.name for s in specs}
            if unknown:
                raise UsageError(f"unknown benchmark(s): {', '.join(sorted(unknown))}")
            specs = [s for s in specs if s.name in wanted]
        profile = resolve_platform(args.platform or "local")
        tags = _tags(args.tags)
        seed = args.seed or 0
        campaign = [(spec, plan(spec), expand_parameters(spec, tags, seed)) for spec in specs]
    except (SpecError, ExpansionError, UsageError) as exc:
        return CommandOutcome(EXIT_USAGE, f"error: {exc}")

    out = _output_dir(args)
    run_id = args.run_id or new_run_id()
    backend = make_backend(profile, seed, timeout=args.timeout)
    definitions_dir = bundled_definitions_dir()
    if args.definitions:
        path = Path(args.definitions)
        definitions_dir = path.parent if path.is_file() else path
    records = []
    try:
        for _spec, execution_plan, packages in campaign:
            records += execute(execution_plan, packages, backend, args.max_parallel or 1,
                               run_root=out / "runs", run_id=run_id, platform=profile, seed=seed,
                               definitions_dir=definitions_dir)
    except WorkdirCollision as exc:
        return CommandOutcome(EXIT_USAGE, f"error: {exc}")

    store = _store(args)
    fingerprint = _fingerprint(profile)
    for r in records:
        wp = r.workpackage
        store.append(StoredRecord(f"{run_id}/{wp.benchmark}/{wp.index}", __version__, fingerprint, r))

    rows = result_rows(records)
    artifacts: list[str] = [str(store.path)]
    shown = [(b, t, n, f"{float(f):.6g}" if f else "-", st) for b, t, n, f, st in rows]
    table = _text_table(("benchmark", "tags", "nodes", "FOM(s)", "status"), shown)
    _write(out / "runs" / run_id / "results.csv", _csv(RESULT_COLUMNS, rows), artifacts)
    _write(out / "runs" / run_id / "results.txt", table, artifacts)
    failed = sum(1 for r in records if r.status != "success")
    summary = table + f"\nrun {run_id}: {len(records)} workpackage(s), {failed} failed\n"
    return CommandOutcome(EXIT_FAILURE if failed else EXIT_OK, summary, artifacts)


def _series_from_store(args) -> list[ScalingSeries]:
    store = _store(args)
    records = [r for r in store.records() if r.status == "success"]
    if args.benchmark:
        records = [r for r in records if r.benchmark in set(args.benchmark)]
    if args.tags is not None:
        records = [r for r in records if r.tags == _tags(args.tags)]
    groups: dict[tuple, dict[int, list[float]]] = {}
    for r in records:
        groups.setdefault((r.benchmark, r.tags), {}).setdefault(r.nodes, []).append(r.runtime_seconds)
    if not groups:
        raise UsageError(f"no matching successful records in {store.path}")
    ref_nodes = {}
    if args.reference_nodes is None:
        try:
            ref_nodes = {s.name: s.reference_nodes for s in load_definitions(args.definitions)}
        except SpecError:
            ref_nodes = {}
    series = []
    for (bench, tags), by_nodes in sorted(groups.items(), key=lambda kv: (kv[0][0], sorted(kv[0][1]))):
        pairs = [(n, statistics.median(ts)) for n, ts in by_nodes.items()]
        ref = args.reference_nodes or ref_nodes.get(bench)
        if ref not in by_nodes:
            ref = None
        name = bench if not tags else f"{bench}+{_tag_label(tags)}"
        series.append(ScalingSeries.from_pairs(name, pairs, ref, args.mode))
    return series


def cmd_analyze(args) -> CommandOutcome:
    try:
        if args.series:
            series_list = [load_series(p, args.mode) for p in args.series]
        else:
            series_list = _series_from_store(args)
    except (ScalingError, UsageError, OSError, ValueError) as exc:
        return CommandOutcome(EXIT_USAGE, f"error: {exc}")

    out = _output_dir(args)
    artifacts: list[str] = []
    parts = []
    for s in series_list:
        stem = f"{s.benchmark}-{args.mode}"
        rel = relative_series(s)
        rel_rows = [(repr(x), repr(y)) for x, y in rel]
        _write(out / f"{stem}-series.csv", dumps_series(s), artifacts)
        _write(out / f"{stem}-relative.csv", _csv(("rel_nodes", "rel_runtime"), rel_rows), artifacts)
        if args.mode == "strong":
            eff = strong_speedup_efficiency(s)
            eff_header = ("nodes", "speedup", "efficiency")
            eff_rows = [(n, repr(sp), repr(e)) for n, sp, e in eff]
            shown = [(n, f"{sp:.4f}", f"{e:.4f}") for n, sp, e in eff]
        else:
            eff = weak_efficiency(s)
            eff_header = ("nodes", "efficiency")
            eff_rows = [(n, repr(e)) for n, e in eff]
            shown = [(n, f"{e:.4f}") for n, e in eff]
        _write(out / f"{stem}-efficiency.csv", _csv(eff_header, eff_rows), artifacts)
        ref = s.reference
        text = [f"{s.benchmark} ({args.mode}, reference {ref.nodes} nodes, {ref.runtime_seconds:g} s)",
                _text_table(("rel_nodes", "rel_runtime"), [(f"{x:.4f}", f"{y:.4f}") for x, y in rel]),
                _text_table(eff_header, shown)]
        if args.mode == "strong" and len(s.points) >= 2:
            try:
                fit = fit_amdahl(s)
                text.append(f"amdahl fit: t_s={fit.serial_seconds:.6g} s, t_p={fit.parallel_seconds:.6g} s, "
                            f"residual={fit.residual:.3g}\n")
            except ScalingError:
                pass
        parts.append("\n".join(text))
    return CommandOutcome(EXIT_OK, "\n".join(parts), artifacts)


def cmd_evaluate(args) -> CommandOutcome:
    try:
        model = parse_procurement_model(Path(args.model).read_text(encoding="utf-8"))
        reports = evaluate_model(model)
    except (ProcurementError, SpecError, OSError) as exc:
        return CommandOutcome(EXIT_USAGE, f"error: {exc}")

    out = _output_dir(args)
    artifacts: list[str] = []
    rows = []
    for rank, rep in enumerate(reports, 1):
        for b in rep.benchmarks:
            rows.append((rank, rep.proposal, b.benchmark, repr(b.weight), repr(b.committed_runtime_seconds),
                         b.committed_nodes, repr(b.normalized_throughput), repr(b.contribution)))
    _write(out / "evaluation.csv",
           _csv(("rank", "proposal", "benchmark", "weight", "committed_runtime_s", "committed_nodes",
                 "normalized_throughput", "contribution"), rows), artifacts)
    summary_rows = [(rank, r.proposal, f"{r.value:.6g}", f"{r.tco_currency:.6g}", f"{r.value_for_money:.6g}")
                    for rank, r in enumerate(reports, 1)]
    lines = [_text_table(("rank", "proposal", "value", "tco", "value_for_money"), summary_rows)]
    for r in reports:
        for bench, ratio in r.high_scaling_ratios.items():
            lines.append(f"{r.proposal}: high-scaling {bench} committed/reference = {ratio:.4f}")
        for flag in r.flags:
            lines.append(f"{r.proposal}: {flag}")
    summary = "\n".join(lines).rstrip() + "\n"
    _write(out / "evaluation-summary.txt", summary, artifacts)
    _write(out / "evaluation-ranking.csv",
           _csv(("rank", "proposal", "value", "tco", "value_for_money"),
                [(rank, r.proposal, repr(r.value), repr(r.tco_currency), repr(r.value_for_money))
                 for rank, r in enumerate(reports, 1)]), artifacts)
    return CommandOutcome(EXIT_OK, summary, artifacts)


def cmd_report(args) -> CommandOutcome:
    store = _store(args)
    records = store.records()
    if not records:
        return CommandOutcome(EXIT_OK, f"store {store.path} is empty; nothing to report\n")
    groups: dict[tuple, list[StoredRecord]] = {}
    for r in records:
        groups.setdefault(r.group, []).append(r)
    rows = []
    for key in sorted(groups, key=lambda k: (k[0], sorted(k[1]), k[2])):
        history = groups[key]
        ok = [r for r in history if r.status == "success"]
        try:
            base = f"{compute_baseline(history, *key, window=args.window).baseline_seconds:.6g}"
        except NoMatchingRecords:
            base = ""
        latest = history[-1]
        rows.append((key[0], _tag_label(key[1]), key[2], len(history), len(ok),
                     f"{latest.runtime_seconds:.6g}", latest.status, base))
    header = ("benchmark", "tags", "nodes", "runs", "passed", "latest_s", "latest_status", "baseline_s")
    out = _output_dir(args)
    artifacts: list[str] = []
    table = _text_table(header, rows)
    _write(out / "report.csv", _csv(header, rows), artifacts)
    _write(out / "report.txt", f"Benchmark history ({store.path})\n\n" + table, artifacts)
    notice = f"\n{len(store.quarantined)} unreadable line(s) skipped\n" if store.quarantined else ""
    return CommandOutcome(EXIT_OK, table + notice, artifacts)


def cmd_ci_check(args) -> CommandOutcome:
    store = _store(args)
    records = store.records()
    if not records:
        return CommandOutcome(EXIT_OK, f"notice: store {store.path} is empty; nothing to check\n")
    findings = check_latest(records, args.window, args.threshold, args.warn_threshold)
    by_id = {r.run_id: r for r in records}
    rows = []
    for f in findings:
        r = by_id[f.run_id]
        rows.append((r.benchmark, _tag_label(r.tags), r.nodes, f"{r.runtime_seconds:.6g}",
                     "" if f.baseline is None else f"{f.baseline.baseline_seconds:.6g}",
                     "" if f.relative_slowdown is None else f"{f.relative_slowdown:+.4f}",
                     f.severity, f.note))
    header = ("benchmark", "tags", "nodes", "runtime_s", "baseline_s", "slowdown", "severity", "note")
    artifacts: list[str] = []
    _write(_output_dir(args) / "ci-findings.csv", _csv(header, rows), artifacts)
    failed = sum(1 for f in findings if f.severity == "fail")
    summary = _text_table(header, rows) + (
        f"\n{failed} regression(s) above {args.threshold:.2%}\n" if failed else "\nno regressions\n")
    return CommandOutcome(EXIT_FAILURE if failed else EXIT_OK, summary, artifacts)


def cmd_validate(args) -> CommandOutcome:
    artifacts: list[str] = []
    if args.schema:
        _write(_output_dir(args) / "schema.md", schema_reference(), artifacts)
    try:
        specs = load_definitions(args.definitions)
        resolve_platform(args.platform or "local")
    except SpecError as exc:
        return CommandOutcome(EXIT_USAGE, f"{exc}\n", artifacts)
    names = ", ".join(s.name for s in specs)
    return CommandOutcome(EXIT_OK, f"{len(specs)} definition(s) valid: {names}\n", artifacts)


# --------------------------------------------------------------------------
# argument parsing

def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # Subparsers use SUPPRESS so a flag given before the subcommand is not reset.
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--definitions", default=d, help="definition file or directory (default: bundled)")
    parser.add_argument("--platform", default=d, help="bundled platform name or platform file (default: local)")
    parser.add_argument("--tags", default=d, help="comma-separated tags")
    parser.add_argument("--store", default=d, help="store file (default: <output-dir>/store.jsonl)")
    parser.add_argument("--output-dir", default=d, help="where all outputs go (default: ./bench-out)")
    parser.add_argument("--seed", type=int, default=d, help="seed for simulated runs")
    parser.add_argument("--max-parallel", type=int, default=d, help="concurrent workpackages")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"procbench {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, target=sub):
        p = target.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "run a benchmark campaign")
    p.add_argument("--benchmark", action="append", help="restrict to this benchmark (repeatable)")
    p.add_argument("--run-id", help="campaign identifier (default: timestamp + random suffix)")
    p.add_argument("--timeout", type=float, help="per-step timeout for the local backend, seconds")

    p = add("analyze", cmd_analyze, "strong/weak scaling tables")
    p.add_argument("--mode", choices=("strong", "weak"), default="strong")
    p.add_argument("--benchmark", action="append", help="restrict to this benchmark (repeatable)")
    p.add_argument("--reference-nodes", type=int, help="reference node count (default: from definition)")
    p.add_argument("--series", action="append", help="analyze a nodes,runtime_s file instead of the store")

    p = add("evaluate", cmd_evaluate, "value-for-money evaluation of system proposals")
    p.add_argument("model", help="procurement model file")

    p = add("report", cmd_report, "summarize the result store")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)

    ci = sub.add_parser("ci", help="continuous benchmarking")
    ci_sub = ci.add_subparsers(dest="ci_command", required=True)
    p = add("check", cmd_ci_check, "flag regressions of the latest runs", target=ci_sub)
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--warn-threshold", type=float, default=None)

    p = add("validate", cmd_validate, "check definitions and platform")
    p.add_argument("--schema", action="store_true", help="also write schema.md to the output dir")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.max_parallel is not None and args.max_parallel < 1:
        parser.error("--max-parallel must be >= 1")
    if getattr(args, "window", 1) < 1:
        parser.error("--window must be >= 1")
    if getattr(args, "threshold", 1.0) <= 0:
        parser.error("--threshold must be positive")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    outcome = args.func(args)
    stream = sys.stdout if outcome.exit_status != EXIT_USAGE else sys.stderr
    stream.write(outcome.summary if outcome.summary.endswith("\n") else outcome.summary + "\n")
    return outcome.exit_status


if __name__ == "__main__":
    sys.exit(main())
