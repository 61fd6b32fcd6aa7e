"""Parameter expansion, step planning and workpackage execution."""

from __future__ import annotations

import abc
import importlib
import io
import itertools
import logging
import os
import re
import shlex
import subprocess
import sys
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import metrics
from .specmodel import BenchmarkSpec, PlatformProfile, Step, Template, VerificationRule
from .templating import TemplateError, render_template
from .workloads import PROGRAMS

log = logging.getLogger(__name__)

STATUSES = ("success", "step-failure", "verification-failure")

__all__ = [
    "Backend", "ExecutionPlan", "ExpansionError", "ExternalSchedulerBackend", "LocalBackend",
    "RunRecord", "SimulatedBackend", "SubmitResult", "Workpackage", "WorkdirCollision",
    "execute", "expand_parameters", "make_backend", "new_run_id", "plan", "render_template",
]


class ExpansionError(ValueError):
    pass


class WorkdirCollision(FileExistsError):
    pass


class BackendUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class Workpackage:
    benchmark: str
    index: int
    assignment: dict
    tags: frozenset = frozenset()
    nodes: int = 1
    workdir: Optional[str] = None


@dataclass
class RunRecord:
    workpackage: Workpackage
    start: datetime
    end: datetime
    wall_seconds: float
    status: str
    raw_output: dict[str, str] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    verification: list[metrics.VerificationOutcome] = field(default_factory=list)

    @property
    def runtime_seconds(self) -> float:
        """Normalized FOM when one was extracted, wall time otherwise."""
        return self.metrics.get("fom", self.wall_seconds)

    @property
    def passed(self) -> bool:
        return self.status == "success"


# --------------------------------------------------------------------------
# expansion

def _coerce(text: str):
    if re.fullmatch(r"[+-]?\d+", text) and str(int(text)) == text:
        return int(text)
    try:
        value = float(text)
    except ValueError:
        return text
    return value if repr(value) == text else text


def active_parameters(spec: BenchmarkSpec, tags: Iterable[str]) -> dict:
    """Merged parameters of every active set; later sets override earlier ones by name.

    An overridden parameter keeps the position of its first definition, so
    workpackage order does not depend on which tags are active.
    """
    tags = set(tags)
    for t in list(tags):
        variant = spec.variant(t)
        if variant is not None:
            tags |= variant.tag_overrides
    merged: dict = {}
    for ps in spec.parameter_sets:
        if ps.is_active(tags):
            merged.update(ps.parameters)
    return merged


def _template_order(templates: Mapping[str, Template]) -> list[str]:
    order, state = [], {}

    def visit(name: str, chain: tuple[str, ...]):
        if state.get(name) == "done":
            return
        if state.get(name) == "visiting":
            raise ExpansionError("parameter reference cycle: " + " -> ".join(chain + (name,)))
        state[name] = "visiting"
        for ref in templates[name].references:
            if ref in templates:
                visit(ref, chain + (name,))
        state[name] = "done"
        order.append(name)

    for name in templates:
        visit(name, ())
    return order


def expand_parameters(spec: BenchmarkSpec, tags: Iterable[str] = (), seed: int = 0) -> list[Workpackage]:
    """Cartesian product of the active literal lists, with templates resolved per point."""
    tags = frozenset(tags)
    params = active_parameters(spec, tags)
    literals = {k: v for k, v in params.items() if not isinstance(v, Template)}
    templates = {k: v for k, v in params.items() if isinstance(v, Template)}
    order = _template_order(templates)
    names = list(literals)
    packages = []
    for index, combo in enumerate(itertools.product(*(literals[n] for n in names))):
        assignment = dict(zip(names, combo))
        context = {**assignment, "benchmark": spec.name, "workpackage": index, "seed": seed}
        for name in order:
            try:
                value = _coerce(render_template(templates[name].text, context))
            except TemplateError as exc:
                raise ExpansionError(f"{spec.name}: parameter {name!r}: {exc}") from exc
            assignment[name] = value
            context[name] = value
        nodes = assignment.get("nodes", 1)
        if isinstance(nodes, bool) or not isinstance(nodes, int) or nodes < 1:
            raise ExpansionError(f"{spec.name}: nodes must be a positive integer, got {nodes!r}")
        packages.append(Workpackage(spec.name, index, assignment, tags, nodes))
    return packages


# --------------------------------------------------------------------------
# planning

@dataclass(frozen=True)
class ExecutionPlan:
    spec: BenchmarkSpec
    steps: tuple[Step, ...]

    def render(self, workpackage: Workpackage, platform: Optional[PlatformProfile] = None,
               seed: int = 0) -> list[tuple[Step, str]]:
        """Commands for each step, wrapped in the platform's submission template."""
        context = builtin_context(workpackage, seed)
        rendered = []
        for step in self.steps:
            command = render_template(step.command, context)
            if platform is not None:
                command = render_template(platform.submission_template, {**context, "command": command})
            rendered.append((step, command))
        return rendered


def builtin_context(workpackage: Workpackage, seed: int = 0) -> dict:
    return {
        **workpackage.assignment,
        "benchmark": workpackage.benchmark,
        "workpackage": workpackage.index,
        "workdir": workpackage.workdir or "",
        "seed": seed,
        "nodes": workpackage.nodes,
    }


def plan(spec: BenchmarkSpec) -> ExecutionPlan:
    """Topological step order; among ready steps the earliest declared goes first."""
    position = {s.name: i for i, s in enumerate(spec.steps)}
    remaining = {s.name: set(s.depends_on) for s in spec.steps}
    order: list[Step] = []
    while remaining:
        ready = [n for n, deps in remaining.items() if not deps]
        if not ready:
            raise ExpansionError(f"{spec.name}: step dependency cycle")
        nxt = min(ready, key=position.__getitem__)
        order.append(spec.steps[position[nxt]])
        del remaining[nxt]
        for deps in remaining.values():
            deps.discard(nxt)
    return ExecutionPlan(spec, tuple(order))


# --------------------------------------------------------------------------
# backends

@dataclass(frozen=True)
class SubmitResult:
    returncode: int
    stdout: str
    stderr: str
    wall_seconds: float


class Backend(abc.ABC):
    """Runs one rendered command synchronously.

    Implementations must tolerate concurrent ``submit`` calls unless they
    set ``max_parallel = 1``.
    """

    name = "abstract"
    simulated = False
    max_nodes: Optional[int] = None
    max_parallel: Optional[int] = None

    @abc.abstractmethod
    def submit(self, command: str, nodes: int, environment: Mapping[str, str],
               workdir: Union[str, Path]) -> SubmitResult:
        ...


class LocalBackend(Backend):
    """Spawns each command through the shell on this host."""

    name = "local"

    def __init__(self, timeout: Optional[float] = None):
        self.timeout = timeout

    def _resolve(self, command: str) -> str:
        # Bundled workloads run under this interpreter even when not on PATH.
        head, _, rest = command.strip().partition(" ")
        if head in PROGRAMS:
            return f"{shlex.quote(sys.executable)} -m {PROGRAMS[head]} {rest}".rstrip()
        return command

    def submit(self, command, nodes, environment, workdir):
        env = {**os.environ, **environment}
        start = time.perf_counter()
        try:
            proc = subprocess.run(self._resolve(command), shell=True, cwd=workdir, env=env,
                                  capture_output=True, text=True, timeout=self.timeout)
        except subprocess.TimeoutExpired as exc:
            out = exc.stdout.decode() if isinstance(exc.stdout, bytes) else (exc.stdout or "")
            return SubmitResult(124, out, f"timeout after {self.timeout} s\n", time.perf_counter() - start)
        return SubmitResult(proc.returncode, proc.stdout, proc.stderr, time.perf_counter() - start)


class SimulatedBackend(Backend):
    """Evaluates bundled workloads in-process under their deterministic cost models.

    Besides the ``procbench-*`` programs only ``echo``, ``true``, ``false``
    and ``:`` are understood; anything else fails with status 127.
    """

    name = "simulated"
    simulated = True

    def __init__(self, seed: int = 0):
        self.seed = seed

    def submit(self, command, nodes, environment, workdir):
        try:
            argv = shlex.split(command)
        except ValueError as exc:
            return SubmitResult(2, "", f"cannot parse command: {exc}\n", 0.0)
        if not argv:
            return SubmitResult(0, "", "", 0.0)
        prog, args = argv[0], argv[1:]
        if prog in ("true", ":"):
            return SubmitResult(0, "", "", 0.0)
        if prog == "false":
            return SubmitResult(1, "", "", 0.0)
        if prog == "echo":
            return SubmitResult(0, " ".join(args) + "\n", "", 0.0)
        if prog not in PROGRAMS:
            return SubmitResult(127, "", f"{prog}: not available on the simulated backend\n", 0.0)
        env = {"BENCH_SEED": str(self.seed), **environment, "BENCH_NODES": str(nodes)}
        module = importlib.import_module(PROGRAMS[prog])
        out = io.StringIO()
        try:
            result = module.invoke(args, env, out, simulate=True)
        except SystemExit as exc:  # argparse usage errors
            return SubmitResult(int(exc.code or 0), out.getvalue(), f"{prog}: bad arguments\n", 0.0)
        return SubmitResult(result.returncode, out.getvalue(), "", result.seconds)


class ExternalSchedulerBackend(Backend):
    """Placeholder for batch schedulers: writes the job script, never submits."""

    name = "external-scheduler"

    def submit(self, command, nodes, environment, workdir):
        script = Path(workdir) / "job.sh"
        exports = "".join(f"export {k}={shlex.quote(v)}\n" for k, v in sorted(environment.items()))
        script.write_text(f"#!/bin/sh\n{exports}{command}\n", encoding="utf-8")
        raise BackendUnavailable(f"no scheduler client configured; job script left at {script}")


def make_backend(platform: PlatformProfile, seed: int = 0, timeout: Optional[float] = None) -> Backend:
    if platform.backend == "simulated":
        return SimulatedBackend(seed)
    if platform.backend == "local":
        return LocalBackend(timeout)
    return ExternalSchedulerBackend()


# --------------------------------------------------------------------------
# execution

def new_run_id() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ") + "-" + uuid.uuid4().hex[:8]


def _write_step_files(stepdir: Path, stdout: str, stderr: str, rc: int) -> None:
    (stepdir / "stdout.txt").write_text(stdout, encoding="utf-8")
    (stepdir / "stderr.txt").write_text(stderr, encoding="utf-8")
    (stepdir / "rc.txt").write_text(f"{rc}\n", encoding="utf-8")


def _verify(spec: BenchmarkSpec, output: str, base_dir: Optional[Path]) -> tuple[dict, list, bool]:
    outcomes: list[metrics.VerificationOutcome] = []
    values: dict[str, float] = {}
    fom_rule = VerificationRule("key_presence", "fom")
    try:
        raw = metrics.extract_metrics(output, spec.fom)
        values["fom_raw"] = raw.value
        values["fom"] = metrics.normalize_fom(raw, spec.fom)
        outcomes.append(metrics.VerificationOutcome(fom_rule, raw.value, True, "fom extracted"))
    except metrics.MetricError as exc:
        outcomes.append(metrics.VerificationOutcome(fom_rule, None, False, str(exc)))
    for rule in spec.verification:
        outcomes.append(metrics.apply_rule(rule, output, values.get("fom_raw"), base_dir))
    return values, outcomes, all(o.passed for o in outcomes)


def _run_workpackage(execution_plan: ExecutionPlan, wp: Workpackage, backend: Backend,
                     platform: Optional[PlatformProfile], seed: int,
                     definitions_dir: Optional[Path]) -> RunRecord:
    spec = execution_plan.spec
    workdir = Path(wp.workdir)
    start = datetime.now(timezone.utc)
    env = dict(platform.environment) if platform else {}
    env.update(BENCH_NODES=str(wp.nodes), BENCH_SEED=str(seed), BENCH_WORKDIR=str(workdir))
    raw_output: dict[str, str] = {}
    wall = 0.0
    status = "success"
    try:
        rendered = execution_plan.render(wp, platform, seed)
    except TemplateError as exc:
        rendered = []
        status = "step-failure"
        raw_output["<render>"] = str(exc)

    for step, command in rendered:
        stepdir = workdir / step.name
        stepdir.mkdir(parents=True)
        outs, errs, rc = [], [], 0
        for _ in range(step.iterations):
            try:
                result = backend.submit(command, wp.nodes, env, stepdir)
            except Exception as exc:  # submission failures become step failures
                result = SubmitResult(125, "", f"submission failed: {exc}\n", 0.0)
            outs.append(result.stdout)
            errs.append(result.stderr)
            wall += result.wall_seconds
            rc = result.returncode
            if rc != 0:
                break
        _write_step_files(stepdir, "".join(outs), "".join(errs), rc)
        raw_output[step.name] = "".join(outs)
        if rc != 0:
            status = "verification-failure" if step.kind == "verify" else "step-failure"
            log.info("%s[%d] step %s exited %d", spec.name, wp.index, step.name, rc)
            break

    values: dict[str, float] = {}
    outcomes: list[metrics.VerificationOutcome] = []
    if status == "success":
        combined = "".join(raw_output[s.name] for s, _ in rendered)
        values, outcomes, ok = _verify(spec, combined, definitions_dir)
        if not ok:
            status = "verification-failure"
    return RunRecord(wp, start, datetime.now(timezone.utc), wall, status, raw_output, values, outcomes)


def execute(execution_plan: ExecutionPlan, workpackages: Sequence[Workpackage], backend: Backend,
            max_parallel: int = 1, *, run_root: Union[str, Path], run_id: Optional[str] = None,
            platform: Optional[PlatformProfile] = None, seed: int = 0,
            definitions_dir: Union[str, Path, None] = None) -> list[RunRecord]:
    """Run every workpackage through the plan; records come back in input order.

    Each workpackage gets ``<run_root>/<run_id>/<benchmark>/<index>/``. A step
    failure ends that workpackage only.
    """
    if max_parallel < 1:
        raise ValueError("max_parallel must be >= 1")
    if backend.max_parallel is not None:
        max_parallel = min(max_parallel, backend.max_parallel)
    run_id = run_id or new_run_id()
    base = Path(run_root) / run_id
    placed = []
    for wp in workpackages:
        workdir = base / wp.benchmark / str(wp.index)
        if workdir.exists():
            raise WorkdirCollision(f"working directory already exists: {workdir}")
        placed.append(Workpackage(wp.benchmark, wp.index, wp.assignment, wp.tags, wp.nodes, str(workdir)))
    if len({p.workdir for p in placed}) != len(placed):
        raise WorkdirCollision("two workpackages map to the same working directory")
    for wp in placed:
        Path(wp.workdir).mkdir(parents=True)

    defs = Path(definitions_dir) if definitions_dir is not None else None

    def one(wp: Workpackage) -> RunRecord:
        return _run_workpackage(execution_plan, wp, backend, platform, seed, defs)

    if max_parallel == 1:
        return [one(wp) for wp in placed]
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        return list(pool.map(one, placed))
