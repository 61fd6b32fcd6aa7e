"""Declarative benchmark definitions: data model, YAML parsing and validation.

A definition file is a single YAML mapping::

    name: amdahl-sleeper
    description: Amdahl-model sleeper
    reference_nodes: 8
    parameter_sets:
      - name: model
        parameters:
          nodes: [1, 2, 4, 8]        # literal value list
          label: "run-${nodes}"      # template, evaluated per workpackage
        active_tags: []
    steps:
      - {name: execute, kind: execute, command: "procbench-amdahl ..."}
    variants: []
    fom: {pattern: 'FOM: time=(\\S+) s', unit: s, kind: time}
    verification: []

Lists are literal value sets, strings are templates. Everything is validated
before a :class:`BenchmarkSpec` is returned; a document with any violation
raises :class:`SpecError` carrying all findings.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

import yaml

from .templating import TemplateError, placeholders

STEP_KINDS = ("compile", "execute", "postprocess", "verify")
FOM_KINDS = ("time", "rate")
RULE_KINDS = ("scalar_tolerance", "exact_match", "key_presence")
BACKENDS = ("local", "simulated", "external-scheduler")
CANONICAL_VARIANTS = {"tiny": 0.25, "small": 0.50, "medium": 0.75, "large": 1.00}
VARIANT_LETTERS = {"tiny": "T", "small": "S", "medium": "M", "large": "L"}
DEFAULT_REFERENCE_NODES = 8

# Placeholders the engine provides: parameter templates see the first set,
# step commands additionally see the working directory and node count.
PARAMETER_BUILTINS = frozenset({"benchmark", "workpackage", "seed"})
BUILTIN_PARAMETERS = PARAMETER_BUILTINS | {"workdir", "nodes"}

_IDENT = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.-]*$")
_PARAM_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

Literal = Union[bool, int, float, str]


class SpecError(ValueError):
    """A definition document could not be turned into a valid spec."""

    def __init__(self, message: str, findings: Optional[list["Finding"]] = None):
        super().__init__(message)
        self.findings = list(findings or [])


@dataclass(frozen=True)
class Finding:
    benchmark: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.benchmark or '<suite>'}: [{self.code}] {self.message}"


@dataclass(frozen=True)
class Template:
    """A dependent parameter: text with ``${name}`` references."""

    text: str

    @property
    def references(self) -> list[str]:
        return placeholders(self.text)


@dataclass(frozen=True)
class ParameterSet:
    name: str
    parameters: dict[str, Union[tuple[Literal, ...], Template]] = field(default_factory=dict)
    active_tags: frozenset[str] = frozenset()

    def is_active(self, tags: Iterable[str]) -> bool:
        return not self.active_tags or bool(self.active_tags & set(tags))


@dataclass(frozen=True)
class Step:
    name: str
    command: str
    kind: str = "execute"
    depends_on: tuple[str, ...] = ()
    iterations: int = 1


@dataclass(frozen=True)
class FomSpec:
    pattern: str
    unit: str = "s"
    kind: str = "time"
    work_units: Optional[float] = None

    @property
    def lower_is_better(self) -> bool:
        # Holds for the normalized time-metric, whatever the raw kind.
        return True


@dataclass(frozen=True)
class VerificationRule:
    kind: str
    target: str
    reference: Optional[Literal] = None
    reference_file: Optional[str] = None
    rel_tolerance: float = 0.0


@dataclass(frozen=True)
class VariantDef:
    name: str
    memory_fraction: Optional[float] = None
    tag_overrides: frozenset[str] = frozenset()

    def budget(self, device_memory_bytes: int) -> int:
        """Per-device memory budget in bytes (exact integer arithmetic)."""
        if self.memory_fraction is None:
            raise ValueError(f"variant {self.name!r} carries no memory fraction")
        return int(Fraction(self.memory_fraction) * device_memory_bytes)


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    fom: FomSpec
    steps: tuple[Step, ...]
    parameter_sets: tuple[ParameterSet, ...] = ()
    variants: tuple[VariantDef, ...] = ()
    verification: tuple[VerificationRule, ...] = ()
    description: str = ""
    reference_nodes: int = DEFAULT_REFERENCE_NODES

    @property
    def parameter_names(self) -> set[str]:
        return {n for ps in self.parameter_sets for n in ps.parameters}

    def variant(self, name: str) -> Optional[VariantDef]:
        return next((v for v in self.variants if v.name == name), None)


@dataclass(frozen=True)
class PlatformProfile:
    name: str
    backend: str = "local"
    submission_template: str = "${command}"
    environment: dict[str, str] = field(default_factory=dict)
    devices_per_node: int = 1
    device_memory_bytes: int = 40_000_000_000


def variant_budgets(device_memory_bytes: int) -> dict[str, int]:
    """T/S/M/L per-device budgets for a device of the given size."""
    return {
        VARIANT_LETTERS[name]: int(Fraction(frac) * device_memory_bytes)
        for name, frac in CANONICAL_VARIANTS.items()
    }


# --------------------------------------------------------------------------
# parsing

_SPEC_KEYS = {"name", "description", "parameter_sets", "steps", "variants",
              "fom", "verification", "reference_nodes"}
_PSET_KEYS = {"name", "parameters", "active_tags"}
_STEP_KEYS = {"name", "depends_on", "command", "kind", "iterations"}
_FOM_KEYS = {"pattern", "unit", "kind", "work_units"}
_RULE_KEYS = {"kind", "target", "reference", "reference_file", "rel_tolerance"}
_VARIANT_KEYS = {"name", "memory_fraction", "tag_overrides"}
_PLATFORM_KEYS = {"name", "backend", "submission_template", "environment",
                  "devices_per_node", "device_memory_bytes"}


class _Collector:
    def __init__(self, benchmark: str = ""):
        self.benchmark = benchmark
        self.findings: list[Finding] = []

    def add(self, code: str, message: str) -> None:
        self.findings.append(Finding(self.benchmark, code, message))

    def keys(self, where: str, data: Any, allowed: set[str]) -> dict:
        if not isinstance(data, dict):
            self.add("type", f"{where}: expected a mapping, got {type(data).__name__}")
            return {}
        for key in data:
            if key not in allowed:
                self.add("unknown-field", f"{where}: unknown field {key!r}")
        return data


def load_yaml(text: str) -> Any:
    """``yaml.safe_load`` with syntax errors turned into :class:`SpecError` (position included)."""
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise SpecError(f"syntax error{where}: {exc.problem or exc}") from exc
    except yaml.YAMLError as exc:
        raise SpecError(f"syntax error: {exc}") from exc


def as_number(value: Any) -> Any:
    # PyYAML reads "2e7" as a string.
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _tags(col: _Collector, where: str, value: Any) -> frozenset[str]:
    if value is None:
        return frozenset()
    if isinstance(value, str):
        value = [t for t in value.split(",") if t]
    if not isinstance(value, list) or not all(isinstance(t, str) for t in value):
        col.add("type", f"{where}: expected a list of tag names")
        return frozenset()
    return frozenset(value)


def _literal_ok(v: Any) -> bool:
    return isinstance(v, (bool, int, float, str))


def _build_parameter_set(col: _Collector, i: int, raw: Any) -> Optional[ParameterSet]:
    data = col.keys(f"parameter_sets[{i}]", raw, _PSET_KEYS)
    if not data:
        return None
    name = data.get("name", f"set{i}")
    params: dict[str, Union[tuple, Template]] = {}
    raw_params = data.get("parameters") or {}
    if not isinstance(raw_params, dict):
        col.add("type", f"parameter set {name!r}: parameters must be a mapping")
        raw_params = {}
    for pname, pval in raw_params.items():
        pname = str(pname)
        if isinstance(pval, str):
            params[pname] = Template(pval)
        elif isinstance(pval, list):
            if not all(_literal_ok(v) for v in pval):
                col.add("type", f"parameter {pname!r}: values must be scalars")
            params[pname] = tuple(pval)
        elif _literal_ok(pval):
            params[pname] = (pval,)
        else:
            col.add("type", f"parameter {pname!r}: expected a value list or template string")
    return ParameterSet(str(name), params, _tags(col, f"parameter set {name!r}", data.get("active_tags")))


def _build_step(col: _Collector, i: int, raw: Any) -> Optional[Step]:
    data = col.keys(f"steps[{i}]", raw, _STEP_KEYS)
    if not data:
        return None
    deps = data.get("depends_on") or []
    if isinstance(deps, str):
        deps = [deps]
    iterations = data.get("iterations", 1)
    return Step(
        name=str(data.get("name", "")),
        command=str(data.get("command", "")),
        kind=str(data.get("kind", "execute")),
        depends_on=tuple(str(d) for d in deps),
        iterations=iterations,
    )


def _build_fom(col: _Collector, raw: Any) -> Optional[FomSpec]:
    if raw is None:
        col.add("missing", "fom is required")
        return None
    data = col.keys("fom", raw, _FOM_KEYS)
    if not data:
        return None
    work = as_number(data.get("work_units"))
    return FomSpec(
        pattern=str(data.get("pattern", "")),
        unit=str(data.get("unit", "s")),
        kind=str(data.get("kind", "time")),
        work_units=None if work is None else work,
    )


def _build_rule(col: _Collector, i: int, raw: Any) -> Optional[VerificationRule]:
    data = col.keys(f"verification[{i}]", raw, _RULE_KEYS)
    if not data:
        return None
    kind = str(data.get("kind", ""))
    reference = data.get("reference")
    if kind == "scalar_tolerance":
        reference = as_number(reference)
    return VerificationRule(
        kind=kind,
        target=str(data.get("target", "")),
        reference=reference,
        reference_file=data.get("reference_file"),
        rel_tolerance=as_number(data.get("rel_tolerance", 0.0)),
    )


def _build_variant(col: _Collector, i: int, raw: Any) -> Optional[VariantDef]:
    data = col.keys(f"variants[{i}]", raw, _VARIANT_KEYS)
    if not data:
        return None
    name = str(data.get("name", ""))
    frac = as_number(data.get("memory_fraction"))
    return VariantDef(name, frac, _tags(col, f"variant {name!r}", data.get("tag_overrides")))


def _build_spec(data: Any) -> tuple[Optional[BenchmarkSpec], list[Finding]]:
    col = _Collector(str(data.get("name", "")) if isinstance(data, dict) else "")
    data = col.keys("document", data, _SPEC_KEYS)
    if not data:
        if not col.findings:
            col.add("empty", "document is empty")
        return None, col.findings

    def items(key: str) -> list:
        value = data.get(key) or []
        if not isinstance(value, list):
            col.add("type", f"{key}: expected a list")
            return []
        return value

    psets = [_build_parameter_set(col, i, r) for i, r in enumerate(items("parameter_sets"))]
    steps = [_build_step(col, i, r) for i, r in enumerate(items("steps"))]
    variants = [_build_variant(col, i, r) for i, r in enumerate(items("variants"))]
    rules = [_build_rule(col, i, r) for i, r in enumerate(items("verification"))]
    fom = _build_fom(col, data.get("fom"))
    if col.findings or fom is None or None in psets + steps + variants + rules:
        return None, col.findings
    spec = BenchmarkSpec(
        name=str(data.get("name", "")),
        description=str(data.get("description") or ""),
        parameter_sets=tuple(psets),
        steps=tuple(steps),
        variants=tuple(variants),
        fom=fom,
        verification=tuple(rules),
        reference_nodes=data.get("reference_nodes", DEFAULT_REFERENCE_NODES),
    )
    return spec, validate_spec(spec)


def parse_spec(text: str) -> BenchmarkSpec:
    """Parse and fully validate one definition document."""
    spec, findings = _build_spec(load_yaml(text))
    if findings or spec is None:
        summary = "; ".join(str(f) for f in findings) or "invalid document"
        raise SpecError(summary, findings)
    return spec


def load_spec(path: Union[str, Path]) -> BenchmarkSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"{path}: {exc}") from exc
    try:
        return parse_spec(text)
    except SpecError as exc:
        raise SpecError(f"{path}: {exc}", exc.findings) from exc


def bundled_definitions_dir() -> Path:
    return Path(str(resources.files("procbench") / "definitions"))


def load_definitions(path: Union[str, Path, None] = None) -> list[BenchmarkSpec]:
    """Load one definition file, or every ``*.yaml`` file of a directory.

    With no path the bundled corpus is loaded. Errors from all files are
    gathered into a single :class:`SpecError`.
    """
    path = Path(path) if path is not None else bundled_definitions_dir()
    files = sorted(path.glob("*.yaml")) + sorted(path.glob("*.yml")) if path.is_dir() else [path]
    if not files:
        raise SpecError(f"{path}: no definition files found")
    specs, findings, messages = [], [], []
    for f in files:
        try:
            specs.append(load_spec(f))
        except SpecError as exc:
            findings.extend(exc.findings)
            messages.append(str(exc))
    suite = validate_suite(specs)
    findings.extend(suite)
    messages.extend(str(f) for f in suite)
    if messages:
        raise SpecError("\n".join(messages), findings)
    return specs


# --------------------------------------------------------------------------
# validation

def _find_cycle(graph: Mapping[str, Iterable[str]]) -> Optional[list[str]]:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph}
    stack: list[str] = []

    def visit(n: str) -> Optional[list[str]]:
        color[n] = GREY
        stack.append(n)
        for m in graph.get(n, ()):
            if m not in color:
                continue
            if color[m] == GREY:
                return stack[stack.index(m):] + [m]
            if color[m] == WHITE:
                found = visit(m)
                if found:
                    return found
        stack.pop()
        color[n] = BLACK
        return None

    for n in graph:
        if color[n] == WHITE:
            found = visit(n)
            if found:
                return found
    return None


def validate_spec(spec: BenchmarkSpec) -> list[Finding]:
    col = _Collector(spec.name)
    if not spec.name or not _IDENT.match(spec.name):
        col.add("name", f"invalid benchmark name {spec.name!r}")
    if not isinstance(spec.reference_nodes, int) or isinstance(spec.reference_nodes, bool) \
            or spec.reference_nodes < 1:
        col.add("reference-nodes", f"reference_nodes must be a positive integer, got {spec.reference_nodes!r}")

    known = spec.parameter_names | PARAMETER_BUILTINS
    param_graph: dict[str, set[str]] = {}
    for ps in spec.parameter_sets:
        if not _IDENT.match(ps.name):
            col.add("name", f"invalid parameter set name {ps.name!r}")
        for pname, value in ps.parameters.items():
            if not _PARAM_IDENT.match(pname):
                col.add("name", f"invalid parameter name {pname!r}")
            if pname in PARAMETER_BUILTINS or pname == "workdir":
                col.add("reserved", f"parameter name {pname!r} is reserved")
            if isinstance(value, Template):
                try:
                    refs = value.references
                except TemplateError as exc:
                    col.add("template", f"parameter {pname!r}: {exc}")
                    continue
                for r in refs:
                    if r not in known:
                        col.add("unresolved", f"parameter {pname!r} references unknown ${{{r}}}")
                param_graph.setdefault(pname, set()).update(refs)
            else:
                param_graph.setdefault(pname, set())
                if len(value) == 0:
                    col.add("empty-values", f"parameter {pname!r} has an empty value list")
    cycle = _find_cycle(param_graph)
    if cycle:
        col.add("parameter-cycle", "parameter reference cycle: " + " -> ".join(cycle))

    names = [s.name for s in spec.steps]
    if not spec.steps:
        col.add("steps", "at least one step is required")
    for dup in sorted({n for n in names if names.count(n) > 1}):
        col.add("duplicate-step", f"step name {dup!r} declared more than once")
    for step in spec.steps:
        if not _IDENT.match(step.name):
            col.add("name", f"invalid step name {step.name!r}")
        if step.kind not in STEP_KINDS:
            col.add("step-kind", f"step {step.name!r}: kind must be one of {STEP_KINDS}, got {step.kind!r}")
        if not isinstance(step.iterations, int) or isinstance(step.iterations, bool) or step.iterations < 1:
            col.add("iterations", f"step {step.name!r}: iterations must be a positive integer")
        for dep in step.depends_on:
            if dep not in names:
                col.add("dangling-dependency", f"step {step.name!r} depends on undeclared step {dep!r}")
        try:
            refs = placeholders(step.command)
        except TemplateError as exc:
            col.add("template", f"step {step.name!r}: {exc}")
            continue
        for r in refs:
            if r not in known | BUILTIN_PARAMETERS:
                col.add("unresolved", f"step {step.name!r} references unknown ${{{r}}}")
    cycle = _find_cycle({s.name: s.depends_on for s in spec.steps})
    if cycle:
        col.add("step-cycle", "step dependency cycle: " + " -> ".join(cycle))

    fom = spec.fom
    try:
        groups = re.compile(fom.pattern).groups
        if groups != 1:
            col.add("fom-pattern", f"fom pattern must have exactly one capture group, has {groups}")
    except re.error as exc:
        col.add("fom-pattern", f"fom pattern does not compile: {exc}")
    if fom.kind not in FOM_KINDS:
        col.add("fom-kind", f"fom kind must be one of {FOM_KINDS}, got {fom.kind!r}")
    if fom.kind == "rate":
        if not isinstance(fom.work_units, (int, float)) or isinstance(fom.work_units, bool) \
                or not fom.work_units > 0:
            col.add("fom-work-units", "rate fom requires positive work_units")
    elif fom.work_units is not None:
        col.add("fom-work-units", "work_units is only allowed for rate fom")

    for rule in spec.verification:
        if rule.kind not in RULE_KINDS:
            col.add("rule-kind", f"verification kind must be one of {RULE_KINDS}, got {rule.kind!r}")
        if not rule.target:
            col.add("rule-target", "verification rule needs a target")
        if not isinstance(rule.rel_tolerance, (int, float)) or rule.rel_tolerance < 0:
            col.add("rule-tolerance", f"rel_tolerance must be non-negative, got {rule.rel_tolerance!r}")
        if rule.kind in ("scalar_tolerance", "exact_match") \
                and rule.reference is None and rule.reference_file is None:
            col.add("rule-reference", f"{rule.kind} rule on {rule.target!r} needs a reference")
        if rule.kind == "scalar_tolerance" and rule.reference is not None \
                and not isinstance(rule.reference, (int, float)):
            col.add("rule-reference", f"scalar reference must be numeric, got {rule.reference!r}")

    vnames = [v.name for v in spec.variants]
    for dup in sorted({n for n in vnames if vnames.count(n) > 1}):
        col.add("duplicate-variant", f"variant {dup!r} declared more than once")
    for v in spec.variants:
        if v.name in CANONICAL_VARIANTS:
            if v.memory_fraction != CANONICAL_VARIANTS[v.name]:
                col.add("variant-fraction",
                        f"variant {v.name!r} must have memory_fraction {CANONICAL_VARIANTS[v.name]}")
        elif v.memory_fraction is not None:
            col.add("variant-fraction", f"free variant tag {v.name!r} carries no memory fraction")
        if not v.name:
            col.add("name", "variant needs a name")
    return col.findings


def validate_suite(specs: Iterable[BenchmarkSpec]) -> list[Finding]:
    """All findings for a suite; empty iff every spec is valid and names are unique."""
    findings: list[Finding] = []
    seen: set[str] = set()
    for spec in specs:
        if spec.name in seen:
            findings.append(Finding(spec.name, "duplicate-name", f"benchmark name {spec.name!r} is not unique"))
        seen.add(spec.name)
        findings.extend(validate_spec(spec))
    return findings


# --------------------------------------------------------------------------
# serialization

def spec_to_dict(spec: BenchmarkSpec) -> dict:
    def pset(ps: ParameterSet) -> dict:
        params = {
            k: (v.text if isinstance(v, Template) else list(v))
            for k, v in ps.parameters.items()
        }
        return {"name": ps.name, "parameters": params, "active_tags": sorted(ps.active_tags)}

    fom = {"pattern": spec.fom.pattern, "unit": spec.fom.unit, "kind": spec.fom.kind}
    if spec.fom.work_units is not None:
        fom["work_units"] = spec.fom.work_units
    rules = []
    for r in spec.verification:
        d: dict[str, Any] = {"kind": r.kind, "target": r.target}
        if r.reference is not None:
            d["reference"] = r.reference
        if r.reference_file is not None:
            d["reference_file"] = r.reference_file
        d["rel_tolerance"] = r.rel_tolerance
        rules.append(d)
    return {
        "name": spec.name,
        "description": spec.description,
        "reference_nodes": spec.reference_nodes,
        "parameter_sets": [pset(ps) for ps in spec.parameter_sets],
        "steps": [
            {"name": s.name, "kind": s.kind, "command": s.command,
             "depends_on": list(s.depends_on), "iterations": s.iterations}
            for s in spec.steps
        ],
        "variants": [
            {"name": v.name, "memory_fraction": v.memory_fraction, "tag_overrides": sorted(v.tag_overrides)}
            for v in spec.variants
        ],
        "fom": fom,
        "verification": rules,
    }


class _SpecDumper(yaml.SafeDumper):
    pass


def _represent_str(dumper: yaml.SafeDumper, text: str):
    # NEL and the unicode line/paragraph separators are folded by the loader
    # unless escaped, which only the double-quoted style does
    style = '"' if any(c in text for c in "\x85\u2028\u2029") else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", text, style=style)


_SpecDumper.add_representer(str, _represent_str)


def serialize_spec(spec: BenchmarkSpec) -> str:
    return yaml.dump(spec_to_dict(spec), Dumper=_SpecDumper, sort_keys=False, allow_unicode=True)


# --------------------------------------------------------------------------
# platforms

def _build_platform(col: _Collector, raw: Any) -> Optional[PlatformProfile]:
    data = col.keys("platform", raw, _PLATFORM_KEYS)
    if not data:
        return None
    env = data.get("environment") or {}
    if not isinstance(env, dict):
        col.add("type", "platform environment must be a mapping")
        env = {}
    profile = PlatformProfile(
        name=str(data.get("name", "")),
        backend=str(data.get("backend", "local")),
        submission_template=str(data.get("submission_template", "${command}")),
        environment={str(k): str(v) for k, v in env.items()},
        devices_per_node=data.get("devices_per_node", 1),
        device_memory_bytes=data.get("device_memory_bytes", 40_000_000_000),
    )
    if not _IDENT.match(profile.name):
        col.add("name", f"invalid platform name {profile.name!r}")
    if profile.backend not in BACKENDS:
        col.add("backend", f"backend must be one of {BACKENDS}, got {profile.backend!r}")
    if not isinstance(profile.devices_per_node, int) or profile.devices_per_node < 1:
        col.add("devices", "devices_per_node must be a positive integer")
    if not isinstance(profile.device_memory_bytes, int) or profile.device_memory_bytes <= 0:
        col.add("memory", "device_memory_bytes must be a positive integer")
    try:
        placeholders(profile.submission_template)
    except TemplateError as exc:
        col.add("template", f"submission_template: {exc}")
    return profile


def parse_platforms(text: str) -> dict[str, PlatformProfile]:
    """Parse a platform file: ``{platforms: [profile, ...]}`` or a single profile."""
    data = load_yaml(text)
    raw = data.get("platforms") if isinstance(data, dict) and "platforms" in data else [data]
    col = _Collector()
    if not isinstance(raw, list):
        raise SpecError("platforms: expected a list")
    profiles = [_build_platform(col, r) for r in raw]
    if col.findings or None in profiles:
        raise SpecError("; ".join(str(f) for f in col.findings) or "invalid platform", col.findings)
    return {p.name: p for p in profiles}


def bundled_platforms() -> dict[str, PlatformProfile]:
    text = (resources.files("procbench") / "data" / "platforms.yaml").read_text(encoding="utf-8")
    return parse_platforms(text)


def resolve_platform(name_or_path: str) -> PlatformProfile:
    """A bundled profile by name, or the single profile in a platform file."""
    bundled = bundled_platforms()
    if name_or_path in bundled:
        return bundled[name_or_path]
    path = Path(name_or_path)
    if path.is_file():
        profiles = parse_platforms(path.read_text(encoding="utf-8"))
        if len(profiles) != 1:
            raise SpecError(f"{path}: expected exactly one platform profile")
        return next(iter(profiles.values()))
    raise SpecError(f"unknown platform {name_or_path!r} (bundled: {', '.join(sorted(bundled))})")


# --------------------------------------------------------------------------
# schema reference

_TYPES = (BenchmarkSpec, ParameterSet, Step, FomSpec, VerificationRule, VariantDef, PlatformProfile)

_ENUMS = {
    ("Step", "kind"): STEP_KINDS,
    ("FomSpec", "kind"): FOM_KINDS,
    ("VerificationRule", "kind"): RULE_KINDS,
    ("PlatformProfile", "backend"): BACKENDS,
}


def schema_reference() -> str:
    """Markdown reference of the definition schema, generated from the dataclasses."""
    lines = ["# Benchmark definition schema", "",
             "Generated from `procbench.specmodel`. Definitions are YAML mappings.", ""]
    for cls in _TYPES:
        lines += [f"## {cls.__name__}", ""]
        doc = (cls.__doc__ or "").strip().splitlines()
        if doc and not doc[0].startswith(cls.__name__ + "("):
            lines += [doc[0], ""]
        lines += ["| field | type | default |", "|---|---|---|"]
        for f in dataclasses.fields(cls):
            if f.default is not dataclasses.MISSING:
                default = repr(f.default)
            elif f.default_factory is not dataclasses.MISSING:  # type: ignore[misc]
                default = repr(f.default_factory())  # type: ignore[misc]
            else:
                default = "required"
            ftype = str(f.type)
            enum = _ENUMS.get((cls.__name__, f.name))
            if enum:
                ftype += " (" + " / ".join(enum) + ")"
            lines.append(f"| `{f.name}` | {ftype} | {default} |")
        lines.append("")
    lines += ["Canonical variants and memory fractions: "
              + ", ".join(f"{k}={v}" for k, v in CANONICAL_VARIANTS.items()), ""]
    return "\n".join(lines)
