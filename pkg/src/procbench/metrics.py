"""Figure-of-merit extraction, time-metric normalization and result verification."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

from .specmodel import FomSpec, VerificationRule

log = logging.getLogger(__name__)

# optional sign, decimal digits with optional fraction, optional exponent
NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_NUMBER_RE = re.compile(rf"^{NUMBER}$")


class MetricError(ValueError):
    pass


class NoMatchError(MetricError):
    """The FOM pattern did not match anywhere in the output."""


class ParseError(MetricError):
    """The captured text is not a number."""


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    unit: str
    kind: str = "time"


@dataclass(frozen=True)
class VerificationOutcome:
    rule: Optional[VerificationRule]
    observed: object
    passed: bool
    detail: str = ""


def parse_number(text: str) -> float:
    """Locale-independent number parsing (no thousands separators, no inf/nan)."""
    text = text.strip()
    if not _NUMBER_RE.match(text):
        raise ParseError(f"not a number: {text!r}")
    return float(text)


def extract_metrics(output: str, fom: FomSpec, name: str = "fom") -> Metric:
    """The FOM from ``output``; when the pattern matches several times the last match wins."""
    matches = list(re.finditer(fom.pattern, output))
    if not matches:
        raise NoMatchError(f"pattern {fom.pattern!r} not found in output")
    value = parse_number(matches[-1].group(1))
    return Metric(name, value, fom.unit, fom.kind)


def normalize_fom(metric: Metric, fom: FomSpec) -> float:
    """Express a FOM as seconds: time metrics pass through, rates become ``work_units / rate``."""
    if metric.kind != fom.kind:
        raise MetricError(f"metric kind {metric.kind!r} does not match fom kind {fom.kind!r}")
    if fom.kind == "time":
        return metric.value
    if fom.work_units is None:
        raise MetricError("rate fom without work_units")
    if not metric.value > 0:
        raise MetricError(f"rate must be positive, got {metric.value!r}")
    return fom.work_units / metric.value


def verify_scalar(observed: float, reference: float, rel_tolerance: float,
                  rule: Optional[VerificationRule] = None) -> VerificationOutcome:
    """Pass iff ``|observed - reference| <= rel_tolerance * |reference|``.

    A zero reference makes a relative bound meaningless, so the tolerance is
    applied as an absolute bound instead and the detail says so.
    """
    if rel_tolerance < 0:
        raise ValueError("rel_tolerance must be non-negative")
    deviation = abs(observed - reference)
    if reference == 0:
        log.warning("zero reference for %s; using absolute tolerance", rule.target if rule else "scalar")
        passed = deviation <= rel_tolerance
        detail = f"absolute fallback (reference is 0): |dev|={deviation:.3e}, tol={rel_tolerance:.3e}"
    else:
        passed = deviation <= rel_tolerance * abs(reference)
        detail = f"rel dev={deviation / abs(reference):.3e}, tol={rel_tolerance:.3e}"
    return VerificationOutcome(rule, observed, passed, detail)


def verify_presence(output: str, keys: Sequence[str],
                    rule: Optional[VerificationRule] = None) -> VerificationOutcome:
    missing = [k for k in keys if k not in output]
    detail = "all keys present" if not missing else "missing: " + ", ".join(map(repr, missing))
    return VerificationOutcome(rule, list(keys), not missing, detail)


def read_reference_file(path: Union[str, Path]) -> list[str]:
    """One value per line; blank lines and ``#`` comments are skipped."""
    values = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            values.append(line)
    return values


def _values_after_key(output: str, key: str) -> list[str]:
    pattern = re.escape(key) + r"\s*[:=]?\s*(\S.*?)\s*$"
    return [m.group(1) for m in re.finditer(pattern, output, flags=re.MULTILINE)]


def apply_rule(rule: VerificationRule, output: str, fom_value: Optional[float] = None,
               base_dir: Union[str, Path, None] = None) -> VerificationOutcome:
    """Evaluate one verification rule against a workpackage's combined output.

    ``target`` names the value to check: ``fom`` is the raw extracted FOM,
    anything else is a key whose value is whatever follows it on its line.
    With ``reference_file`` every occurrence of the key is compared, in order,
    against the file's values.
    """
    if rule.kind == "key_presence":
        return verify_presence(output, [rule.target], rule)

    if rule.reference_file is not None:
        ref_path = Path(rule.reference_file)
        if base_dir is not None and not ref_path.is_absolute():
            ref_path = Path(base_dir) / ref_path
        try:
            refs: list = read_reference_file(ref_path)
        except OSError as exc:
            return VerificationOutcome(rule, None, False, f"cannot read reference file: {exc}")
    else:
        refs = [rule.reference]

    if rule.target == "fom" and fom_value is not None:
        observed_raw: list[str] = [repr(fom_value)]
    else:
        observed_raw = _values_after_key(output, rule.target)
        if rule.kind == "scalar_tolerance":
            observed_raw = [v.split()[0] for v in observed_raw]
        if rule.reference_file is None:
            observed_raw = observed_raw[-1:]
    if len(observed_raw) != len(refs):
        return VerificationOutcome(
            rule, observed_raw, False,
            f"expected {len(refs)} value(s) for {rule.target!r}, found {len(observed_raw)}")

    if rule.kind == "exact_match":
        bad = [(o, r) for o, r in zip(observed_raw, refs) if str(o) != str(r)]
        detail = "exact match" if not bad else f"mismatch: {bad[0][0]!r} != {bad[0][1]!r}"
        return VerificationOutcome(rule, observed_raw, not bad, detail)

    try:
        observed = [parse_number(o) for o in observed_raw]
        references = [float(r) for r in refs]
    except (ParseError, ValueError) as exc:
        return VerificationOutcome(rule, observed_raw, False, str(exc))
    outcomes = [verify_scalar(o, r, rule.rel_tolerance, rule) for o, r in zip(observed, references)]
    failed = [o for o in outcomes if not o.passed]
    value = observed[0] if len(observed) == 1 else observed
    if failed:
        return VerificationOutcome(rule, value, False, failed[0].detail)
    return VerificationOutcome(rule, value, True, outcomes[-1].detail)
