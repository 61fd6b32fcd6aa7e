"""``${name}`` placeholder scanning and single-pass substitution."""

from __future__ import annotations

import re
from typing import Mapping

PLACEHOLDER = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")
_OPENER = re.compile(r"\$\{")


class TemplateError(ValueError):
    """Raised for malformed placeholders or unknown placeholder names."""


def _scan(text: str) -> list[re.Match]:
    matches = list(PLACEHOLDER.finditer(text))
    covered = {m.start() for m in matches}
    for opener in _OPENER.finditer(text):
        if opener.start() not in covered:
            snippet = text[opener.start():opener.start() + 20]
            raise TemplateError(f"malformed placeholder at offset {opener.start()}: {snippet!r}")
    return matches


def placeholders(text: str) -> list[str]:
    """Names referenced by ``text`` in order of first appearance."""
    seen: dict[str, None] = {}
    for m in _scan(text):
        seen.setdefault(m.group(1), None)
    return list(seen)


def render_template(text: str, assignment: Mapping[str, object]) -> str:
    """Replace every ``${name}`` in ``text`` with ``str(assignment[name])``.

    Substitution is a single pass over the original text: substituted values
    are never scanned again, so a value containing ``${`` is inserted as-is.
    """
    matches = _scan(text)
    missing = [m.group(1) for m in matches if m.group(1) not in assignment]
    if missing:
        raise TemplateError(f"unknown placeholder ${{{missing[0]}}}")
    out = []
    pos = 0
    for m in matches:
        out.append(text[pos:m.start()])
        out.append(_format_value(assignment[m.group(1)]))
        pos = m.end()
    out.append(text[pos:])
    return "".join(out)


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)
