"""Minimal reader/writer for the TOML-style text format used by case and config files.

Supports the restricted subset these files need: top-level ``key = value``
pairs, ``[section]`` tables, ``[[section]]`` arrays of tables, and scalar /
flat-array values (ints, floats, booleans, quoted strings). Parse failures
report the offending line number.
"""

from __future__ import annotations

import re

_INT_RE = re.compile(r"^[+-]?\d+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class FormatError(ValueError):
    """Malformed structured-text input."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _strip_comment(raw: str) -> str:
    out = []
    in_string = False
    for ch in raw:
        if ch == '"':
            in_string = not in_string
        elif ch == "#" and not in_string:
            break
        out.append(ch)
    return "".join(out)


def _parse_scalar(token: str, lineno: int):
    token = token.strip()
    if not token:
        raise FormatError("empty value", lineno)
    if token.startswith('"'):
        if len(token) < 2 or not token.endswith('"'):
            raise FormatError("unterminated string", lineno)
        return token[1:-1]
    if token == "true":
        return True
    if token == "false":
        return False
    if _INT_RE.match(token):
        return int(token)
    if _FLOAT_RE.match(token):
        return float(token)
    raise FormatError(f"cannot parse value {token!r}", lineno)


def _parse_value(text: str, lineno: int):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise FormatError("unterminated array", lineno)
        body = text[1:-1].strip()
        if "[" in body:
            raise FormatError("nested arrays are not supported", lineno)
        if not body:
            return []
        return [_parse_scalar(part, lineno) for part in body.split(",")]
    return _parse_scalar(text, lineno)


def loads(text: str) -> dict:
    """Parse structured text into nested dicts/lists."""
    root: dict = {}
    target = root
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("[["):
            if not line.endswith("]]"):
                raise FormatError("malformed table header", lineno)
            name = line[2:-2].strip()
            if not name:
                raise FormatError("empty table name", lineno)
            entries = root.setdefault(name, [])
            if not isinstance(entries, list):
                raise FormatError(f"{name!r} already used as a non-table key", lineno)
            entry: dict = {}
            entries.append(entry)
            target = entry
        elif line.startswith("["):
            if not line.endswith("]"):
                raise FormatError("malformed section header", lineno)
            name = line[1:-1].strip()
            if not name:
                raise FormatError("empty section name", lineno)
            if name in root and not isinstance(root[name], dict):
                raise FormatError(f"{name!r} already used as a non-section key", lineno)
            target = root.setdefault(name, {})
        else:
            key, eq, rest = line.partition("=")
            if not eq:
                raise FormatError("expected 'key = value'", lineno)
            key = key.strip()
            if not key:
                raise FormatError("empty key", lineno)
            target[key] = _parse_value(rest, lineno)
    return root


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_scalar(v) for v in value) + "]"
    return _format_scalar(value)


def dumps(data: dict) -> str:
    """Serialize nested dicts/lists back to structured text.

    Scalars come first, then ``[section]`` dicts, then ``[[section]]``
    lists of dicts, preserving insertion order within each group.
    """
    lines: list[str] = []
    sections: list[tuple[str, dict]] = []
    tables: list[tuple[str, list]] = []
    for key, value in data.items():
        if isinstance(value, dict):
            sections.append((key, value))
        elif isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            tables.append((key, value))
        else:
            lines.append(f"{key} = {_format_value(value)}")
    for name, section in sections:
        lines.append("")
        lines.append(f"[{name}]")
        for key, value in section.items():
            lines.append(f"{key} = {_format_value(value)}")
    for name, entries in tables:
        for entry in entries:
            lines.append("")
            lines.append(f"[[{name}]]")
            for key, value in entry.items():
                lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"
