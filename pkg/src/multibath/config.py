"""Flat ``section.key = value`` configuration files.

Grammar, one statement per line:

    # comment
    section.key = value

A value is a number, a comma list of numbers, ``true``/``false``, ``auto``, or a string
(optionally double-quoted). Keys without a section go to the ``run`` section.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict

KINDS = ("ou-exact", "simulate", "stationary", "lsi", "envelope", "spin-glass", "rank-one")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)?$")


class ConfigError(ValueError):
    def __init__(self, msg, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)
        self.line, self.key = line, key


def _num(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def parse_value(raw: str) -> Any:
    s = raw.strip()
    if len(s) >= 2 and s[0] == s[-1] == '"':
        return s[1:-1]
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in s and not s.startswith(("point:", "gauss:")):
        parts = [p.strip() for p in s.split(",")]
        try:
            return [_num(p) for p in parts]
        except ValueError:
            return parts
    try:
        return _num(s)
    except ValueError:
        return s


def parse_text(text: str) -> Dict[str, Dict[str, Any]]:
    out: Dict[str, Dict[str, Any]] = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'section.key = value'", line=n)
        key, val = (x.strip() for x in body.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError("malformed key", line=n, key=key)
        if val == "":
            raise ConfigError("missing value", line=n, key=key)
        sec, _, k = key.rpartition(".")
        sec = sec or "run"
        if k in out.setdefault(sec, {}):
            raise ConfigError("duplicate key", line=n, key=key)
        out[sec][k] = parse_value(val)
    return out


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ", ".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_text(sections: Dict[str, Dict[str, Any]]) -> str:
    lines = []
    for sec in sorted(sections):
        for k in sorted(sections[sec]):
            lines.append(f"{sec}.{k} = {format_value(sections[sec][k])}")
    return "\n".join(lines) + "\n"


@dataclass
class ExperimentConfig:
    kind: str
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    out_dir: str = "out"
    formats: tuple = ("csv", "json")

    def section(self, name: str) -> Dict[str, Any]:
        return self.sections.get(name, {})

    def get(self, dotted: str, default=None):
        sec, _, k = dotted.rpartition(".")
        return self.sections.get(sec or "run", {}).get(k, default)

    def set(self, dotted: str, value):
        sec, _, k = dotted.rpartition(".")
        self.sections.setdefault(sec or "run", {})[k] = value

    def copy(self):
        return ExperimentConfig(self.kind, {s: dict(v) for s, v in self.sections.items()},
                                self.out_dir, self.formats)

    def to_text(self):
        return to_text(self.sections)


REQUIRED = {
    "ou-exact": ("potential", "sim"),
    "simulate": ("potential", "sim"),
    "stationary": ("potential", "sim"),
    "lsi": ("potential", "sim"),
    "envelope": ("potential", "sim"),
    "spin-glass": ("potential",),
    "rank-one": ("potential",),
}


def load(path, kind=None) -> ExperimentConfig:
    text = Path(path).read_text()
    return from_text(text, kind)


def from_text(text: str, kind=None) -> ExperimentConfig:
    secs = parse_text(text)
    kind = kind or secs.get("run", {}).get("kind")
    if kind is None:
        raise ConfigError("experiment kind missing (give it on the command line or as run.kind)")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", key="run.kind")
    for sec in REQUIRED[kind]:
        if sec not in secs:
            raise ConfigError(f"section {sec!r} required for kind {kind!r}")
    run = secs.setdefault("run", {})
    run["kind"] = kind
    out = str(secs.get("out", {}).get("dir", "out"))
    fmts = secs.get("out", {}).get("formats", ["csv", "json"])
    if isinstance(fmts, str):
        fmts = [fmts]
    return ExperimentConfig(kind, secs, out, tuple(fmts))
