"""Flat ``key = value`` configuration files.

Keys are namespaced by a module prefix (``filter.sigma_x = 0.15``).  ``#``
starts a comment.  Values are parsed lazily against the type of the field
they override, so the file format itself stays untyped.
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

from .errors import InputParseError


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InputParseError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputParseError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _coerce(value: str, like, key: str):
    try:
        if isinstance(like, bool):
            v = value.lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(like, int):
            return int(value)
        if isinstance(like, float):
            return float(value)
        if isinstance(like, tuple):
            parts = value.replace(",", " ").split()
            if like and len(parts) != len(like):
                raise ValueError(f"expected {len(like)} numbers")
            return tuple(float(p) for p in parts)
        if like is None:
            return None if value.lower() in ("", "none") else value
        return value
    except ValueError as exc:
        raise InputParseError(f"config key {key!r}: cannot read {value!r} ({exc})") from None


def apply_overrides(obj, cfg: dict[str, str], prefix: str, degrees: tuple[str, ...] = ()):
    """Copy of dataclass ``obj`` with ``prefix.field`` keys applied.

    Fields named in ``degrees`` are read in degrees and stored in radians.
    Unknown keys under the prefix are an error.
    """
    names = {f.name for f in dataclasses.fields(obj)}
    changes = {}
    for key, value in cfg.items():
        head, _, name = key.rpartition(".")
        if head != prefix:
            continue
        if name not in names:
            raise InputParseError(f"unknown config key {key!r}")
        v = _coerce(value, getattr(obj, name), key)
        if name in degrees:
            v = tuple(math.radians(x) for x in v) if isinstance(v, tuple) else math.radians(v)
        changes[name] = v
    return dataclasses.replace(obj, **changes)
