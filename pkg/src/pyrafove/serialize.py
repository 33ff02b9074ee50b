"""Canonical serialization helpers.

Every file the package writes must be byte-identical across runs with the
same inputs, so all JSON goes through one canonical encoder and all floats
are formatted with ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

import hashlib
import json
from typing import Iterable, Sequence


def canonical_json(obj) -> str:
    """Serialize to JSON with sorted keys and no whitespace padding."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def pretty_json(obj) -> str:
    """Human-facing JSON, still deterministic (sorted keys, 2-space indent)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_digest(obj) -> str:
    """Stable 16-hex-digit digest of a JSON-serializable config tree."""
    data = canonical_json(obj).encode("utf-8")
    return hashlib.sha256(data).hexdigest()[:16]


def fmt_cell(value) -> str:
    """Format one CSV cell. Floats use repr so fits recompute exactly."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV file with LF newlines regardless of platform."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt_cell(v) for v in row) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(pretty_json(obj))
