"""Shared helpers: canonical JSON output and UTC timestamp handling."""

from __future__ import annotations

import json
from datetime import datetime, timezone
from typing import Any


def canonical_dumps(obj: Any) -> str:
    """Serialize with sorted keys and fixed indentation.

    Equal values always produce identical bytes, so file-level equality
    can stand in for structural equality in determinism checks.
    """
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def compact_dumps(obj: Any) -> str:
    """One-line JSON with no whitespace; key order is the dict's insertion order."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def format_ts(dt: datetime) -> str:
    """Render a timezone-aware datetime as ISO-8601 UTC with a Z suffix."""
    if dt.tzinfo is None:
        raise ValueError("naive datetime; timestamps must be timezone-aware")
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_ts(text: str) -> datetime:
    """Parse an ISO-8601 timestamp, accepting a Z suffix."""
    return datetime.fromisoformat(text.replace("Z", "+00:00")).astimezone(timezone.utc)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)
