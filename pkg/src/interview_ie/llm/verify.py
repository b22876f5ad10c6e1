"""Verification of raw model output: JSON parsing, per-field type coercion
and the word-overlap hallucination filter."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Any, Optional

from ..segmentation import TopicBlock
from .schema import ExtractionSchema, conforms

log = logging.getLogger(__name__)

_INT_RE = re.compile(r"^[-+]?(\d{1,3}(,\d{3})+|\d+)$")
_NUM_RE = re.compile(r"^[-+]?(\d{1,3}(,\d{3})+|\d+)?(\.\d+)?$")
_TRUE = {"true", "yes"}
_FALSE = {"false", "no"}
_MISSING = object()


@dataclass(frozen=True)
class ValidatedRecord:
    schema_name: str
    field_name: str
    value: Any  # int | float | bool | str | tuple[str, ...]
    coerced: bool
    source_block: Optional[TopicBlock] = None
    # position of the object in the model's output array; fields of one
    # object share it
    record_index: int = 0


def words(text: str) -> set[str]:
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def has_overlap(value: str, block_text: str) -> bool:
    return bool(words(value) & words(block_text))


def _parse_json(raw: str) -> Optional[list]:
    text = raw.strip()
    fenced = re.match(r"^```(?:json)?\s*(.*?)\s*```$", text, flags=re.S)
    if fenced:
        text = fenced.group(1)
    candidates = [text]
    lo, hi = text.find("["), text.rfind("]")
    if 0 <= lo < hi:
        candidates.append(text[lo:hi + 1])
    for c in candidates:
        try:
            data = json.loads(c)
        except json.JSONDecodeError:
            continue
        if isinstance(data, dict):
            return [data]
        if isinstance(data, list):
            return data
    return None


def coerce(value: Any, field_type: str) -> tuple[Any, bool]:
    """``(typed value, coerced?)`` or ``(_MISSING, False)`` when not coercible."""
    if conforms(value, field_type):
        return (tuple(value) if field_type == "string_list" else value), False
    if field_type == "boolean":
        if isinstance(value, str) and value.strip().lower() in _TRUE | _FALSE:
            return value.strip().lower() in _TRUE, True
        return _MISSING, False
    if isinstance(value, bool):
        return _MISSING, False
    if field_type == "integer":
        if isinstance(value, float) and value.is_integer():
            return int(value), True
        if isinstance(value, str) and _INT_RE.match(value.strip()):
            return int(value.strip().replace(",", "")), True
        if isinstance(value, str) and _NUM_RE.match(value.strip()) and value.strip() not in ("", "."):
            f = float(value.strip().replace(",", ""))
            if f.is_integer():
                return int(f), True
        return _MISSING, False
    if field_type == "number":
        s = value.strip() if isinstance(value, str) else None
        if s and _NUM_RE.match(s) and any(c.isdigit() for c in s):
            f = float(s.replace(",", ""))
            return (int(f) if f.is_integer() and "." not in s else f), True
        return _MISSING, False
    if field_type == "string":
        if isinstance(value, (int, float)):
            return str(value), True
        return _MISSING, False
    if field_type == "string_list":
        if isinstance(value, str):
            return (value,), True
        if isinstance(value, (list, tuple)):
            items = [str(v) for v in value if isinstance(v, (str, int, float)) and not isinstance(v, bool)]
            return tuple(items), True
        return _MISSING, False
    return _MISSING, False


def verify_output(raw: str, s: ExtractionSchema, block_text: str,
                  block: Optional[TopicBlock] = None) -> list[ValidatedRecord]:
    data = _parse_json(raw or "")
    if data is None:
        log.warning("unparseable output for %s; treating as empty", s.name)
        return []
    out = []
    for idx, rec in enumerate(data):
        if not isinstance(rec, dict):
            log.info("%s: skipping non-object item %r", s.name, rec)
            continue
        for name, value in rec.items():
            spec = s.field(name)
            if spec is None:
                log.info("%s: dropping unknown field %r", s.name, name)
                continue
            if value is None:
                continue
            typed, coerced = coerce(value, spec.field_type)
            if typed is _MISSING:
                log.info("%s.%s: value %r is not %s; discarded", s.name, name, value, spec.field_type)
                continue
            # Only strings are checked against the block; numbers and
            # booleans pass unchecked.
            if spec.field_type == "string":
                if not has_overlap(typed, block_text):
                    log.info("%s.%s: %r shares no word with the block; discarded", s.name, name, typed)
                    continue
            elif spec.field_type == "string_list":
                kept = tuple(v for v in typed if has_overlap(v, block_text))
                if len(kept) < len(typed):
                    log.info("%s.%s: dropped %d list items with no block overlap",
                             s.name, name, len(typed) - len(kept))
                if not kept:
                    continue
                typed = kept
            out.append(ValidatedRecord(s.name, name, typed, coerced, block, idx))
    return out
