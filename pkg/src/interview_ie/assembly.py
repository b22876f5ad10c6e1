"""Dialogue management: link value fragments to the identifiers they answer.

Values look backwards for the nearest identifier whose category accepts the
value's unit or category; the link is kept only if it falls inside that
identifier's context window.  Values left over can still be assigned when
their category points at exactly one identifier category.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .rules.extract import Fragment
from .transcript import Transcript

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 3


class AssemblyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AssemblyConfig:
    default_window: int = DEFAULT_WINDOW
    per_identifier_window: Mapping[str, int] = field(default_factory=dict)
    unitless_allowlist: frozenset[str] = frozenset()
    compatibility: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise AssemblyConfigError("; ".join(problems))

    def __hash__(self):
        return hash((self.default_window, tuple(sorted(self.per_identifier_window.items()))))

    def problems(self, categories: Optional[set[str]] = None) -> list[str]:
        out = []
        if self.default_window < 1:
            out.append("default_window must be at least 1")
        for cat, w in self.per_identifier_window.items():
            if w < 1:
                out.append(f"window for {cat!r} must be at least 1")
        if categories is not None:
            for cat in sorted(self.unitless_allowlist - categories):
                out.append(f"allowlisted identifier category {cat!r} is not an ontology category")
        return out

    def window(self, identifier_category: Optional[str]) -> int:
        return self.per_identifier_window.get(identifier_category, self.default_window)

    def compatible(self, identifier: Fragment, value: Fragment) -> bool:
        cat = identifier.category
        if cat is None:
            return False
        key = value.compat_key
        if key is None:
            return value.kind == "quantitative_value" and cat in self.unitless_allowlist
        return key in self.compatibility.get(cat, frozenset())

    def specificity(self, identifier_category: Optional[str]) -> int:
        return len(self.compatibility.get(identifier_category, ()))

    def with_window(self, category: str, window: int) -> "AssemblyConfig":
        return AssemblyConfig(self.default_window, {**self.per_identifier_window, category: window},
                              self.unitless_allowlist, self.compatibility)


@dataclass(frozen=True)
class IdentifierValuePair:
    identifier: Fragment
    value: Fragment
    link_kind: str  # "windowed" | "fallback"
    distance: int

    def to_record(self) -> dict:
        return {"identifier": self.identifier.to_record(), "value": self.value.to_record(),
                "link_kind": self.link_kind, "distance": self.distance}


def _candidate_key(identifier: Fragment, value: Fragment, cfg: AssemblyConfig):
    """Smaller is better: nearest turn, then more specific category, then the
    identifier closest before the value."""
    distance = value.turn_index - identifier.turn_index
    _, start, end = identifier.span
    same_turn_after = distance == 0 and start > value.span[1]
    return (distance, cfg.specificity(identifier.category), same_turn_after,
            -end, identifier.span, identifier.label)


def assemble(fragments: Sequence[Fragment], t: Optional[Transcript], cfg: AssemblyConfig
             ) -> tuple[list[IdentifierValuePair], list[Fragment]]:
    """Windowed linking.  Returns ``(pairs, residual_values)``."""
    identifiers = [f for f in fragments if f.kind == "identifier" and f.category is not None]
    pairs = []
    residual = []
    for value in (f for f in fragments if f.is_value):
        best = None
        best_key = None
        for ident in identifiers:
            if ident.turn_index > value.turn_index or ident.span == value.span:
                continue
            if not cfg.compatible(ident, value):
                continue
            key = _candidate_key(ident, value, cfg)
            if best_key is None or key < best_key:
                best, best_key = ident, key
        if best is not None:
            distance = value.turn_index - best.turn_index
            if distance <= cfg.window(best.category):
                pairs.append(IdentifierValuePair(best, value, "windowed", distance))
                continue
        residual.append(value)
    return pairs, residual


def fallback_assign(residual_values: Sequence[Fragment], cfg: AssemblyConfig) -> list[IdentifierValuePair]:
    """Assign values whose unit/category belongs to exactly one identifier category."""
    owners: dict[str, list[str]] = {}
    for ident_cat, keys in cfg.compatibility.items():
        for k in keys:
            owners.setdefault(k, []).append(ident_cat)
    pairs = []
    for value in residual_values:
        key = value.compat_key
        if key is None:
            continue
        cands = sorted(set(owners.get(key, ())))
        if len(cands) != 1:
            continue
        cat = cands[0]
        ident = Fragment("Synthesized", "identifier", cat.replace("_", " "), value.span,
                         category=cat, source="fallback")
        pairs.append(IdentifierValuePair(ident, value, "fallback", 0))
    return pairs


def assemble_all(fragments: Sequence[Fragment], t: Optional[Transcript], cfg: AssemblyConfig
                 ) -> list[IdentifierValuePair]:
    pairs, residual = assemble(fragments, t, cfg)
    return pairs + fallback_assign(residual, cfg)


def load_assembly_config(path: str | Path) -> AssemblyConfig:
    """Parse an assembly config file::

        default_window = 3
        window employees = 2
        unitless_allowlist = employees, total_finishing_pigs
        compatible barn_capacity = barn_type, head
    """
    default = DEFAULT_WINDOW
    windows: dict[str, int] = {}
    allow: set[str] = set()
    compat: dict[str, set[str]] = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise AssemblyConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        items = [v.strip() for v in re.split(r"[,;]", value) if v.strip()]
        words = key.split()
        try:
            if key == "default_window":
                default = int(value)
            elif words[0] == "window" and len(words) == 2:
                windows[words[1]] = int(value)
            elif key == "unitless_allowlist":
                allow.update(items)
            elif words[0] == "compatible" and len(words) == 2:
                compat.setdefault(words[1], set()).update(items)
            else:
                raise AssemblyConfigError(f"{path}:{n}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, AssemblyConfigError):
                raise
            raise AssemblyConfigError(f"{path}:{n}: {exc}") from None
    return AssemblyConfig(default, windows, frozenset(allow),
                          {k: frozenset(v) for k, v in compat.items()})
