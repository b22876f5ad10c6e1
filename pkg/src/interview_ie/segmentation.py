"""Domain segmentation by interviewer section markers, and keyword-driven
topic blocks used by the LLM backend."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .transcript import Transcript

DOMAIN_WORDS = {
    "pork": "pork", "pig": "pork", "pigs": "pork", "swine": "pork", "hogs": "pork",
    "crop": "crop", "crops": "crop", "cropping": "crop",
    "dairy": "dairy", "cows": "dairy", "milk": "dairy",
}

DEFAULT_MARKERS = ("section * is about {domain}",)
PREAMBLE = "preamble"


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSegment:
    domain: str
    start: int
    end: int
    marker_turn: Optional[int] = None

    @property
    def turn_range(self) -> tuple[int, int]:
        return self.start, self.end


@dataclass(frozen=True)
class TopicBlock:
    topic_label: str
    start: int
    end: int
    trigger_keyword: Optional[str] = None

    @property
    def turn_range(self) -> tuple[int, int]:
        return self.start, self.end


@dataclass(frozen=True)
class KeywordMap:
    entries: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        seen = set()
        for keyword, label in self.entries:
            key = " ".join(keyword.lower().split())
            if not key:
                raise SegmentationError("empty keyword in keyword map")
            if not label.strip():
                raise SegmentationError(f"keyword {keyword!r} has an empty topic label")
            if key in seen:
                raise SegmentationError(f"duplicate keyword {keyword!r}")
            seen.add(key)

    def __len__(self):
        return len(self.entries)

    def labels(self) -> set[str]:
        return {label for _, label in self.entries}

    def with_entry(self, keyword: str, label: str) -> "KeywordMap":
        return KeywordMap(self.entries + ((keyword, label),))


def compile_marker(template: str) -> re.Pattern:
    """``"section * is about {domain}"`` -> regex; ``*`` is one word."""
    if template.count("{domain}") != 1:
        raise SegmentationError(f"marker template {template!r} needs exactly one {{domain}} slot")
    parts = []
    for word in template.split():
        if word == "{domain}":
            parts.append("(?P<domain>" + "|".join(sorted(DOMAIN_WORDS, key=len, reverse=True)) + ")")
        elif word == "*":
            parts.append(r"[\w-]+")
        else:
            parts.append(re.escape(word))
    return re.compile(r"\b" + r"\s+".join(parts) + r"\b", re.IGNORECASE)


def segment_by_markers(t: Transcript, marker_patterns: Sequence[str] = DEFAULT_MARKERS
                       ) -> list[DomainSegment]:
    markers = [compile_marker(p) for p in marker_patterns]
    fallback = t.domain_hint or "unknown"
    starts: list[tuple[int, str]] = []
    for i, turn in enumerate(t.turns):
        for rx in markers:
            m = rx.search(turn.text)
            if m:
                starts.append((i, DOMAIN_WORDS[m.group("domain").lower()]))
                break
    if not t.turns:
        return []
    segments = []
    if not starts or starts[0][0] > 0:
        segments.append(DomainSegment(fallback, 0, starts[0][0] if starts else len(t.turns)))
    for k, (i, domain) in enumerate(starts):
        end = starts[k + 1][0] if k + 1 < len(starts) else len(t.turns)
        segments.append(DomainSegment(domain, i, end, i))
    return segments


def _keyword_regex(km: KeywordMap) -> Optional[re.Pattern]:
    if not km.entries:
        return None
    alts = sorted({" ".join(k.lower().split()) for k, _ in km.entries}, key=lambda k: (-len(k), k))
    body = "|".join(r"\s+".join(re.escape(w) for w in k.split()) for k in alts)
    return re.compile(r"(?<!\w)(?:" + body + r")(?!\w)", re.IGNORECASE)


def fine_segment(seg: DomainSegment, t: Transcript, km: KeywordMap) -> list[TopicBlock]:
    """Split a segment into topic blocks at turns that mention a keyword.

    The leftmost keyword in a turn decides its topic; a trigger for the topic
    already in progress does not open a new block.  Turns before the first
    trigger form a ``preamble`` block.
    """
    if not 0 <= seg.start < seg.end <= len(t.turns):
        raise SegmentationError(f"segment {seg.turn_range} is not valid for {len(t.turns)} turns")
    rx = _keyword_regex(km)
    topic_of = {" ".join(k.lower().split()): label for k, label in km.entries}
    blocks: list[TopicBlock] = []
    current = None
    for i in range(seg.start, seg.end):
        m = rx.search(t.turns[i].text) if rx is not None else None
        if m is not None:
            keyword = " ".join(m.group().lower().split())
            label = topic_of[keyword]
            if label != current:
                blocks.append(TopicBlock(label, i, i + 1, m.group()))
                current = label
                continue
        if not blocks:
            blocks.append(TopicBlock(PREAMBLE, i, i + 1))
            current = PREAMBLE
        else:
            last = blocks[-1]
            blocks[-1] = TopicBlock(last.topic_label, last.start, i + 1, last.trigger_keyword)
    return blocks


def block_text(t: Transcript, block: TopicBlock) -> str:
    """The text handed to the model for one block: ``speaker: text`` per line."""
    return "\n".join(f"{turn.speaker_label}: {turn.text}" for turn in t.turns[block.start:block.end])


def load_keyword_map(path: str | Path) -> KeywordMap:
    entries = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = csv.reader(line for line in fh if line.strip() and not line.lstrip().startswith("#"))
        for row in rows:
            if len(row) != 2:
                raise SegmentationError(f"{path}: expected 'keyword, topic_label', got {row}")
            entries.append((row[0].strip(), row[1].strip()))
    return KeywordMap(tuple(entries))


def load_marker_patterns(path: str | Path) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    patterns = tuple(l.strip() for l in lines if l.strip() and not l.lstrip().startswith("#"))
    for p in patterns:
        compile_marker(p)
    return patterns


def segments_cover(segments: Iterable, start: int, end: int) -> bool:
    """True when ``segments`` tile ``[start, end)`` in order without gaps."""
    cursor = start
    for s in segments:
        if s.start != cursor or s.end <= s.start:
            return False
        cursor = s.end
    return cursor == end
