"""Transcript data model and the line-delimited interchange format.

Each line of a transcript document is a JSON object with ``speaker``,
``start`` (seconds since recording start) and ``text``.  Atmospheric tags
such as ``<laugh>`` are embedded in ``text``; parsing lifts them into
:class:`AtmosphericTag` records keyed by character offset in the cleaned
text, and :func:`serialize_transcript` puts them back.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

DOMAINS = ("pork", "crop", "dairy")

TAG_RE = re.compile(r"<([^<>\s][^<>]*?)>")


class TranscriptError(ValueError):
    """Base class for transcript parsing and validation problems."""


class TranscriptParseError(TranscriptError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyTranscriptError(TranscriptError):
    pass


class TimestampOrderError(TranscriptError):
    def __init__(self, turn_index: int, start: float, previous: float):
        super().__init__(
            f"turn {turn_index} starts at {start} which is before the previous turn ({previous})"
        )
        self.turn_index = turn_index


@dataclass(frozen=True)
class AtmosphericTag:
    name: str
    offset: int

    def __post_init__(self):
        if not self.name or "<" in self.name or ">" in self.name:
            raise TranscriptError(f"invalid atmospheric tag name {self.name!r}")
        if self.offset < 0:
            raise TranscriptError(f"negative tag offset {self.offset}")


@dataclass(frozen=True)
class SpeakerTurn:
    speaker_label: str
    start_time: float
    text: str
    tags: tuple[AtmosphericTag, ...] = ()

    def __post_init__(self):
        if self.start_time < 0:
            raise TranscriptError(f"negative start time {self.start_time}")
        for tag in self.tags:
            if tag.offset > len(self.text):
                raise TranscriptError(
                    f"tag <{tag.name}> offset {tag.offset} is past the end of the turn text"
                )

    def with_text(self, text: str, tags: Optional[Sequence[AtmosphericTag]] = None) -> "SpeakerTurn":
        return SpeakerTurn(self.speaker_label, self.start_time, text,
                           tuple(self.tags if tags is None else tags))

    def raw_text(self) -> str:
        """Text with tags re-inserted at their offsets."""
        pieces = []
        cursor = 0
        for tag in sorted(self.tags, key=lambda t: t.offset):
            pieces.append(self.text[cursor:tag.offset])
            pieces.append(f"<{tag.name}>")
            cursor = tag.offset
        pieces.append(self.text[cursor:])
        return "".join(pieces)


@dataclass(frozen=True)
class Transcript:
    interview_id: str
    turns: tuple[SpeakerTurn, ...]
    domain_hint: Optional[str] = None

    def __post_init__(self):
        if self.domain_hint is not None and self.domain_hint not in DOMAINS:
            raise TranscriptError(f"unknown domain hint {self.domain_hint!r}")
        previous = 0.0
        for i, turn in enumerate(self.turns):
            if turn.start_time < previous:
                raise TimestampOrderError(i, turn.start_time, previous)
            previous = turn.start_time

    def __len__(self) -> int:
        return len(self.turns)

    def replace_turns(self, turns: Iterable[SpeakerTurn]) -> "Transcript":
        return Transcript(self.interview_id, tuple(turns), self.domain_hint)

    def word_count(self) -> int:
        return sum(len(t.text.split()) for t in self.turns)


def lift_tags(raw: str) -> tuple[str, tuple[AtmosphericTag, ...]]:
    """Remove ``<name>`` markers from ``raw``, recording where they were.

    >>> lift_tags("Uh, yeah <affirmative>.")
    ('Uh, yeah .', (AtmosphericTag(name='affirmative', offset=9),))
    """
    pieces = []
    tags = []
    cursor = 0
    length = 0
    for m in TAG_RE.finditer(raw):
        chunk = raw[cursor:m.start()]
        pieces.append(chunk)
        length += len(chunk)
        tags.append(AtmosphericTag(m.group(1).strip(), length))
        cursor = m.end()
    pieces.append(raw[cursor:])
    return "".join(pieces), tuple(tags)


def parse_transcript(raw: bytes | str, interview_id: str = "interview",
                     domain_hint: Optional[str] = None) -> Transcript:
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TranscriptParseError(0, f"not valid UTF-8: {exc}") from None
    turns = []
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TranscriptParseError(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(record, dict):
            raise TranscriptParseError(line_no, "record is not an object")
        missing = {"speaker", "start", "text"} - record.keys()
        if missing:
            raise TranscriptParseError(line_no, f"missing field(s) {sorted(missing)}")
        speaker, start, text = record["speaker"], record["start"], record["text"]
        if not isinstance(speaker, str) or not isinstance(text, str):
            raise TranscriptParseError(line_no, "speaker and text must be strings")
        if isinstance(start, bool) or not isinstance(start, (int, float)):
            raise TranscriptParseError(line_no, "start must be a number of seconds")
        clean, tags = lift_tags(text)
        try:
            turns.append(SpeakerTurn(speaker, float(start), clean, tags))
        except TranscriptError as exc:
            raise TranscriptParseError(line_no, str(exc)) from None
    if not turns:
        raise EmptyTranscriptError(f"transcript {interview_id!r} has no turns")
    return Transcript(interview_id, tuple(turns), domain_hint)


def serialize_transcript(t: Transcript) -> str:
    lines = [
        json.dumps({"speaker": turn.speaker_label, "start": turn.start_time,
                    "text": turn.raw_text()}, ensure_ascii=False)
        for turn in t.turns
    ]
    return "\n".join(lines) + "\n"


def load_transcript(path: str | Path, interview_id: Optional[str] = None,
                    domain_hint: Optional[str] = None) -> Transcript:
    path = Path(path)
    return parse_transcript(path.read_bytes(), interview_id or path.stem, domain_hint)


def turn_window(t: Transcript, center: int, before: int, after: int) -> list[SpeakerTurn]:
    if not 0 <= center < len(t.turns):
        raise IndexError(f"turn index {center} out of range for {len(t.turns)} turns")
    if before < 0 or after < 0:
        raise ValueError("window sizes must be non-negative")
    lo = max(0, center - before)
    hi = min(len(t.turns), center + after + 1)
    return list(t.turns[lo:hi])


@dataclass(frozen=True)
class ManifestEntry:
    interview_id: str
    path: Path
    domain_hint: Optional[str] = None
    annotations: Optional[Path] = None


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def load_manifest(path: str | Path) -> Manifest:
    """Read a batch manifest CSV with columns
    ``interview_id,path[,domain_hint][,annotations]``.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.lstrip().startswith("#"))
        if reader.fieldnames is None or not {"interview_id", "path"} <= set(reader.fieldnames):
            raise TranscriptError(f"{path}: manifest needs interview_id and path columns")
        for row in reader:
            iid = row["interview_id"].strip()
            if iid in seen:
                raise TranscriptError(f"{path}: duplicate interview_id {iid!r}")
            seen.add(iid)
            hint = (row.get("domain_hint") or "").strip() or None
            if hint is not None and hint not in DOMAINS:
                raise TranscriptError(f"{path}: unknown domain_hint {hint!r} for {iid}")
            anno = (row.get("annotations") or "").strip()
            entries.append(ManifestEntry(
                iid, base / row["path"].strip(), hint, base / anno if anno else None))
    return Manifest(tuple(entries))
