"""Transcript correction applied before either extraction backend.

Four passes, always in this order: domain-term remapping, spoken-number
normalization, hyphenation of multi-word terms, and filler removal.  Every
pass returns a new transcript plus a :class:`CorrectionLog`; turn count,
speakers and timestamps are never touched, and atmospheric-tag offsets are
shifted to follow the edits.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .transcript import DOMAINS, AtmosphericTag, SpeakerTurn, Transcript

log = logging.getLogger(__name__)

RULE_KINDS = ("remap", "number", "hyphen", "filler")

# Hyphen and apostrophe count as word-internal for whole-word matching.
_WB_LEFT = r"(?<![\w'-])"
_WB_RIGHT = r"(?![\w'-])"

NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6, "seven": 7,
    "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13,
    "fourteen": 14, "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19, "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Correction:
    rule_kind: str
    original_span: str
    replacement: str
    turn_index: int
    # Character offset in the turn text as it stood when this correction was
    # applied; corrections are replayed strictly in log order.
    offset: int
    skipped: bool = False


@dataclass(frozen=True)
class CorrectionLog:
    entries: tuple[Correction, ...] = ()

    def __add__(self, other: "CorrectionLog") -> "CorrectionLog":
        return CorrectionLog(self.entries + other.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def applied(self) -> list[Correction]:
        return [e for e in self.entries if not e.skipped]

    def for_turn(self, turn_index: int) -> list[Correction]:
        return [e for e in self.entries if e.turn_index == turn_index]

    def replay(self, original: Transcript) -> Transcript:
        """Re-apply the logged replacements to ``original``."""
        texts = [turn.text for turn in original.turns]
        for e in self.applied():
            text = texts[e.turn_index]
            end = e.offset + len(e.original_span)
            if text[e.offset:end] != e.original_span:
                raise ValueError(f"log entry does not match turn {e.turn_index} at {e.offset}: {e!r}")
            texts[e.turn_index] = text[:e.offset] + e.replacement + text[end:]
        return original.replace_turns(
            turn.with_text(text) for turn, text in zip(original.turns, texts))

    def to_records(self) -> list[dict]:
        return [
            {"turn": e.turn_index, "kind": e.rule_kind, "offset": e.offset,
             "original": e.original_span, "replacement": e.replacement, "skipped": e.skipped}
            for e in self.entries
        ]


# -- edit machinery ---------------------------------------------------------

Edit = tuple[int, int, str]


def _shift_tags(tags: Sequence[AtmosphericTag], edits: Sequence[Edit]) -> tuple[AtmosphericTag, ...]:
    shifted = []
    for tag in tags:
        o = tag.offset
        delta = 0
        new = None
        for start, end, repl in edits:
            if o <= start:
                break
            if o < end:
                new = start + delta + min(o - start, len(repl))
                break
            delta += len(repl) - (end - start)
        shifted.append(AtmosphericTag(tag.name, o + delta if new is None else new))
    return tuple(shifted)


def _apply_edits(turn: SpeakerTurn, turn_index: int, edits: Sequence[Edit], kind: str
                 ) -> tuple[SpeakerTurn, list[Correction]]:
    """Apply sorted, non-overlapping ``(start, end, replacement)`` edits."""
    if not edits:
        return turn, []
    text = turn.text
    pieces = []
    log_entries = []
    cursor = 0
    delta = 0
    for start, end, repl in edits:
        if start < cursor:
            raise AssertionError("overlapping edits")
        pieces.append(text[cursor:start])
        pieces.append(repl)
        log_entries.append(Correction(kind, text[start:end], repl, turn_index, start + delta))
        delta += len(repl) - (end - start)
        cursor = end
    pieces.append(text[cursor:])
    return turn.with_text("".join(pieces), _shift_tags(turn.tags, edits)), log_entries


def _map_turns(t: Transcript, kind: str, edits_for) -> tuple[Transcript, CorrectionLog]:
    turns = []
    entries: list[Correction] = []
    for i, turn in enumerate(t.turns):
        edits, skipped = edits_for(turn.text)
        new_turn, logged = _apply_edits(turn, i, edits, kind)
        entries.extend(Correction(kind, span, span, i, off, skipped=True) for off, span in skipped)
        entries.extend(logged)
        turns.append(new_turn)
    return t.replace_turns(turns), CorrectionLog(tuple(entries))


def _phrase_regex(phrases: Iterable[str]) -> Optional[re.Pattern]:
    """Alternation of word sequences, longest first, with whole-word boundaries."""
    ordered = sorted(set(phrases), key=lambda p: (-len(p.split()), -len(p), p))
    if not ordered:
        return None
    alts = [r"\s+".join(re.escape(w) for w in p.split()) for p in ordered]
    return re.compile(_WB_LEFT + "(?:" + "|".join(alts) + ")" + _WB_RIGHT, re.IGNORECASE)


def _norm_phrase(p: str) -> str:
    return " ".join(p.lower().split())


# -- remap ------------------------------------------------------------------

@dataclass(frozen=True)
class RemapEntry:
    pattern: str
    replacement: str
    domain_scope: Optional[str] = None


@dataclass(frozen=True)
class RemapTable:
    entries: tuple[RemapEntry, ...] = ()

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        seen = set()
        for e in self.entries:
            key = (_norm_phrase(e.pattern), e.domain_scope)
            if not key[0]:
                out.append("empty remap pattern")
            if key in seen:
                out.append(f"duplicate remap pattern {e.pattern!r} for scope {e.domain_scope}")
            seen.add(key)
            if "\n" in e.replacement or "\r" in e.replacement:
                out.append(f"remap replacement for {e.pattern!r} contains a newline")
            if e.domain_scope is not None and e.domain_scope not in DOMAINS:
                out.append(f"unknown remap scope {e.domain_scope!r}")
        for scope in {e.domain_scope for e in self.entries}:
            rx = _phrase_regex(e.pattern for e in self.entries
                               if e.domain_scope in (None, scope) and e.pattern.strip())
            for e in self.entries:
                if e.domain_scope in (None, scope) and rx is not None and rx.search(e.replacement):
                    out.append(f"remap replacement {e.replacement!r} would itself be remapped")
        return sorted(set(out), key=out.index)

    def active(self, domain: Optional[str]) -> dict[str, str]:
        table = {_norm_phrase(e.pattern): e.replacement
                 for e in self.entries if e.domain_scope is None}
        if domain is not None:
            table.update({_norm_phrase(e.pattern): e.replacement
                          for e in self.entries if e.domain_scope == domain})
        return table


def apply_term_remap(t: Transcript, table: RemapTable) -> tuple[Transcript, CorrectionLog]:
    active = table.active(t.domain_hint)
    rx = _phrase_regex(active)

    def edits_for(text):
        if rx is None:
            return [], []
        return [(m.start(), m.end(), active[_norm_phrase(m.group())]) for m in rx.finditer(text)], []

    return _map_turns(t, "remap", edits_for)


# -- numbers ----------------------------------------------------------------

_TOKEN_RE = re.compile(r"\S+")
_LEAD_PUNCT = "([{\"'"
_TRAIL_PUNCT = ".,;:?!)]}\"'"
_HUNDRED_RE = re.compile(
    r"(?<![\w.,'-])(\d{1,2}|" + "|".join(NUMBER_WORDS) + r")\s+hundred" + _WB_RIGHT,
    re.IGNORECASE)


@dataclass(frozen=True)
class _Tok:
    start: int
    end: int
    core: str
    core_start: int
    core_end: int
    bare: bool  # no punctuation attached


def _tokens(text: str) -> list[_Tok]:
    toks = []
    for m in _TOKEN_RE.finditer(text):
        raw = m.group()
        lead = len(raw) - len(raw.lstrip(_LEAD_PUNCT))
        core = raw[lead:].rstrip(_TRAIL_PUNCT)
        cs = m.start() + lead
        toks.append(_Tok(m.start(), m.end(), core, cs, cs + len(core), core == raw))
    return toks


def _is_numeral(core: str) -> bool:
    return core.isdigit() or core.lower() in NUMBER_WORDS


def _digits_of(core: str) -> str:
    return core if core.isdigit() else str(NUMBER_WORDS[core.lower()])


def _rule_hundreds(text: str):
    edits = []
    for m in _HUNDRED_RE.finditer(text):
        n = m.group(1)
        value = int(n) if n.isdigit() else NUMBER_WORDS[n.lower()]
        edits.append((m.start(), m.end(), str(value * 100)))
    return edits, []


def _grade_triples(toks: list[_Tok], grades: frozenset) -> list[int]:
    starts = []
    for i in range(len(toks) - 2):
        a, b, c = toks[i:i + 3]
        if a.bare and b.bare and a.core.isdigit() and b.core.isdigit() and c.core.isdigit() \
                and c.core_start == c.start and f"{a.core}-{b.core}-{c.core}" in grades:
            starts.append(i)
    return starts


def _rule_merge(text: str, grades: frozenset):
    toks = _tokens(text)
    protected = set()
    for i in _grade_triples(toks, grades):
        protected.update((i, i + 1, i + 2))
    edits, skipped = [], []
    i = 0
    while i < len(toks) - 1:
        a, b = toks[i], toks[i + 1]
        first_ok = a.bare and _is_numeral(a.core) and len(_digits_of(a.core)) <= 2
        if not first_ok or i in protected or i + 1 in protected or b.core_start != b.start:
            i += 1
            continue
        second_pair = len(b.core) == 2 and b.core.isdigit()
        second_compound = re.fullmatch(r"\d{2}-\w[\w-]*", b.core) is not None
        if not (second_pair or second_compound):
            i += 1
            continue
        prev_numeral = i > 0 and toks[i - 1].bare and _is_numeral(toks[i - 1].core)
        nxt = toks[i + 2] if i + 2 < len(toks) else None
        next_blocks = b.bare and nxt is not None and (
            _is_numeral(nxt.core) or "-" in nxt.core)
        if second_compound or prev_numeral or next_blocks:
            skipped.append((a.start, text[a.start:b.core_end]))
            i += 1
            continue
        edits.append((a.start, b.core_end, _digits_of(a.core) + b.core))
        i += 2
    return edits, skipped


def _rule_grades(text: str, grades: frozenset):
    toks = _tokens(text)
    edits = []
    last_end = -1
    for i in _grade_triples(toks, grades):
        a, b, c = toks[i:i + 3]
        if a.start < last_end:
            continue
        edits.append((a.start, c.core_end, f"{a.core}-{b.core}-{c.core}"))
        last_end = c.core_end
    return edits, []


def normalize_numbers(t: Transcript, grades: Iterable[str] = ()) -> tuple[Transcript, CorrectionLog]:
    """Join spoken numbers that ASR split apart.

    ``"12 hundred"`` becomes ``"1200"``, an isolated pair like ``"2 40"``
    becomes ``"240"``, and a space-separated triple that spells a listed
    fertilizer grade becomes ``"18-46-0"``.  Pair merges are skipped (and
    logged as skipped) when the pair touches another numeral or a hyphenated
    token, e.g. ``"two 20-head barns"``.
    """
    grade_set = frozenset(g.strip() for g in grades if g.strip())
    t, log1 = _map_turns(t, "number", _rule_hundreds)
    t, log2 = _map_turns(t, "number", lambda s: _rule_merge(s, grade_set))
    t, log3 = _map_turns(t, "number", lambda s: _rule_grades(s, grade_set))
    return t, _interleave_by_turn(log1, log2, log3)


def _interleave_by_turn(*logs: CorrectionLog) -> CorrectionLog:
    # Replay is per turn, so keeping each pass's order within a turn is enough;
    # grouping by turn keeps the log readable.
    entries = [e for lg in logs for e in lg.entries]
    order = {id(e): k for k, e in enumerate(entries)}
    return CorrectionLog(tuple(sorted(entries, key=lambda e: (e.turn_index, order[id(e)]))))


# -- hyphenation / fillers --------------------------------------------------

def hyphenate_terms(t: Transcript, phrase_list: Iterable[str]) -> tuple[Transcript, CorrectionLog]:
    phrases = [p for p in phrase_list]
    for p in phrases:
        if len(p.split()) < 2:
            raise ConfigError(f"hyphenation phrase {p!r} needs at least two words")
    rx = _phrase_regex(phrases)

    def edits_for(text):
        if rx is None:
            return [], []
        return [(m.start(), m.end(), "-".join(m.group().split())) for m in rx.finditer(text)], []

    return _map_turns(t, "hyphen", edits_for)


def remove_fillers(t: Transcript, filler_list: Iterable[str]) -> tuple[Transcript, CorrectionLog]:
    fillers = sorted({f.strip().lower() for f in filler_list if f.strip()}, key=lambda f: (-len(f), f))
    rx = re.compile(_WB_LEFT + "(?:" + "|".join(map(re.escape, fillers)) + ")" + _WB_RIGHT + ",?",
                    re.IGNORECASE) if fillers else None

    def edits_for(text):
        edits = []
        if rx is not None:
            runs: list[list[int]] = []
            for m in rx.finditer(text):
                if runs and not text[runs[-1][1]:m.start()].strip():
                    runs[-1][1] = m.end()
                else:
                    runs.append([m.start(), m.end()])
            for start, end in runs:
                after = len(text[end:]) - len(text[end:].lstrip())
                if after or end == len(text):
                    end += after
                    if end == len(text):
                        start -= len(text[:start]) - len(text[:start].rstrip())
                else:
                    start -= len(text[:start]) - len(text[:start].rstrip(" "))
                edits.append((start, end, ""))
        # Collapse runs of spaces left in the text (or already present).
        covered = edits
        for m in re.finditer(r" {2,}", text):
            if not any(s < m.end() and m.start() < e for s, e, _ in covered):
                edits.append((m.start(), m.end(), " "))
        edits.sort()
        return _merge_overlaps(edits), []

    return _map_turns(t, "filler", edits_for)


def _merge_overlaps(edits: list[Edit]) -> list[Edit]:
    out: list[Edit] = []
    for s, e, r in edits:
        if out and s < out[-1][1]:
            ps, pe, pr = out[-1]
            out[-1] = (ps, max(pe, e), pr + r)
        else:
            out.append((s, e, r))
    return out


# -- pipeline ----------------------------------------------------------------

@dataclass(frozen=True)
class PreprocessConfig:
    remap: RemapTable = field(default_factory=RemapTable)
    phrases: tuple[str, ...] = ()
    fillers: tuple[str, ...] = ()
    grades: tuple[str, ...] = ()

    def __post_init__(self):
        for p in self.phrases:
            if len(p.split()) < 2:
                raise ConfigError(f"hyphenation phrase {p!r} needs at least two words")


def preprocess_pipeline(t: Transcript, config: PreprocessConfig) -> tuple[Transcript, CorrectionLog]:
    t, log_remap = apply_term_remap(t, config.remap)
    t, log_num = normalize_numbers(t, config.grades)
    t, log_hyph = hyphenate_terms(t, config.phrases)
    t, log_fill = remove_fillers(t, config.fillers)
    return t, log_remap + log_num + log_hyph + log_fill


# -- config files ------------------------------------------------------------

def _read_lines(path: str | Path) -> list[tuple[int, str]]:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if line and not line.startswith("#"):
            out.append((n, line))
    return out


def load_word_list(path: str | Path) -> tuple[str, ...]:
    return tuple(line for _, line in _read_lines(path))


def load_remap_table(path: str | Path) -> RemapTable:
    """Read ``pattern<TAB or comma>replacement[<sep>domain]`` lines."""
    entries = []
    for n, line in _read_lines(path):
        parts = [p.strip() for p in re.split(r"\t|,", line)]
        if len(parts) not in (2, 3) or not parts[0]:
            raise ConfigError(f"{path}:{n}: expected 'pattern, replacement[, domain]'")
        scope = parts[2] if len(parts) == 3 and parts[2] else None
        entries.append(RemapEntry(parts[0], parts[1], scope))
    return RemapTable(tuple(entries))


def load_preprocess_config(remap: Optional[str | Path] = None, phrases: Optional[str | Path] = None,
                           fillers: Optional[str | Path] = None,
                           grades: Optional[str | Path] = None) -> PreprocessConfig:
    return PreprocessConfig(
        remap=load_remap_table(remap) if remap else RemapTable(),
        phrases=load_word_list(phrases) if phrases else (),
        fillers=load_word_list(fillers) if fillers else (),
        grades=load_word_list(grades) if grades else (),
    )
