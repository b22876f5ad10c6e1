"""Linguistic annotations (tokens, POS, NER, dependencies) per sentence.

Annotations come from outside the engine.  The on-disk format is JSON
Lines, one sentence per line::

    {"turn": 0, "start": 0, "end": 28,
     "tokens": ["the", "capacity", "of", "those", "barns"],
     "pos": ["DT", "NN", "IN", "DT", "NNS"],
     "ner": ["O", "O", "O", "O", "O"],
     "heads": [[1, "det"], [0, "root"], [2, "case"], [1, "det"], [-3, "nmod_of"]]}

``heads`` holds, per token, the governor's position relative to the token
and the relation label; an offset of 0 marks the root.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

from ..transcript import Transcript


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class SentenceAnnotation:
    tokens: tuple[str, ...]
    pos_tags: tuple[str, ...]
    ner_tags: tuple[str, ...]
    # (dependent, governor or None for the root, relation)
    dep_edges: tuple[tuple[int, Optional[int], str], ...]
    sentence_span: tuple[int, int, int]
    # (char_start, char_end) of each token in the turn text; filled by align()
    token_spans: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise AnnotationError("; ".join(problems))

    def problems(self) -> list[str]:
        n = len(self.tokens)
        out = []
        if n == 0:
            out.append("sentence has no tokens")
        if len(self.pos_tags) != n or len(self.ner_tags) != n:
            out.append(f"length mismatch: {n} tokens, {len(self.pos_tags)} POS tags, "
                       f"{len(self.ner_tags)} NER tags")
        deps = [e[0] for e in self.dep_edges]
        if sorted(deps) != list(range(n)):
            out.append("every token needs exactly one governor edge")
            return out
        roots = [d for d, g, _ in self.dep_edges if g is None]
        if len(roots) != 1:
            out.append(f"expected one root, found {len(roots)}")
        for d, g, rel in self.dep_edges:
            if g is not None and not 0 <= g < n:
                out.append(f"governor index {g} of token {d} is out of range for {n} tokens")
            if g == d:
                out.append(f"token {d} governs itself")
        if not out:
            gov = {d: g for d, g, _ in self.dep_edges}
            for start in range(n):
                seen = set()
                node: Optional[int] = start
                while node is not None:
                    if node in seen:
                        out.append(f"dependency cycle through token {start}")
                        break
                    seen.add(node)
                    node = gov[node]
                if out:
                    break
        if self.token_spans and len(self.token_spans) != n:
            out.append("token span count differs from token count")
        return out

    @property
    def turn_index(self) -> int:
        return self.sentence_span[0]

    def __len__(self):
        return len(self.tokens)

    def governor(self) -> dict[int, tuple[Optional[int], str]]:
        return {d: (g, rel) for d, g, rel in self.dep_edges}

    def children(self) -> dict[int, list[tuple[int, str]]]:
        kids: dict[int, list[tuple[int, str]]] = {i: [] for i in range(len(self.tokens))}
        for d, g, rel in self.dep_edges:
            if g is not None:
                kids[g].append((d, rel))
        for v in kids.values():
            v.sort()
        return kids

    def align(self, turn_text: str) -> "SentenceAnnotation":
        """Locate each token in the turn text, left to right."""
        _, cs, ce = self.sentence_span
        if not 0 <= cs <= ce <= len(turn_text):
            raise AnnotationError(f"sentence span {self.sentence_span} is outside the turn text")
        spans = []
        cursor = cs
        for tok in self.tokens:
            at = turn_text.find(tok, cursor, ce)
            if at < 0 or turn_text[cursor:at].strip():
                raise AnnotationError(
                    f"token {tok!r} not found at offset {cursor} of turn {self.turn_index}")
            spans.append((at, at + len(tok)))
            cursor = at + len(tok)
        if turn_text[cursor:ce].strip():
            raise AnnotationError(f"untokenized text {turn_text[cursor:ce]!r} in turn {self.turn_index}")
        return SentenceAnnotation(self.tokens, self.pos_tags, self.ner_tags, self.dep_edges,
                                  self.sentence_span, tuple(spans))

    def to_record(self) -> dict:
        heads = []
        for d, g, rel in sorted(self.dep_edges):
            heads.append([0 if g is None else g - d, rel])
        turn, cs, ce = self.sentence_span
        return {"turn": turn, "start": cs, "end": ce, "tokens": list(self.tokens),
                "pos": list(self.pos_tags), "ner": list(self.ner_tags), "heads": heads}

    @classmethod
    def from_record(cls, rec: dict) -> "SentenceAnnotation":
        try:
            tokens = tuple(rec["tokens"])
            heads = rec["heads"]
            edges = []
            for d, (off, rel) in enumerate(heads):
                edges.append((d, None if off == 0 else d + int(off), str(rel)))
            return cls(tokens, tuple(rec["pos"]), tuple(rec.get("ner") or ["O"] * len(tokens)),
                       tuple(edges), (int(rec["turn"]), int(rec["start"]), int(rec["end"])))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, AnnotationError):
                raise
            raise AnnotationError(f"malformed annotation record: {exc}") from None


def make_annotation(turn_index: int, turn_text: str, tokens: Sequence[str], pos: Sequence[str],
                    heads: Sequence[tuple[int, str]], ner: Optional[Sequence[str]] = None,
                    start: int = 0, end: Optional[int] = None) -> SentenceAnnotation:
    """Build and align an annotation from relative-head notation."""
    rec = {"turn": turn_index, "start": start, "end": len(turn_text) if end is None else end,
           "tokens": list(tokens), "pos": list(pos), "ner": list(ner) if ner else None,
           "heads": [list(h) for h in heads]}
    return SentenceAnnotation.from_record(rec).align(turn_text)


class Annotator(Protocol):
    """Anything that can annotate a transcript; external clients plug in here."""

    def annotate(self, t: Transcript) -> list[SentenceAnnotation]: ...


class FileAnnotator:
    """Pre-computed annotations read from a JSON Lines file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def annotate(self, t: Transcript) -> list[SentenceAnnotation]:
        if not self.path.exists():
            raise AnnotationError(f"annotation file {self.path} does not exist")
        return load_annotations(self.path)


def load_annotations(path: str | Path) -> list[SentenceAnnotation]:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"{path}:{n}: invalid JSON: {exc.msg}") from None
        try:
            out.append(SentenceAnnotation.from_record(rec))
        except AnnotationError as exc:
            raise AnnotationError(f"{path}:{n}: {exc}") from None
    return out


def dump_annotations(annos: Sequence[SentenceAnnotation]) -> str:
    return "".join(json.dumps(a.to_record(), ensure_ascii=False) + "\n" for a in annos)


def annotate(t: Transcript, provider: Annotator) -> list[SentenceAnnotation]:
    """Annotate ``t`` and check the result against the transcript.

    Sentence spans must tile each turn's text exactly, and every token must
    be found verbatim in its sentence.
    """
    annos = sorted(provider.annotate(t), key=lambda a: a.sentence_span)
    by_turn: dict[int, list[SentenceAnnotation]] = {}
    for a in annos:
        if not 0 <= a.turn_index < len(t.turns):
            raise AnnotationError(f"annotation refers to missing turn {a.turn_index}")
        by_turn.setdefault(a.turn_index, []).append(a)
    aligned = []
    for i, turn in enumerate(t.turns):
        sentences = by_turn.get(i, [])
        if not sentences:
            if turn.text.strip():
                raise AnnotationError(f"turn {i} has text but no annotations")
            continue
        cursor = 0
        for a in sentences:
            _, cs, ce = a.sentence_span
            if cs != cursor:
                raise AnnotationError(f"sentence spans of turn {i} do not partition its text "
                                      f"(gap or overlap at {cursor})")
            cursor = ce
            aligned.append(a.align(turn.text))
        if cursor != len(turn.text):
            raise AnnotationError(f"sentence spans of turn {i} stop at {cursor}, "
                                  f"text has {len(turn.text)} characters")
    return aligned
