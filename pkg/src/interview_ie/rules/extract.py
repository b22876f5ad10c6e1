"""Fragment extraction: run compiled rules and KB lookups over annotated
sentences."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .annotation import SentenceAnnotation
from .grammar import Element, Rule, RuleSet, TokenConstraint
from .kb import KnowledgeBase

VALUE_KINDS = ("quantitative_value", "categorical_value", "boolean_value", "compound_value")

# Dependents left out when projecting a captured token to its phrase.
PROJECTION_EXCLUDED = frozenset({"case", "punct", "cc", "mark"})

_WORD_NUMBERS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16, "seventeen": 17,
    "eighteen": 18, "nineteen": 19, "twenty": 20, "thirty": 30, "forty": 40,
    "fifty": 50, "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}
_NUMERAL_RE = re.compile(r"^[-+]?(\d{1,3}(,\d{3})+|\d+)(\.\d+)?$")


def parse_number(text: str) -> Optional[float | int]:
    """Parse a numeral, accepting comma grouping and simple number words.

    >>> parse_number("6,670"), parse_number("3.5"), parse_number("Three")
    (6670, 3.5, 3)
    """
    s = text.strip()
    if _NUMERAL_RE.match(s):
        value = float(s.replace(",", ""))
        return int(value) if value.is_integer() and "." not in s else value
    low = s.lower()
    if low in _WORD_NUMBERS:
        return _WORD_NUMBERS[low]
    if "-" in low:
        tens, _, ones = low.partition("-")
        if tens in _WORD_NUMBERS and ones in _WORD_NUMBERS and _WORD_NUMBERS[tens] % 10 == 0 \
                and _WORD_NUMBERS[tens] >= 20 and 0 < _WORD_NUMBERS[ones] < 10:
            return _WORD_NUMBERS[tens] + _WORD_NUMBERS[ones]
    return None


def is_number_token(token: str, tag: str) -> bool:
    return parse_number(token) is not None and (tag == "CD" or any(c.isdigit() for c in token))


@dataclass(frozen=True)
class Fragment:
    label: str
    kind: str
    text: str
    span: tuple[int, int, int]  # (turn_index, char_start, char_end)
    fields: tuple[tuple[str, str], ...] = ()
    unit: Optional[str] = None
    numeric_value: Optional[float | int] = None
    category: Optional[str] = None
    source: str = ""

    @property
    def turn_index(self) -> int:
        return self.span[0]

    @property
    def captures(self) -> dict[str, str]:
        return dict(self.fields)

    def get(self, name: str, default=None):
        return self.captures.get(name, default)

    @property
    def is_value(self) -> bool:
        return self.kind in VALUE_KINDS

    @property
    def compat_key(self) -> Optional[str]:
        """The unit or category name used for identifier compatibility."""
        if self.kind == "boolean_value":
            return "boolean"
        if self.kind == "quantitative_value":
            return self.unit
        return self.category

    def to_record(self) -> dict:
        return {"label": self.label, "kind": self.kind, "text": self.text, "span": list(self.span),
                "fields": dict(self.fields), "unit": self.unit,
                "numeric_value": self.numeric_value, "category": self.category,
                "source": self.source}


@dataclass
class Candidate:
    """A match before de-duplication, in token coordinates."""
    label: str
    kind: str
    start: int
    end: int
    captures: tuple[tuple[str, int, int], ...]
    priority: int
    order: int
    unit: Optional[str] = None
    numeric_value: Optional[float | int] = None
    category: Optional[str] = None
    extra: tuple[tuple[str, str], ...] = ()
    source: str = ""

    def sort_key(self):
        return (self.start, -(self.end - self.start), -self.priority, self.order, self.captures)


# -- token patterns ----------------------------------------------------------

def _token_ok(c: TokenConstraint, a: SentenceAnnotation, i: int) -> bool:
    return c.matches(a.tokens[i], a.pos_tags[i], a.ner_tags[i])


def _match_node(node, a: SentenceAnnotation, pos: int, caps: dict) -> Iterator[tuple[int, dict]]:
    if isinstance(node, TokenConstraint):
        if pos < len(a.tokens) and _token_ok(node, a, pos):
            yield pos + 1, caps
        return
    for end, c in _match_seq(node.body, 0, a, pos, caps):
        if node.name:
            c = {**c, node.name: (pos, end)}
        yield end, c


def _star(node, a, pos, caps):
    for end, c in _match_node(node, a, pos, caps):
        if end == pos:
            continue
        yield from _star(node, a, end, c)
    yield pos, caps


def _match_elem(el: Element, a, pos, caps):
    if el.quant == "":
        yield from _match_node(el.node, a, pos, caps)
    elif el.quant == "?":
        yield from _match_node(el.node, a, pos, caps)
        yield pos, caps
    elif el.quant == "*":
        yield from _star(el.node, a, pos, caps)
    else:
        for end, c in _match_node(el.node, a, pos, caps):
            yield from _star(el.node, a, end, c)


def _match_seq(seq: Sequence[Element], k: int, a, pos: int, caps: dict):
    if k == len(seq):
        yield pos, caps
        return
    for end, c in _match_elem(seq[k], a, pos, caps):
        yield from _match_seq(seq, k + 1, a, end, c)


def match_token_pattern(seq: Sequence[Element], a: SentenceAnnotation, start: int
                        ) -> Optional[tuple[int, dict]]:
    """Longest non-empty match starting at ``start``; among equally long
    matches the first one in backtracking order wins (greedy quantifiers)."""
    best = None
    for end, caps in _match_seq(seq, 0, a, start, {}):
        if end > start and (best is None or end > best[0]):
            best = (end, caps)
    return best


# -- dependency patterns -----------------------------------------------------

def resolve_path(a: SentenceAnnotation, start: int, path) -> list[int]:
    kids = a.children()
    gov = a.governor()
    frontier = {start}
    for step in path:
        nxt = set()
        for x in frontier:
            if step.direction == ">":
                nxt.update(d for d, rel in kids[x] if rel == step.relation)
            else:
                g, rel = gov[x]
                if g is not None and rel == step.relation:
                    nxt.add(g)
        frontier = nxt
        if not frontier:
            break
    return sorted(frontier)


def projection(a: SentenceAnnotation, head: int) -> tuple[int, int]:
    """Token range ``[lo, hi)`` of the phrase headed by ``head``."""
    kids = a.children()
    members = {head}
    stack = [head]
    while stack:
        x = stack.pop()
        for d, rel in kids[x]:
            if rel not in PROJECTION_EXCLUDED and d not in members:
                members.add(d)
                stack.append(d)
    return min(members), max(members) + 1


# -- candidates ---------------------------------------------------------------

def _rule_value_fields(kind: str, a: SentenceAnnotation, start: int, end: int, caps, kb: KnowledgeBase):
    """Numeric value / category / boolean polarity for value-producing rules."""
    numeric = None
    for i in range(start, end):
        if is_number_token(a.tokens[i], a.pos_tags[i]):
            numeric = parse_number(a.tokens[i])
            break
    extra = ()
    category = None
    if kind in ("quantitative_value", "compound_value") and numeric is None:
        return None
    if kind == "compound_value":
        cat = dict((n, (s, e)) for n, s, e in caps).get("category")
        if cat is None:
            return None
        category = kb.category_of(" ".join(a.tokens[cat[0]:cat[1]]))
    if kind == "categorical_value":
        category = kb.category_of(" ".join(a.tokens[start:end]))
    if kind == "boolean_value":
        words = [t.lower() for t in a.tokens[start:end]]
        hits = [kb.booleans[w] for w in words if w in kb.booleans]
        if not hits:
            return None
        extra = (("value", "true" if hits[0] else "false"),)
        category = "boolean"
    return numeric, category, extra


def rule_candidates(a: SentenceAnnotation, rules: RuleSet, kb: KnowledgeBase) -> list[Candidate]:
    out = []
    token_rules = [(k, r) for k, r in enumerate(rules) if r.kind == "token"]
    dep_rules = [(k, r) for k, r in enumerate(rules) if r.kind == "dependency"]
    n = len(a.tokens)
    for k, rule in token_rules:
        for s in range(n):
            hit = match_token_pattern(rule.token_pattern, a, s)
            if hit is None:
                continue
            end, caps = hit
            captures = tuple(sorted((name, cs, ce) for name, (cs, ce) in caps.items()))
            out.extend(_finish(rule, k, a, s, end, captures, kb))
    for k, rule in dep_rules:
        for t in range(n):
            if not _token_ok(rule.trigger, a, t):
                continue
            targets = []
            for cap in rule.captures:
                reached = [x for x in resolve_path(a, t, cap.path) if cap.label_ok(a.pos_tags[x])]
                targets.append(reached)
            for combo in itertools.product(*targets):
                lo, hi = t, t + 1
                captures = []
                for cap, x in zip(rule.captures, combo):
                    ps, pe = projection(a, x)
                    captures.append((cap.name, ps, pe))
                    lo, hi = min(lo, ps), max(hi, pe)
                out.extend(_finish(rule, k, a, lo, hi, tuple(sorted(captures)), kb))
    return out


def _finish(rule: Rule, order: int, a, start, end, captures, kb) -> list[Candidate]:
    numeric = category = None
    extra = ()
    if rule.fragment_kind != "identifier":
        vals = _rule_value_fields(rule.fragment_kind, a, start, end, captures, kb)
        if vals is None:
            return []
        numeric, category, extra = vals
    return [Candidate(rule.label, rule.fragment_kind, start, end, captures, rule.priority, order,
                      numeric_value=numeric, category=category, extra=extra, source=rule.name)]


KB_ORDER = 10**6  # KB candidates sort after rule candidates on exact ties


def kb_candidates(a: SentenceAnnotation, kb: KnowledgeBase) -> list[Candidate]:
    index = kb.surface_index()
    maxlen = max((len(k) for k in index), default=0)
    lower = [t.lower() for t in a.tokens]
    n = len(lower)
    matches = []
    i = 0
    while i < n:
        for length in range(min(maxlen, n - i), 0, -1):
            hit = index.get(tuple(lower[i:i + length]))
            if hit:
                matches.append((i, i + length, hit))
                i += length
                break
        else:
            i += 1
    numbers = {i for i in range(n) if is_number_token(a.tokens[i], a.pos_tags[i])}
    consumed = set()
    out = []
    for s, e, (what, name) in matches:
        prev = s - 1
        if prev in numbers and prev not in consumed and not any(ms <= prev < me for ms, me, _ in matches):
            consumed.add(prev)
            value = parse_number(a.tokens[prev])
            if what == "category":
                out.append(Candidate("Compound", "compound_value", prev, e,
                                     (("category", s, e), ("number", prev, prev + 1)), 0, KB_ORDER,
                                     numeric_value=value, category=name, source="kb"))
            else:
                out.append(Candidate("Quantity", "quantitative_value", prev, e,
                                     (("number", prev, prev + 1), ("unit", s, e)), 0, KB_ORDER,
                                     unit=name, numeric_value=value, source="kb"))
        elif what == "category":
            out.append(Candidate("Categorical", "categorical_value", s, e, (), 0, KB_ORDER,
                                 category=name, source="kb"))
    for i in sorted(numbers - consumed):
        if any(ms <= i < me for ms, me, _ in matches):
            continue
        out.append(Candidate("Number", "quantitative_value", i, i + 1, (), 0, KB_ORDER,
                             numeric_value=parse_number(a.tokens[i]), source="kb"))
    first = next((i for i in range(n) if any(ch.isalnum() for ch in a.tokens[i])), None)
    if first is not None and lower[first] in kb.booleans:
        out.append(Candidate("Boolean", "boolean_value", first, first + 1, (), 0, KB_ORDER,
                             category="boolean",
                             extra=(("value", "true" if kb.booleans[lower[first]] else "false"),),
                             source="kb"))
    return out


def dedup(cands: Sequence[Candidate]) -> list[Candidate]:
    """Leftmost-longest within each label."""
    kept = []
    by_label: dict[str, list[Candidate]] = {}
    for c in cands:
        by_label.setdefault(c.label, []).append(c)
    for label in sorted(by_label):
        taken: list[Candidate] = []
        for c in sorted(by_label[label], key=Candidate.sort_key):
            if all(c.end <= t.start or t.end <= c.start for t in taken):
                taken.append(c)
        kept.extend(taken)
    return kept


def to_fragment(c: Candidate, a: SentenceAnnotation, turn_text: str, kb: KnowledgeBase) -> Fragment:
    turn = a.turn_index
    cs = a.token_spans[c.start][0]
    ce = a.token_spans[c.end - 1][1]
    fields = []
    for name, s, e in c.captures:
        fields.append((name, turn_text[a.token_spans[s][0]:a.token_spans[e - 1][1]]))
    fields.extend(c.extra)
    text = turn_text[cs:ce]
    category = c.category
    if c.kind == "identifier":
        category = kb.identifier_category(text)
    return Fragment(c.label, c.kind, text, (turn, cs, ce), tuple(sorted(fields)), c.unit,
                    c.numeric_value, category, c.source)


def fragment_sort_key(f: Fragment):
    return (f.span, f.label, f.kind, f.fields, f.source)


def extract_fragments(annos: Sequence[SentenceAnnotation], rules: RuleSet, kb: KnowledgeBase,
                      turn_texts: Optional[Sequence[str]] = None) -> list[Fragment]:
    """Standalone identifier and value mentions, sorted by span.

    ``annos`` must be aligned (see :func:`annotate`).  ``turn_texts`` gives the
    text each span points into; without it, fragment text is rebuilt from
    the tokens' character spans inside a synthetic string, so pass it.
    """
    out = []
    for a in annos:
        if not a.token_spans:
            raise ValueError("annotations must be aligned to the transcript before extraction")
        text = turn_texts[a.turn_index] if turn_texts is not None else _rebuild_text(a)
        cands = rule_candidates(a, rules, kb) + kb_candidates(a, kb)
        out.extend(to_fragment(c, a, text, kb) for c in dedup(cands))
    out.sort(key=fragment_sort_key)
    return out


def _rebuild_text(a: SentenceAnnotation) -> str:
    end = a.token_spans[-1][1] if a.token_spans else 0
    buf = [" "] * end
    for tok, (s, e) in zip(a.tokens, a.token_spans):
        buf[s:e] = list(tok)
    return "".join(buf)
