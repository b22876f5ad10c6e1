"""A small lexicon-and-position annotator.

This is no substitute for a trained tagger and parser.  It exists so that
the rule backend can run without an external NLP service, and so that test
fixtures can be annotated reproducibly.  Tagging is a closed-class lexicon
with suffix fallbacks; the parse takes the first verb as root, groups
determiner/adjective/number/noun runs into noun phrases headed by their
last noun, and attaches ``NP prep NP`` as ``nmod_<prep>``.
"""

from __future__ import annotations

import re
from typing import Optional

from ..transcript import Transcript
from .annotation import SentenceAnnotation
from .extract import parse_number

TOKEN_RE = re.compile(
    r"\d+(?:-\d+)+|\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?|\w+(?:[-']\w+)*|[^\w\s]")

_CLOSED = {
    "DT": "the a an those these that this some any every each all another",
    "IN": "of in on at for with from by about per under after into over than like before",
    "TO": "to",
    "PRP": "i we you they it he she me us them my our your their his her its let's you're we're "
           "we've it's that's there's i'm they're i've i'd we'd you've",
    "WP": "what who which",
    "WRB": "how when where why",
    "MD": "can could would should will might",
    "VB": "be is are was were am been have has had do does did get got go goes went use uses used "
          "grow run runs make keep keeps think say says put plant average averaged take come came talk "
          "talked look let know try sell sold help helps started start store goes bed hold holds work "
          "sounds seems want need feel guess mean remember see saw spend spent build built fixed "
          "hear heard ask asked wait ran kept done set",
    "JJ": "many much total other small big new old good busy renewable solar full last next few more "
          "same local quiet long hard easy sure glad happy different whole rough wet dry early late "
          "great nice simple tight clear",
    "RB": "so just also then really very mostly not now there here too still already again right maybe "
          "probably altogether yet ago well okay pretty usually always never sometimes back around "
          "even only once",
    "CC": "and or but",
    "UH": "yes yeah yep no nope oh",
}
LEXICON = {w: tag for tag, words in _CLOSED.items() for w in words.split()}
NOUN_ING = frozenset({"farrowing", "bedding", "spring", "morning", "evening", "thing", "something",
                      "nothing", "everything", "building", "buildings", "scraping", "flushing",
                      "meeting", "ceiling"})
_NOMINAL = frozenset({"DT", "JJ", "CD", "NN", "NNS"})
_SIMPLE_REL = {"RB": "advmod", "WRB": "advmod", "CC": "cc", "UH": "discourse", "MD": "aux",
               "TO": "mark", "IN": "case", "WP": "obj", "PRP": "nsubj",
               ".": "punct", ",": "punct", ":": "punct"}


def pos_tag(token: str) -> str:
    low = token.lower()
    if not re.search(r"\w", token):
        return "." if token in ".?!" else "," if token == "," else ":"
    if parse_number(token) is not None:
        return "CD"
    if low in LEXICON:
        return LEXICON[low]
    if low.endswith("ing") and low not in NOUN_ING:
        return "VBG"
    if low.endswith("ed") and len(low) > 4:
        return "VBD"
    if len(low) > 3 and low.endswith("s") and not low.endswith("ss"):
        return "NNS"
    return "NN"


def parse(words: list[str], tags: list[str]) -> list[tuple[Optional[int], str]]:
    """(governor or None, relation) per token."""
    n = len(tags)
    chunks = []
    i = 0
    while i < n:
        if tags[i] not in _NOMINAL:
            i += 1
            continue
        j = i
        while j < n and tags[j] in _NOMINAL:
            j += 1
        nouns = [k for k in range(i, j) if tags[k].startswith("NN")]
        if nouns:
            chunks.append((i, j, nouns[-1]))
        i = j
    verbs = [k for k in range(n) if tags[k].startswith("VB")]
    root = verbs[0] if verbs else (chunks[0][2] if chunks else 0)
    gov: list = [None] * n
    gov[root] = (None, "root")
    ends = {}
    for s, e, h in chunks:
        ends[e] = h
        for k in range(s, e):
            if k != h:
                gov[k] = (h, {"DT": "det", "JJ": "amod", "CD": "nummod"}.get(tags[k], "compound"))
    for s, e, h in chunks:
        # NP prep NP: the second phrase modifies the first
        if s >= 2 and tags[s - 1] in ("IN", "TO") and (s - 1) in ends:
            if h != root:
                gov[h] = (ends[s - 1], f"nmod_{words[s - 1].lower()}")
            gov[s - 1] = (h, "case")
        if gov[h] is None:
            gov[h] = (root, "nsubj" if h < root else "obj")
    for k in range(n):
        if gov[k] is None:
            rel = _SIMPLE_REL.get(tags[k], "dep")
            gov[k] = (root, "obj" if rel == "nsubj" and k > root else rel)
    return gov


def annotate_text(turn_index: int, text: str) -> list[SentenceAnnotation]:
    """Sentences of one turn; their spans tile the whole text."""
    toks = [(m.group(), m.start()) for m in TOKEN_RE.finditer(text)]
    sentences = []
    cur: list = []
    for k, tok in enumerate(toks):
        cur.append(tok)
        if tok[0] in ".?!" and (k + 1 == len(toks) or toks[k + 1][0] not in ".?!"):
            sentences.append(cur)
            cur = []
    if cur:
        sentences.append(cur)
    out = []
    for si, sent in enumerate(sentences):
        start = 0 if si == 0 else sent[0][1]
        end = len(text) if si == len(sentences) - 1 else sentences[si + 1][0][1]
        words = [w for w, _ in sent]
        tags = [pos_tag(w) for w in words]
        heads = [[0 if g is None else g - d, rel] for d, (g, rel) in enumerate(parse(words, tags))]
        rec = {"turn": turn_index, "start": start, "end": end, "tokens": words, "pos": tags,
               "heads": heads}
        out.append(SentenceAnnotation.from_record(rec).align(text))
    return out


class HeuristicAnnotator:
    def annotate(self, t: Transcript) -> list[SentenceAnnotation]:
        return [a for i, turn in enumerate(t.turns) for a in annotate_text(i, turn.text)]
