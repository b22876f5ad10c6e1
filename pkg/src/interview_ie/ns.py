"""Rule backend driver: fragments, assembly and grounding per domain section."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

from .assembly import AssemblyConfig, IdentifierValuePair, assemble_all
from .grounding import GroundedRecord, GroundingConfig, Ontology, ground_pairs
from .rules.annotation import SentenceAnnotation
from .rules.extract import Fragment, extract_fragments
from .rules.grammar import RuleSet
from .rules.kb import KnowledgeBase
from .segmentation import DEFAULT_MARKERS, segment_by_markers
from .timing import NullTimer
from .transcript import Transcript

COMMON = "common"


@dataclass(frozen=True)
class NSResources:
    rules: RuleSet
    # domain name (or "common") -> knowledge base
    kbs: Mapping[str, KnowledgeBase]
    assembly: AssemblyConfig
    ontology: Ontology
    grounding: GroundingConfig = GroundingConfig()
    markers: tuple[str, ...] = DEFAULT_MARKERS

    def __hash__(self):
        return id(self)

    def kb_for(self, domain: str) -> KnowledgeBase:
        return _merged_kb(self, domain)


@lru_cache(maxsize=64)
def _merged_kb(res: NSResources, domain: str) -> KnowledgeBase:
    common = res.kbs.get(COMMON, KnowledgeBase(COMMON))
    if domain in res.kbs and domain != COMMON:
        return common.merged(res.kbs[domain], domain)
    return common


@dataclass
class NSResult:
    fragments: list[Fragment] = field(default_factory=list)
    pairs: list[IdentifierValuePair] = field(default_factory=list)
    records: list[GroundedRecord] = field(default_factory=list)


def run_ns_pipeline(t: Transcript, annos: Sequence[SentenceAnnotation], res: NSResources,
                    timer=None) -> NSResult:
    """Extraction and assembly run separately inside each domain section, so
    a value never links to an identifier from another section."""
    timer = timer or NullTimer()
    out = NSResult()
    texts = [turn.text for turn in t.turns]
    for seg in segment_by_markers(t, res.markers):
        kb = res.kb_for(seg.domain)
        seg_annos = [a for a in annos if seg.start <= a.turn_index < seg.end]
        with timer("extract"):
            frags = extract_fragments(seg_annos, res.rules, kb, texts)
        with timer("assemble"):
            pairs = assemble_all(frags, t, res.assembly)
        with timer("ground"):
            records = ground_pairs(pairs, res.ontology, res.grounding)
        out.fragments.extend(frags)
        out.pairs.extend(pairs)
        out.records.extend(records)
    return out
