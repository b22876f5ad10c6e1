"""Ontology grounding for the rule backend.

A pair's identifier text is scored against every node name and alias as a
weighted sum of character-trigram embedding cosine and content-word
overlap.  Nodes whose value type or expected units reject the value are
removed before scoring.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .assembly import IdentifierValuePair
from .rules.extract import Fragment
from .rules.kb import content_words

log = logging.getLogger(__name__)

VALUE_TYPES = ("quantitative", "categorical", "boolean")
Value = Union[int, float, str, bool]


class OntologyError(ValueError):
    pass


@dataclass(frozen=True)
class OntologyNode:
    node_id: str
    name: str
    value_type: str
    expected_units: frozenset[str] = frozenset()
    aliases: tuple[str, ...] = ()

    @property
    def surfaces(self) -> tuple[str, ...]:
        return (self.name,) + self.aliases


@dataclass(frozen=True)
class Ontology:
    nodes: tuple[OntologyNode, ...]

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise OntologyError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        seen = set()
        for n in self.nodes:
            if n.node_id in seen:
                out.append(f"duplicate node_id {n.node_id!r}")
            seen.add(n.node_id)
            if not n.name.strip():
                out.append(f"node {n.node_id!r} has an empty name")
            if n.value_type not in VALUE_TYPES:
                out.append(f"node {n.node_id!r} has unknown value_type {n.value_type!r}")
        return out

    def __contains__(self, node_id: str) -> bool:
        return any(n.node_id == node_id for n in self.nodes)

    def get(self, node_id: str) -> OntologyNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    def with_alias(self, node_id: str, alias: str) -> "Ontology":
        return Ontology(tuple(
            OntologyNode(n.node_id, n.name, n.value_type, n.expected_units, n.aliases + (alias,))
            if n.node_id == node_id else n for n in self.nodes))


def load_ontology(path: str | Path) -> Ontology:
    """CSV with header ``node_id,name,value_type,expected_units,aliases``;
    list-valued columns are ``;``-separated."""
    nodes = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
        need = {"node_id", "name", "value_type"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise OntologyError(f"{path}: header must include {sorted(need)}")
        for row in reader:
            split = lambda s: tuple(x.strip() for x in (s or "").split(";") if x.strip())
            nodes.append(OntologyNode(
                row["node_id"].strip(), row["name"].strip(), row["value_type"].strip(),
                frozenset(u.lower() for u in split(row.get("expected_units"))),
                split(row.get("aliases"))))
    return Ontology(tuple(nodes))


@dataclass(frozen=True)
class GroundedRecord:
    grounding: str
    grounding_id: str
    value: Value
    unit: Optional[str] = None
    provenance: tuple = ()
    backend: str = "ns"
    score: Optional[float] = None

    def to_record(self) -> dict:
        return {"grounding": self.grounding, "grounding_id": self.grounding_id, "value": self.value,
                "unit": self.unit, "provenance": [list(p) for p in self.provenance],
                "backend": self.backend,
                "score": None if self.score is None else round(self.score, 6)}


def value_type_of(value: Value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, float)):
        return "quantitative"
    return "categorical"


# -- similarity ---------------------------------------------------------------

class EmbeddingError(ValueError):
    pass


def _bucket(gram: str, dim: int) -> int:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def trigrams(text: str) -> list[str]:
    s = text.lower()
    if len(s) < 3:
        return [s] if s else []
    return [s[i:i + 3] for i in range(len(s) - 2)]


def hashed_ngram_embed(text: str, dim: int = 1024) -> np.ndarray:
    """Unit-norm vector of hashed character-trigram counts."""
    if dim < 16:
        raise ValueError("dim must be at least 16")
    grams = trigrams(text)
    if not grams or not text.strip():
        raise EmbeddingError("cannot embed empty text (zero vector)")
    vec = np.zeros(dim)
    for g in grams:
        vec[_bucket(g, dim)] += 1.0
    return vec / np.linalg.norm(vec)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def string_overlap(a: str, b: str) -> float:
    """Shared content words over the content words of the shorter string."""
    wa, wb = Counter(content_words(a)), Counter(content_words(b))
    if not wa or not wb:
        return 0.0
    shared = sum((wa & wb).values())
    return shared / min(sum(wa.values()), sum(wb.values()))


@dataclass(frozen=True)
class GroundingConfig:
    embed_weight: float = 0.5
    accept_threshold: float = 0.5
    embedder: str = "hashed_ngram"
    dim: int = 1024
    # Any callable text -> unit vector; used when embedder == "external".
    external: Optional[Callable[[str], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.embed_weight <= 1.0:
            raise ValueError("embed_weight must be in [0, 1]")
        if not 0.0 <= self.accept_threshold <= 1.0:
            raise ValueError("accept_threshold must be in [0, 1]")
        if self.embedder not in ("hashed_ngram", "external"):
            raise ValueError(f"unknown embedder {self.embedder!r}")
        if self.embedder == "external" and self.external is None:
            raise ValueError("external embedder selected but none supplied")

    @property
    def string_weight(self) -> float:
        return 1.0 - self.embed_weight

    def embed(self, text: str) -> np.ndarray:
        if self.embedder == "external":
            return np.asarray(self.external(text), dtype=float)
        return hashed_ngram_embed(text, self.dim)


def similarity(query: str, surface: str, cfg: GroundingConfig) -> tuple[float, float]:
    """(combined score, string overlap) of ``query`` against one surface."""
    if query.strip().lower() == surface.strip().lower():
        return 1.0, 1.0
    overlap = string_overlap(query, surface)
    emb = cosine(cfg.embed(query), cfg.embed(surface))
    score = cfg.embed_weight * max(emb, 0.0) + cfg.string_weight * overlap
    return min(score, 1.0), overlap


def score_node(query: str, node: OntologyNode, cfg: GroundingConfig) -> tuple[float, float]:
    return max(similarity(query, s, cfg) for s in node.surfaces)


# -- values -------------------------------------------------------------------

def fragment_value(f: Fragment) -> tuple[Value, Optional[str]]:
    """Typed value and unit carried by a value fragment."""
    if f.kind == "boolean_value":
        return f.get("value") == "true", None
    if f.kind == "compound_value":
        return f.numeric_value, (f.get("category") or "").lower() or None
    if f.kind == "quantitative_value":
        return f.numeric_value, f.unit
    return " ".join(f.text.lower().split()), None


def compatible(node: OntologyNode, value_fragment: Fragment) -> bool:
    value, unit = fragment_value(value_fragment)
    if value_type_of(value) != node.value_type:
        return False
    if not node.expected_units:
        return True
    if node.value_type == "quantitative":
        keys = {k for k in (unit, value_fragment.category) if k}
        return bool(keys & node.expected_units)
    if node.value_type == "categorical":
        keys = {str(value), value_fragment.category or ""}
        return bool(keys & node.expected_units)
    return True


def ground_pair(p: IdentifierValuePair, o: Ontology, cfg: GroundingConfig) -> Optional[GroundedRecord]:
    query = p.identifier.text
    best = None
    for node in o.nodes:
        if not compatible(node, p.value):
            continue
        score, overlap = score_node(query, node, cfg)
        key = (-score, -overlap, node.node_id)
        if best is None or key < best[0]:
            best = (key, node, score)
    if best is None or best[2] < cfg.accept_threshold:
        log.info("no ontology node for %r -> %r", query, p.value.text)
        return None
    _, node, score = best
    value, unit = fragment_value(p.value)
    provenance = (p.identifier.span, p.value.span)
    return GroundedRecord(node.name, node.node_id, value, unit, provenance, "ns", score)


def ground_pairs(pairs: Sequence[IdentifierValuePair], o: Ontology, cfg: GroundingConfig
                 ) -> list[GroundedRecord]:
    out = []
    for p in pairs:
        rec = ground_pair(p, o, cfg)
        if rec is not None:
            out.append(rec)
    return out
