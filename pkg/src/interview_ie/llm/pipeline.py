"""LLM backend driver: segment, prompt, query, verify, map."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..grounding import GroundedRecord, Ontology
from ..segmentation import (DEFAULT_MARKERS, KeywordMap, TopicBlock, block_text, fine_segment,
                            segment_by_markers)
from ..timing import NullTimer
from ..transcript import Transcript
from .backend import BackendError, ChatBackend, ChatBackendConfig, make_backend
from .fieldmap import FieldMap, map_fields
from .prompt import build_prompt
from .schema import ExtractionSchema, schemas_for
from .verify import ValidatedRecord, verify_output

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LLMConfig:
    ontology: Ontology
    chat: ChatBackendConfig
    markers: tuple[str, ...] = DEFAULT_MARKERS


@dataclass
class LLMResult:
    records: list[GroundedRecord] = field(default_factory=list)
    validated: list[ValidatedRecord] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    requests: int = 0


@dataclass(frozen=True)
class _Job:
    block: TopicBlock
    domain: str
    schema: ExtractionSchema
    text: str


def plan_jobs(t: Transcript, schemas: Sequence[ExtractionSchema], km: KeywordMap,
              markers: Sequence[str] = DEFAULT_MARKERS) -> list[_Job]:
    jobs = []
    for seg in segment_by_markers(t, markers):
        for block in fine_segment(seg, t, km):
            text = block_text(t, block)
            if not text.strip():
                continue
            for s in schemas_for(schemas, block.topic_label, seg.domain, keyword_map_empty=len(km) == 0):
                jobs.append(_Job(block, seg.domain, s, text))
    return jobs


def _run_job(job: _Job, backend: ChatBackend) -> tuple[list[ValidatedRecord], Optional[str]]:
    prompt = build_prompt(job.schema, job.text)
    try:
        raw = backend.complete(prompt, job.schema.name, job.text, job.schema.json_schema())
    except BackendError as exc:
        return [], f"turns {job.block.start}-{job.block.end} [{job.block.topic_label}] {job.schema.name}: {exc}"
    return verify_output(raw, job.schema, job.text, job.block), None


def run_llm_pipeline(t: Transcript, schemas: Sequence[ExtractionSchema], km: KeywordMap, fm: FieldMap,
                     cfg: LLMConfig, backend: Optional[ChatBackend] = None, timer=None) -> LLMResult:
    """Per-block failures are collected in ``errors``; the interview carries on."""
    timer = timer or NullTimer()
    backend = backend or make_backend(cfg.chat)
    with timer("segment"):
        jobs = plan_jobs(t, schemas, km, cfg.markers)
    workers = max(1, min(cfg.chat.max_parallel_requests, len(jobs) or 1))
    with timer("query"):
        if workers == 1:
            results = [_run_job(j, backend) for j in jobs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda j: _run_job(j, backend), jobs))
    res = LLMResult(requests=len(jobs))
    for validated, err in results:
        res.validated.extend(validated)
        if err:
            log.warning("%s: %s", t.interview_id, err)
            res.errors.append(err)
    with timer("map"):
        res.records = map_fields(res.validated, fm, cfg.ontology)
    return res
