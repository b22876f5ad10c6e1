"""Batch runs over a manifest: both backends, evaluation and timings."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .assembly import load_assembly_config
from .config import RunConfig, RunConfigError, validate
from .evaluation import compare_backends, evaluate, load_gold
from .grounding import GroundedRecord, Ontology, load_ontology
from .llm.backend import ChatBackend, make_backend
from .llm.fieldmap import FieldMap, load_field_map
from .llm.pipeline import LLMConfig, run_llm_pipeline
from .llm.schema import ExtractionSchema, load_schemas
from .ns import COMMON, NSResources, run_ns_pipeline
from .preprocess import PreprocessConfig, load_preprocess_config, preprocess_pipeline
from .rules.annotation import FileAnnotator, annotate
from .rules.grammar import compile_rules
from .rules.heuristic import HeuristicAnnotator
from .rules.kb import load_kb
from .segmentation import KeywordMap, load_keyword_map, load_marker_patterns, segment_by_markers
from .timing import StageTimer, TimingReport
from .transcript import ManifestEntry, load_manifest, load_transcript

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Resources:
    """Everything loaded once per run and shared, read-only, by all workers."""
    preprocess: PreprocessConfig
    markers: tuple[str, ...]
    ontology: Ontology
    ns: Optional[NSResources] = None
    schemas: tuple[ExtractionSchema, ...] = ()
    keyword_map: KeywordMap = KeywordMap()
    field_map: Optional[FieldMap] = None
    llm: Optional[LLMConfig] = None
    chat: Optional[ChatBackend] = None


def load_resources(cfg: RunConfig) -> Resources:
    markers = load_marker_patterns(cfg.markers)
    ontology = load_ontology(cfg.ontology)
    pre = load_preprocess_config(cfg.remap, cfg.phrases, cfg.fillers, cfg.grades)
    ns = llm = chat = fm = None
    schemas: tuple = ()
    km = KeywordMap()
    if "ns" in cfg.backends:
        kbs = {d.name: load_kb(d, d.name) for d in sorted(Path(cfg.kb_dir).iterdir())
               if d.is_dir() and not d.name.startswith(("_", "."))}
        kbs.setdefault(COMMON, load_kb(Path(cfg.kb_dir) / COMMON, COMMON)
                       if (Path(cfg.kb_dir) / COMMON).is_dir() else None)
        kbs = {k: v for k, v in kbs.items() if v is not None}
        rules = compile_rules(Path(cfg.rules).read_text(encoding="utf-8"))
        ns = NSResources(rules, kbs, load_assembly_config(cfg.assembly), ontology,
                         cfg.grounding_config(), markers)
    if "llm" in cfg.backends:
        schemas = load_schemas(cfg.schemas)
        km = load_keyword_map(cfg.keyword_map)
        fm = load_field_map(cfg.field_map).validate(ontology, schemas)
        llm = LLMConfig(ontology, cfg.chat_config(), markers)
        chat = make_backend(llm.chat)
    return Resources(pre, markers, ontology, ns, schemas, km, fm, llm, chat)


@dataclass
class InterviewOutcome:
    interview_id: str
    domain: str = "unknown"
    records: dict[str, list[GroundedRecord]] = field(default_factory=dict)
    corrections: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    timers: dict[str, StageTimer] = field(default_factory=dict)
    failed: bool = False


def process_interview(entry: ManifestEntry, res: Resources, backends: tuple[str, ...]) -> InterviewOutcome:
    out = InterviewOutcome(entry.interview_id)
    shared = StageTimer()
    try:
        with shared("parse"):
            t = load_transcript(entry.path, entry.interview_id, entry.domain_hint)
        with shared("preprocess"):
            t, corrections = preprocess_pipeline(t, res.preprocess)
        out.corrections = corrections.to_records()
        segs = segment_by_markers(t, res.markers)
        out.domain = entry.domain_hint or next((s.domain for s in segs if s.domain != "unknown"), "unknown")
    except Exception as exc:  # isolate this interview from the rest of the batch
        out.failed = True
        out.errors.append(f"{type(exc).__name__}: {exc}")
        return out
    for backend in backends:
        timer = StageTimer(dict(shared.seconds))
        try:
            if backend == "ns":
                with timer("annotate"):
                    provider = (HeuristicAnnotator() if entry.annotations is None
                                else FileAnnotator(entry.annotations))
                    annos = annotate(t, provider)
                result = run_ns_pipeline(t, annos, res.ns, timer)
                out.records["ns"] = result.records
            else:
                result = run_llm_pipeline(t, res.schemas, res.keyword_map, res.field_map, res.llm,
                                          res.chat, timer)
                out.records["llm"] = result.records
                out.errors.extend(f"llm: {e}" for e in result.errors)
        except Exception as exc:
            out.errors.append(f"{backend}: {type(exc).__name__}: {exc}")
        out.timers[backend] = timer
    out.failed = not out.records
    return out


def _dump_jsonl(path: Path, rows) -> None:
    path.write_text("".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows),
                    encoding="utf-8")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@dataclass
class RunSummary:
    exit_code: int
    outcomes: list[InterviewOutcome]
    timings: TimingReport
    diagnostics: list[str] = field(default_factory=list)


def run(cfg: RunConfig) -> RunSummary:
    diags = validate(cfg)
    if diags:
        for d in diags:
            log.error("config: %s", d)
        return RunSummary(2, [], TimingReport(), diags)
    res = load_resources(cfg)
    manifest = load_manifest(cfg.manifest)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    backends = cfg.backends
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        outcomes = list(pool.map(lambda e: process_interview(e, res, backends), manifest.entries))

    timings = TimingReport()
    for o in outcomes:
        d = out_dir / o.interview_id
        d.mkdir(exist_ok=True)
        for b, recs in o.records.items():
            _dump_jsonl(d / f"records_{b}.jsonl", [r.to_record() for r in recs])
        _dump_jsonl(d / "corrections.jsonl", o.corrections)
        (d / "errors.txt").write_text("".join(e + "\n" for e in o.errors), encoding="utf-8")
        for b, timer in o.timers.items():
            timings.add(o.interview_id, b, timer)
        if o.interview_id in timings.interviews:
            _dump_json(d / "timings.json", timings.to_record()["interviews"][o.interview_id])
    _dump_json(out_dir / "timings.json", timings.to_record())
    (out_dir / "timings.tsv").write_text(timings.render(), encoding="utf-8")

    summary = {"backends": list(backends),
               "interviews": [{"interview_id": o.interview_id, "domain": o.domain, "failed": o.failed,
                               "errors": len(o.errors),
                               "records": {b: len(r) for b, r in sorted(o.records.items())}}
                              for o in outcomes]}
    if cfg.gold is not None:
        gold = load_gold(cfg.gold)
        domain_of = {o.interview_id: o.domain for o in outcomes}
        reports = {}
        for b in backends:
            preds = {o.interview_id: o.records[b] for o in outcomes if b in o.records}
            g = [x for x in gold if x.interview_id in preds]
            skipped = sorted({x.interview_id for x in gold} - set(preds))
            if skipped:
                summary.setdefault("unscored", {})[b] = skipped
            if not preds:
                continue
            reports[b] = evaluate(b, preds, g, domain_of, cfg.seed, cfg.bootstrap_resamples, cfg.bootstrap_unit)
            _dump_json(out_dir / f"evaluation_{b}.json", reports[b].to_record())
        if len(reports) == 2:
            try:
                table = compare_backends(reports, cfg.overlap_threshold)
            except ValueError as exc:
                summary["comparison_error"] = str(exc)
            else:
                (out_dir / "comparison.md").write_text(table.render(), encoding="utf-8")
                _dump_json(out_dir / "comparison.json", table.to_record())
    _dump_json(out_dir / "summary.json", summary)
    code = 1 if outcomes and all(o.failed for o in outcomes) else 0
    return RunSummary(code, outcomes, timings)


def run_or_raise(cfg: RunConfig) -> RunSummary:
    s = run(cfg)
    if s.diagnostics:
        raise RunConfigError(s.diagnostics)
    return s
