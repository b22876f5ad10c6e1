"""Run configuration and start-up validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .assembly import load_assembly_config
from .evaluation import load_gold
from .grounding import GroundingConfig, load_ontology
from .llm.backend import ENDPOINT_ENV, ChatBackendConfig, ReplayBackend
from .llm.fieldmap import load_field_map
from .llm.schema import load_schemas
from .preprocess import load_preprocess_config
from .rules.grammar import rule_problems
from .rules.kb import kb_problems_in_dir, load_kb
from .segmentation import load_keyword_map, load_marker_patterns
from .transcript import DOMAINS, load_manifest

BACKENDS = ("ns", "llm", "both")


def default_data_dir() -> Path:
    return Path(str(resources.files("interview_ie.data")))


class RunConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class RunConfig:
    manifest: Optional[Path] = None
    out: Path = Path("out")
    backend: str = "ns"
    gold: Optional[Path] = None
    seed: int = 0
    workers: int = 1
    remap: Optional[Path] = None
    phrases: Optional[Path] = None
    fillers: Optional[Path] = None
    grades: Optional[Path] = None
    markers: Optional[Path] = None
    keyword_map: Optional[Path] = None
    rules: Optional[Path] = None
    kb_dir: Optional[Path] = None  # holds one sub-directory per domain plus "common"
    assembly: Optional[Path] = None
    ontology: Optional[Path] = None
    schemas: Optional[Path] = None
    field_map: Optional[Path] = None
    chat_endpoint: Optional[str] = None
    replay: Optional[Path] = None
    max_parallel_requests: int = 1
    request_timeout: float = 120.0
    embed_weight: float = 0.5
    accept_threshold: float = 0.5
    overlap_threshold: float = 0.5
    bootstrap_resamples: int = 10000
    bootstrap_unit: str = "per_item"

    @classmethod
    def with_defaults(cls, **kw) -> "RunConfig":
        """Fill every unset resource path from the packaged data directory."""
        data = default_data_dir()
        defaults = {"remap": data / "remap.csv", "phrases": data / "phrases.txt",
                    "fillers": data / "fillers.txt", "grades": data / "grades.txt",
                    "markers": data / "markers.txt", "keyword_map": data / "keywords.csv",
                    "rules": data / "rules.yaml", "kb_dir": data / "kb", "assembly": data / "assembly.cfg",
                    "ontology": data / "ontology.csv", "schemas": data / "schemas.yaml",
                    "field_map": data / "field_map.csv"}
        for k, v in defaults.items():
            if kw.get(k) is None:
                kw[k] = v
        return cls(**kw)

    @property
    def backends(self) -> tuple[str, ...]:
        return ("ns", "llm") if self.backend == "both" else (self.backend,)

    def chat_config(self) -> ChatBackendConfig:
        common = {"max_parallel_requests": self.max_parallel_requests,
                  "request_timeout": self.request_timeout}
        if self.replay is not None:
            return ChatBackendConfig.replay(self.replay, **common)
        return ChatBackendConfig.http(self.chat_endpoint, **common)

    def grounding_config(self) -> GroundingConfig:
        return GroundingConfig(self.embed_weight, self.accept_threshold)


_PATH_FIELDS = {f.name for f in fields(RunConfig)} - {
    "backend", "seed", "workers", "chat_endpoint", "max_parallel_requests", "request_timeout",
    "embed_weight", "accept_threshold", "overlap_threshold", "bootstrap_resamples", "bootstrap_unit"}


def load_run_config(path: str | Path, **overrides) -> RunConfig:
    """YAML mapping of RunConfig fields; relative paths resolve against the
    file's directory.  ``overrides`` (e.g. from flags) win when not None."""
    path = Path(path)
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise RunConfigError([f"{path}: config must be a mapping"])
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise RunConfigError([f"{path}: unknown config key {k!r}" for k in unknown])
    for k in list(data):
        if k in _PATH_FIELDS and data[k] is not None:
            p = Path(data[k])
            data[k] = p if p.is_absolute() else path.parent / p
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.with_defaults(**data)


def validate(cfg: RunConfig) -> list[str]:
    """Check every configured file without running extraction.  Returns all
    problems found; an empty list means the run may start."""
    diags: list[str] = []

    def need(name: str) -> Optional[Path]:
        p = getattr(cfg, name)
        if p is None:
            diags.append(f"{name}: no path configured")
            return None
        if not Path(p).exists():
            diags.append(f"{name}: {p} does not exist")
            return None
        return Path(p)

    def guard(name, fn):
        try:
            return fn()
        except (OSError, ValueError, RuntimeError) as exc:
            diags.append(f"{name}: {exc}")
            return None

    if cfg.backend not in BACKENDS:
        diags.append(f"backend: must be one of {', '.join(BACKENDS)}")
    if cfg.workers < 1:
        diags.append("workers: must be at least 1")
    if cfg.bootstrap_unit not in ("per_item", "per_interview"):
        diags.append("bootstrap_unit: must be per_item or per_interview")
    if not 0 <= cfg.overlap_threshold <= 1:
        diags.append("overlap_threshold: must be in [0, 1]")
    guard("grounding", cfg.grounding_config)

    manifest = need("manifest")
    if manifest is not None:
        m = guard("manifest", lambda: load_manifest(manifest))
        if m is not None:
            for e in m:
                if not e.path.exists():
                    diags.append(f"manifest: transcript {e.path} for {e.interview_id} does not exist")
                # without an annotation column the built-in heuristic annotator is used
                if "ns" in cfg.backends and e.annotations is not None and not e.annotations.exists():
                    diags.append(f"manifest: annotation file {e.annotations} for {e.interview_id} does not exist")
    pre = {k: need(k) for k in ("remap", "phrases", "fillers", "grades")}
    if all(pre.values()):
        guard("preprocess", lambda: load_preprocess_config(**pre))
    if (p := need("markers")) is not None:
        guard("markers", lambda: load_marker_patterns(p))
    ontology = None
    if (p := need("ontology")) is not None:
        ontology = guard("ontology", lambda: load_ontology(p))
    if cfg.gold is not None and (p := need("gold")) is not None:
        guard("gold", lambda: load_gold(p))

    if "ns" in cfg.backends:
        if (p := need("rules")) is not None:
            diags.extend(f"rules: {d}" for d in rule_problems(p.read_text(encoding="utf-8")))
        categories: set[str] = set()
        kb_ok = True
        if (p := need("kb_dir")) is not None:
            for d in sorted(x for x in p.iterdir() if x.is_dir() and not x.name.startswith(("_", "."))):
                if d.name != "common" and d.name not in DOMAINS:
                    diags.append(f"kb_dir: unknown domain directory {d.name!r}")
                problems = kb_problems_in_dir(d, d.name)
                diags.extend(f"kb {d.name}: {x}" for x in problems)
                kb_ok = kb_ok and not problems
                if not problems:
                    categories |= set(load_kb(d, d.name).identifiers)
        if (p := need("assembly")) is not None:
            a = guard("assembly", lambda: load_assembly_config(p))
            # a broken KB hides its categories; checking against the rest
            # would only repeat that problem
            if a is not None and categories and kb_ok:
                diags.extend(f"assembly: {x}" for x in a.problems(categories))
    if "llm" in cfg.backends:
        schemas = ()
        if (p := need("schemas")) is not None:
            schemas = guard("schemas", lambda: load_schemas(p)) or ()
        if (p := need("keyword_map")) is not None:
            guard("keyword_map", lambda: load_keyword_map(p))
        if (p := need("field_map")) is not None:
            fm = guard("field_map", lambda: load_field_map(p))
            if fm is not None and ontology is not None:
                diags.extend(f"field_map: {x}" for x in fm.problems(ontology, schemas))
        if cfg.replay is not None:
            if need("replay") is not None:
                guard("replay", lambda: ReplayBackend(cfg.replay))
        elif not (cfg.chat_endpoint or os.environ.get(ENDPOINT_ENV)):
            diags.append(f"chat backend: pass --replay or --chat-endpoint (or set {ENDPOINT_ENV})")
        else:
            guard("chat backend", cfg.chat_config)
    return diags


