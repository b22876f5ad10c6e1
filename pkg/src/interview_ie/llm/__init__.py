"""LLM extraction backend."""

from .backend import (BackendError, BackendTimeout, ChatBackendConfig, HttpBackend, MissingReplayError,
                      ReplayBackend, TruncationError, make_backend, query_model, replay_key)
from .fieldmap import FieldMap, FieldMapError, FieldMapRow, load_field_map, map_fields
from .pipeline import LLMConfig, LLMResult, plan_jobs, run_llm_pipeline
from .prompt import PromptError, build_prompt, fenced_regions, prompt_template
from .schema import ExtractionSchema, SchemaError, SchemaField, load_schemas, schemas_for
from .verify import ValidatedRecord, has_overlap, verify_output

__all__ = [
    "BackendError", "BackendTimeout", "ChatBackendConfig", "HttpBackend", "MissingReplayError",
    "ReplayBackend", "TruncationError", "make_backend", "query_model", "replay_key", "FieldMap",
    "FieldMapError", "FieldMapRow", "load_field_map", "map_fields", "LLMConfig", "LLMResult",
    "plan_jobs", "run_llm_pipeline", "PromptError", "build_prompt", "fenced_regions",
    "prompt_template", "ExtractionSchema", "SchemaError", "SchemaField", "load_schemas",
    "schemas_for", "ValidatedRecord", "has_overlap", "verify_output",
]
