"""Extraction schemas: typed field lists with guidelines and one worked
example each, loaded from YAML files."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import yaml

FIELD_TYPES = ("integer", "number", "boolean", "string", "string_list")

_JSON_TYPES = {"integer": {"type": "integer"}, "number": {"type": "number"},
               "boolean": {"type": "boolean"}, "string": {"type": "string"},
               "string_list": {"type": "array", "items": {"type": "string"}}}


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class SchemaField:
    name: str
    field_type: str
    optional: bool = True
    guideline: str = ""


def conforms(value: Any, field_type: str) -> bool:
    """Strict type check used for worked examples and verified records."""
    if field_type == "boolean":
        return isinstance(value, bool)
    if field_type == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if field_type == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if field_type == "string":
        return isinstance(value, str)
    if field_type == "string_list":
        return isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value)
    return False


@dataclass(frozen=True)
class ExtractionSchema:
    name: str
    description: str
    fields: tuple[SchemaField, ...]
    example_input: str
    example_output: tuple[dict, ...]
    topic_labels: frozenset[str] = frozenset()
    # optional restriction to coarse domains; empty means any
    domains: frozenset[str] = frozenset()

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise SchemaError(f"schema {self.name!r}: " + "; ".join(problems))

    def __hash__(self):
        return hash(self.name)

    def problems(self) -> list[str]:
        out = []
        if not re.fullmatch(r"[A-Za-z_]\w*", self.name or ""):
            out.append(f"invalid schema name {self.name!r}")
        names = [f.name for f in self.fields]
        for n in sorted({n for n in names if names.count(n) > 1}):
            out.append(f"duplicate field {n!r}")
        if not self.fields:
            out.append("no fields declared")
        for f in self.fields:
            if f.field_type not in FIELD_TYPES:
                out.append(f"field {f.name!r} has unknown type {f.field_type!r}")
        types = {f.name: f.field_type for f in self.fields}
        for i, rec in enumerate(self.example_output):
            if not isinstance(rec, dict):
                out.append(f"worked example record {i} is not an object")
                continue
            for k, v in rec.items():
                if k not in types:
                    out.append(f"worked example record {i} uses undeclared field {k!r}")
                elif v is not None and not conforms(v, types[k]):
                    out.append(f"worked example value {v!r} for {k!r} is not {types[k]}")
        return out

    def field(self, name: str) -> Optional[SchemaField]:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    def json_schema(self) -> dict:
        """Structural description handed to the model (and to endpoints that
        support schema-constrained decoding)."""
        props = {}
        for f in self.fields:
            t = dict(_JSON_TYPES[f.field_type])
            prop = {"anyOf": [t, {"type": "null"}], "default": None} if f.optional else t
            prop = {**prop, "description": f.guideline,
                    "title": f.name.replace("_", " ").title()}
            props[f.name] = prop
        out = {"title": self.name, "description": self.description, "type": "object",
               "properties": props}
        required = [f.name for f in self.fields if not f.optional]
        if required:
            out["required"] = required
        return out

    def describe(self) -> str:
        return json.dumps(self.json_schema(), indent=2, ensure_ascii=False)

    def describe_example(self) -> str:
        out = json.dumps(list(self.example_output), ensure_ascii=False)
        return f"Input: {json.dumps(self.example_input, ensure_ascii=False)}\nOutput: {out}"


def schema_from_dict(d: dict, source: str = "<schema>") -> ExtractionSchema:
    try:
        fields = tuple(SchemaField(str(f["name"]), str(f.get("type", "string")),
                                   bool(f.get("optional", True)), str(f.get("guideline", "")))
                       for f in d.get("fields") or ())
        ex = d.get("example") or {}
        output = ex.get("output") or []
        if isinstance(output, dict):
            output = [output]
        return ExtractionSchema(str(d["name"]), str(d.get("description", "")), fields,
                                str(ex.get("input", "")), tuple(output),
                                frozenset(d.get("topics") or ()), frozenset(d.get("domains") or ()))
    except (KeyError, TypeError, AttributeError) as exc:
        raise SchemaError(f"{source}: malformed schema ({exc})") from None


def load_schemas(path: str | Path) -> tuple[ExtractionSchema, ...]:
    """Load every schema from a YAML file (a list of schema documents) or a
    directory of such files, in file-name order."""
    path = Path(path)
    files = sorted(path.glob("*.yaml")) + sorted(path.glob("*.yml")) if path.is_dir() else [path]
    if not files:
        raise SchemaError(f"no schema files under {path}")
    out = []
    for f in files:
        try:
            docs = yaml.safe_load(f.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise SchemaError(f"{f}: {exc}") from None
        if isinstance(docs, dict):
            docs = [docs]
        for d in docs or ():
            out.append(schema_from_dict(d, str(f)))
    names = [s.name for s in out]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise SchemaError(f"duplicate schema names: {', '.join(dup)}")
    return tuple(out)


def schemas_for(schemas: Sequence[ExtractionSchema], topic_label: str, domain: Optional[str] = None,
                keyword_map_empty: bool = False) -> list[ExtractionSchema]:
    """Schemas applicable to a block; all of them when no keyword map is in use."""
    out = []
    for s in schemas:
        if s.domains and domain in _KNOWN_DOMAINS and domain not in s.domains:
            continue
        if keyword_map_empty or topic_label in s.topic_labels:
            out.append(s)
    return out


_KNOWN_DOMAINS = ("pork", "crop", "dairy")
