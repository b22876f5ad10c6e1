"""Static mapping of schema fields onto ontology nodes."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..grounding import GroundedRecord, Ontology, value_type_of
from .schema import ExtractionSchema
from .verify import ValidatedRecord

log = logging.getLogger(__name__)

HEADER = ("schema", "field", "node_id", "unit")
_NODE_TYPE_FOR = {"integer": "quantitative", "number": "quantitative", "boolean": "boolean",
                  "string": "categorical", "string_list": "categorical"}


class FieldMapError(ValueError):
    pass


@dataclass(frozen=True)
class FieldMapRow:
    schema_name: str
    field_name: str
    node_id: str
    # literal unit, or "$other_field" to take the unit from a sibling field
    unit: Optional[str] = None
    line: int = 0


@dataclass(frozen=True)
class FieldMap:
    rows: tuple[FieldMapRow, ...]

    def __post_init__(self):
        dup = self.duplicate_problems()
        if dup:
            raise FieldMapError("; ".join(dup))

    def duplicate_problems(self) -> list[str]:
        seen = {}
        out = []
        for r in self.rows:
            key = (r.schema_name, r.field_name)
            if key in seen:
                out.append(f"row {r.line}: {r.schema_name}.{r.field_name} already mapped on row {seen[key]}")
            else:
                seen[key] = r.line
        return out

    def lookup(self, schema_name: str, field_name: str) -> Optional[FieldMapRow]:
        for r in self.rows:
            if r.schema_name == schema_name and r.field_name == field_name:
                return r
        return None

    def problems(self, o: Ontology, schemas: Sequence[ExtractionSchema] = ()) -> list[str]:
        out = []
        by_name = {s.name: s for s in schemas}
        for r in self.rows:
            where = f"field map row {r.line} ({r.schema_name}.{r.field_name})"
            if r.node_id not in o:
                out.append(f"{where}: unknown ontology node {r.node_id!r}")
                node = None
            else:
                node = o.get(r.node_id)
            if not by_name:
                continue
            s = by_name.get(r.schema_name)
            if s is None:
                out.append(f"{where}: unknown schema {r.schema_name!r}")
                continue
            f = s.field(r.field_name)
            if f is None:
                out.append(f"{where}: schema has no field {r.field_name!r}")
                continue
            if node is not None and _NODE_TYPE_FOR[f.field_type] != node.value_type:
                out.append(f"{where}: {f.field_type} field cannot feed {node.value_type} node {r.node_id!r}")
            if r.unit and r.unit.startswith("$") and s.field(r.unit[1:]) is None:
                out.append(f"{where}: unit refers to missing field {r.unit[1:]!r}")
        return out

    def validate(self, o: Ontology, schemas: Sequence[ExtractionSchema] = ()) -> "FieldMap":
        problems = self.problems(o, schemas)
        if problems:
            raise FieldMapError("; ".join(problems))
        return self


def load_field_map(path: str | Path) -> FieldMap:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise FieldMapError(f"{path}: header must be {','.join(HEADER)}")
        for n, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) not in (3, 4):
                raise FieldMapError(f"{path}:{n}: expected 3 or 4 columns, got {len(row)}")
            schema, fld, node = (c.strip() for c in row[:3])
            unit = row[3].strip() if len(row) == 4 and row[3].strip() else None
            rows.append(FieldMapRow(schema, fld, node, unit, n))
    try:
        return FieldMap(tuple(rows))
    except FieldMapError as exc:
        raise FieldMapError(f"{path}: {exc}") from None


def _canonical(value):
    if isinstance(value, str):
        return " ".join(value.lower().split())
    return value


def map_fields(records: Sequence[ValidatedRecord], fm: FieldMap, o: Ontology) -> list[GroundedRecord]:
    siblings: dict[tuple, dict[str, ValidatedRecord]] = {}
    for r in records:
        siblings.setdefault((r.schema_name, r.record_index, r.source_block), {})[r.field_name] = r
    out = []
    for r in records:
        row = fm.lookup(r.schema_name, r.field_name)
        if row is None:
            log.info("no field map row for %s.%s; dropped", r.schema_name, r.field_name)
            continue
        if row.node_id not in o:
            log.warning("field map node %r missing from ontology; dropped", row.node_id)
            continue
        node = o.get(row.node_id)
        unit = row.unit
        if unit and unit.startswith("$"):
            sib = siblings[(r.schema_name, r.record_index, r.source_block)].get(unit[1:])
            unit = _canonical(sib.value) if sib is not None and isinstance(sib.value, str) else None
        values = r.value if isinstance(r.value, tuple) else (r.value,)
        b = r.source_block
        prov = ((b.start, b.end),) if b is not None else ()
        for v in values:
            v = _canonical(v)
            if value_type_of(v) != node.value_type:
                log.info("%s.%s: %r does not fit %s node %r; dropped",
                         r.schema_name, r.field_name, v, node.value_type, node.node_id)
                continue
            out.append(GroundedRecord(node.name, node.node_id, v, unit, prov, "llm", None))
    return out
