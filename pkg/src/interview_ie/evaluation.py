"""Exact-match scoring against gold records, in total and core modes, with
bootstrap confidence intervals and a two-backend comparison table."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from .grounding import GroundedRecord

log = logging.getLogger(__name__)

MODES = ("total", "core")
GOLD_HEADER = ("interview_id", "node_id", "value", "unit", "variant_group", "essential")
_NUM_RE = re.compile(r"^[-+]?(\d{1,3}(,\d{3})+|\d+)?(\.\d+)?$")


class EvaluationError(ValueError):
    pass


def canonical_value(v: Any):
    """Normalise a value for exact matching: numbers compare numerically,
    booleans as true/false, strings case- and whitespace-insensitively."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        f = float(v)
        return int(f) if f.is_integer() else round(f, 9)
    s = " ".join(str(v).lower().split())
    if s and _NUM_RE.match(s) and any(c.isdigit() for c in s):
        return canonical_value(float(s.replace(",", "")))
    return s


def canonical_unit(u: Optional[str]) -> Optional[str]:
    if u is None:
        return None
    u = " ".join(u.lower().split())
    return u or None


def match_key(node_id: str, value, unit) -> tuple:
    return node_id, canonical_value(value), canonical_unit(unit)


@dataclass(frozen=True)
class GoldRecord:
    interview_id: str
    node_id: str
    value: Any
    unit: Optional[str] = None
    variant_group: Optional[str] = None
    essential: bool = True
    record_id: Optional[str] = None

    @property
    def key(self) -> tuple:
        return match_key(self.node_id, self.value, self.unit)

    @property
    def rid(self) -> str:
        if self.record_id:
            return self.record_id
        node, value, unit = self.key
        return f"{self.interview_id}|{node}|{value}|{unit or ''}"


def validate_gold(gold: Sequence[GoldRecord]) -> list[str]:
    out = []
    seen = set()
    group_node: dict[tuple, str] = {}
    for g in gold:
        if g.rid in seen:
            out.append(f"duplicate gold record {g.rid!r}")
        seen.add(g.rid)
        if g.value is None or (isinstance(g.value, str) and not g.value.strip()):
            out.append(f"gold record {g.rid!r} has no value")
        if g.variant_group:
            k = (g.interview_id, g.variant_group)
            if group_node.setdefault(k, g.node_id) != g.node_id:
                out.append(f"variant group {g.variant_group!r} in {g.interview_id} mixes node ids")
    return out


def load_gold(path: str | Path) -> list[GoldRecord]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != GOLD_HEADER:
            raise EvaluationError(f"{path}: header must be {','.join(GOLD_HEADER)}")
        for n, row in enumerate(reader, start=2):
            ess = (row["essential"] or "true").strip().lower()
            if ess not in ("true", "false", "1", "0", "yes", "no"):
                raise EvaluationError(f"{path}:{n}: essential must be true or false")
            out.append(GoldRecord(row["interview_id"].strip(), row["node_id"].strip(), row["value"].strip(),
                                  (row["unit"] or "").strip() or None,
                                  (row["variant_group"] or "").strip() or None,
                                  ess in ("true", "1", "yes"), f"{Path(path).name}:{n}"))
    problems = validate_gold(out)
    if problems:
        raise EvaluationError(f"{path}: " + "; ".join(problems))
    return out


# -- matching -----------------------------------------------------------------

@dataclass(frozen=True)
class MatchDetail:
    # (prediction index, gold record id or None, outcome) with outcome in
    # tp | fp | ignored
    predictions: tuple[tuple[int, Optional[str], str], ...]
    missed: tuple[str, ...]  # gold units counted as fn
    excluded: tuple[str, ...]  # gold records left out of fn (matched variant siblings)

    def outcomes(self) -> list[str]:
        """Per-item outcome vector used as the bootstrap unit."""
        return [o for _, _, o in self.predictions if o != "ignored"] + ["fn"] * len(self.missed)


def match_records(pred: Sequence[GroundedRecord], gold: Sequence[GoldRecord], mode: str
                  ) -> tuple[int, int, int, MatchDetail]:
    if mode not in MODES:
        raise EvaluationError(f"unknown mode {mode!r}")
    problems = validate_gold(gold)
    if problems:
        raise EvaluationError("; ".join(problems))
    if mode == "total":
        pool = list(gold)
        units = [(g.rid, [g]) for g in pool]
    else:
        pool = [g for g in gold if g.essential]
        grouped: dict[str, list[GoldRecord]] = {}
        units = []
        for g in pool:
            if g.variant_group:
                k = f"group:{g.interview_id}:{g.variant_group}"
                if k not in grouped:
                    grouped[k] = []
                    units.append((k, grouped[k]))
                grouped[k].append(g)
            else:
                units.append((g.rid, [g]))
    unit_of = {g.rid: uid for uid, members in units for g in members}
    nonessential = {g.key for g in gold if not g.essential} if mode == "core" else set()
    consumed_gold: set[str] = set()
    matched_units: set[str] = set()
    rows = []
    for i, p in enumerate(pred):
        k = match_key(p.grounding_id, p.value, p.unit)
        hit = None
        for g in pool:
            if g.rid in consumed_gold or g.key != k:
                continue
            if mode == "core" and unit_of[g.rid] in matched_units:
                continue
            hit = g
            break
        if hit is not None:
            consumed_gold.add(hit.rid)
            matched_units.add(unit_of[hit.rid])
            rows.append((i, hit.rid, "tp"))
        elif mode == "core" and (k in nonessential or any(
                g.key == k and unit_of[g.rid] in matched_units for g in pool)):
            # non-essential facts and further members of a matched variant
            # group neither help nor hurt the core score
            rows.append((i, None, "ignored"))
        else:
            rows.append((i, None, "fp"))
    missed, excluded = [], []
    if mode == "total":
        hit_groups = {(g.interview_id, g.variant_group) for g in pool
                      if g.rid in consumed_gold and g.variant_group}
        for g in pool:
            if g.rid in consumed_gold:
                continue
            if g.variant_group and (g.interview_id, g.variant_group) in hit_groups:
                excluded.append(g.rid)
            else:
                missed.append(g.rid)
    else:
        missed = [uid for uid, _ in units if uid not in matched_units]
    tp = sum(1 for r in rows if r[2] == "tp")
    fp = sum(1 for r in rows if r[2] == "fp")
    return tp, fp, len(missed), MatchDetail(tuple(rows), tuple(missed), tuple(excluded))


# -- metrics ------------------------------------------------------------------

def harmonic(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    mode: str

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, mode: str) -> "Metrics":
        if tp + fp + fn == 0:
            log.info("no gold and no predictions: scoring as 100")
            return cls(100.0, 100.0, 100.0, 0, 0, 0, mode)
        p = 100.0 * tp / (tp + fp) if tp + fp else 0.0
        r = 100.0 * tp / (tp + fn) if tp + fn else 0.0
        return cls(p, r, harmonic(p, r), tp, fp, fn, mode)

    def rounded(self, ndigits: int = 1) -> tuple[float, float, float]:
        return round(self.precision, ndigits), round(self.recall, ndigits), round(self.f1, ndigits)

    def to_record(self) -> dict:
        return {"mode": self.mode, "precision": round(self.precision, 4), "recall": round(self.recall, 4),
                "f1": round(self.f1, 4), "tp": self.tp, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class AveragedMetrics:
    """Macro average of several Metrics.  The F1 here is the mean of the
    per-item F1 values, so it need not equal the harmonic mean of P and R."""
    precision: float
    recall: float
    f1: float
    mode: str
    n: int

    @classmethod
    def of(cls, items: Sequence["Metrics | AveragedMetrics"], mode: str) -> "AveragedMetrics":
        if not items:
            raise EvaluationError("cannot average zero metrics")
        return cls(float(np.mean([m.precision for m in items])), float(np.mean([m.recall for m in items])),
                   float(np.mean([m.f1 for m in items])), mode, len(items))

    def recombined_f1(self) -> float:
        return harmonic(self.precision, self.recall)

    def to_record(self) -> dict:
        return {"mode": self.mode, "precision": round(self.precision, 4), "recall": round(self.recall, 4),
                "f1": round(self.f1, 4), "n": self.n}


def score(pred: Sequence[GroundedRecord], gold: Sequence[GoldRecord], mode: str) -> Metrics:
    tp, fp, fn, _ = match_records(pred, gold, mode)
    return Metrics.from_counts(tp, fp, fn, mode)


# -- bootstrap ----------------------------------------------------------------

@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float = 95.0
    resamples: int = 10000
    point: Optional[float] = None

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise EvaluationError("interval lower bound exceeds upper bound")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def overlap_fraction(self, other: "ConfidenceInterval") -> float:
        """Overlap length relative to the narrower interval (1.0 when a
        zero-width interval lies inside the other)."""
        lo, hi = max(self.lower, other.lower), min(self.upper, other.upper)
        if hi < lo:
            return 0.0
        narrow = min(self.width, other.width)
        return 1.0 if narrow == 0 else (hi - lo) / narrow

    def to_record(self) -> dict:
        return {"lower": round(self.lower, 4), "upper": round(self.upper, 4), "level": self.level,
                "resamples": self.resamples}


def f1_of_outcomes(outcomes: Sequence[str]) -> float:
    tp = sum(1 for o in outcomes if o == "tp")
    fp = sum(1 for o in outcomes if o == "fp")
    fn = sum(1 for o in outcomes if o == "fn")
    return Metrics.from_counts(tp, fp, fn, "total").f1


def bootstrap_ci(per_item_outcomes: Sequence, statistic: Callable[[list], float] = f1_of_outcomes,
                 resamples: int = 10000, level: float = 95.0, seed: int = 0) -> ConfidenceInterval:
    """Percentile bootstrap: resample items with replacement, recompute the
    statistic, take the tail percentiles with linear interpolation."""
    items = list(per_item_outcomes)
    if not items:
        raise EvaluationError("bootstrap needs at least one item")
    if resamples < 1 or not 0 < level < 100:
        raise EvaluationError("invalid resample count or level")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(items), size=(resamples, len(items)))
    stats = np.fromiter((statistic([items[i] for i in row]) for row in idx), dtype=float, count=resamples)
    lo, hi = percentile_bounds(stats, level)
    return ConfidenceInterval(lo, hi, level, resamples, float(statistic(items)))


def percentile_bounds(stats: Sequence[float], level: float = 95.0) -> tuple[float, float]:
    """Equal-tailed percentile bounds of a statistic's resample values."""
    tail = (100.0 - level) / 2
    lo, hi = np.percentile(np.asarray(stats, dtype=float), [tail, 100.0 - tail])
    return float(lo), float(max(lo, hi))


# -- reports ------------------------------------------------------------------

Cell = tuple[str, str, str]  # (row, mode, metric)
METRIC_NAMES = ("precision", "recall", "f1")


@dataclass
class EvalReport:
    backend: str
    # domain -> mode -> averaged metrics over that domain's interviews
    domains: dict[str, dict[str, AveragedMetrics]]
    interviews: dict[str, dict[str, Metrics]] = field(default_factory=dict)
    intervals: dict[Cell, ConfidenceInterval] = field(default_factory=dict)

    def average(self, mode: str) -> AveragedMetrics:
        return AveragedMetrics.of([d[mode] for d in self.domains.values()], mode)

    def row(self, name: str) -> dict[str, AveragedMetrics]:
        if name == "average":
            return {m: self.average(m) for m in MODES}
        return self.domains[name]

    def to_record(self) -> dict:
        return {"backend": self.backend,
                "interviews": {k: {m: v[m].to_record() for m in MODES} for k, v in sorted(self.interviews.items())},
                "domains": {k: {m: v[m].to_record() for m in MODES} for k, v in sorted(self.domains.items())},
                "average": {m: self.average(m).to_record() for m in MODES},
                "intervals": [{"row": r, "mode": m, "metric": x, **ci.to_record()}
                              for (r, m, x), ci in sorted(self.intervals.items())]}


def evaluate(backend: str, preds: Mapping[str, Sequence[GroundedRecord]], gold: Sequence[GoldRecord],
             domain_of: Mapping[str, str], seed: int = 0, resamples: int = 10000,
             unit: str = "per_item") -> EvalReport:
    """Score every interview, macro-average per domain and attach F1
    intervals.  ``unit`` picks the bootstrap item: individual match outcomes
    (``per_item``) or whole interviews (``per_interview``)."""
    if unit not in ("per_item", "per_interview"):
        raise EvaluationError(f"unknown bootstrap unit {unit!r}")
    problems = validate_gold(gold)
    if problems:
        raise EvaluationError("; ".join(problems))
    by_interview: dict[str, list[GoldRecord]] = {}
    for g in gold:
        by_interview.setdefault(g.interview_id, []).append(g)
    unknown = sorted(set(by_interview) - set(preds))
    if unknown:
        raise EvaluationError(f"gold names interviews with no predictions: {', '.join(unknown)}")
    per: dict[str, dict[str, Metrics]] = {}
    outcomes: dict[tuple[str, str], list] = {}
    for iid in sorted(preds):
        per[iid] = {}
        for mode in MODES:
            tp, fp, fn, detail = match_records(preds[iid], by_interview.get(iid, []), mode)
            per[iid][mode] = Metrics.from_counts(tp, fp, fn, mode)
            outcomes[(iid, mode)] = detail.outcomes()
    domains: dict[str, dict[str, AveragedMetrics]] = {}
    intervals: dict[Cell, ConfidenceInterval] = {}
    for d in sorted(set(domain_of[i] for i in per)):
        ids = [i for i in sorted(per) if domain_of[i] == d]
        domains[d] = {m: AveragedMetrics.of([per[i][m] for i in ids], m) for m in MODES}
        for k, mode in enumerate(MODES):
            if unit == "per_item":
                items = [o for i in ids for o in outcomes[(i, mode)]]
                stat = f1_of_outcomes
            else:
                items = [per[i][mode].f1 for i in ids]
                stat = lambda xs: float(np.mean(xs))
            if items:
                intervals[(d, mode, "f1")] = bootstrap_ci(items, stat, resamples, seed=seed + k)
    return EvalReport(backend, domains, per, intervals)


# -- comparison ---------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonCell:
    row: str
    mode: str
    metric: str
    values: tuple[tuple[str, float], ...]
    bold: Optional[str]  # backend holding the higher value, None on a tie
    significant: Optional[bool]  # None when intervals are unavailable


@dataclass(frozen=True)
class ComparisonTable:
    backends: tuple[str, ...]
    rows: tuple[str, ...]
    cells: tuple[ComparisonCell, ...]
    intervals: Mapping[tuple[str, Cell], ConfidenceInterval]
    overlap_threshold: float

    def cell(self, row: str, mode: str, metric: str) -> ComparisonCell:
        for c in self.cells:
            if (c.row, c.mode, c.metric) == (row, mode, metric):
                return c
        raise KeyError((row, mode, metric))

    def bold_pattern(self) -> dict[Cell, Optional[str]]:
        return {(c.row, c.mode, c.metric): c.bold for c in self.cells}

    def notes(self) -> list[str]:
        sig = [c for c in self.cells if c.significant]
        if not sig:
            return ["no significant difference between backends"]
        return [f"{c.row} {c.metric} ({c.mode}): intervals overlap by less than "
                f"{self.overlap_threshold:.0%} of the narrower one; {c.bold} is higher" for c in sig]

    def render(self) -> str:
        head = "| backend | row | " + " | ".join(f"{x[0].upper()} {m}" for x in METRIC_NAMES for m in MODES) + " |"
        lines = [head, "|" + "---|" * (2 + len(METRIC_NAMES) * len(MODES))]
        for b in self.backends:
            for r in self.rows:
                parts = []
                for metric in METRIC_NAMES:
                    for mode in MODES:
                        c = self.cell(r, mode, metric)
                        v = f"{dict(c.values)[b]:.1f}"
                        ci = self.intervals.get((b, (r, mode, metric)))
                        if ci is not None:
                            v += f" ({ci.lower:.1f}-{ci.upper:.1f})"
                        parts.append(f"**{v}**" if c.bold == b else v)
                lines.append(f"| {b} | {r} | " + " | ".join(parts) + " |")
        return "\n".join(lines + [""] + [f"- {n}" for n in self.notes()]) + "\n"

    def to_record(self) -> dict:
        return {"backends": list(self.backends), "rows": list(self.rows),
                "overlap_threshold": self.overlap_threshold,
                "cells": [{"row": c.row, "mode": c.mode, "metric": c.metric,
                           "values": {b: round(v, 4) for b, v in c.values}, "bold": c.bold,
                           "significant": c.significant} for c in self.cells],
                "notes": self.notes()}


def compare_backends(reports: Mapping[str, EvalReport], overlap_threshold: float = 0.5,
                     ndigits: int = 1) -> ComparisonTable:
    """Per-domain and average rows; the higher value of each cell (at display
    precision) is bolded and a cell is flagged when the two intervals overlap
    by less than ``overlap_threshold`` of the narrower interval."""
    if len(reports) != 2:
        raise EvaluationError("comparison needs exactly two backends")
    names = tuple(reports)
    a, b = (reports[n] for n in names)
    if set(a.domains) != set(b.domains) or set(a.interviews) != set(b.interviews):
        raise EvaluationError("reports cover different interviews")
    rows = tuple(sorted(a.domains)) + ("average",)
    cells = []
    intervals = {}
    for r in rows:
        ra, rb = a.row(r), b.row(r)
        for mode in MODES:
            for metric in METRIC_NAMES:
                va, vb = getattr(ra[mode], metric), getattr(rb[mode], metric)
                da, db = round(va, ndigits), round(vb, ndigits)
                bold = names[0] if da > db else names[1] if db > da else None
                cia, cib = a.intervals.get((r, mode, metric)), b.intervals.get((r, mode, metric))
                sig = None
                if cia is not None and cib is not None:
                    sig = bold is not None and cia.overlap_fraction(cib) < overlap_threshold
                    intervals[(names[0], (r, mode, metric))] = cia
                    intervals[(names[1], (r, mode, metric))] = cib
                cells.append(ComparisonCell(r, mode, metric, ((names[0], va), (names[1], vb)), bold, sig))
    return ComparisonTable(names, rows, tuple(cells), intervals, overlap_threshold)
