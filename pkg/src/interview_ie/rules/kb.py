"""Domain knowledge bases: value categories, units, identifier cues and
yes/no cues, loaded from small CSV files."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

KB_FILES = ("categories.csv", "units.csv", "identifiers.csv", "booleans.csv")

STOPWORDS = frozenset({"of", "those", "the", "a", "an"})


class KBError(ValueError):
    pass


def stem(word: str) -> str:
    """Plural ``s`` stripping; nothing more aggressive."""
    w = word.lower()
    if len(w) > 3 and w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    return w


def content_words(text: str) -> list[str]:
    return [stem(w) for w in re.findall(r"[a-z0-9%]+(?:[-'][a-z0-9]+)*", text.lower())
            if w not in STOPWORDS]


def _norm(form: str) -> str:
    return " ".join(form.lower().split())


@dataclass(frozen=True)
class Unit:
    name: str
    surface_forms: frozenset[str]
    identifier_categories: frozenset[str]


@dataclass(frozen=True)
class KnowledgeBase:
    domain: str
    categories: Mapping[str, frozenset[str]] = field(default_factory=dict)
    units: Mapping[str, Unit] = field(default_factory=dict)
    # identifier category -> cue phrases; every content word of a cue must
    # appear in the identifier text
    identifiers: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    booleans: Mapping[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise KBError("; ".join(problems))

    def __hash__(self):
        return hash((self.domain, tuple(sorted(self.categories))))

    def problems(self) -> list[str]:
        out = []
        owner: dict[str, str] = {}
        for cat, forms in self.categories.items():
            for f in forms:
                if not f.strip():
                    out.append(f"empty surface form in category {cat!r}")
                elif f in owner and owner[f] != cat:
                    out.append(f"surface form {f!r} maps to both {owner[f]!r} and {cat!r} "
                               f"in the {self.domain} KB")
                owner[f] = cat
        for unit in self.units.values():
            for f in unit.surface_forms:
                if not f.strip():
                    out.append(f"empty surface form for unit {unit.name!r}")
                elif f in owner and owner[f] != f"unit:{unit.name}":
                    out.append(f"surface form {f!r} maps to both {owner[f]!r} and unit {unit.name!r} "
                               f"in the {self.domain} KB")
                owner[f] = f"unit:{unit.name}"
        for cat, cues in self.identifiers.items():
            for cue in cues:
                if not content_words(cue):
                    out.append(f"identifier cue {cue!r} for {cat!r} has no content words")
        return out

    def surface_index(self) -> dict[tuple[str, ...], tuple[str, str]]:
        """Token tuple -> ("category" | "unit", name)."""
        index: dict[tuple[str, ...], tuple[str, str]] = {}
        for cat, forms in self.categories.items():
            for f in forms:
                index[tuple(f.split())] = ("category", cat)
        for unit in self.units.values():
            for f in unit.surface_forms:
                index[tuple(f.split())] = ("unit", unit.name)
        return index

    def identifier_category(self, text: str) -> Optional[str]:
        words = set(content_words(text))
        best = None
        best_size = 0
        for cat, cues in self.identifiers.items():
            for cue in cues:
                need = set(content_words(cue))
                if need and need <= words and len(need) > best_size:
                    best, best_size = cat, len(need)
        return best

    def category_of(self, surface: str) -> Optional[str]:
        s = _norm(surface)
        for cat, forms in self.categories.items():
            if s in forms:
                return cat
        return None

    def merged(self, other: "KnowledgeBase", domain: Optional[str] = None) -> "KnowledgeBase":
        cats = {k: set(v) for k, v in self.categories.items()}
        for k, v in other.categories.items():
            cats.setdefault(k, set()).update(v)
        units = dict(self.units)
        for k, u in other.units.items():
            if k in units:
                units[k] = Unit(k, units[k].surface_forms | u.surface_forms,
                                units[k].identifier_categories | u.identifier_categories)
            else:
                units[k] = u
        idents = {k: tuple(v) for k, v in self.identifiers.items()}
        for k, v in other.identifiers.items():
            idents[k] = tuple(dict.fromkeys(idents.get(k, ()) + tuple(v)))
        return KnowledgeBase(domain or other.domain, {k: frozenset(v) for k, v in cats.items()},
                             units, idents, {**self.booleans, **other.booleans})


def _rows(path: Path, width: Iterable[int]) -> list[tuple[int, list[str]]]:
    out = []
    allowed = set(width)
    with path.open(newline="", encoding="utf-8") as fh:
        for n, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            row = [c.strip() for c in row]
            if len(row) not in allowed:
                raise KBError(f"{path}:{n}: expected {sorted(allowed)} columns, got {len(row)}")
            out.append((n, row))
    return out


def kb_problems_in_dir(path: str | Path, domain: str) -> list[str]:
    try:
        load_kb(path, domain)
    except (KBError, OSError) as exc:
        return [str(exc)]
    return []


def load_kb(path: str | Path, domain: str) -> KnowledgeBase:
    """Load a KB directory holding any of ``categories.csv`` (category,
    surface_form), ``units.csv`` (unit, surface_form, identifier categories
    separated by ``;``), ``identifiers.csv`` (identifier_category, cue) and
    ``booleans.csv`` (true|false, surface_form)."""
    path = Path(path)
    if not path.is_dir():
        raise KBError(f"knowledge base directory {path} does not exist")
    cats: dict[str, set[str]] = {}
    units: dict[str, Unit] = {}
    idents: dict[str, list[str]] = {}
    bools: dict[str, bool] = {}
    f = path / "categories.csv"
    if f.exists():
        for n, (cat, form) in _rows(f, (2,)):
            form = _norm(form)
            for other, forms in cats.items():
                if other != cat and form in forms:
                    raise KBError(f"{f}:{n}: surface form {form!r} already belongs to {other!r}")
            cats.setdefault(cat, set()).add(form)
    f = path / "units.csv"
    if f.exists():
        for n, row in _rows(f, (2, 3)):
            name, form = row[0], _norm(row[1])
            compat = frozenset(c.strip() for c in (row[2] if len(row) == 3 else "").split(";") if c.strip())
            prev = units.get(name)
            units[name] = Unit(name, (prev.surface_forms if prev else frozenset()) | {form},
                               (prev.identifier_categories if prev else frozenset()) | compat)
    f = path / "identifiers.csv"
    if f.exists():
        for n, (cat, cue) in _rows(f, (2,)):
            idents.setdefault(cat, []).append(cue)
    f = path / "booleans.csv"
    if f.exists():
        for n, (pol, form) in _rows(f, (2,)):
            if pol.lower() not in ("true", "false"):
                raise KBError(f"{f}:{n}: polarity must be true or false")
            bools[_norm(form)] = pol.lower() == "true"
    return KnowledgeBase(domain, {k: frozenset(v) for k, v in cats.items()}, units,
                         {k: tuple(v) for k, v in idents.items()}, bools)
