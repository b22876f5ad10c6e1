import random

import pytest
from hypothesis import given, strategies as st

from interview_ie.assembly import (AssemblyConfig, AssemblyConfigError, assemble, assemble_all,
                                   fallback_assign, load_assembly_config)
from interview_ie.ns import NSResources, run_ns_pipeline
from interview_ie.preprocess import load_preprocess_config, preprocess_pipeline
from interview_ie.rules.annotation import annotate
from interview_ie.rules.extract import Fragment
from interview_ie.rules.grammar import compile_rules
from interview_ie.rules.heuristic import HeuristicAnnotator
from interview_ie.rules.kb import load_kb
from interview_ie.grounding import load_ontology

from conftest import DATA, make_transcript
from oracles.assembly import oracle_assemble

CFG = load_assembly_config(DATA / "assembly.cfg")


def ns_resources():
    kbs = {d: load_kb(DATA / "kb" / d, d) for d in ("common", "pork", "crop", "dairy")}
    return NSResources(compile_rules((DATA / "rules.yaml").read_text()), kbs, CFG,
                       load_ontology(DATA / "ontology.csv"))


def ns_pairs(t):
    pre = load_preprocess_config(DATA / "remap.csv", DATA / "phrases.txt", DATA / "fillers.txt",
                                 DATA / "grades.txt")
    t, _ = preprocess_pipeline(t, pre)
    return run_ns_pipeline(t, annotate(t, HeuristicAnnotator()), ns_resources())


def ident(text, turn, category, start=0):
    return Fragment("NounEntity", "identifier", text, (turn, start, start + len(text)), category=category)


def value(text, turn, kind="quantitative_value", unit=None, category=None, start=0, number=None):
    return Fragment("V", kind, text, (turn, start, start + len(text)), unit=unit, category=category,
                    numeric_value=number)


class TestReferenceDialogues:
    def test_capacity_dialogue_nursery_links_three_turns_back(self, capacity_dialogue):
        res = ns_pairs(capacity_dialogue)
        by_value = {p.value.text: p for p in res.pairs}
        p = by_value["1200 nursery"]
        assert (p.identifier.text, p.link_kind, p.distance) == ("capacity of those barns", "windowed", 3)
        assert by_value["4300 farrowing"].identifier.text == "capacity of those barns"

    def test_nursery_does_not_pair_with_manure_storage(self):
        frags = [ident("manure storage", 0, "manure_storage"), value("1200 nursery", 1, "compound_value",
                                                                     category="barn_type", number=1200)]
        pairs, residual = assemble(frags, None, CFG)
        assert pairs == [] and residual == [frags[1]]

    def test_bare_number_needs_allowlisted_identifier(self):
        res = ns_pairs(make_transcript("How many employees do you have?", "Three.", domain="pork"))
        assert [(p.identifier.category, p.value.numeric_value) for p in res.pairs] == [("employees", 3)]
        frags = [ident("butterfat", 0, "butterfat"), value("3", 1, number=3)]
        assert assemble(frags, None, CFG)[0] == []

    def test_protein_and_butterfat_without_units_are_missed(self):
        res = ns_pairs(make_transcript("And your protein and butterfat?", "Protein is 4 and butterfat 3.",
                                       domain="dairy"))
        assert res.pairs == [] and res.records == []

    def test_fallback_for_ten_farrowing(self):
        v = value("10 farrowing", 5, "compound_value", category="barn_type", number=10)
        (p,) = fallback_assign([v], CFG)
        assert (p.identifier.category, p.link_kind) == ("barn_capacity", "fallback")
        assert fallback_assign([], CFG) == []

    def test_two_owners_means_no_fallback(self):
        cfg = AssemblyConfig(compatibility={"a": frozenset({"x"}), "b": frozenset({"x", "y"}),
                                            "c": frozenset({"z"})})
        assert fallback_assign([value("x", 0, "categorical_value", category="x")], cfg) == []
        assert [p.identifier.category for p in fallback_assign(
            [value("y", 0, "categorical_value", category="y")], cfg)] == ["b"]


class TestConfig:
    def test_windows_at_least_one(self):
        with pytest.raises(AssemblyConfigError):
            AssemblyConfig(default_window=0)
        with pytest.raises(AssemblyConfigError):
            AssemblyConfig(per_identifier_window={"a": 0})

    def test_allowlist_checked_against_categories(self):
        assert CFG.problems({"employees"}) != []
        assert AssemblyConfig(unitless_allowlist=frozenset({"a"})).problems({"a", "b"}) == []

    def test_parser(self, tmp_path):
        p = tmp_path / "a.cfg"
        p.write_text("default_window = 2\nwindow employees = 1  # short\nunitless_allowlist = employees\n"
                     "compatible barn_capacity = barn_type; head\n")
        cfg = load_assembly_config(p)
        assert cfg.window("employees") == 1 and cfg.window("other") == 2
        assert cfg.compatibility["barn_capacity"] == {"barn_type", "head"}
        p.write_text("nonsense = 1\n")
        with pytest.raises(AssemblyConfigError, match=":1:"):
            load_assembly_config(p)


# -- oracle and properties ---------------------------------------------------------

CATS = ["cap", "count", "store", "emp", None]
COMPAT = {"cap": frozenset({"barn_type", "head"}), "count": frozenset({"head"}),
          "store": frozenset({"pit", "boolean"}), "emp": frozenset()}
ALLOW = frozenset({"emp", "count"})


def random_fragments(rng):
    n_turns = rng.randint(1, 12)
    frags = []
    for _ in range(rng.randint(0, 14)):
        turn = rng.randrange(n_turns)
        start = rng.randrange(0, 40)
        if rng.random() < 0.4:
            frags.append(ident("w" * rng.randint(1, 6), turn, rng.choice(CATS), start))
        else:
            kind = rng.choice(["quantitative_value", "compound_value", "categorical_value", "boolean_value"])
            unit = rng.choice(["head", None, "acre"]) if kind == "quantitative_value" else None
            cat = rng.choice(["barn_type", "pit", "other"]) if kind in ("compound_value", "categorical_value") else None
            frags.append(value("v" * rng.randint(1, 6), turn, kind, unit, cat, start, 1))
    frags = list(dict.fromkeys(frags))
    frags.sort(key=lambda f: (f.span, f.kind))
    return frags


def normalize(pairs):
    out = []
    for p in pairs:
        who = p.identifier if p.link_kind == "windowed" else p.identifier.category
        out.append((who, p.value, p.link_kind, p.distance))
    return out


def test_assembly_matches_exhaustive_oracle():
    rng = random.Random(11)
    linked = 0
    for case in range(100):
        frags = random_fragments(rng)
        windows = {c: rng.randint(1, 4) for c in CATS if c and rng.random() < 0.5}
        cfg = AssemblyConfig(rng.randint(1, 4), windows, ALLOW, COMPAT)
        got = normalize(assemble_all(frags, None, cfg))
        want = oracle_assemble(frags, cfg.default_window, windows, ALLOW, COMPAT)
        assert got == want, case
        linked += sum(1 for p in got if p[2] == "windowed")
    assert linked > 50


@given(st.integers(0, 10**6))
def test_window_invariants(seed):
    rng = random.Random(seed)
    frags = random_fragments(rng)
    cfg = AssemblyConfig(rng.randint(1, 4), {}, ALLOW, COMPAT)
    pairs = assemble_all(frags, None, cfg)
    values = [p.value for p in pairs]
    assert len(values) == len(set(values))
    for p in pairs:
        if p.link_kind == "windowed":
            assert 0 <= p.distance <= cfg.window(p.identifier.category)
            assert p.value.turn_index - p.identifier.turn_index == p.distance
    smaller = AssemblyConfig(max(1, cfg.default_window - rng.randint(0, 2)), {}, ALLOW, COMPAT)
    kept = {(p.identifier, p.value) for p in assemble(frags, None, smaller)[0]}
    assert kept <= {(p.identifier, p.value) for p in assemble(frags, None, cfg)[0]}
