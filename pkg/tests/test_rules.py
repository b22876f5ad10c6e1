import random
import time

import pytest
from hypothesis import given, strategies as st

from interview_ie.rules import annotation as ann_mod
from interview_ie.rules.annotation import (AnnotationError, FileAnnotator, SentenceAnnotation,
                                           annotate, make_annotation)
from interview_ie.rules.extract import extract_fragments, parse_number
from interview_ie.rules.grammar import RuleError, RuleSet, compile_rules, rule_problems, serialize_rules
from interview_ie.rules.heuristic import HeuristicAnnotator, annotate_text
from interview_ie.rules.kb import KBError, KnowledgeBase, Unit, load_kb

from conftest import DATA, make_transcript
from oracles.rules import oracle_fragments

GENERIC_ENTITY_RULE = '''- name: all-generic-entity-dep
  label: GenericEntity
  example: "the capacity of those barns"
  type: "dependency"
  pattern: |
    trigger = [word=/^(capacity|number|
               usage|production|price|
               cost|consumption|date)$/]
    variable: NounPhrase =  nmod_of
'''

BARNS = ("the capacity of those barns", ["the", "capacity", "of", "those", "barns"],
         ["DT", "NN", "IN", "DT", "NNS"], [[1, "det"], [0, "root"], [2, "case"], [1, "det"], [-3, "nmod_of"]])


def pork_kb():
    return load_kb(DATA / "kb" / "common", "common").merged(load_kb(DATA / "kb" / "pork", "pork"), "pork")


def crop_kb():
    return load_kb(DATA / "kb" / "common", "common").merged(load_kb(DATA / "kb" / "crop", "crop"), "crop")


def run(text, rules=None, kb=None):
    annos = annotate_text(0, text)
    return extract_fragments(annos, rules if rules is not None else RuleSet(), kb or KnowledgeBase("pork"),
                             [text])


class TestCompile:
    def test_generic_entity_rule(self):
        rules = compile_rules(GENERIC_ENTITY_RULE)
        assert rules.names() == ["all-generic-entity-dep"]
        rule = rules["all-generic-entity-dep"]
        assert rule.kind == "dependency" and rule.label == "GenericEntity"
        (test,) = rule.trigger.tests
        assert test.regex == "^(capacity|number|usage|production|price|cost|consumption|date)$"
        words = test.regex[2:-2].split("|")
        assert words == ["capacity", "number", "usage", "production", "price", "cost", "consumption", "date"]
        assert [(c.name, c.label, [s.relation for s in c.path]) for c in rule.captures] == [
            ("variable", "NounPhrase", ["nmod_of"])]

    def test_empty_source(self):
        assert len(compile_rules("")) == 0
        assert len(compile_rules("# nothing\n")) == 0

    def test_duplicate_names(self):
        with pytest.raises(RuleError, match="duplicate rule name") as err:
            compile_rules(GENERIC_ENTITY_RULE + GENERIC_ENTITY_RULE.replace("- name", "\n- name", 1))
        assert err.value.rule == "all-generic-entity-dep" and err.value.line == 11

    @pytest.mark.parametrize("bad,needle", [
        ("pattern: |\n    trigger = [word=/(/]\n", "invalid regex"),
        ("pattern: |\n    trigger = [lemma=/x/]\n", "unknown token field"),
        ("pattern: |\n    trigger = [word=x]\n    v = nmod_zzz1\n", "unknown dependency relation"),
        ("pattern: |\n    v = nmod_of\n", "needs a trigger"),
        ("pattern: x\n  colour: red\n", "unknown field key"),
    ])
    def test_errors_name_rule_and_line(self, bad, needle):
        src = f"- name: r1\n  label: L\n  type: dependency\n  {bad}"
        with pytest.raises(RuleError, match=needle) as err:
            compile_rules(src)
        assert err.value.rule == "r1" and err.value.line == 1

    def test_rule_problems_collects_everything(self):
        src = ("- name: a\n  label: L\n  type: token\n  pattern: '[word=/(/]'\n"
               "- name: b\n  label: L\n  type: weird\n  pattern: '[word=x]'\n")
        assert len(rule_problems(src)) == 2

    def test_shipped_rules_compile(self):
        rules = compile_rules((DATA / "rules.yaml").read_text())
        assert "all-generic-entity-dep" in rules.names()


class TestAnnotation:
    def test_barns_fixture(self, tmp_path):
        text, tokens, pos, heads = BARNS
        a = make_annotation(0, text, tokens, pos, heads)
        assert a.dep_edges[4] == (4, 1, "nmod_of")
        f = tmp_path / "a.jsonl"
        f.write_text(ann_mod.dump_annotations([a]))
        (b,) = annotate(make_transcript(text), FileAnnotator(f))
        assert b == a

    def test_empty_transcript_has_no_sentences(self):
        assert annotate(make_transcript(""), HeuristicAnnotator()) == []

    def test_governor_out_of_range(self):
        with pytest.raises(AnnotationError, match="out of range"):
            SentenceAnnotation.from_record({"turn": 0, "start": 0, "end": 9, "tokens": list("abcde"),
                                            "pos": ["NN"] * 5, "heads": [[9, "dep"], [0, "root"], [-1, "x"],
                                                                          [-1, "x"], [-1, "x"]]})

    def test_length_mismatch_and_cycles(self):
        with pytest.raises(AnnotationError, match="length mismatch"):
            SentenceAnnotation(("a", "b"), ("NN",), ("O", "O"), ((0, None, "root"), (1, 0, "dep")), (0, 0, 3))
        with pytest.raises(AnnotationError, match="cycle"):
            SentenceAnnotation(("a", "b", "c"), ("NN",) * 3, ("O",) * 3,
                               ((0, None, "root"), (1, 2, "dep"), (2, 1, "dep")), (0, 0, 5))

    def test_missing_file(self, tmp_path):
        with pytest.raises(AnnotationError, match="does not exist"):
            annotate(make_transcript("x"), FileAnnotator(tmp_path / "nope.jsonl"))

    def test_spans_must_partition(self):
        t = make_transcript("Yes. Five.")
        a = make_annotation(0, "Yes. Five.", ["Five", "."], ["CD", "."], [[0, "root"], [-1, "punct"]], start=5)

        class One:
            def annotate(self, t):
                return [a]
        with pytest.raises(AnnotationError, match="partition"):
            annotate(t, One())


class TestExtract:
    def test_generic_entity_example(self):
        text, tokens, pos, heads = BARNS
        a = make_annotation(0, text, tokens, pos, heads)
        (f,) = extract_fragments([a], compile_rules(GENERIC_ENTITY_RULE), KnowledgeBase("pork"), [text])
        assert (f.label, f.kind, f.text) == ("GenericEntity", "identifier", "capacity of those barns")
        assert f.captures == {"variable": "those barns"}
        assert f.text == text[f.span[1]:f.span[2]]

    def test_compound_value(self):
        frags = run("and then 1200 nursery.", kb=pork_kb())
        (c,) = [f for f in frags if f.kind == "compound_value"]
        assert (c.text, c.numeric_value, c.category, c.get("category")) == (
            "1200 nursery", 1200, "barn_type", "nursery")

    def test_spurious_number_stays_a_number(self):
        frags = run("We have 4 4300 farrowing.", kb=pork_kb())
        assert [(f.kind, f.text) for f in frags if f.is_value] == [
            ("quantitative_value", "4"), ("compound_value", "4300 farrowing")]

    def test_nothing_to_find(self):
        assert run("we like it here .", kb=pork_kb()) == []

    def test_herbicide_missing_from_kb_is_not_extracted(self):
        frags = run("Glyphosate and atrazine, mostly.", kb=crop_kb())
        assert [f.text for f in frags if f.is_value] == ["Glyphosate"]

    def test_comma_grouped_number(self):
        (f,) = run("6,670.")
        assert f.numeric_value == 6670
        assert parse_number("6,670") == 6670 and parse_number("twenty-two") == 22
        assert parse_number("6,67") is None

    def test_boolean_and_units(self):
        kb = pork_kb()
        frags = run("Yes, about 2,500 sows.", kb=kb)
        assert ("boolean_value", "Yes") in [(f.kind, f.text) for f in frags]
        (q,) = [f for f in frags if f.label == "Quantity"]
        assert (q.numeric_value, q.unit) == (2500, "sow")


class TestKB:
    def test_one_surface_one_category(self):
        with pytest.raises(KBError, match="maps to both"):
            KnowledgeBase("pork", {"a": frozenset({"pit"}), "b": frozenset({"pit"})})
        with pytest.raises(KBError):
            KnowledgeBase("pork", {"a": frozenset({"pit"})}, {"u": Unit("u", frozenset({"pit"}), frozenset())})

    def test_identifier_cues(self):
        kb = pork_kb()
        assert kb.identifier_category("capacity of those barns") == "barn_capacity"
        assert kb.identifier_category("barns") == "barn_count"
        assert kb.identifier_category("weather") is None

    def test_loader_reports_duplicates(self, tmp_path):
        (tmp_path / "categories.csv").write_text("a,pit\nb,pit\n")
        with pytest.raises(KBError, match="already belongs"):
            load_kb(tmp_path, "pork")


# -- oracle equivalence ----------------------------------------------------------

WORDS = [("the", "DT"), ("those", "DT"), ("capacity", "NN"), ("barns", "NNS"), ("of", "IN"),
         ("nursery", "NN"), ("head", "NN"), ("yes", "UH"), ("deep", "JJ"), ("pit", "NN"),
         ("3", "CD"), ("1,200", "CD"), ("two", "CD"), ("40", "NN"), ("have", "VB"), ("big", "JJ"),
         (".", "."), ("number", "NN")]
RELS = ["nmod_of", "det", "amod", "case", "obj", "nsubj", "compound", "punct", "nummod"]
REGEXES = ["^b", "a", "^(barns|capacity|number)$", "s$", "^NN", "^JJ", "^CD$", "^DT$", "e", "^[0-9]"]
SURFACES = {"nursery": ("category", "barn_type"), "deep pit": ("category", "storage"),
            "pit": ("category", "storage"), "head": ("unit", "head")}
BOOLEANS = {"yes": True}
IDENTIFIERS = {"barn_capacity": ("barn capacity",), "barn_count": ("barns",), "storage": ("pit",)}
ORACLE_KB = KnowledgeBase("pork", {"barn_type": frozenset({"nursery"}), "storage": frozenset({"deep pit", "pit"})},
                          {"head": Unit("head", frozenset({"head"}), frozenset())}, IDENTIFIERS, BOOLEANS)


def random_sentence(rng):
    n = rng.randint(1, 10)
    toks = [rng.choice(WORDS) for _ in range(n)]
    sent = [(w, t, rng.choice(["O", "O", "NUMBER"])) for w, t in toks]
    order = list(range(n))
    rng.shuffle(order)
    edges = {order[0]: (None, "root")}
    for k in range(1, n):
        edges[order[k]] = (order[rng.randrange(k)], rng.choice(RELS))
    return sent, edges


def random_constraint(rng):
    tests = []
    for _ in range(rng.randint(1, 2)):
        field = rng.choice(["word", "word", "tag", "entity"])
        op = "!=" if rng.random() < 0.2 else "="
        if field == "entity":
            tests.append(f"entity{op}{rng.choice(['O', 'NUMBER'])}")
        elif rng.random() < 0.3:
            lit = rng.choice(WORDS)[0 if field == "word" else 1]
            tests.append(f'{field}{op}"{lit}"')
        else:
            tests.append(f"{field}{op}/{rng.choice(REGEXES)}/{rng.choice(['', 'i'])}")
    return "[" + " & ".join(tests) + "]"


def random_sequence(rng, depth, names):
    parts = []
    for k in range(rng.randint(1, 3)):
        if depth < 2 and rng.random() < 0.3:
            inner = random_sequence(rng, depth + 1, names)
            # keep groups non-nullable so repetition never iterates on empty matches
            inner = random_constraint(rng) + " " + inner
            if rng.random() < 0.5:
                name = f"c{len(names)}"
                names.append(name)
                node = f"(?<{name}> {inner})"
            else:
                node = f"({inner})"
        else:
            node = random_constraint(rng)
        parts.append(node + rng.choice(["", "", "?", "*", "+"]))
    return " ".join(parts)


def random_rules(rng):
    out = []
    for k in range(rng.randint(1, 5)):
        label = rng.choice(["Ident", "Other", "Number"])
        frag = rng.choice(["identifier", "identifier", "quantitative_value"])
        if rng.random() < 0.5:
            pattern = random_sequence(rng, 0, [])
            kind = "token"
        else:
            lines = [f"trigger = {random_constraint(rng)}"]
            for c in range(rng.randint(0, 2)):
                steps = " ".join(rng.choice(["", "<"]) + rng.choice(RELS) for _ in range(rng.randint(1, 2)))
                lab = rng.choice(["", ": NounPhrase", ": Any", ": Number"])
                lines.append(f"v{c}{lab} = {steps}")
            pattern = "\n".join(lines)
            kind = "dependency"
        body = "\n".join("    " + line for line in pattern.splitlines())
        out.append(f"- name: r{k}\n  label: {label}\n  type: {kind}\n  priority: {rng.randint(0, 2)}\n"
                   f"  fragment: {frag}\n  pattern: |\n{body}\n")
    return compile_rules("".join(out))


def engine_fragments(sent, edges, rules):
    text = " ".join(w for w, _, _ in sent)
    heads = [[0 if edges[i][0] is None else edges[i][0] - i, edges[i][1]] for i in range(len(sent))]
    a = make_annotation(0, text, [w for w, _, _ in sent], [t for _, t, _ in sent], heads,
                        ner=[e for _, _, e in sent])
    frags = extract_fragments([a], rules, ORACLE_KB, [text])
    return sorted(((f.label, f.kind, f.text, f.span, f.fields, f.unit, f.numeric_value, f.category)
                   for f in frags), key=repr)


def test_extraction_matches_brute_force_oracle():
    rng = random.Random(7)
    t0 = time.perf_counter()
    fired = 0
    for case in range(200):
        sent, edges = random_sentence(rng)
        rules = random_rules(rng)
        got = engine_fragments(sent, edges, rules)
        want = sorted(oracle_fragments(sent, edges, list(rules), SURFACES, BOOLEANS, IDENTIFIERS), key=repr)
        assert got == want, (case, sent, edges, serialize_rules(rules))
        fired += sum(1 for f in got if f[0] in ("Ident", "Other"))
    assert time.perf_counter() - t0 < 10
    assert fired > 100  # the random rules do fire


# -- properties -----------------------------------------------------------------

@given(st.integers(0, 10**6))
def test_serialize_compile_is_a_fixed_point(seed):
    rules = random_rules(random.Random(seed))
    again = compile_rules(serialize_rules(rules))
    assert again == rules
    assert serialize_rules(again) == serialize_rules(rules)


@given(st.integers(0, 10**6))
def test_adding_a_rule_keeps_other_labels_fragments(seed):
    rng = random.Random(seed)
    sent, edges = random_sentence(rng)
    base = random_rules(rng)
    extra = compile_rules(f"- name: extra\n  label: Extra\n  type: token\n  pattern: '{random_constraint(rng)}+'\n")
    before = engine_fragments(sent, edges, base)
    after = engine_fragments(sent, edges, base + extra)
    assert [f for f in after if f[0] != "Extra"] == before


_sentences = st.lists(st.sampled_from(["How", "many", "barns", "capacity", "of", "those", "4300", "farrowing",
                                       "nursery", "yes", ",", ".", "1,200", "sows", "deep", "pits", "the"]),
                      min_size=1, max_size=12).map(" ".join)


@given(_sentences)
def test_fragment_text_is_the_spanned_substring(text):
    rules = compile_rules((DATA / "rules.yaml").read_text())
    for f in run(text, rules, pork_kb()):
        assert text[f.span[1]:f.span[2]] == f.text
        if f.kind == "quantitative_value":
            assert f.numeric_value is not None
        if f.kind == "compound_value":
            assert f.numeric_value is not None and f.get("category")
