import json
import logging

import pytest
from hypothesis import given, strategies as st

from interview_ie.evaluation import load_gold, match_key
from interview_ie.grounding import load_ontology, value_type_of
from interview_ie.llm import (BackendError, ChatBackendConfig, ExtractionSchema, FieldMap, FieldMapRow,
                              LLMConfig, MissingReplayError, ReplayBackend, SchemaError, SchemaField,
                              TruncationError, ValidatedRecord, build_prompt, fenced_regions,
                              load_field_map, load_schemas, map_fields, plan_jobs, query_model,
                              replay_key, run_llm_pipeline, verify_output)
from interview_ie.llm.verify import words
from interview_ie.preprocess import load_preprocess_config, preprocess_pipeline
from interview_ie.segmentation import KeywordMap, block_text, load_keyword_map
from interview_ie.transcript import load_transcript

from conftest import DATA, FIXTURES, make_transcript

SCHEMAS = load_schemas(DATA / "schemas.yaml")
BY_NAME = {s.name: s for s in SCHEMAS}
ONTOLOGY = load_ontology(DATA / "ontology.csv")
FIELD_MAP = load_field_map(DATA / "field_map.csv").validate(ONTOLOGY, SCHEMAS)
KEYWORDS = load_keyword_map(DATA / "keywords.csv")

FINISHING_PIGS_BLOCK = "And so you're finishing how many total pigs a year? 6,670."
ROTATION_BLOCK = ("What does your rotation look like? "
                  "Corn, then beans, and we've done that for about ten years.")


def schema(*fields, name="S"):
    return ExtractionSchema(name, "test schema", tuple(SchemaField(n, t) for n, t in fields), "", ())


def replay_file(tmp_path, entries):
    p = tmp_path / "replay.json"
    p.write_text(json.dumps({replay_key(s, text): resp for (s, text), resp in entries.items()}))
    return p


def preprocessed(path, interview_id, domain):
    pre = load_preprocess_config(DATA / "remap.csv", DATA / "phrases.txt", DATA / "fillers.txt",
                                 DATA / "grades.txt")
    return preprocess_pipeline(load_transcript(path, interview_id, domain), pre)[0]


class TestSchemas:
    def test_packaged_schemas_load(self):
        assert "TotalFinishingPigsEvent" in BY_NAME
        assert BY_NAME["BarnEvent"].topic_labels == {"barn_info"}

    def test_duplicate_field_rejected(self):
        with pytest.raises(SchemaError, match="duplicate field"):
            schema(("a", "integer"), ("a", "string"))

    def test_worked_example_must_conform(self):
        with pytest.raises(SchemaError, match="not integer"):
            ExtractionSchema("S", "", (SchemaField("n", "integer"),), "x", ({"n": "many"},))


class TestPrompt:
    def test_instruction_three_verbatim(self):
        p = build_prompt(BY_NAME["TotalFinishingPigsEvent"], FINISHING_PIGS_BLOCK)
        assert "Extract all instances of the same type of information" in p
        assert p.startswith("You are an advanced AI designed to extract key agricultural information")

    def test_two_fenced_regions(self):
        s = BY_NAME["TotalFinishingPigsEvent"]
        p = build_prompt(s, FINISHING_PIGS_BLOCK)
        regions = fenced_regions(p)
        assert len(regions) == 2
        assert json.loads(regions[0])["title"] == s.name
        assert "6670" in regions[1]

    def test_backticks_in_block_are_escaped(self):
        block = "we call it the ```north``` barn"
        s = BY_NAME["BarnEvent"]
        plain = build_prompt(s, "we call it the north barn")
        p = build_prompt(s, block)
        # hand-checked: every backtick of the block gains one backslash
        assert "we call it the \\`\\`\\`north\\`\\`\\` barn" in p
        assert len(fenced_regions(p)) == 2
        assert p.count("```") == plain.count("```")

    def test_braces_in_block_are_literal(self):
        p = build_prompt(BY_NAME["BarnEvent"], "odd {text} and {schema}")
        assert "Text for Extraction: odd {text} and {schema}" in p

    def test_empty_block_rejected(self):
        with pytest.raises(ValueError):
            build_prompt(BY_NAME["BarnEvent"], "   ")

    @given(st.text(min_size=1).filter(str.strip))
    def test_prompt_is_byte_stable(self, text):
        s = BY_NAME["CropEvent"]
        a, b = build_prompt(s, text), build_prompt(s, text)
        assert a.encode() == b.encode()
        assert len(fenced_regions(a)) == 2


class TestReplay:
    def test_finishing_pigs_replay(self, tmp_path):
        path = replay_file(tmp_path, {("TotalFinishingPigsEvent", FINISHING_PIGS_BLOCK): '[{"total_finishing_pigs": 6670}]'})
        cfg = ChatBackendConfig.replay(path)
        s = BY_NAME["TotalFinishingPigsEvent"]
        raw = query_model(build_prompt(s, FINISHING_PIGS_BLOCK), cfg, s.name, FINISHING_PIGS_BLOCK)
        assert json.loads(raw) == [{"total_finishing_pigs": 6670}]
        recs = map_fields(verify_output(raw, s, FINISHING_PIGS_BLOCK), FIELD_MAP, ONTOLOGY)
        assert [(r.grounding_id, r.value, r.backend) for r in recs] == [("total_finishing_pigs", 6670, "llm")]

    def test_missing_key_names_the_hash(self, tmp_path):
        backend = ReplayBackend(replay_file(tmp_path, {}))
        key = replay_key("BarnEvent", "nothing here")
        with pytest.raises(MissingReplayError, match=key):
            backend.complete("prompt", "BarnEvent", "nothing here")

    def test_identical_requests_identical_responses(self, tmp_path):
        backend = ReplayBackend(replay_file(tmp_path, {("S", "x"): '[{"a": "x"}]'}))
        assert backend.complete("p", "S", "x").encode() == backend.complete("p", "S", "x").encode()

    def test_key_depends_on_schema_and_text(self):
        assert replay_key("A", "x") != replay_key("B", "x") != replay_key("A", "y")
        assert replay_key("A", "bc") != replay_key("Ab", "c")

    def test_oversized_response_is_truncation(self, tmp_path):
        backend = ReplayBackend(replay_file(tmp_path, {("S", "x"): "word " * 50}), max_tokens=10)
        with pytest.raises(TruncationError):
            backend.complete("p", "S", "x")

    @pytest.mark.parametrize("kw, msg", [({"temperature": 0.7}, "temperature"),
                                         ({"max_tokens": 9000}, "max_tokens")])
    def test_config_invariants(self, kw, msg):
        with pytest.raises(BackendError, match=msg):
            ChatBackendConfig("replay_file", "r.json", **kw)

    def test_bad_replay_file(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text('["not", "a", "map"]')
        with pytest.raises(BackendError, match="must map"):
            ReplayBackend(p)


class TestVerify:
    def test_true_string_coerced(self):
        s = schema(("robotic", "boolean"))
        [r] = verify_output('[{"robotic": "true"}]', s, "yes four robots")
        assert r.value is True and r.coerced

    def test_zero_overlap_string_discarded(self):
        s = BY_NAME["RotationEvent"]
        assert verify_output('[{"crop_rotation": "alfalfa pasture"}]', s, ROTATION_BLOCK) == []

    def test_one_word_overlap_hallucination_retained(self):
        # the model invents a rotation; "years" is its only word in common
        # with the block, and that is enough to pass the filter
        s = BY_NAME["RotationEvent"]
        [r] = verify_output('[{"crop_rotation": "three years alfalfa"}]', s, ROTATION_BLOCK)
        assert r.value == "three years alfalfa"
        assert words(r.value) & words(ROTATION_BLOCK) == {"years"}

    def test_comma_grouped_integer(self):
        [r] = verify_output('[{"total_finishing_pigs": "6,670"}]', BY_NAME["TotalFinishingPigsEvent"],
                            FINISHING_PIGS_BLOCK)
        assert (r.value, r.coerced) == (6670, True)

    def test_numbers_and_booleans_skip_the_filter(self):
        s = schema(("n", "integer"), ("b", "boolean"))
        recs = verify_output('[{"n": 99, "b": false}]', s, "nothing numeric here")
        assert [(r.field_name, r.value) for r in recs] == [("n", 99), ("b", False)]

    def test_unknown_fields_and_bad_values_dropped(self):
        s = schema(("n", "integer"))
        recs = verify_output('[{"n": "lots", "m": 3}, {"n": 4.0}]', s, "x")
        assert [(r.value, r.record_index) for r in recs] == [(4, 1)]

    @pytest.mark.parametrize("raw", ["", "not json", "{broken", "42"])
    def test_unparseable_output_degrades(self, raw, caplog):
        with caplog.at_level(logging.INFO):
            assert verify_output(raw, schema(("n", "integer")), "x") == []

    def test_code_fenced_output_accepted(self):
        [r] = verify_output('```json\n[{"n": 5}]\n```', schema(("n", "integer")), "x")
        assert r.value == 5

    def test_string_list_items_filtered_individually(self):
        s = BY_NAME["HerbicideEvent"]
        [r] = verify_output('[{"herbicides": ["glyphosate", "dicamba"]}]', s,
                            "Glyphosate and atrazine, mostly.")
        assert r.value == ("glyphosate",)

    @given(st.lists(st.sampled_from(["corn", "beans", "years", "rye", "alfalfa", "wheat", "oats"]),
                    min_size=1, max_size=4).map(" ".join),
           st.sampled_from([ROTATION_BLOCK, "Glyphosate and atrazine.", "corn corn corn"]))
    def test_filter_postcondition(self, value, block):
        s = BY_NAME["RotationEvent"]
        recs = verify_output(json.dumps([{"crop_rotation": value}]), s, block)
        for r in recs:
            assert words(r.value) & words(block)
        assert bool(recs) == bool(words(value) & words(block))

    @given(st.sampled_from([("integer", int), ("number", (int, float)), ("boolean", bool), ("string", str)]),
           st.one_of(st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=False),
                     st.booleans(), st.sampled_from(["true", "No", "1,200", "3.5", "x", "12"])))
    def test_verified_values_match_declared_type(self, typ, raw):
        name, py = typ
        recs = verify_output(json.dumps([{"f": raw}]), schema(("f", name)), "x 12 3.5 true no 1,200")
        for r in recs:
            assert isinstance(r.value, py)
            if name != "boolean":
                assert not isinstance(r.value, bool)


class TestFieldMap:
    def test_barn_capacity_maps_to_node(self):
        s = BY_NAME["BarnEvent"]
        recs = [ValidatedRecord(s.name, "barn_capacity", 1200, False)]
        [g] = map_fields(recs, FIELD_MAP, ONTOLOGY)
        assert (g.grounding, g.grounding_id, g.value, g.backend) == ("barn capacity", "barn_capacity", 1200, "llm")

    def test_unit_from_sibling_field(self):
        recs = [ValidatedRecord("BarnEvent", "barn_type", "Nursery", False, record_index=0),
                ValidatedRecord("BarnEvent", "barn_capacity", 1200, False, record_index=0)]
        [g] = map_fields(recs, FIELD_MAP, ONTOLOGY)
        assert g.unit == "nursery"

    def test_empty(self):
        assert map_fields([], FIELD_MAP, ONTOLOGY) == []

    def test_unmapped_field_logged_and_dropped(self, caplog):
        fm = FieldMap((FieldMapRow("BarnEvent", "barn_capacity", "barn_capacity"),))
        with caplog.at_level(logging.INFO, logger="interview_ie.llm.fieldmap"):
            out = map_fields([ValidatedRecord("BarnEvent", "number_of_barns", 5, False)], fm, ONTOLOGY)
        assert out == []
        assert "BarnEvent.number_of_barns" in caplog.text

    def test_unknown_node_reported_with_row(self, tmp_path):
        p = tmp_path / "fm.csv"
        p.write_text("schema,field,node_id,unit\nBarnEvent,barn_capacity,barn_volume,\n")
        [problem] = load_field_map(p).problems(ONTOLOGY, SCHEMAS)
        assert "row 2" in problem and "barn_volume" in problem

    def test_duplicate_rows_rejected(self, tmp_path):
        p = tmp_path / "fm.csv"
        p.write_text("schema,field,node_id,unit\nA,b,c,\nA,b,d,\n")
        with pytest.raises(ValueError, match="already mapped"):
            load_field_map(p)


class TestPipeline:
    def test_barn_block_runs_only_barn_schemas(self):
        t = make_transcript("Okay, section one is about pork.", "What is the capacity of those barns?",
                            "About 1200 nursery.", domain="pork")
        jobs = plan_jobs(t, SCHEMAS, KEYWORDS)
        barn = {j.schema.name for j in jobs if j.block.topic_label == "barn_info"}
        assert barn == {s.name for s in SCHEMAS if "barn_info" in s.topic_labels and
                        (not s.domains or "pork" in s.domains)}
        assert "TotalFinishingPigsEvent" not in barn

    def test_empty_keyword_map_single_block(self):
        t = make_transcript("What is the capacity of those barns?", "About 1200 nursery.",
                            "How many employees?", "Three.")
        jobs = plan_jobs(t, SCHEMAS, KeywordMap())
        assert {(j.block.start, j.block.end) for j in jobs} == {(0, 4)}
        assert sorted(j.schema.name for j in jobs) == sorted(s.name for s in SCHEMAS)

    def test_per_block_failures_are_collected(self, tmp_path):
        t = make_transcript("How many employees do you have?", "Three.")
        cfg = LLMConfig(ONTOLOGY, ChatBackendConfig.replay(replay_file(tmp_path, {})))
        res = run_llm_pipeline(t, SCHEMAS, KEYWORDS, FIELD_MAP, cfg)
        assert res.records == [] and res.errors and all("no replay entry" in e for e in res.errors)

    def test_pork_replay_matches_hand_traced_gold(self):
        t = preprocessed(FIXTURES / "transcripts" / "pork-1.jsonl", "pork-1", "pork")
        cfg = LLMConfig(ONTOLOGY, ChatBackendConfig.replay(FIXTURES / "replay.json"))
        res = run_llm_pipeline(t, SCHEMAS, KEYWORDS, FIELD_MAP, cfg)
        assert res.errors == []
        got = sorted(match_key(r.grounding_id, r.value, r.unit) for r in res.records)
        gold = sorted(g.key for g in load_gold(FIXTURES / "gold.csv") if g.interview_id == "pork-1")
        assert got == gold

    def test_replay_runs_are_deterministic(self):
        t = preprocessed(FIXTURES / "transcripts" / "crop-1.jsonl", "crop-1", "crop")
        cfg = LLMConfig(ONTOLOGY, ChatBackendConfig.replay(FIXTURES / "replay.json"))
        a = run_llm_pipeline(t, SCHEMAS, KEYWORDS, FIELD_MAP, cfg).records
        b = run_llm_pipeline(t, SCHEMAS, KEYWORDS, FIELD_MAP, cfg).records
        assert [r.to_record() for r in a] == [r.to_record() for r in b]

    @pytest.mark.parametrize("iid, domain", [("pork-1", "pork"), ("crop-1", "crop"), ("dairy-1", "dairy")])
    def test_outputs_respect_filter_and_node_types(self, iid, domain):
        t = preprocessed(FIXTURES / "transcripts" / f"{iid}.jsonl", iid, domain)
        cfg = LLMConfig(ONTOLOGY, ChatBackendConfig.replay(FIXTURES / "replay.json"))
        res = run_llm_pipeline(t, SCHEMAS, KEYWORDS, FIELD_MAP, cfg)
        assert res.records
        for r in res.records:
            assert value_type_of(r.value) == ONTOLOGY.get(r.grounding_id).value_type
        for v in res.validated:
            if isinstance(v.value, str):
                assert words(v.value) & words(block_text(t, v.source_block))

    def test_no_network_module_touched(self, monkeypatch):
        import requests

        def boom(*a, **k):
            raise AssertionError("network used")
        monkeypatch.setattr(requests.Session, "request", boom)
        t = preprocessed(FIXTURES / "transcripts" / "dairy-1.jsonl", "dairy-1", "dairy")
        cfg = LLMConfig(ONTOLOGY, ChatBackendConfig.replay(FIXTURES / "replay.json"))
        assert run_llm_pipeline(t, SCHEMAS, KEYWORDS, FIELD_MAP, cfg).errors == []

