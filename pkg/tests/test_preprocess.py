import pytest
from hypothesis import given, strategies as st

from interview_ie.preprocess import (ConfigError, PreprocessConfig, RemapEntry, RemapTable,
                                     apply_term_remap, hyphenate_terms, load_preprocess_config,
                                     load_remap_table, normalize_numbers, preprocess_pipeline,
                                     remove_fillers)

from conftest import DATA, make_transcript

GRADES = ("18-46-0", "11-52-0", "10-34-0")
TABLE = RemapTable((RemapEntry("Souths", "sows"), RemapEntry("faring", "farrowing")))


def texts(t):
    return [turn.text for turn in t.turns]


def default_config():
    return load_preprocess_config(DATA / "remap.csv", DATA / "phrases.txt", DATA / "fillers.txt",
                                  DATA / "grades.txt")


class TestRemap:
    def test_souths_to_sows(self):
        t, log = apply_term_remap(make_transcript("How many Souths do you have?"), TABLE)
        assert texts(t) == ["How many sows do you have?"]
        assert [(e.rule_kind, e.original_span, e.replacement) for e in log] == [("remap", "Souths", "sows")]

    def test_whole_word_only(self):
        t, log = apply_term_remap(make_transcript("4300 faring", "the fairing-edge and faring-style"), TABLE)
        assert texts(t) == ["4300 farrowing", "the fairing-edge and faring-style"]
        assert len(log) == 1

    def test_empty_table_is_identity(self):
        src = make_transcript("Souths and faring")
        t, log = apply_term_remap(src, RemapTable())
        assert t == src and len(log) == 0

    def test_longest_match_first_and_case_insensitive(self):
        table = RemapTable((RemapEntry("dear pit", "deep pit"), RemapEntry("pit stop", "pit")))
        t, _ = apply_term_remap(make_transcript("A DEAR PIT stop"), table)
        assert texts(t) == ["A deep pit stop"]

    def test_domain_scope(self):
        table = RemapTable((RemapEntry("Souths", "sows", "pork"),))
        assert texts(apply_term_remap(make_transcript("Souths", domain="pork"), table)[0]) == ["sows"]
        assert texts(apply_term_remap(make_transcript("Souths", domain="dairy"), table)[0]) == ["Souths"]

    def test_table_invariants(self):
        with pytest.raises(ConfigError, match="duplicate"):
            RemapTable((RemapEntry("a", "b"), RemapEntry("A", "c")))
        with pytest.raises(ConfigError, match="newline"):
            RemapTable((RemapEntry("a", "b\nc"),))
        RemapTable((RemapEntry("a", "b", "pork"), RemapEntry("a", "c", "dairy")))

    def test_loader_accepts_tabs_and_commas(self, tmp_path):
        p = tmp_path / "remap.txt"
        p.write_text("# comment\nSouths\tsows\nfaring, farrowing, pork\n")
        table = load_remap_table(p)
        assert [(e.pattern, e.replacement, e.domain_scope) for e in table.entries] == [
            ("Souths", "sows", None), ("faring", "farrowing", "pork")]


class TestNumbers:
    @pytest.mark.parametrize("before,after", [
        ("2 40", "240"),
        ("It's 2 40 acres.", "It's 240 acres."),
        ("12 hundred", "1200"),
        ("twelve hundred head", "1200 head"),
        ("18 46 0", "18-46-0"),
        ("We have two 20-head barns", "We have two 20-head barns"),
        ("We have 4 4300 faring", "We have 4 4300 faring"),
        ("5 7 9", "5 7 9"),
        ("17 46 0", "17 46 0"),
    ])
    def test_cases(self, before, after):
        t, _ = normalize_numbers(make_transcript(before), GRADES)
        assert texts(t) == [after]

    def test_guarded_merge_is_logged_as_skipped(self):
        _, log = normalize_numbers(make_transcript("two 20-head barns", "2 20-head barns"), GRADES)
        assert not log.applied()
        assert any(e.skipped for e in log)


class TestHyphenAndFillers:
    def test_hyphenate(self):
        t, log = hyphenate_terms(make_transcript("We're Farrow to finish"), ["farrow to finish"])
        assert texts(t) == ["We're Farrow-to-finish"]
        assert log.entries[0].rule_kind == "hyphen"
        assert hyphenate_terms(make_transcript("farrow to finish"), [])[0] == make_transcript("farrow to finish")

    def test_overlapping_phrases_leftmost_longest(self):
        t, _ = hyphenate_terms(make_transcript("farrow to finish barn"),
                               ["farrow to finish", "finish barn"])
        assert texts(t) == ["farrow-to-finish barn"]

    def test_fillers(self):
        t, _ = remove_fillers(make_transcript("Um, yeah.", "an umbrella", "uh um I think"), ["um", "uh"])
        assert texts(t) == ["yeah.", "an umbrella", "I think"]

    def test_no_fillers_identity(self):
        src = make_transcript("nothing to remove")
        assert remove_fillers(src, ["um"])[0] == src

    def test_phrases_need_two_words(self):
        with pytest.raises(ConfigError):
            PreprocessConfig(phrases=("single",))


class TestPipeline:
    def test_capacity_dialogue_corrections(self, capacity_dialogue):
        t, log = preprocess_pipeline(capacity_dialogue, default_config())
        applied = {(e.original_span, e.replacement) for e in log.applied() if e.rule_kind == "remap"}
        assert applied == {("Souths", "sows"), ("faring", "farrowing")}
        assert "4 4300 farrowing... and then 1200 nursery" in t.turns[3].text

    def test_all_empty_config_is_identity(self, capacity_dialogue):
        t, log = preprocess_pipeline(capacity_dialogue, PreprocessConfig())
        assert t == capacity_dialogue and len(log) == 0

    def test_order_filler_then_hundreds(self):
        t, _ = preprocess_pipeline(make_transcript("um 12 hundred"), default_config())
        assert texts(t) == ["1200"]

    def test_tags_follow_edits(self):
        from interview_ie.transcript import parse_transcript
        t = parse_transcript('{"speaker": "A", "start": 0, "text": "Um, 12 hundred <laugh> head"}\n')
        out, _ = preprocess_pipeline(t, default_config())
        turn = out.turns[0]
        assert turn.text == "1200 head"
        assert [tag.name for tag in turn.tags] == ["laugh"]
        assert turn.tags[0].offset in (4, 5)


# -- properties -----------------------------------------------------------------

_words = st.sampled_from(["um", "uh", "Um,", "2", "40", "12", "hundred", "two", "twelve", "18", "46",
                          "0", "farrow", "to", "finish", "no", "till", "Souths", "faring", "barns",
                          "20-head", "acres", "yes.", "4300", "head", "umbrella", "the"])
_turn = st.lists(_words, max_size=12).map(" ".join)
_transcripts = st.lists(_turn, min_size=1, max_size=4).map(lambda ts: make_transcript(*ts, domain="pork"))
_CFG = default_config()
_PASSES = {
    "remap": lambda t: apply_term_remap(t, _CFG.remap),
    "numbers": lambda t: normalize_numbers(t, _CFG.grades),
    "hyphen": lambda t: hyphenate_terms(t, _CFG.phrases),
    "fillers": lambda t: remove_fillers(t, _CFG.fillers),
    "pipeline": lambda t: preprocess_pipeline(t, _CFG),
}


@pytest.mark.parametrize("name", sorted(_PASSES))
@given(t=_transcripts)
def test_passes_are_idempotent(name, t):
    once, _ = _PASSES[name](t)
    twice, _ = _PASSES[name](once)
    assert twice == once


@pytest.mark.parametrize("name", sorted(_PASSES))
@given(t=_transcripts)
def test_log_replay_reproduces_output(name, t):
    out, log = _PASSES[name](t)
    assert [x.text for x in log.replay(t).turns] == texts(out)


@pytest.mark.parametrize("name", sorted(_PASSES))
@given(t=_transcripts)
def test_structure_is_never_touched(name, t):
    out, log = _PASSES[name](t)
    assert len(out.turns) == len(t.turns)
    assert [(x.speaker_label, x.start_time) for x in out.turns] == \
        [(x.speaker_label, x.start_time) for x in t.turns]
    for e in log:
        assert e.original_span in t.turns[e.turn_index].text or e.rule_kind != "remap"
