"""
From a noisy transcript to grounded records
===========================================

Four turns of a pork interview go through the rule-based path: ASR fixes,
fragment extraction, dialogue assembly and ontology grounding.  Every
intermediate result is printed so the hand-off between stages is visible.
"""

from pathlib import Path

from interview_ie.assembly import load_assembly_config
from interview_ie.config import default_data_dir
from interview_ie.grounding import load_ontology
from interview_ie.ns import NSResources, run_ns_pipeline
from interview_ie.preprocess import load_preprocess_config, preprocess_pipeline
from interview_ie.rules.annotation import annotate
from interview_ie.rules.grammar import compile_rules
from interview_ie.rules.heuristic import HeuristicAnnotator
from interview_ie.rules.kb import load_kb
from interview_ie.transcript import load_transcript

DATA = default_data_dir()
FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

###############################################################################
# The raw turns.  "Souths" and "faring" are recognition errors for "sows"
# and "farrowing", and the stray "4" is a false start.

raw = load_transcript(FIXTURES / "barn_capacity.jsonl", "barn_capacity", "pork")
for turn in raw.turns:
    print(f"{turn.speaker_label:>10}: {turn.text}")

###############################################################################
# Preprocessing returns the corrected transcript and a log of every edit.
# The false start stays: nothing in the text says it is spurious.

pre = load_preprocess_config(DATA / "remap.csv", DATA / "phrases.txt", DATA / "fillers.txt",
                             DATA / "grades.txt")
clean, log = preprocess_pipeline(raw, pre)
for e in log.applied():
    print(f"turn {e.turn_index}: {e.rule_kind:<8} {e.original_span!r} -> {e.replacement!r}")
print(clean.turns[3].text)

###############################################################################
# Extraction, assembly and grounding.  The capacity question sits three
# turns before its answer; the assembly window reaches back to it.

kbs = {d: load_kb(DATA / "kb" / d, d) for d in ("common", "pork", "crop", "dairy")}
res = NSResources(compile_rules((DATA / "rules.yaml").read_text()), kbs,
                  load_assembly_config(DATA / "assembly.cfg"), load_ontology(DATA / "ontology.csv"))
result = run_ns_pipeline(clean, annotate(clean, HeuristicAnnotator()), res)

for f in result.fragments:
    print(f"fragment  {f.kind:<20} {f.text!r} (turn {f.turn_index})")
for p in result.pairs:
    print(f"pair      {p.identifier.text!r} <- {p.value.text!r} ({p.link_kind}, distance {p.distance})")
for r in result.records:
    print(f"record    {r.grounding} = {r.value} {r.unit or ''} (score {r.score:.2f})")

###############################################################################
# The false start is carried all the way through.  "barns" in the question
# is an identifier that accepts a bare number, so the stray "4" becomes a
# record for the number of barns.  Preprocessing cannot tell a false start
# from a count, and this record is a known false positive.
