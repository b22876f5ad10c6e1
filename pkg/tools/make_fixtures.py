"""Write the synthetic interview fixtures under fixtures/.

Three interviews (pork, crop, dairy) of roughly 4,700 words each.  Every
scripted exchange carries its gold records and the canned model output for
the schemas that will see it; neutral small talk pads the transcripts out.
Raw transcripts contain the usual ASR damage (misheard terms, split
numbers, fillers, tags).  Annotations come from the package's heuristic
annotator run over the preprocessed text, standing in for an external
NLP service.

Run from the repository root:  python tools/make_fixtures.py
"""

from __future__ import annotations

import csv
import io
import json
import random
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from interview_ie.config import default_data_dir
from interview_ie.llm.backend import replay_key
from interview_ie.llm.schema import load_schemas, schemas_for
from interview_ie.preprocess import load_preprocess_config, preprocess_pipeline
from interview_ie.rules.annotation import dump_annotations
from interview_ie.rules.heuristic import annotate_text
from interview_ie.segmentation import (block_text, fine_segment, load_keyword_map,
                                       load_marker_patterns, segment_by_markers)
from interview_ie.transcript import parse_transcript, serialize_transcript

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "fixtures"
DATA = default_data_dir()
TARGET_WORDS = 4820
SEED = 20250101

Q, A = "Speaker 1", "Speaker 2"

# -- scripted content -----------------------------------------------------------

@dataclass
class Scene:
    turns: list[tuple[str, str]]
    gold: list[tuple] = field(default_factory=list)  # node_id, value, unit, group, essential
    llm: dict[str, list[dict]] = field(default_factory=dict)


CHATTER = [
    "That makes sense to me.",
    "We talked about that with the family a while back.",
    "It has been a busy spring for everybody around here.",
    "The weather has been pretty good this week, which helps.",
    "My dad started the place when he came back from the service.",
    "We try to keep things simple and keep up with the paperwork.",
    "I think that is about right, but I would have to check the records.",
    "Our neighbor helps out when things get tight.",
    "The kids are in school now so it is quieter during the day.",
    "We had some trouble with the equipment last season.",
    "That program has been helpful for us over time.",
    "I appreciate you taking the time to talk with me today.",
    "Let me know if anything is unclear as we go.",
    "We can come back to that later if you want.",
    "The roads get pretty muddy when it rains a lot.",
    "We sell most of it through the local co-op.",
    "Prices have been up and down, like everybody says.",
    "I would say we are doing about the same as before.",
    "The new shop went up a little while ago.",
    "My wife handles most of the books and the bills.",
    "We have a good relationship with the vet and the nutritionist.",
    "It is a family operation in the sense that everybody pitches in.",
    "Honestly the hardest part is finding good help these days.",
    "We went to a meeting in town about that last winter.",
    "I guess I never really thought about it that way.",
    "That is a good question, let me think for a second.",
    "Sure, I can walk you through how the week usually goes.",
    "We get up early and the mornings are the busiest part.",
    "Things slow down a little in the evening.",
    "We keep notes on the whiteboard in the office.",
    "The internet out here is not great, so bear with me.",
    "I can hear you fine now.",
    "Sorry, you cut out for a second there.",
    "Go ahead, I am listening.",
    "That is interesting, I did not know that.",
    "We have been working with the extension office on a few things.",
    "The bank likes to see everything written down.",
    "We changed the schedule around a couple of times.",
    "It was a rough stretch but we made it through.",
    "The nearest town is a short drive from here.",
    "We have a big family reunion every summer.",
    "There is always something that needs fixing.",
    "Most of the neighbors have been here as long as we have.",
    "We try not to take on more than we can handle.",
    "I like to think we leave the place better than we found it.",
    "My brother used to be involved but he moved away.",
    "Right, that lines up with what I remember.",
    "Okay, that is helpful, thank you.",
    "Let me just write that down before I forget.",
    "We can keep going, I have plenty of time this afternoon.",
    "Got it, thanks for explaining that.",
    "I will make a note of that.",
]

FILLERS_IN = ["Um, ", "Uh, ", ""]


def pork_scenes() -> tuple[str, list[Scene]]:
    marker = "Okay, so section one is about pork, and we will start with the pigs themselves."
    return marker, [
        Scene([(Q, "And so you're finishing how many total pigs a year?"), (A, "6,670.")],
              [("total_finishing_pigs", "6670", "", "", True)],
              {"TotalFinishingPigsEvent": [{"total_finishing_pigs": 6670}]}),
        Scene([(Q, "What type of operation is this?"), (A, "Um, we're farrow to finish.")],
              [("production_system", "farrow-to-finish", "", "", True)],
              {"ProductionSystemEvent": [{"production_system": "farrow-to-finish"}]}),
        Scene([(Q, "How many Souths do you have?"), (A, "<affirmative> We're at about 2,500 Souths right now.")],
              [("sow_count", "2500", "sow", "", True)],
              {"SowEvent": [{"number_of_sows": "2,500"}]}),
        Scene([(Q, "And what is the capacity of those barns?"), (A, "<laugh> Well, let me think."),
               (Q, "Take your time."), (A, "We have 4 4300 faring... and then 1200 nursery.")],
              [("barn_capacity", "4300", "farrowing", "", True),
               ("barn_capacity", "1200", "nursery", "", True)],
              {"BarnEvent": [{"barn_type": "farrowing", "barn_capacity": 4300},
                             {"barn_type": "nursery", "barn_capacity": 1200}]}),
        Scene([(Q, "How many barns is that in total?"), (A, "Five.")],
              [("barn_count", "5", "", "", True)],
              {"BarnEvent": [{"number_of_barns": 5}]}),
        Scene([(A, "Oh, and there is a small hospital barn too, maybe 10 farrowing.")],
              [("barn_capacity", "10", "farrowing", "", False)],
              {"BarnEvent": [{"barn_type": "farrowing", "barn_capacity": 10}]}),
        Scene([(Q, "How many employees do you have?"), (A, "Three.")],
              [("employees", "3", "", "", True)],
              {"EmployeeEvent": [{"number_of_employees": 3}]}),
        Scene([(Q, "What kind of manure storage do you use?"), (A, "Uh, it's all deep pits under the buildings.")],
              [("manure_storage", "deep pits", "", "", True)],
              {"ManureEvent": [{"manure_storage": "deep pits"}]}),
        Scene([(Q, "Do you have any other renewable energy on the farm?"), (A, "No, not yet.")],
              [("renewable_energy", "false", "", "", False)],
              {"RenewableEnergyEvent": [{"renewable_energy": False}]}),
    ]


def crop_scenes() -> tuple[str, list[Scene]]:
    marker = "Alright, section two is about crops, so tell me about the fields."
    return marker, [
        Scene([(Q, "What crops do you grow?"), (A, "Corn, soybeans, and some winter wheat.")],
              [("crops", "corn", "", "", True), ("crops", "soybeans", "", "", True),
               ("crops", "wheat", "", "wheat", True), ("crops", "winter wheat", "", "wheat", True)],
              {"CropEvent": [{"crops": ["corn", "soybeans", "wheat"]}]}),
        Scene([(Q, "And how many acres is that altogether?"), (A, "Uh, it's 2 40 acres on this place.")],
              [("total_acres", "240", "acre", "", True)],
              {"CropEvent": [{"total_acres": 240}]}),
        Scene([(Q, "What was your corn yield last year?"), (A, "We averaged two hundred bushels.")],
              [("corn_yield", "200", "bushel", "", False)],
              {"CropEvent": [{"corn_yield": 200}]}),
        Scene([(Q, "What kind of tillage do you do?"), (A, "Mostly no till, and some strip till on the heavier ground.")],
              [("tillage", "no-till", "", "", True), ("tillage", "strip-till", "", "", True)],
              {"TillageEvent": [{"tillage_practice": "no-till"}, {"tillage_practice": "strip-till"}]}),
        # "tillage radish" opens a tillage block, so the model is asked for
        # tillage practices on the cover crop answer
        Scene([(Q, "Do you plant any cover crops?"), (A, "Yeah, tillage radish and cereal rye after the beans.")],
              [("cover_crops", "tillage radish", "", "", True), ("cover_crops", "cereal rye", "", "", True)],
              {"TillageEvent": [{"tillage_practice": "radish"}]}),
        Scene([(Q, "What does your rotation look like?"), (A, "Corn, then beans, and we've done that for about ten years.")],
              [("crop_rotation", "corn-soybean", "", "", True)],
              {"RotationEvent": [{"crop_rotation": "three years alfalfa"}]}),
        Scene([(Q, "What fertilizer do you put on?"), (A, "We use 18 46 0 in the fall and some anhydrous.")],
              [("fertilizer", "18-46-0", "", "", True), ("fertilizer", "anhydrous", "", "", True)],
              {"FertilizerEvent": [{"fertilizer_products": ["18-46-0", "anhydrous"]}]}),
        Scene([(Q, "Which herbicides do you use?"), (A, "Glyphosate and atrazine, mostly.")],
              [("herbicides", "glyphosate", "", "", True), ("herbicides", "atrazine", "", "", True)],
              {"HerbicideEvent": [{"herbicides": ["glyphosate", "atrazine"]}]}),
        Scene([(Q, "Do you have irrigation on any fields?"), (A, "No, it's all dryland.")],
              [("irrigation", "false", "", "", False)],
              {"IrrigationEvent": [{"irrigation": "false"}]}),
        Scene([(Q, "How many workers do you have?"), (A, "Just two of us.")],
              [("employees", "2", "", "", True)],
              {"EmployeeEvent": [{"number_of_employees": 2}]}),
    ]


def dairy_scenes() -> tuple[str, list[Scene]]:
    marker = "Okay, section three is about dairy, so let's talk about the herd."
    return marker, [
        Scene([(Q, "How many cows are you milking?"), (A, "About 350 cows.")],
              [("milking_cows", "350", "cow", "", True)],
              {"HerdEvent": [{"milking_cows": 350}]}),
        Scene([(Q, "What is your milk production per cow?"), (A, "They average 92 pounds a day.")],
              [("milk_production", "92", "pound", "", True)],
              {"MilkEvent": [{"milk_production": 92}]}),
        Scene([(Q, "And your protein and butter fat?"), (A, "Protein is 4 and butterfat 3.")],
              [("milk_protein", "4", "percent", "", True), ("butterfat", "3", "percent", "", True)],
              {"MilkEvent": [{"milk_protein": 4, "butterfat": 3}]}),
        Scene([(Q, "What do you use for bedding?"), (A, "Sand in the freestalls.")],
              [("bedding", "sand", "", "", True)],
              {"BeddingEvent": [{"bedding": "sand"}]}),
        Scene([(Q, "How do you store the manure?"), (A, "It goes into pits.")],
              [("manure_storage", "pits", "", "", True)],
              {"ManureEvent": [{"manure_storage": "pits"}]}),
        Scene([(Q, "Are the robots doing all the milking?"), (A, "Yes, four robots.")],
              [("robotic_milking", "true", "", "", True)],
              {"RoboticMilkingEvent": [{"robotic_milking": "true"}]}),
        Scene([(Q, "How many employees work here?"), (A, "Six full time.")],
              [("employees", "6", "", "", True)],
              {"EmployeeEvent": [{"number_of_employees": 6}]}),
        Scene([(Q, "Any solar panels on the farm?"), (A, "Yes, we put them up two years ago.")],
              [("renewable_energy", "true", "", "", False)],
              {"RenewableEnergyEvent": [{"renewable_energy": True}]}),
    ]


INTERVIEWS = {"pork-1": ("pork", pork_scenes), "crop-1": ("crop", crop_scenes),
              "dairy-1": ("dairy", dairy_scenes)}


def check_chatter(km) -> None:
    """Small talk must not trigger topics, KB entries or number rules."""
    banned = {k.lower() for k, _ in km.entries}
    banned |= {"section", "south", "souths", "yes", "yeah", "yep", "no", "nope", "um", "uh", "head",
               "pit", "pits", "lagoon", "sand", "straw", "corn", "wheat", "oats", "alfalfa", "three",
               "years"}
    for s in CHATTER:
        words = set(re.findall(r"[a-z0-9']+", s.lower()))
        bad = words & banned
        if bad or re.search(r"\d", s):
            raise SystemExit(f"chatter sentence {s!r} uses {sorted(bad)}")


def words_of(text: str) -> int:
    return len(re.sub(r"<[^<>]*>", " ", text).split())


def build_interview(iid: str, domain: str, scenes_fn, rng: random.Random):
    marker, scenes = scenes_fn()
    scripted = sum(words_of(t) for s in scenes for _, t in s.turns) + words_of(marker)
    gaps = len(scenes) + 1
    budget = TARGET_WORDS - scripted
    turns: list[tuple[str, str]] = []
    scene_at: list[tuple[int, Scene]] = []

    def pad(words: int):
        speaker = A if not turns or turns[-1][0] == Q else Q
        while words > 0:
            k = rng.randint(1, 3)
            text = " ".join(rng.choice(CHATTER) for _ in range(k))
            turns.append((speaker, text))
            words -= words_of(text)
            speaker = Q if speaker == A else A

    pad(budget // gaps // 2)
    turns.append((Q, marker))
    for i, scene in enumerate(scenes):
        scene_at.append((len(turns), scene))
        turns.extend(scene.turns)
        pad(budget // gaps)
    lines = []
    clock = 3.0
    for spk, text in turns:
        lines.append(json.dumps({"speaker": spk, "start": round(clock, 2), "text": text}, ensure_ascii=False))
        clock += 0.4 * words_of(text) + 1.5
    raw = "\n".join(lines) + "\n"
    return raw, scene_at


def main() -> int:
    km = load_keyword_map(DATA / "keywords.csv")
    markers = load_marker_patterns(DATA / "markers.txt")
    schemas = load_schemas(DATA / "schemas.yaml")
    pre = load_preprocess_config(DATA / "remap.csv", DATA / "phrases.txt", DATA / "fillers.txt",
                                 DATA / "grades.txt")
    check_chatter(km)
    rng = random.Random(SEED)
    (OUT / "transcripts").mkdir(parents=True, exist_ok=True)
    (OUT / "annotations").mkdir(parents=True, exist_ok=True)
    replay: dict[str, str] = {}
    gold_rows = []
    manifest_rows = []
    for iid, (domain, scenes_fn) in INTERVIEWS.items():
        raw, scene_at = build_interview(iid, domain, scenes_fn, rng)
        t = parse_transcript(raw, iid, domain)
        (OUT / "transcripts" / f"{iid}.jsonl").write_text(serialize_transcript(t), encoding="utf-8")
        clean, _ = preprocess_pipeline(t, pre)
        annos = [a for i, turn in enumerate(clean.turns) for a in annotate_text(i, turn.text)]
        (OUT / "annotations" / f"{iid}.jsonl").write_text(dump_annotations(annos), encoding="utf-8")

        responses: dict[tuple[int, str], list[dict]] = {}
        blocks = []
        for seg in segment_by_markers(clean, markers):
            for b in fine_segment(seg, clean, km):
                blocks.append((seg, b))
        for start, scene in scene_at:
            last = start + len(scene.turns) - 1
            for schema_name, recs in scene.llm.items():
                for k, (seg, b) in enumerate(blocks):
                    if b.start <= last < b.end:
                        names = [s.name for s in schemas_for(schemas, b.topic_label, seg.domain)]
                        if schema_name not in names:
                            raise SystemExit(f"{iid}: {schema_name} does not run on block "
                                             f"{b.topic_label} at turn {last}")
                        responses.setdefault((k, schema_name), []).extend(recs)
            for node, value, unit, group, essential in scene.gold:
                gold_rows.append([iid, node, value, unit, group, "true" if essential else "false"])
        for k, (seg, b) in enumerate(blocks):
            text = block_text(clean, b)
            if not text.strip():
                continue
            for s in schemas_for(schemas, b.topic_label, seg.domain):
                replay[replay_key(s.name, text)] = json.dumps(responses.get((k, s.name), []))
                if s.name == "RotationEvent" and (k, s.name) in responses:
                    shared = {"three", "years", "alfalfa"} & set(re.findall(r"[a-z0-9]+", text.lower()))
                    assert shared == {"years"}, shared
        manifest_rows.append([iid, f"transcripts/{iid}.jsonl", domain, f"annotations/{iid}.jsonl"])
        print(f"{iid}: {len(t.turns)} turns, {clean.word_count()} words, {len(blocks)} blocks")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["interview_id", "path", "domain_hint", "annotations"])
    w.writerows(manifest_rows)
    (OUT / "manifest.csv").write_text(buf.getvalue(), encoding="utf-8")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["interview_id", "node_id", "value", "unit", "variant_group", "essential"])
    w.writerows(gold_rows)
    (OUT / "gold.csv").write_text(buf.getvalue(), encoding="utf-8")
    (OUT / "replay.json").write_text(json.dumps(replay, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{len(gold_rows)} gold records, {len(replay)} replay entries")
    return 0


if __name__ == "__main__":
    sys.exit(main())
