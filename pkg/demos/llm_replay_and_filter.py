"""
Model-free extraction with a replay store
=========================================

The model path builds one prompt per topic block and schema, sends it to a
chat backend and verifies whatever comes back.  Here a replay file stands in
for the model, so the run is deterministic and needs no network.
"""

import json
import tempfile
from pathlib import Path

from interview_ie.config import default_data_dir
from interview_ie.grounding import load_ontology
from interview_ie.llm import (ChatBackendConfig, build_prompt, load_field_map, load_schemas, map_fields,
                              query_model, replay_key, verify_output)

DATA = default_data_dir()
schemas = {s.name: s for s in load_schemas(DATA / "schemas.yaml")}
ontology = load_ontology(DATA / "ontology.csv")
field_map = load_field_map(DATA / "field_map.csv")

block = "And so you're finishing how many total pigs a year? 6,670."
pigs = schemas["TotalFinishingPigsEvent"]

###############################################################################
# The prompt: fixed instructions, then the schema and a worked example each
# inside a fenced region, then the block itself.

prompt = build_prompt(pigs, block)
print(prompt[:400], "...")

###############################################################################
# Replay entries are keyed by a hash of the schema name and block text.
# The canned answer uses a string for the number, as models often do.

store = Path(tempfile.mkdtemp()) / "replay.json"
store.write_text(json.dumps({replay_key(pigs.name, block): '[{"total_finishing_pigs": "6,670"}]'}))
raw = query_model(prompt, ChatBackendConfig.replay(store), pigs.name, block)
validated = verify_output(raw, pigs, block)
print(raw, "->", [(v.field_name, v.value, v.coerced) for v in validated])
print(map_fields(validated, field_map, ontology))

###############################################################################
# The hallucination filter only asks for one shared word.  An invented
# rotation that happens to mention "years" gets through; one that shares
# nothing is dropped.

rotation = schemas["RotationEvent"]
answer = "What does your rotation look like? Corn, then beans, and we've done that for about ten years."
for guess in ("three years alfalfa", "alfalfa pasture"):
    kept = verify_output(json.dumps([{"crop_rotation": guess}]), rotation, answer)
    print(f"{guess!r}: {'kept' if kept else 'dropped'}")
