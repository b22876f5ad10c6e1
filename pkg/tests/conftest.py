from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import settings

from interview_ie.config import default_data_dir
from interview_ie.transcript import SpeakerTurn, Transcript, load_transcript

settings.register_profile("repo", deadline=None, max_examples=60)
settings.load_profile("repo")

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
DATA = default_data_dir()


def make_transcript(*texts: str, domain: str | None = None, speakers=None) -> Transcript:
    """Alternating interviewer/farmer turns one second apart."""
    turns = []
    for i, text in enumerate(texts):
        speaker = speakers[i] if speakers else ("Speaker 1" if i % 2 == 0 else "Speaker 2")
        turns.append(SpeakerTurn(speaker, float(i), text))
    return Transcript("t", tuple(turns), domain)


def jsonl(*records: dict) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


@pytest.fixture(scope="session")
def capacity_dialogue():
    return load_transcript(FIXTURES / "barn_capacity.jsonl", "barn_capacity", "pork")


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
