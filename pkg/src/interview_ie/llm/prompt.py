"""Prompt construction from the packaged instruction template."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

from .schema import ExtractionSchema

FENCE = "```"
_SLOT_RE = re.compile(r"\{(schema|example|text)\}")


class PromptError(ValueError):
    pass


@lru_cache(maxsize=1)
def prompt_template() -> str:
    return resources.files("interview_ie.data").joinpath("prompt_template.txt").read_text(encoding="utf-8")


def escape_fences(text: str) -> str:
    """Break up backtick runs so that substituted text cannot open or close
    a fenced region."""
    return text.replace("`", "\\`")


def build_prompt(s: ExtractionSchema, block_text: str, template: str | None = None) -> str:
    if not block_text or not block_text.strip():
        raise PromptError("block text is empty")
    values = {"schema": escape_fences(s.describe()), "example": escape_fences(s.describe_example()),
              "text": escape_fences(block_text)}
    # one pass, so substituted text is never re-scanned for slots
    return _SLOT_RE.sub(lambda m: values[m.group(1)], template or prompt_template())


def fenced_regions(prompt: str) -> list[str]:
    """Contents of the fenced schema/example regions of a built prompt."""
    return re.findall(r"^```(.*?)``` \(do NOT extract", prompt, flags=re.S | re.M)
