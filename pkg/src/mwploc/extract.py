"""LLM-backed entity classification for English problem text.

The model reports which personal names, organization names, and currency
mentions appear in a problem.  Responses are parsed leniently (the JSON
object may sit inside prose or a code fence), re-requested once on parse
failure, and validated against the source text so hallucinated entities
never reach the replacement stage.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any

from .errors import EntityParseError, ExtractionError
from .llmclient import LlmProvider, LlmRequest
from .prompts import load_prompt, render_prompt

log = logging.getLogger(__name__)

_FIELDS = ("personal_names", "organization_names", "currencies")

EXTRACT_TEMPLATE = "extract_entities_v1.txt"


@dataclass(frozen=True)
class ExtractConfig:
    tag: str = "extract"
    max_output: int = 256


@dataclass(frozen=True)
class EntitySet:
    personal_names: tuple[str, ...] = ()
    organization_names: tuple[str, ...] = ()
    currencies: tuple[str, ...] = ()

    def is_empty(self) -> bool:
        return not (self.personal_names or self.organization_names or self.currencies)

    def to_dict(self) -> dict[str, list[str]]:
        return {
            "personal_names": list(self.personal_names),
            "organization_names": list(self.organization_names),
            "currencies": list(self.currencies),
        }


def _candidate_objects(raw: str):
    decoder = json.JSONDecoder()
    pos = 0
    while True:
        start = raw.find("{", pos)
        if start < 0:
            return
        try:
            obj, end = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            pos = start + 1
            continue
        if isinstance(obj, dict):
            yield obj
            pos = end
        else:
            pos = start + 1


def parse_entity_response(raw: str) -> EntitySet:
    """Extract the entity object from a raw model response.

    The first JSON object carrying any known field wins; with none, the first
    JSON object at all (so a bare "{}" means "no entities").  Anything else
    raises EntityParseError.
    """
    chosen: dict[str, Any] | None = None
    for obj in _candidate_objects(raw):
        if any(key in obj for key in _FIELDS):
            chosen = obj
            break
        if chosen is None:
            chosen = obj
    if chosen is None:
        raise EntityParseError("no JSON object found in model response")
    values: dict[str, list[str]] = {}
    for key in _FIELDS:
        v = chosen.get(key, [])
        if not isinstance(v, list) or not all(isinstance(s, str) for s in v):
            raise EntityParseError(f"field {key!r} must be a list of strings")
        values[key] = v
    return EntitySet(
        personal_names=tuple(values["personal_names"]),
        organization_names=tuple(values["organization_names"]),
        currencies=tuple(values["currencies"]),
    )


def _occurs_at_boundary(text: str, needle: str) -> bool:
    low = text.casefold()
    aligned = len(low) == len(text)
    needle_low = needle.casefold()
    width = len(needle)
    n = len(text)
    for pos in range(n - width + 1):
        seg = low[pos : pos + width] if aligned else text[pos : pos + width].casefold()
        if seg != needle_low:
            continue
        left_ok = pos == 0 or not text[pos - 1].isalpha()
        right_ok = pos + width == n or not text[pos + width].isalpha()
        if left_ok and right_ok:
            return True
    return False


def validate_entities(ents: EntitySet, x_en: str) -> EntitySet:
    """Keep only entities that actually occur in the problem text.

    Entries are stripped, deduplicated case-insensitively (first spelling
    wins), and dropped when they do not appear at a word boundary in x_en.
    """

    def clean(values: tuple[str, ...], label: str) -> tuple[str, ...]:
        out: list[str] = []
        seen: set[str] = set()
        for value in values:
            value = value.strip()
            if not value:
                continue
            key = value.casefold()
            if key in seen:
                continue
            seen.add(key)
            if not _occurs_at_boundary(x_en, value):
                log.debug("dropping %s %r: not found in problem text", label, value)
                continue
            out.append(value)
        return tuple(out)

    return EntitySet(
        personal_names=clean(ents.personal_names, "personal name"),
        organization_names=clean(ents.organization_names, "organization"),
        currencies=clean(ents.currencies, "currency"),
    )


def classify_entities(
    x_en: str, llm: LlmProvider, cfg: ExtractConfig = ExtractConfig()
) -> EntitySet:
    """Ask the model which entities the problem mentions, with one repair
    retry on an unparseable response.  Transport errors propagate."""
    if not x_en:
        raise ValueError("x_en must be non-empty")
    prompt = render_prompt(load_prompt(EXTRACT_TEMPLATE), problem=x_en)
    raw = llm.complete(LlmRequest(prompt=prompt, max_output=cfg.max_output, tag=cfg.tag))
    try:
        ents = parse_entity_response(raw)
    except EntityParseError:
        log.debug("unparseable entity response, retrying once: %.120r", raw)
        repair = prompt + "\n\nReturn only the JSON object, with no other text."
        raw = llm.complete(
            LlmRequest(prompt=repair, max_output=cfg.max_output, tag=cfg.tag + ":repair")
        )
        try:
            ents = parse_entity_response(raw)
        except EntityParseError as exc:
            raise ExtractionError(
                f"entity response unparseable after repair retry: {exc}"
            ) from exc
    return validate_entities(ents, x_en)
