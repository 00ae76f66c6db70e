"""Per-language entity database and deterministic replacement picking."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import AbstractSet, Any

from .errors import EntityDbError, ReplacementExhaustedError, UnknownLanguageError

MIN_PERSONAL_NAMES = 8
MIN_ORGANIZATION_NAMES = 3


@dataclass(frozen=True)
class CurrencyEntry:
    """Surface forms a problem may use for the currency, and the single
    native word they all map to."""

    symbol_forms: tuple[str, ...]
    word_forms: tuple[str, ...]
    target_word: str


@dataclass(frozen=True)
class LanguageEntry:
    code: str
    name: str
    personal_names: tuple[str, ...]
    organization_names: tuple[str, ...]
    currency: CurrencyEntry


@dataclass(frozen=True)
class EntityDatabase:
    languages: dict[str, LanguageEntry]

    def language(self, code: str) -> LanguageEntry:
        try:
            return self.languages[code]
        except KeyError:
            raise UnknownLanguageError(code) from None

    def codes(self) -> list[str]:
        return sorted(self.languages)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise EntityDbError(message)


def _str_list(obj: Any, lang: str, key: str, minimum: int) -> tuple[str, ...]:
    _require(isinstance(obj, list), f"language {lang!r}: {key} must be a list")
    out: list[str] = []
    seen: set[str] = set()
    for item in obj:
        _require(
            isinstance(item, str) and item.strip() != "",
            f"language {lang!r}: {key} entries must be non-empty strings",
        )
        folded = item.casefold()
        _require(folded not in seen, f"language {lang!r}: duplicate {key} entry {item!r}")
        seen.add(folded)
        out.append(item)
    _require(
        len(out) >= minimum,
        f"language {lang!r}: {key} needs at least {minimum} entries, got {len(out)}",
    )
    return tuple(out)


def _parse_currency(obj: Any, lang: str) -> CurrencyEntry:
    _require(isinstance(obj, dict), f"language {lang!r}: currency must be an object")
    symbol_forms = _str_list(obj.get("symbol_forms"), lang, "currency.symbol_forms", 1)
    word_forms = _str_list(obj.get("word_forms"), lang, "currency.word_forms", 1)
    target = obj.get("target_word")
    _require(
        isinstance(target, str) and target.strip() != "",
        f"language {lang!r}: currency.target_word must be a non-empty string",
    )
    return CurrencyEntry(
        symbol_forms=symbol_forms, word_forms=word_forms, target_word=target
    )


def parse_entity_db(obj: Any, source: str = "<memory>") -> EntityDatabase:
    _require(isinstance(obj, dict), f"{source}: database root must be an object")
    languages_obj = obj.get("languages")
    _require(
        isinstance(languages_obj, dict) and len(languages_obj) > 0,
        f"{source}: database needs a non-empty 'languages' object",
    )
    languages: dict[str, LanguageEntry] = {}
    for code, entry in languages_obj.items():
        _require(isinstance(entry, dict), f"language {code!r}: entry must be an object")
        name = entry.get("name")
        _require(
            isinstance(name, str) and name.strip() != "",
            f"language {code!r}: name must be a non-empty string",
        )
        languages[code] = LanguageEntry(
            code=code,
            name=name,
            personal_names=_str_list(
                entry.get("personal_names"), code, "personal_names", MIN_PERSONAL_NAMES
            ),
            organization_names=_str_list(
                entry.get("organization_names"),
                code,
                "organization_names",
                MIN_ORGANIZATION_NAMES,
            ),
            currency=_parse_currency(entry.get("currency"), code),
        )
    return EntityDatabase(languages=languages)


def load_entity_db(path: str | Path) -> EntityDatabase:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EntityDbError(f"{path}: not valid JSON: {exc}") from exc
    return parse_entity_db(obj, source=str(path))


def load_default_db() -> EntityDatabase:
    """Starter database shipped with the package."""
    text = resources.files("mwploc").joinpath("data/entities.json").read_text("utf-8")
    return parse_entity_db(json.loads(text), source="mwploc/data/entities.json")


def _stable_index(seed: int, record_id: str, kind: str, source: str, n: int) -> int:
    key = f"{seed}|{record_id}|{kind}|{source}".encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") % n


def pick_replacement(
    db: EntityDatabase,
    lang: str,
    kind: str,
    source: str,
    record_id: str,
    seed: int,
    *,
    exclude: AbstractSet[str] = frozenset(),
) -> str:
    """Deterministic candidate choice for one extracted entity.

    The hash of (seed, record_id, kind, source) picks a start index into the
    candidate list; linear probing skips candidates equal to the source
    (case-insensitive) or already used in this record.  Exhausting the list
    raises ReplacementExhaustedError.
    """
    language = db.language(lang)
    if kind == "person":
        candidates = language.personal_names
    elif kind == "org":
        candidates = language.organization_names
    else:
        raise ValueError(f"pick_replacement does not handle kind {kind!r}")
    n = len(candidates)
    start = _stable_index(seed, record_id, kind, source, n)
    source_key = source.casefold()
    excluded = {e.casefold() for e in exclude}
    for offset in range(n):
        candidate = candidates[(start + offset) % n]
        key = candidate.casefold()
        if key == source_key or key in excluded:
            continue
        return candidate
    raise ReplacementExhaustedError(lang=lang, kind=kind, source=source)
