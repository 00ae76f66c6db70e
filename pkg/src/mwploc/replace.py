"""Replacement dictionaries and boundary-aware entity substitution.

Matching is case-insensitive and only fires where the occurrence is bounded
by the text edge or a non-letter on both sides, so "Mandy's" rewrites its
stem while "Amandya" is left alone.  Targets are emitted verbatim and are
never re-scanned, which makes a single pass sufficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

from .entitydb import EntityDatabase, pick_replacement
from .errors import MultiCurrencyError
from .extract import EntitySet

KIND_PERSON = "person"
KIND_ORG = "org"
KIND_CURRENCY_SYMBOL = "currency_symbol"
KIND_CURRENCY_WORD = "currency_word"

_KINDS = (KIND_PERSON, KIND_ORG, KIND_CURRENCY_SYMBOL, KIND_CURRENCY_WORD)


@dataclass(frozen=True)
class Replacement:
    source: str
    target: str
    kind: str

    def __post_init__(self):
        if not self.source:
            raise ValueError("replacement source must be non-empty")
        if not self.target:
            raise ValueError("replacement target must be non-empty")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown replacement kind {self.kind!r}")

    def to_dict(self) -> dict[str, str]:
        return {"source": self.source, "target": self.target, "kind": self.kind}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "Replacement":
        return cls(source=obj["source"], target=obj["target"], kind=obj["kind"])


@dataclass(frozen=True)
class ReplacementDict:
    """Ordered replacement entries for one record.

    Entries are grouped person, org, currency symbol, currency word, and
    sorted longest source first within each group, so no source can shadow
    a longer one of the same kind.
    """

    entries: tuple[Replacement, ...] = field(default=())

    def __post_init__(self):
        seen: set[str] = set()
        for e in self.entries:
            key = e.source.casefold()
            if key in seen:
                raise ValueError(f"duplicate replacement source {e.source!r}")
            seen.add(key)
            if e.source.casefold() == e.target.casefold():
                raise ValueError(f"replacement maps {e.source!r} onto itself")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_list(self) -> list[dict[str, str]]:
        return [e.to_dict() for e in self.entries]

    @classmethod
    def from_list(cls, items: Iterable[dict[str, Any]]) -> "ReplacementDict":
        return cls(entries=tuple(Replacement.from_dict(o) for o in items))


@dataclass(frozen=True)
class Match:
    """One substitution site: text[start:end] is replaced by `emitted`.

    For currency symbols directly before a number the consumed span also
    covers the whitespace between symbol and digits, and `emitted` carries
    a single trailing space, so "$ 100" and "$100" both normalize to
    "<target> 100".
    """

    start: int
    end: int
    entry: Replacement
    emitted: str


def _is_boundary(text: str, start: int, end: int) -> bool:
    left_ok = start == 0 or not text[start - 1].isalpha()
    right_ok = end == len(text) or not text[end].isalpha()
    return left_ok and right_ok


def find_matches(text: str, rdict: ReplacementDict) -> list[Match]:
    """All non-overlapping matches, scanning left to right and preferring the
    longest source at each position (ties keep dictionary order)."""
    entries = sorted(rdict.entries, key=lambda e: -len(e.source))
    lowered = [e.source.casefold() for e in entries]
    low = text.casefold()
    # Casefolding can change string length (rare, e.g. dotted capital I);
    # fall back to per-slice folding when offsets would not line up.
    aligned = len(low) == len(text)

    matches: list[Match] = []
    pos = 0
    n = len(text)
    while pos < n:
        hit = None
        for entry, src_low in zip(entries, lowered):
            width = len(entry.source)
            if pos + width > n:
                continue
            seg = low[pos : pos + width] if aligned else text[pos : pos + width].casefold()
            if seg != src_low:
                continue
            if not _is_boundary(text, pos, pos + width):
                continue
            hit = entry
            break
        if hit is None:
            pos += 1
            continue
        end = pos + len(hit.source)
        emitted = hit.target
        if hit.kind == KIND_CURRENCY_SYMBOL:
            scan = end
            while scan < n and text[scan].isspace():
                scan += 1
            if scan < n and text[scan].isdigit():
                end = scan
                emitted = hit.target + " "
        matches.append(Match(start=pos, end=end, entry=hit, emitted=emitted))
        pos = end
    return matches


def apply_replacements(text: str, rdict: ReplacementDict) -> str:
    """Rewrite every match in one pass; an empty dictionary is the identity."""
    parts: list[str] = []
    last = 0
    for m in find_matches(text, rdict):
        parts.append(text[last : m.start])
        parts.append(m.emitted)
        last = m.end
    parts.append(text[last:])
    return "".join(parts)


def matched_entries(text: str, rdict: ReplacementDict) -> list[Replacement]:
    """Distinct entries that fire at least once, in first-match order."""
    out: list[Replacement] = []
    for m in find_matches(text, rdict):
        if m.entry not in out:
            out.append(m.entry)
    return out


def sources_present(text: str, rdict: ReplacementDict) -> list[str]:
    """Distinct sources still occurring in the text, in first-match order."""
    return [e.source for e in matched_entries(text, rdict)]


def contains_at_boundary(text: str, needle: str) -> bool:
    """Case-insensitive occurrence of `needle` bounded by non-letters."""
    probe = ReplacementDict(
        entries=(Replacement(source=needle, target=chr(0) + "probe", kind=KIND_PERSON),)
    )
    return bool(find_matches(text, probe))


def _dedup_casefold(values: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for v in values:
        key = v.casefold()
        if key not in seen:
            seen.add(key)
            out.append(v)
    return out


def build_replacement_dict(
    ents: EntitySet,
    db: EntityDatabase,
    lang: str,
    record_id: str,
    seed: int,
) -> ReplacementDict:
    """Map every extracted entity to a native replacement.

    Person and org targets are picked deterministically from the database
    (see entitydb.pick_replacement) without reuse inside the record.  Any
    currency mention maps every known surface form of the language's currency
    to its single target word; forms outside that entry raise
    MultiCurrencyError.
    """
    language = db.language(lang)

    persons: list[Replacement] = []
    taken: set[str] = set()
    for name in ents.personal_names:
        target = pick_replacement(
            db, lang, KIND_PERSON, name, record_id, seed, exclude=frozenset(taken)
        )
        taken.add(target)
        persons.append(Replacement(source=name, target=target, kind=KIND_PERSON))

    orgs: list[Replacement] = []
    taken_orgs: set[str] = set()
    for name in ents.organization_names:
        target = pick_replacement(
            db, lang, KIND_ORG, name, record_id, seed, exclude=frozenset(taken_orgs)
        )
        taken_orgs.add(target)
        orgs.append(Replacement(source=name, target=target, kind=KIND_ORG))

    symbols: list[Replacement] = []
    words: list[Replacement] = []
    if ents.currencies:
        currency = language.currency
        symbol_keys = {f.casefold() for f in currency.symbol_forms}
        word_keys = {f.casefold() for f in currency.word_forms}
        unknown = [
            c for c in ents.currencies if c.casefold() not in symbol_keys | word_keys
        ]
        if unknown:
            raise MultiCurrencyError(unknown)
        # Cover every known form, not just the detected ones, so stray
        # mentions in the translation cannot survive the rewrite.
        for form in _dedup_casefold(list(ents.currencies) + list(currency.symbol_forms)):
            if form.casefold() in symbol_keys:
                symbols.append(
                    Replacement(
                        source=form, target=currency.target_word, kind=KIND_CURRENCY_SYMBOL
                    )
                )
        for form in _dedup_casefold(currency.word_forms):
            if form.casefold() == currency.target_word.casefold():
                continue  # mapping the target word onto itself is a no-op
            words.append(
                Replacement(
                    source=form, target=currency.target_word, kind=KIND_CURRENCY_WORD
                )
            )

    def by_length(group: list[Replacement]) -> list[Replacement]:
        return sorted(group, key=lambda e: -len(e.source))

    ordered = by_length(persons) + by_length(orgs) + by_length(symbols) + by_length(words)
    return ReplacementDict(entries=tuple(ordered))
