"""JSONL corpus I/O for word problems and their localized versions.

Files are UTF-8 without BOM, one JSON object per line, keys in a fixed
documented order.  Unknown keys are preserved on load and re-emitted after
the known ones, so foreign metadata survives a round trip.  Saving the same
records twice produces byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import CorpusFormatError
from .evalkit import extract_answer
from .quality import QualityReport
from .replace import ReplacementDict

SPLITS = ("train", "test")

STATUS_LOCALIZED = "localized"
STATUS_FALLBACK = "fallback"
STATUS_NO_ENTITIES = "no_entities"
STATUSES = (STATUS_LOCALIZED, STATUS_FALLBACK, STATUS_NO_ENTITIES)

_INPUT_KEYS = ("id", "lang", "split", "x_en", "x_trans", "answer", "answer_num")
_OUTPUT_KEYS = _INPUT_KEYS + (
    "x_ent",
    "x_loc",
    "status",
    "replacements",
    "quality",
    "failure_reason",
)


@dataclass(frozen=True)
class MwpRecord:
    """One translated word problem.

    answer_raw is the gold answer string as distributed; answer_num is its
    numeric value, derived from answer_raw when not supplied.
    """

    id: str
    lang: str
    split: str
    x_en: str
    answer_raw: str
    x_trans: str | None = None
    answer_num: Decimal | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=True)

    def validate(self) -> None:
        if not self.id:
            raise CorpusFormatError("record id must be non-empty")
        if not self.lang:
            raise CorpusFormatError(f"record {self.id!r}: lang must be non-empty")
        if self.split not in SPLITS:
            raise CorpusFormatError(
                f"record {self.id!r}: split must be one of {'/'.join(SPLITS)}, "
                f"got {self.split!r}"
            )
        if not self.x_en:
            raise CorpusFormatError(f"record {self.id!r}: x_en must be non-empty")
        if not self.answer_raw:
            raise CorpusFormatError(f"record {self.id!r}: answer must be non-empty")


@dataclass(frozen=True)
class LocalizedRecord:
    """Pipeline output for one record.

    status is "localized" when the model output passed all quality gates,
    "fallback" when any stage failed (x_loc is then the plain translation and
    failure_reason says why), and "no_entities" when there was nothing to
    replace (x_loc is again the plain translation).
    """

    base: MwpRecord
    x_loc: str
    status: str
    x_ent: str | None = None
    replacements: ReplacementDict | None = None
    quality: QualityReport | None = None
    failure_reason: str | None = None

    def validate(self) -> None:
        self.base.validate()
        rid = self.base.id
        if self.status not in STATUSES:
            raise CorpusFormatError(f"record {rid!r}: unknown status {self.status!r}")
        if not self.x_loc:
            raise CorpusFormatError(f"record {rid!r}: x_loc must be non-empty")
        if self.status == STATUS_FALLBACK and not self.failure_reason:
            raise CorpusFormatError(
                f"record {rid!r}: fallback records need a failure_reason"
            )
        if self.status != STATUS_FALLBACK and self.failure_reason:
            raise CorpusFormatError(
                f"record {rid!r}: failure_reason is only valid on fallbacks"
            )
        if self.status in (STATUS_FALLBACK, STATUS_NO_ENTITIES):
            if self.base.x_trans is not None and self.x_loc != self.base.x_trans:
                raise CorpusFormatError(
                    f"record {rid!r}: {self.status} output must equal x_trans"
                )
        if self.status == STATUS_LOCALIZED:
            if self.quality is None or not self.quality.passed:
                raise CorpusFormatError(
                    f"record {rid!r}: localized records need a passing quality report"
                )


def _parse_answer_num(value: Any, where: str) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise CorpusFormatError(f"{where}: answer_num must be a number or string")
    try:
        return Decimal(str(value))
    except InvalidOperation:
        raise CorpusFormatError(f"{where}: answer_num {value!r} is not numeric") from None


def _record_from_obj(obj: dict[str, Any], where: str) -> MwpRecord:
    for key in ("id", "lang", "split", "x_en", "answer"):
        if key not in obj:
            raise CorpusFormatError(f"{where}: missing required field {key!r}")
        if not isinstance(obj[key], str):
            raise CorpusFormatError(f"{where}: field {key!r} must be a string")
    x_trans = obj.get("x_trans")
    if x_trans is not None and not isinstance(x_trans, str):
        raise CorpusFormatError(f"{where}: field 'x_trans' must be a string")

    derived = extract_answer(obj["answer"])
    answer_num: Decimal | None
    if "answer_num" in obj and obj["answer_num"] is not None:
        answer_num = _parse_answer_num(obj["answer_num"], where)
        if derived is None:
            raise CorpusFormatError(
                f"{where}: answer_num given but 'answer' holds no number"
            )
        if answer_num != derived:
            raise CorpusFormatError(
                f"{where}: answer_num {answer_num} does not match "
                f"the value {derived} extracted from 'answer'"
            )
    else:
        answer_num = derived

    extra = {k: v for k, v in obj.items() if k not in _INPUT_KEYS}
    record = MwpRecord(
        id=obj["id"],
        lang=obj["lang"],
        split=obj["split"],
        x_en=obj["x_en"],
        x_trans=x_trans,
        answer_raw=obj["answer"],
        answer_num=answer_num,
        extra=extra,
    )
    try:
        record.validate()
    except CorpusFormatError as exc:
        raise CorpusFormatError(f"{where}: {exc}") from None
    return record


def _record_to_obj(record: MwpRecord) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "id": record.id,
        "lang": record.lang,
        "split": record.split,
        "x_en": record.x_en,
    }
    if record.x_trans is not None:
        obj["x_trans"] = record.x_trans
    obj["answer"] = record.answer_raw
    if record.answer_num is not None:
        obj["answer_num"] = str(record.answer_num)
    for key in sorted(record.extra):
        obj[key] = record.extra[key]
    return obj


_LOCALIZED_ONLY_KEYS = tuple(k for k in _OUTPUT_KEYS if k not in _INPUT_KEYS)


def _localized_from_obj(obj: dict[str, Any], where: str) -> LocalizedRecord:
    # Unknown keys ride on the base record so a save/load round trip is exact.
    base = _record_from_obj(
        {k: v for k, v in obj.items() if k not in _LOCALIZED_ONLY_KEYS}, where
    )
    for key in ("x_loc", "status"):
        if key not in obj or not isinstance(obj[key], str):
            raise CorpusFormatError(f"{where}: missing or non-string field {key!r}")
    replacements = None
    if obj.get("replacements") is not None:
        try:
            replacements = ReplacementDict.from_list(obj["replacements"])
        except (TypeError, KeyError, ValueError) as exc:
            raise CorpusFormatError(f"{where}: bad replacements: {exc}") from None
    quality = None
    if obj.get("quality") is not None:
        try:
            quality = QualityReport.from_dict(obj["quality"])
        except (TypeError, KeyError, ValueError) as exc:
            raise CorpusFormatError(f"{where}: bad quality report: {exc}") from None
    record = LocalizedRecord(
        base=base,
        x_loc=obj["x_loc"],
        status=obj["status"],
        x_ent=obj.get("x_ent"),
        replacements=replacements,
        quality=quality,
        failure_reason=obj.get("failure_reason"),
    )
    try:
        record.validate()
    except CorpusFormatError as exc:
        raise CorpusFormatError(f"{where}: {exc}") from None
    return record


def _localized_to_obj(record: LocalizedRecord) -> dict[str, Any]:
    obj = _record_to_obj(record.base)
    for key in record.base.extra:  # re-appended after the localization fields
        obj.pop(key, None)
    if record.x_ent is not None:
        obj["x_ent"] = record.x_ent
    obj["x_loc"] = record.x_loc
    obj["status"] = record.status
    if record.replacements is not None:
        obj["replacements"] = record.replacements.to_list()
    if record.quality is not None:
        obj["quality"] = record.quality.to_dict()
    if record.failure_reason is not None:
        obj["failure_reason"] = record.failure_reason
    for key in sorted(record.base.extra):
        obj[key] = record.base.extra[key]
    return obj


def _iter_lines(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusFormatError(f"{path}: not valid UTF-8: {exc}") from None
    if text.startswith("﻿"):
        raise CorpusFormatError(f"{path}: unexpected UTF-8 BOM")
    # split on \n only: JSON strings may legally contain U+2028/U+2029,
    # which str.splitlines would treat as line boundaries
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise CorpusFormatError(f"{path}:{lineno}: line must hold a JSON object")
        yield lineno, obj


def _check_unique_ids(ids: Iterable[str], path: Path) -> None:
    seen: set[str] = set()
    for rid in ids:
        if rid in seen:
            raise CorpusFormatError(f"{path}: duplicate record id {rid!r}")
        seen.add(rid)


def load_records(path: str | Path) -> list[MwpRecord]:
    path = Path(path)
    records = [
        _record_from_obj(obj, f"{path}:{lineno}") for lineno, obj in _iter_lines(path)
    ]
    _check_unique_ids((r.id for r in records), path)
    return records


def load_localized_records(path: str | Path) -> list[LocalizedRecord]:
    path = Path(path)
    records = [
        _localized_from_obj(obj, f"{path}:{lineno}") for lineno, obj in _iter_lines(path)
    ]
    _check_unique_ids((r.base.id for r in records), path)
    return records


def _dump_lines(objs: Iterable[dict[str, Any]], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(obj, ensure_ascii=False) for obj in objs]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def save_records(records: Sequence[MwpRecord], path: str | Path) -> None:
    path = Path(path)
    for record in records:
        record.validate()
    _check_unique_ids((r.id for r in records), path)
    _dump_lines((_record_to_obj(r) for r in records), path)


def save_localized_records(records: Sequence[LocalizedRecord], path: str | Path) -> None:
    path = Path(path)
    for record in records:
        record.validate()
    _check_unique_ids((r.base.id for r in records), path)
    _dump_lines((_localized_to_obj(r) for r in records), path)
