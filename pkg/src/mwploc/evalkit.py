"""Scoring of model answers on translated and localized benchmarks.

Two metrics per record: exact match (trimmed string equality against the
gold answer) and numeric match (the last number in the model output compared
to the gold value within a small relative tolerance).  A benchmark score
averages each metric over records, then over prompt variants.

Also here: COMET-style score filtering for building benchmark subsets, and
the localized-minus-translated robustness delta report.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from statistics import fmean
from typing import Any, Iterable, Mapping, Protocol, Sequence

from .errors import EvalError

DEFAULT_NM_TOLERANCE = Decimal("0.000001")
DEFAULT_SCORE_THRESHOLD = 0.65
DEFAULT_TOP_K = 1500

# A number not preceded by a digit (so "3-5" yields 3 and 5, not 3 and -5).
_NUMBER_RE = re.compile(r"(?<!\d)-?\d+(?:\.\d+)?")
_GROUPING_COMMA_RE = re.compile(r"(?<=\d),(?=\d)")


def extract_answer(output: str) -> Decimal | None:
    """Last number mentioned in the output, None if there is none.

    Digit-grouping commas are stripped first, so "1,234" reads as 1234.
    Currency signs, percent signs, and trailing words are ignored because
    only the digits (with optional sign and decimal point) are captured.
    """
    cleaned = _GROUPING_COMMA_RE.sub("", output)
    tokens = _NUMBER_RE.findall(cleaned)
    if not tokens:
        return None
    return Decimal(tokens[-1])


def exact_match(prediction: str, gold_raw: str) -> bool:
    return prediction.strip() == gold_raw.strip()


def _as_decimal(value: Any) -> Decimal:
    if isinstance(value, Decimal):
        return value
    try:
        return Decimal(str(value))
    except InvalidOperation:
        raise EvalError(f"gold answer {value!r} is not numeric") from None


def numeric_match(
    prediction: str,
    gold: Any,
    tolerance: Decimal = DEFAULT_NM_TOLERANCE,
) -> bool:
    """True when the last number in the prediction is within
    tolerance * max(1, |gold|) of the gold value."""
    predicted = extract_answer(prediction)
    if predicted is None:
        return False
    gold_num = _as_decimal(gold)
    return abs(predicted - gold_num) <= tolerance * max(Decimal(1), abs(gold_num))


class GoldRecord(Protocol):
    id: str
    lang: str
    answer_raw: str
    answer_num: Decimal | None


@dataclass(frozen=True)
class VariantScore:
    variant: str
    em: float
    nm: float


@dataclass(frozen=True)
class LangScore:
    em: float
    nm: float
    n: int


@dataclass(frozen=True)
class EvalReport:
    n_records: int
    em: float
    nm: float
    variants: tuple[VariantScore, ...]
    by_lang: dict[str, LangScore]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_records": self.n_records,
            "em": self.em,
            "nm": self.nm,
            "variants": [
                {"variant": v.variant, "em": v.em, "nm": v.nm} for v in self.variants
            ],
            "by_lang": {
                lang: {"em": s.em, "nm": s.nm, "n": s.n}
                for lang, s in sorted(self.by_lang.items())
            },
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "EvalReport":
        try:
            return cls(
                n_records=int(obj["n_records"]),
                em=float(obj["em"]),
                nm=float(obj["nm"]),
                variants=tuple(
                    VariantScore(
                        variant=str(v["variant"]), em=float(v["em"]), nm=float(v["nm"])
                    )
                    for v in obj["variants"]
                ),
                by_lang={
                    str(lang): LangScore(
                        em=float(s["em"]), nm=float(s["nm"]), n=int(s["n"])
                    )
                    for lang, s in obj["by_lang"].items()
                },
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EvalError(f"malformed evaluation report: {exc}") from None


def _gold_value(gold: GoldRecord) -> Decimal | None:
    if gold.answer_num is not None:
        return gold.answer_num
    return extract_answer(gold.answer_raw)


def evaluate(
    predictions: Mapping[str, Mapping[str, str]],
    golds: Sequence[GoldRecord],
    tolerance: Decimal = DEFAULT_NM_TOLERANCE,
) -> EvalReport:
    """Score prediction sets (one per prompt variant) against gold records.

    Every variant must cover exactly the gold ids.  Per-variant accuracies
    are averaged arithmetically across variants, overall and per language.
    """
    if not predictions:
        raise EvalError("need at least one prediction variant")
    if not golds:
        raise EvalError("need at least one gold record")
    gold_ids = [g.id for g in golds]
    if len(set(gold_ids)) != len(gold_ids):
        raise EvalError("gold records contain duplicate ids")
    gold_id_set = set(gold_ids)

    for variant in sorted(predictions):
        preds = predictions[variant]
        missing = sorted(gold_id_set - preds.keys())
        extra = sorted(preds.keys() - gold_id_set)
        if missing or extra:
            raise EvalError(
                f"variant {variant!r} does not cover the gold ids "
                f"({len(missing)} missing, {len(extra)} extra; "
                f"first missing: {missing[:3]}, first extra: {extra[:3]})"
            )

    variant_scores: list[VariantScore] = []
    lang_em: dict[str, list[list[bool]]] = {}
    lang_nm: dict[str, list[list[bool]]] = {}
    langs = sorted({g.lang for g in golds})

    for variant in sorted(predictions):
        preds = predictions[variant]
        em_by_lang: dict[str, list[bool]] = {lang: [] for lang in langs}
        nm_by_lang: dict[str, list[bool]] = {lang: [] for lang in langs}
        em_all: list[bool] = []
        nm_all: list[bool] = []
        for gold in golds:
            pred = preds[gold.id]
            if not isinstance(pred, str):
                raise EvalError(f"prediction for {gold.id!r} must be a string")
            em = exact_match(pred, gold.answer_raw)
            gold_num = _gold_value(gold)
            nm = (
                numeric_match(pred, gold_num, tolerance)
                if gold_num is not None
                else False
            )
            em_all.append(em)
            nm_all.append(nm)
            em_by_lang[gold.lang].append(em)
            nm_by_lang[gold.lang].append(nm)
        variant_scores.append(
            VariantScore(variant=variant, em=fmean(em_all), nm=fmean(nm_all))
        )
        for lang in langs:
            lang_em.setdefault(lang, []).append(em_by_lang[lang])
            lang_nm.setdefault(lang, []).append(nm_by_lang[lang])

    by_lang = {
        lang: LangScore(
            em=fmean(fmean(run) for run in lang_em[lang]),
            nm=fmean(fmean(run) for run in lang_nm[lang]),
            n=len(lang_em[lang][0]),
        )
        for lang in langs
    }
    return EvalReport(
        n_records=len(golds),
        em=fmean(v.em for v in variant_scores),
        nm=fmean(v.nm for v in variant_scores),
        variants=tuple(variant_scores),
        by_lang=by_lang,
    )


@dataclass(frozen=True)
class TransScore:
    record_id: str
    lang: str
    score: float


def load_scores(path: str | Path) -> list[TransScore]:
    """Read translation quality scores from a CSV of record_id,lang,score.

    A single header row is tolerated.  Scores must lie in [0, 1].
    """
    path = Path(path)
    out: list[TransScore] = []
    with path.open(newline="", encoding="utf-8") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row:
                continue
            if len(row) != 3:
                raise EvalError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            record_id, lang, raw_score = (cell.strip() for cell in row)
            try:
                score = float(raw_score)
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise EvalError(f"{path}:{lineno}: score {raw_score!r} is not a number") from None
            if not record_id or not lang:
                raise EvalError(f"{path}:{lineno}: empty record_id or lang")
            if not 0.0 <= score <= 1.0:
                raise EvalError(f"{path}:{lineno}: score {score} outside [0, 1]")
            out.append(TransScore(record_id=record_id, lang=lang, score=score))
    return out


def filter_translations(
    scores: Iterable[TransScore],
    threshold: float = DEFAULT_SCORE_THRESHOLD,
    top_k: int = DEFAULT_TOP_K,
) -> dict[str, list[str]]:
    """Per language: ids scoring strictly above the threshold, best first,
    capped at top_k.  Ties are broken by record id, so the selection is a
    deterministic function of the score set."""
    if not 0.0 <= threshold <= 1.0:
        raise EvalError(f"threshold must be in [0, 1], got {threshold}")
    if top_k < 1:
        raise EvalError(f"top_k must be >= 1, got {top_k}")
    seen: set[tuple[str, str]] = set()
    per_lang: dict[str, list[TransScore]] = {}
    for s in scores:
        key = (s.record_id, s.lang)
        if key in seen:
            raise EvalError(f"duplicate score for record {s.record_id!r} lang {s.lang!r}")
        seen.add(key)
        per_lang.setdefault(s.lang, []).append(s)
    selection: dict[str, list[str]] = {}
    for lang in sorted(per_lang):
        qualifying = [s for s in per_lang[lang] if s.score > threshold]
        qualifying.sort(key=lambda s: (-s.score, s.record_id))
        selection[lang] = [s.record_id for s in qualifying[:top_k]]
    return selection


@dataclass(frozen=True)
class DeltaRow:
    lang: str
    nm_translated: float
    nm_localized: float
    delta: float
    direction: str  # "+", "-", or "0"

    def to_dict(self) -> dict[str, Any]:
        return {
            "lang": self.lang,
            "nm_translated": self.nm_translated,
            "nm_localized": self.nm_localized,
            "delta": self.delta,
            "direction": self.direction,
        }


def delta_nm(localized_nm: float, translated_nm: float) -> float:
    """Robustness delta: positive means the model held up under localization."""
    return localized_nm - translated_nm


def build_delta_table(localized: EvalReport, translated: EvalReport) -> list[DeltaRow]:
    loc_langs = set(localized.by_lang)
    trans_langs = set(translated.by_lang)
    if loc_langs != trans_langs:
        raise EvalError(
            "reports cover different languages: "
            f"only-localized={sorted(loc_langs - trans_langs)}, "
            f"only-translated={sorted(trans_langs - loc_langs)}"
        )
    rows: list[DeltaRow] = []
    for lang in sorted(loc_langs):
        loc = localized.by_lang[lang]
        trans = translated.by_lang[lang]
        if loc.n != trans.n:
            raise EvalError(
                f"language {lang!r}: record counts differ ({loc.n} vs {trans.n})"
            )
        delta = delta_nm(loc.nm, trans.nm)
        direction = "+" if delta > 0 else "-" if delta < 0 else "0"
        rows.append(
            DeltaRow(
                lang=lang,
                nm_translated=trans.nm,
                nm_localized=loc.nm,
                delta=delta,
                direction=direction,
            )
        )
    return rows


def render_delta_table(rows: Sequence[DeltaRow]) -> str:
    """Fixed-width text table, one language per row."""
    header = f"{'lang':<8} {'nm_trans':>9} {'nm_loc':>9} {'delta':>9} dir"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.lang:<8} {row.nm_translated:>9.4f} {row.nm_localized:>9.4f} "
            f"{row.delta:>+9.4f} {row.direction:>3}"
        )
    return "\n".join(lines) + "\n"
