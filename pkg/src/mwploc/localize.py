"""End-to-end localization of one record, with quality-gated fallback.

Stages: classify entities in the English problem, build a replacement
dictionary against the target-language database, rewrite the English text,
ask the model to port exactly those replacements into the translation, then
gate the candidate.  Every failure mode collapses to a fallback record that
carries the plain translation and a machine-readable failure_reason, so a
batch run never loses records.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .config import LocalizationConfig
from .corpus import (
    STATUS_FALLBACK,
    STATUS_LOCALIZED,
    STATUS_NO_ENTITIES,
    LocalizedRecord,
    MwpRecord,
)
from .entitydb import EntityDatabase
from .errors import (
    ExtractionError,
    LlmError,
    MultiCurrencyError,
    ReplacementExhaustedError,
    UnknownLanguageError,
)
from .extract import ExtractConfig, classify_entities
from .llmclient import LlmProvider, LlmRequest
from .prompts import load_prompt, render_prompt
from .quality import QualityReport, failure_reason, run_quality_checks
from .replace import ReplacementDict, apply_replacements, build_replacement_dict

log = logging.getLogger(__name__)

_TEMPLATES = {
    "fixed-demo-v1": "localize_fixed_demo_v1.txt",
    "pair-only-v1": "localize_pair_only_v1.txt",
}
DIRECT_TEMPLATE = "direct_localize_v1.txt"

_LOCALIZE_MAX_OUTPUT = 1024


def build_localization_prompt(
    x_en: str,
    x_trans: str,
    x_ent: str,
    language_name: str,
    version: str = "fixed-demo-v1",
) -> str:
    """One-shot prompt asking the model to port the entity replacements from
    the rewritten English problem into the existing translation."""
    try:
        template = _TEMPLATES[version]
    except KeyError:
        raise ValueError(f"unknown prompt version {version!r}") from None
    return render_prompt(
        load_prompt(template),
        native_lang=language_name,
        original_eng=x_en,
        original_native=x_trans,
        modified_eng=x_ent,
    )


def build_direct_prompt(x_en: str, language_name: str) -> str:
    """Prompt for localizing an English problem into a target language in one
    step, without a pre-existing translation."""
    return render_prompt(
        load_prompt(DIRECT_TEMPLATE), target_lang_name=language_name, problem=x_en
    )


def localize_record(
    record: MwpRecord,
    db: EntityDatabase,
    llm: LlmProvider,
    cfg: LocalizationConfig = LocalizationConfig(),
) -> LocalizedRecord:
    """Localize one record.  Never raises on per-record trouble: anything
    that keeps the record from being localized yields a fallback instead."""
    if not record.x_trans:
        raise ValueError(f"record {record.id!r} has no x_trans to localize")
    x_trans = record.x_trans

    def fallback(
        reason: str,
        x_ent: str | None = None,
        rdict: ReplacementDict | None = None,
        report: QualityReport | None = None,
    ) -> LocalizedRecord:
        log.debug("record %s falls back: %s", record.id, reason)
        return LocalizedRecord(
            base=record,
            x_loc=x_trans,
            status=STATUS_FALLBACK,
            x_ent=x_ent,
            replacements=rdict,
            quality=report,
            failure_reason=reason,
        )

    try:
        language = db.language(record.lang)
    except UnknownLanguageError:
        return fallback(f"lang_not_in_db: {record.lang}")

    try:
        ents = classify_entities(
            record.x_en, llm, ExtractConfig(tag=f"extract:{record.id}")
        )
    except (ExtractionError, LlmError) as exc:
        return fallback(f"extraction_error: {exc}")

    if ents.is_empty():
        return LocalizedRecord(base=record, x_loc=x_trans, status=STATUS_NO_ENTITIES)

    try:
        rdict = build_replacement_dict(ents, db, record.lang, record.id, cfg.seed)
    except MultiCurrencyError as exc:
        return fallback("multi_currency: " + ", ".join(exc.forms))
    except ReplacementExhaustedError as exc:
        return fallback(f"replacement_exhausted: {exc.kind}")

    x_ent = apply_replacements(record.x_en, rdict)
    prompt = build_localization_prompt(
        record.x_en, x_trans, x_ent, language.name, version=cfg.prompt_version
    )
    try:
        raw = llm.complete(
            LlmRequest(
                prompt=prompt, max_output=_LOCALIZE_MAX_OUTPUT, tag=f"loc:{record.id}"
            )
        )
    except LlmError as exc:
        return fallback(f"llm_error: {exc}", x_ent=x_ent, rdict=rdict)

    x_hat = raw.strip()
    report = run_quality_checks(x_hat, x_trans, rdict, cfg)
    if report.passed:
        return LocalizedRecord(
            base=record,
            x_loc=x_hat,
            status=STATUS_LOCALIZED,
            x_ent=x_ent,
            replacements=rdict,
            quality=report,
        )
    reason = failure_reason(report)
    assert reason is not None
    return fallback(reason, x_ent=x_ent, rdict=rdict, report=report)


def localize_records(
    records: Sequence[MwpRecord],
    db: EntityDatabase,
    llm: LlmProvider,
    cfg: LocalizationConfig = LocalizationConfig(),
    jobs: int = 1,
) -> list[LocalizedRecord]:
    """Localize a batch, preserving input order.  With jobs > 1 records are
    processed on a thread pool (the pipeline is I/O bound)."""
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if jobs == 1:
        return [localize_record(r, db, llm, cfg) for r in records]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda r: localize_record(r, db, llm, cfg), records))
