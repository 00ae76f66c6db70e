"""Command-line workflows: extract, localize, filter, eval, report, review.

Every file-producing command writes a manifest.json next to its outputs with
the resolved configuration, input digests, and outcome counts; manifests
carry no timestamps, so a re-run with identical inputs is byte-identical.

Exit codes: 0 full success, 1 finished with per-record fallbacks or errors,
2 configuration or input-contract problems.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

import click

from . import __version__
from .config import DEFAULT_LENGTH_BAND, DEFAULT_SIMILARITY_THRESHOLD, PROMPT_VERSIONS, LocalizationConfig
from .corpus import (
    STATUS_FALLBACK,
    STATUS_LOCALIZED,
    STATUS_NO_ENTITIES,
    LocalizedRecord,
    MwpRecord,
    load_localized_records,
    load_records,
    save_localized_records,
    save_records,
)
from .entitydb import EntityDatabase, load_default_db, load_entity_db
from .errors import (
    CorpusFormatError,
    EntityDbError,
    EvalError,
    ExtractionError,
    LlmError,
)
from .evalkit import (
    DEFAULT_SCORE_THRESHOLD,
    DEFAULT_TOP_K,
    EvalReport,
    build_delta_table,
    evaluate,
    filter_translations,
    load_scores,
    render_delta_table,
)
from .extract import ExtractConfig, classify_entities
from .llmclient import (
    AuthError,
    HttpProvider,
    LlmProvider,
    MockFixtureError,
    ProviderConfig,
    RetryPolicy,
    load_mock_fixtures,
)
from .localize import localize_records

T = TypeVar("T")
R = TypeVar("R")


class CliConfigError(click.ClickException):
    """Bad configuration or malformed input; maps to exit code 2."""

    exit_code = 2


@click.group()
@click.version_option(version=__version__, prog_name="mwploc")
def main():
    """Culturally localize translated math word problems and score model
    robustness on the result."""


def _provider_options(fn):
    options = [
        click.option(
            "--provider",
            type=click.Choice(["mock", "openai", "gemini"]),
            default="mock",
            show_default=True,
            help="LLM backend; 'mock' replays --fixtures offline.",
        ),
        click.option("--model", default="", help="Model name (live providers)."),
        click.option(
            "--rpm",
            type=int,
            default=60,
            show_default=True,
            help="Max requests per minute.",
        ),
        click.option(
            "--fixtures",
            type=click.Path(dir_okay=False, path_type=Path),
            default=None,
            help="Canned-response file for the mock provider.",
        ),
        click.option("--endpoint", default="", help="Override the provider URL."),
        click.option(
            "--key-env", default="", help="Env var holding the API key."
        ),
        click.option(
            "--cache-buster",
            is_flag=True,
            default=False,
            help="Prefix each prompt with a unique marker line.",
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_provider(
    provider: str,
    model: str,
    rpm: int,
    fixtures: Path | None,
    endpoint: str,
    key_env: str,
    cache_buster: bool,
    max_retries: int = 2,
) -> LlmProvider:
    if provider == "mock":
        if fixtures is None:
            raise CliConfigError("--provider mock requires --fixtures")
        try:
            return load_mock_fixtures(fixtures)
        except OSError as exc:
            raise CliConfigError(f"cannot read fixtures: {exc}") from None
        except MockFixtureError as exc:
            raise CliConfigError(str(exc)) from None
    if not model:
        raise CliConfigError(f"--provider {provider} requires --model")
    try:
        cfg = ProviderConfig(
            adapter=provider,
            model=model,
            endpoint=endpoint,
            key_env=key_env,
            rpm=rpm,
            cache_buster=cache_buster,
            retry=RetryPolicy(max_attempts=max_retries + 1),
        )
        return HttpProvider(cfg)
    except (ValueError, AuthError) as exc:
        raise CliConfigError(str(exc)) from None


def _load_records_cli(path: Path) -> list[MwpRecord]:
    try:
        return load_records(path)
    except OSError as exc:
        raise CliConfigError(f"cannot read {path}: {exc}") from None
    except CorpusFormatError as exc:
        raise CliConfigError(str(exc)) from None


def _load_db_cli(path: Path | None) -> EntityDatabase:
    try:
        return load_entity_db(path) if path is not None else load_default_db()
    except OSError as exc:
        raise CliConfigError(f"cannot read entity database: {exc}") from None
    except EntityDbError as exc:
        raise CliConfigError(str(exc)) from None


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(
    out_dir: Path,
    command: str,
    config: dict[str, Any],
    inputs: dict[str, Path],
    counts: dict[str, int],
) -> None:
    manifest = {
        "command": command,
        "config": config,
        "counts": counts,
        "inputs": {name: _sha256_file(path) for name, path in inputs.items()},
        "tool_version": __version__,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    (out_dir / "manifest.json").write_text(text, encoding="utf-8")


def _write_jsonl(rows: Iterable[dict[str, Any]], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows)
    path.write_text(text, encoding="utf-8")


def _run_jobs(work: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    """Apply `work` to every item, preserving input order in the output."""
    if jobs < 1:
        raise CliConfigError("--jobs must be >= 1")
    if jobs == 1 or len(items) <= 1:
        return [work(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, items))


@main.command("extract")
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path), help="Input records (JSONL).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker threads.")
@_provider_options
def cmd_extract(in_path, out_dir, jobs, **provider_kwargs):
    """Classify entities in each English problem."""
    records = _load_records_cli(in_path)
    llm = _build_provider(**provider_kwargs)

    def work(record: MwpRecord) -> dict[str, Any]:
        try:
            ents = classify_entities(
                record.x_en, llm, ExtractConfig(tag=f"extract:{record.id}")
            )
        except (ExtractionError, LlmError) as exc:
            return {"id": record.id, "error": str(exc)}
        return {"id": record.id, **ents.to_dict()}

    rows = _run_jobs(work, records, jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_jsonl(rows, out_dir / "entities.jsonl")
    errors = sum(1 for row in rows if "error" in row)
    _write_manifest(
        out_dir,
        "extract",
        config={"jobs": jobs, **_provider_manifest(provider_kwargs)},
        inputs={"in": in_path},
        counts={"records": len(rows), "ok": len(rows) - errors, "error": errors},
    )
    click.echo(f"extracted {len(rows) - errors}/{len(rows)} records -> {out_dir / 'entities.jsonl'}")
    if errors:
        raise SystemExit(1)


def _provider_manifest(kwargs: dict[str, Any]) -> dict[str, Any]:
    out = dict(kwargs)
    fixtures = out.pop("fixtures", None)
    out["fixtures"] = str(fixtures) if fixtures is not None else None
    return out


def _parse_length_band(_ctx, _param, value: str) -> tuple[float, float]:
    try:
        lo_text, hi_text = value.split(",")
        lo, hi = float(lo_text), float(hi_text)
    except ValueError:
        raise click.BadParameter("expected LOW,HIGH (for example 0.70,1.43)") from None
    return (lo, hi)


@main.command("localize")
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path), help="Input records (JSONL).")
@click.option("--db", "db_path", type=click.Path(path_type=Path), default=None, help="Entity database JSON (default: bundled starter db).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for replacement picking.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker threads.")
@click.option(
    "--similarity-threshold",
    type=float,
    default=DEFAULT_SIMILARITY_THRESHOLD,
    show_default=True,
    help="Candidates must score strictly above this.",
)
@click.option(
    "--length-band",
    default=f"{DEFAULT_LENGTH_BAND[0]},{DEFAULT_LENGTH_BAND[1]}",
    show_default=True,
    callback=_parse_length_band,
    help="Accepted length-ratio interval LOW,HIGH.",
)
@click.option(
    "--prompt-version",
    type=click.Choice(list(PROMPT_VERSIONS)),
    default="fixed-demo-v1",
    show_default=True,
    help="Localization prompt flavor.",
)
@_provider_options
def cmd_localize(
    in_path,
    db_path,
    out_dir,
    seed,
    jobs,
    similarity_threshold,
    length_band,
    prompt_version,
    **provider_kwargs,
):
    """Run the full localization pipeline over a corpus."""
    records = _load_records_cli(in_path)
    db = _load_db_cli(db_path)

    unknown = sorted({r.lang for r in records} - set(db.languages))
    if unknown:
        raise CliConfigError(
            "input languages missing from the entity database: " + ", ".join(unknown)
        )
    missing_trans = [r.id for r in records if not r.x_trans]
    if missing_trans:
        raise CliConfigError(
            f"{len(missing_trans)} records have no x_trans "
            f"(first: {missing_trans[:3]})"
        )

    if jobs < 1:
        raise CliConfigError("--jobs must be >= 1")
    try:
        cfg = LocalizationConfig(
            seed=seed,
            similarity_threshold=similarity_threshold,
            length_band=length_band,
            prompt_version=prompt_version,
        )
    except ValueError as exc:
        raise CliConfigError(str(exc)) from None
    llm = _build_provider(**provider_kwargs, max_retries=cfg.max_llm_retries)

    results = localize_records(records, db, llm, cfg, jobs=jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_localized_records(results, out_dir / "localized.jsonl")

    counts = {status: 0 for status in (STATUS_LOCALIZED, STATUS_FALLBACK, STATUS_NO_ENTITIES)}
    for result in results:
        counts[result.status] += 1
    inputs = {"in": in_path}
    if db_path is not None:
        inputs["db"] = db_path
    _write_manifest(
        out_dir,
        "localize",
        config={
            "seed": seed,
            "jobs": jobs,
            "similarity_threshold": similarity_threshold,
            "length_band": list(length_band),
            "prompt_version": prompt_version,
            "db": str(db_path) if db_path else "builtin",
            **_provider_manifest(provider_kwargs),
        },
        inputs=inputs,
        counts={"records": len(results), **counts},
    )
    click.echo(
        f"localized {counts[STATUS_LOCALIZED]}, "
        f"fallback {counts[STATUS_FALLBACK]}, "
        f"no_entities {counts[STATUS_NO_ENTITIES]} -> {out_dir / 'localized.jsonl'}"
    )
    if counts[STATUS_FALLBACK]:
        raise SystemExit(1)


@main.command("filter")
@click.option("--scores", "scores_path", required=True, type=click.Path(path_type=Path), help="Translation scores CSV (record_id,lang,score).")
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path), help="Input records (JSONL).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--threshold", type=float, default=DEFAULT_SCORE_THRESHOLD, show_default=True, help="Keep scores strictly above this.")
@click.option("--top-k", type=int, default=DEFAULT_TOP_K, show_default=True, help="Per-language cap, best first.")
def cmd_filter(scores_path, in_path, out_dir, threshold, top_k):
    """Select the best-translated records per language."""
    records = _load_records_cli(in_path)
    try:
        scores = load_scores(scores_path)
        selection = filter_translations(scores, threshold=threshold, top_k=top_k)
    except OSError as exc:
        raise CliConfigError(f"cannot read {scores_path}: {exc}") from None
    except EvalError as exc:
        raise CliConfigError(str(exc)) from None

    selected = {
        (record_id, lang) for lang, ids in selection.items() for record_id in ids
    }
    kept = [r for r in records if (r.id, r.lang) in selected]
    out_dir.mkdir(parents=True, exist_ok=True)
    save_records(kept, out_dir / "filtered.jsonl")
    selection_obj = {
        "threshold": threshold,
        "top_k": top_k,
        "selected": selection,
    }
    (out_dir / "selection.json").write_text(
        json.dumps(selection_obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    _write_manifest(
        out_dir,
        "filter",
        config={"threshold": threshold, "top_k": top_k},
        inputs={"in": in_path, "scores": scores_path},
        counts={
            "records_in": len(records),
            "records_out": len(kept),
            **{f"selected_{lang}": len(ids) for lang, ids in selection.items()},
        },
    )
    click.echo(f"kept {len(kept)}/{len(records)} records -> {out_dir / 'filtered.jsonl'}")


def _load_predictions(path: Path) -> dict[str, str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliConfigError(f"cannot read {path}: {exc}") from None
    preds: dict[str, str] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CliConfigError(f"{path}:{lineno}: not valid JSON: {exc}") from None
        if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) or not isinstance(obj.get("output"), str):
            raise CliConfigError(
                f"{path}:{lineno}: prediction lines need string 'id' and 'output'"
            )
        if obj["id"] in preds:
            raise CliConfigError(f"{path}:{lineno}: duplicate prediction id {obj['id']!r}")
        preds[obj["id"]] = obj["output"]
    return preds


def _parse_tolerance(_ctx, _param, value: str) -> Decimal:
    try:
        tolerance = Decimal(value)
    except InvalidOperation:
        raise click.BadParameter(f"{value!r} is not a number") from None
    if tolerance < 0:
        raise click.BadParameter("tolerance must be >= 0")
    return tolerance


@main.command("eval")
@click.option("--golds", "golds_path", required=True, type=click.Path(path_type=Path), help="Benchmark records with gold answers (JSONL).")
@click.option("--preds", "pred_paths", required=True, multiple=True, type=click.Path(path_type=Path), help="Prediction JSONL, one per prompt variant (repeatable).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--tolerance", default="0.000001", show_default=True, callback=_parse_tolerance, help="Relative numeric-match tolerance.")
def cmd_eval(golds_path, pred_paths, out_dir, tolerance):
    """Score prediction files against gold answers."""
    golds = _load_records_cli(golds_path)
    predictions: dict[str, dict[str, str]] = {}
    for path in pred_paths:
        variant = path.stem
        if variant in predictions:
            raise CliConfigError(f"duplicate prediction variant name {variant!r}")
        predictions[variant] = _load_predictions(path)
    try:
        report = evaluate(predictions, golds, tolerance=tolerance)
    except EvalError as exc:
        raise CliConfigError(str(exc)) from None
    out_dir.mkdir(parents=True, exist_ok=True)
    obj = {"tolerance": str(tolerance), **report.to_dict()}
    (out_dir / "eval.json").write_text(
        json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    _write_manifest(
        out_dir,
        "eval",
        config={"tolerance": str(tolerance), "variants": sorted(predictions)},
        inputs={"golds": golds_path, **{f"preds_{p.stem}": p for p in pred_paths}},
        counts={"records": report.n_records, "variants": len(predictions)},
    )
    click.echo(f"em={report.em:.4f} nm={report.nm:.4f} over {report.n_records} records")


@main.command("report")
@click.option("--localized", "loc_path", required=True, type=click.Path(path_type=Path), help="eval.json from the localized benchmark.")
@click.option("--translated", "trans_path", required=True, type=click.Path(path_type=Path), help="eval.json from the translated benchmark.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
def cmd_report(loc_path, trans_path, out_dir):
    """Per-language robustness deltas between two evaluations."""

    def load_report(path: Path) -> EvalReport:
        try:
            return EvalReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except OSError as exc:
            raise CliConfigError(f"cannot read {path}: {exc}") from None
        except (json.JSONDecodeError, EvalError) as exc:
            raise CliConfigError(f"{path}: {exc}") from None

    localized = load_report(loc_path)
    translated = load_report(trans_path)
    try:
        rows = build_delta_table(localized, translated)
    except EvalError as exc:
        raise CliConfigError(str(exc)) from None
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps({"rows": [r.to_dict() for r in rows]}, indent=2, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )
    table = render_delta_table(rows)
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    _write_manifest(
        out_dir,
        "report",
        config={},
        inputs={"localized": loc_path, "translated": trans_path},
        counts={"languages": len(rows)},
    )
    click.echo(table, nl=False)


def _sample_key(seed: int, record_id: str) -> bytes:
    return hashlib.blake2b(f"{seed}|review|{record_id}".encode("utf-8"), digest_size=8).digest()


def review_candidates(
    records: Sequence[LocalizedRecord], sample_rate: float, seed: int
) -> list[LocalizedRecord]:
    """Successfully localized records due for human review: the whole test
    split plus a seeded sample of round(n * rate) train records, in file
    order."""
    localized = [r for r in records if r.status == STATUS_LOCALIZED]
    train = [r for r in localized if r.base.split == "train"]
    k = round(len(train) * sample_rate)
    ranked = sorted(train, key=lambda r: _sample_key(seed, r.base.id))
    chosen = {r.base.id for r in ranked[:k]}
    return [
        r for r in localized if r.base.split == "test" or r.base.id in chosen
    ]


def _load_labels(path: Path) -> dict[str, str]:
    if not path.exists():
        return {}
    labels: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").split("\n"), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CliConfigError(f"{path}:{lineno}: not valid JSON: {exc}") from None
        if (
            not isinstance(obj, dict)
            or not isinstance(obj.get("id"), str)
            or obj.get("label") not in ("accept", "reject")
        ):
            raise CliConfigError(
                f"{path}:{lineno}: label lines need a string 'id' and a "
                "'label' of accept/reject"
            )
        labels[obj["id"]] = obj["label"]
    return labels


@main.command("review")
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path), help="Localized records (JSONL).")
@click.option("--labels", "labels_path", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Append-only labels file (JSONL).")
@click.option("--sample-rate", type=float, default=1.0, show_default=True, help="Fraction of train records to review.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for the train sample.")
def cmd_review(in_path, labels_path, sample_rate, seed):
    """Interactively accept or reject localized records.

    Labels append to --labels as they are entered, so a quit session
    resumes where it stopped."""
    if not 0.0 <= sample_rate <= 1.0:
        raise CliConfigError(f"--sample-rate must be in [0, 1], got {sample_rate}")
    try:
        records = load_localized_records(in_path)
    except OSError as exc:
        raise CliConfigError(f"cannot read {in_path}: {exc}") from None
    except CorpusFormatError as exc:
        raise CliConfigError(str(exc)) from None
    labels = _load_labels(labels_path)
    pending = [
        r for r in review_candidates(records, sample_rate, seed) if r.base.id not in labels
    ]
    if not pending:
        click.echo("nothing left to review")
        return
    labels_path.parent.mkdir(parents=True, exist_ok=True)
    done = 0
    with labels_path.open("a", encoding="utf-8") as handle:
        for record in pending:
            click.echo("-" * 72)
            click.echo(f"id: {record.base.id}   lang: {record.base.lang}   split: {record.base.split}")
            click.echo(f"translated: {record.base.x_trans}")
            click.echo(f"localized:  {record.x_loc}")
            if record.replacements is not None:
                swaps = ", ".join(f"{e.source} -> {e.target}" for e in record.replacements)
                click.echo(f"replacements: {swaps}")
            try:
                choice = click.prompt(
                    "[a]ccept / [r]eject / [q]uit",
                    type=click.Choice(["a", "r", "q"]),
                    show_choices=False,
                )
            except click.Abort:
                choice = "q"
            if choice == "q":
                break
            label = "accept" if choice == "a" else "reject"
            handle.write(
                json.dumps({"id": record.base.id, "label": label}, ensure_ascii=False) + "\n"
            )
            handle.flush()
            done += 1
    click.echo(f"labeled {done} records this session, {len(pending) - done} left")


if __name__ == "__main__":
    main()
