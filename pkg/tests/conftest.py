import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from mwploc.entitydb import EntityDatabase
from mwploc.extract import parse_entity_response, validate_entities
from mwploc.replace import apply_replacements, build_replacement_dict

DATA_DIR = Path(__file__).parent / "data"

# Golden single-record walkthrough, frozen byte for byte.
GOLD_X_EN = (
    "Mandy owes Benedict $ 100. They agreed to have monthly interest of 2%. "
    "If Mandy was able to pay it after 3 months, how much should she give to Benedict?"
)
GOLD_X_TRANS = (
    "Mandy anadaiwa $ 100 na Benedict . Wamekubali kuwa na riba ya kila mwezi ya 2%. "
    "Ikiwa Mandy aliweza kulipa baada ya miezi 3, anafaa kumpa Benedict  pesa ngapi?"
)
GOLD_X_ENT = (
    "Camari owes Julani shilingi 100. They agreed to have monthly interest of 2%. "
    "If Camari was able to pay it after 3 months, how much should she give to Julani?"
)
GOLD_X_LOC = (
    "Camari anadaiwa shilingi 100 na Julani . Wamekubali kuwa na riba ya kila mwezi ya 2%. "
    "Ikiwa Camari aliweza kulipa baada ya miezi 3, anafaa kumpa Julani  pesa ngapi?"
)
GOLD_ENTITIES_JSON = json.dumps(
    {"personal_names": ["Mandy", "Benedict"], "organization_names": [], "currencies": ["$"]}
)
GOLD_ANSWER = "106"
GOLD_SEED = 42


def brute_longest_block(a: str, b: str) -> tuple[int, int, int]:
    """Quadratic scan for the longest common contiguous block, smallest
    start in a then in b on ties."""
    besti = bestj = bestk = 0
    for i in range(len(a)):
        for j in range(len(b)):
            k = 0
            while i + k < len(a) and j + k < len(b) and a[i + k] == b[j + k]:
                k += 1
            if k > bestk:
                besti, bestj, bestk = i, j, k
    return besti, bestj, bestk


def brute_matched_chars(a: str, b: str) -> int:
    i, j, k = brute_longest_block(a, b)
    if k == 0:
        return 0
    return (
        k
        + brute_matched_chars(a[:i], b[:j])
        + brute_matched_chars(a[i + k :], b[j + k :])
    )


def brute_similarity(a: str, b: str) -> float:
    """Independent reference for the gestalt ratio, by direct recursion."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return 2.0 * brute_matched_chars(a, b) / total


def faithful_fixtures(
    records, db: EntityDatabase, seed: int, entities_by_id: dict[str, str]
) -> dict[str, str]:
    """Mock fixtures simulating a model that localizes perfectly: the
    localization response is the reference translation with the record's
    replacement dictionary applied."""
    fixtures: dict[str, str] = {}
    for record in records:
        ents_json = entities_by_id[record.id]
        fixtures[f"extract:{record.id}"] = ents_json
        ents = validate_entities(parse_entity_response(ents_json), record.x_en)
        if ents.is_empty():
            continue
        rdict = build_replacement_dict(ents, db, record.lang, record.id, seed)
        fixtures[f"loc:{record.id}"] = apply_replacements(record.x_trans, rdict)
    return fixtures


# Filled in by the acceptance module; emitted after the run through the
# terminal reporter so the verdict lines are visible under any capture mode.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def golden_corpus_path() -> Path:
    return DATA_DIR / "golden_swa.jsonl"


@pytest.fixture
def golden_fixtures_path() -> Path:
    return DATA_DIR / "fixtures_golden.json"
