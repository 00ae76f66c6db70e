import json
from decimal import Decimal

import pytest

from mwploc.config import LocalizationConfig
from mwploc.corpus import (
    STATUS_FALLBACK,
    STATUS_LOCALIZED,
    STATUS_NO_ENTITIES,
    STATUSES,
    MwpRecord,
)
from mwploc.entitydb import load_default_db
from mwploc.llmclient import MockProvider, load_mock_fixtures
from mwploc.localize import (
    build_direct_prompt,
    build_localization_prompt,
    localize_record,
    localize_records,
)

from conftest import (
    GOLD_ENTITIES_JSON,
    GOLD_SEED,
    GOLD_X_EN,
    GOLD_X_ENT,
    GOLD_X_LOC,
    GOLD_X_TRANS,
)

DB = load_default_db()
CFG = LocalizationConfig(seed=GOLD_SEED)


def golden_record(rid="r1", **overrides) -> MwpRecord:
    fields = dict(
        id=rid,
        lang="swa",
        split="test",
        x_en=GOLD_X_EN,
        x_trans=GOLD_X_TRANS,
        answer_raw="106",
        answer_num=Decimal("106"),
    )
    fields.update(overrides)
    return MwpRecord(**fields)


def golden_mock(loc_response=GOLD_X_LOC, rid="r1") -> MockProvider:
    return MockProvider(
        {f"extract:{rid}": GOLD_ENTITIES_JSON, f"loc:{rid}": loc_response}
    )


class TestPrompts:
    def test_oneshot_prompt_carries_all_four_texts(self):
        prompt = build_localization_prompt(
            GOLD_X_EN, GOLD_X_TRANS, GOLD_X_ENT, "Swahili"
        )
        assert GOLD_X_EN in prompt
        assert GOLD_X_TRANS in prompt
        assert GOLD_X_ENT in prompt
        assert "Swahili" in prompt
        assert "{" not in prompt.replace("{}", "")  # no leftover placeholders

    def test_fixed_demo_prompt_has_demonstration(self):
        prompt = build_localization_prompt(
            GOLD_X_EN, GOLD_X_TRANS, GOLD_X_ENT, "Swahili", version="fixed-demo-v1"
        )
        assert "Janet" in prompt
        assert "Andrea" in prompt
        assert "DO NOT re-translate" in prompt

    def test_pair_only_prompt_has_no_demonstration(self):
        prompt = build_localization_prompt(
            GOLD_X_EN, GOLD_X_TRANS, GOLD_X_ENT, "Swahili", version="pair-only-v1"
        )
        assert "Janet" not in prompt
        assert GOLD_X_ENT in prompt

    def test_unknown_version_rejected(self):
        with pytest.raises(ValueError, match="prompt version"):
            build_localization_prompt("a", "b", "c", "Swahili", version="v99")

    def test_direct_prompt(self):
        prompt = build_direct_prompt(GOLD_X_EN, "Yoruba")
        assert GOLD_X_EN in prompt
        assert "Yoruba" in prompt


class TestLocalizeRecord:
    def test_golden_end_to_end(self):
        result = localize_record(golden_record(), DB, golden_mock(), CFG)
        assert result.status == STATUS_LOCALIZED
        assert result.x_ent == GOLD_X_ENT
        assert result.x_loc == GOLD_X_LOC
        assert result.failure_reason is None
        assert result.quality is not None and result.quality.passed
        swaps = {e.source: e.target for e in result.replacements}
        assert swaps["Mandy"] == "Camari"
        assert swaps["Benedict"] == "Julani"
        assert swaps["$"] == "shilingi"

    def test_model_response_is_stripped(self):
        result = localize_record(
            golden_record(), DB, golden_mock("  " + GOLD_X_LOC + "\n"), CFG
        )
        assert result.status == STATUS_LOCALIZED
        assert result.x_loc == GOLD_X_LOC

    def test_no_entities_passthrough(self):
        mock = MockProvider({"extract:r1": '{"personal_names": []}'})
        record = golden_record(
            x_en="A train travels 60 km in 2 hours.", x_trans="Treni husafiri km 60."
        )
        result = localize_record(record, DB, mock, CFG)
        assert result.status == STATUS_NO_ENTITIES
        assert result.x_loc == record.x_trans
        assert result.replacements is None
        assert result.failure_reason is None
        assert len(mock.transcript) == 1  # no localization call was made

    def test_missing_x_trans_raises(self):
        with pytest.raises(ValueError, match="x_trans"):
            localize_record(golden_record(x_trans=None), DB, golden_mock(), CFG)

    def test_unknown_language_falls_back(self):
        result = localize_record(golden_record(lang="fra"), DB, golden_mock(), CFG)
        assert result.status == STATUS_FALLBACK
        assert result.failure_reason == "lang_not_in_db: fra"
        assert result.x_loc == GOLD_X_TRANS

    def test_extraction_transport_failure_falls_back(self):
        result = localize_record(golden_record(), DB, MockProvider({}), CFG)
        assert result.status == STATUS_FALLBACK
        assert result.failure_reason.startswith("extraction_error:")
        assert result.x_loc == GOLD_X_TRANS

    def test_unparseable_extraction_falls_back(self):
        mock = MockProvider({"extract:r1": "noise", "extract:r1:repair": "noise"})
        result = localize_record(golden_record(), DB, mock, CFG)
        assert result.status == STATUS_FALLBACK
        assert result.failure_reason.startswith("extraction_error:")

    def test_multi_currency_falls_back(self):
        ents = json.dumps(
            {"personal_names": ["Mandy"], "currencies": ["$", "euros"]}
        )
        record = golden_record(x_en=GOLD_X_EN + " She also had 5 euros.")
        mock = MockProvider({"extract:r1": ents})
        result = localize_record(record, DB, mock, CFG)
        assert result.status == STATUS_FALLBACK
        assert result.failure_reason == "multi_currency: euros"

    def test_localization_llm_failure_falls_back(self):
        mock = MockProvider({"extract:r1": GOLD_ENTITIES_JSON})
        result = localize_record(golden_record(), DB, mock, CFG)
        assert result.status == STATUS_FALLBACK
        assert result.failure_reason.startswith("llm_error:")
        assert result.x_ent == GOLD_X_ENT  # pipeline got as far as the rewrite

    def test_gate_failure_attaches_report(self):
        result = localize_record(
            golden_record(), DB, golden_mock(GOLD_X_TRANS), CFG
        )
        assert result.status == STATUS_FALLBACK
        assert result.failure_reason.startswith("key_entity_present:")
        assert result.quality is not None
        assert not result.quality.passed
        assert result.x_loc == GOLD_X_TRANS

    def test_never_raises_on_per_record_trouble(self):
        broken_providers = [
            MockProvider({}),
            MockProvider({"extract:r1": "garbage", "extract:r1:repair": "garbage"}),
            MockProvider({"extract:r1": GOLD_ENTITIES_JSON}),
            MockProvider({"extract:r1": GOLD_ENTITIES_JSON, "loc:r1": ""}),
            MockProvider({"extract:r1": '{"currencies": ["$", "euros"]}'}),
        ]
        for llm in broken_providers:
            result = localize_record(golden_record(), DB, llm, CFG)
            assert result.status in STATUSES
            if result.status == STATUS_FALLBACK:
                assert result.failure_reason
                assert result.x_loc == GOLD_X_TRANS

    def test_fixture_file_drives_pipeline(
        self, golden_corpus_path, golden_fixtures_path
    ):
        from mwploc.corpus import load_records

        [record] = load_records(golden_corpus_path)
        llm = load_mock_fixtures(golden_fixtures_path)
        result = localize_record(record, DB, llm, CFG)
        assert result.status == STATUS_LOCALIZED
        assert result.x_loc == GOLD_X_LOC


class TestLocalizeRecords:
    def _batch(self, n=8):
        records = [golden_record(rid=f"b{i}") for i in range(n)]
        fixtures = {}
        for record in records:
            fixtures[f"extract:{record.id}"] = GOLD_ENTITIES_JSON
        return records, fixtures

    def test_parallel_output_matches_serial_and_input_order(self):
        records, fixtures = self._batch()
        # every record localizes faithfully for its own picks
        from conftest import faithful_fixtures

        fixtures = faithful_fixtures(
            records, DB, GOLD_SEED, {r.id: GOLD_ENTITIES_JSON for r in records}
        )
        serial = localize_records(records, DB, MockProvider(fixtures), CFG, jobs=1)
        threaded = localize_records(records, DB, MockProvider(fixtures), CFG, jobs=4)
        assert [r.base.id for r in threaded] == [r.id for r in records]
        assert threaded == serial

    def test_jobs_must_be_positive(self):
        with pytest.raises(ValueError, match="jobs"):
            localize_records([], DB, MockProvider({}), CFG, jobs=0)

    def test_empty_strings_response_gates_out(self):
        records, fixtures = self._batch(1)
        fixtures[f"loc:{records[0].id}"] = "   "
        result = localize_records(records, DB, MockProvider(fixtures), CFG)[0]
        assert result.status == STATUS_FALLBACK
