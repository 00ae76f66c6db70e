import difflib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwploc.config import LocalizationConfig
from mwploc.entitydb import load_default_db
from mwploc.extract import EntitySet
from mwploc.quality import (
    QualityReport,
    failure_reason,
    run_quality_checks,
    similarity_ratio,
)
from mwploc.replace import ReplacementDict, build_replacement_dict

from conftest import GOLD_SEED, GOLD_X_LOC, GOLD_X_TRANS, brute_similarity

CFG = LocalizationConfig(seed=GOLD_SEED)
EMPTY = ReplacementDict()


@pytest.fixture(scope="module")
def golden_dict() -> ReplacementDict:
    ents = EntitySet(personal_names=("Mandy", "Benedict"), currencies=("$",))
    return build_replacement_dict(ents, load_default_db(), "swa", "r1", GOLD_SEED)


class TestSimilarityRatio:
    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ("abc", "abc", 1.0),
            ("abcd", "bcde", 0.75),
            ("aaaa", "bbbb", 0.0),
            ("", "", 1.0),
            ("", "a", 0.0),
            ("a", "", 0.0),
        ],
    )
    def test_anchors(self, a, b, expected):
        assert similarity_ratio(a, b) == expected

    def test_golden_pair_passes_threshold(self):
        sim = similarity_ratio(GOLD_X_LOC, GOLD_X_TRANS)
        assert sim == pytest.approx(0.8544891640866873, abs=1e-12)
        assert sim > 0.8

    @given(st.text(alphabet="abcx", max_size=12), st.text(alphabet="abcx", max_size=12))
    @settings(max_examples=300)
    def test_matches_brute_force(self, a, b):
        assert similarity_ratio(a, b) == pytest.approx(brute_similarity(a, b), abs=1e-12)

    @given(st.text(max_size=60), st.text(max_size=60))
    @settings(max_examples=200)
    def test_matches_difflib_without_junk(self, a, b):
        expected = difflib.SequenceMatcher(None, a, b, autojunk=False).ratio()
        assert similarity_ratio(a, b) == pytest.approx(expected, abs=1e-12)

    @given(st.text(max_size=80), st.text(max_size=80))
    @settings(max_examples=200)
    def test_range_and_self_similarity(self, a, b):
        sim = similarity_ratio(a, b)
        assert 0.0 <= sim <= 1.0
        assert similarity_ratio(a, a) == 1.0


class TestGates:
    def test_faithful_output_passes_all_gates(self, golden_dict):
        report = run_quality_checks(GOLD_X_LOC, GOLD_X_TRANS, golden_dict, CFG)
        assert report.passed
        assert report.key_entities_absent
        assert report.replacements_present
        assert report.length_ok
        assert report.similarity_ok
        assert failure_reason(report) is None

    def test_unchanged_translation_fails_key_entity_gate(self, golden_dict):
        report = run_quality_checks(GOLD_X_TRANS, GOLD_X_TRANS, golden_dict, CFG)
        assert not report.passed
        assert not report.key_entities_absent
        assert report.offending_sources == ["Mandy", "$", "Benedict"]
        assert failure_reason(report) == "key_entity_present: Mandy, $, Benedict"

    def test_missing_target_reported(self, golden_dict):
        candidate = GOLD_X_LOC.replace("Julani", "rafiki")
        report = run_quality_checks(candidate, GOLD_X_TRANS, golden_dict, CFG)
        assert not report.replacements_present
        assert report.missing_targets == ["Julani"]
        assert failure_reason(report) == "replacement_missing: Julani"

    def test_doubled_output_fails_length_before_similarity(self, golden_dict):
        doubled = GOLD_X_LOC + " " + GOLD_X_LOC
        report = run_quality_checks(doubled, GOLD_X_TRANS, golden_dict, CFG)
        assert not report.length_ok
        assert not report.similarity_ok  # both fail; length wins the reason
        assert failure_reason(report).startswith("length_out_of_band: ratio=2.0")

    def test_expected_length_accounts_for_replacements(self, golden_dict):
        # "$ 100" collapsing to "shilingi 100" changes the expected length.
        report = run_quality_checks(GOLD_X_LOC, GOLD_X_TRANS, golden_dict, CFG)
        assert report.expected_length == len(GOLD_X_LOC)
        assert report.length_ratio == pytest.approx(1.0)

    def test_similarity_threshold_is_exclusive(self):
        # 2 * 8 / (9 + 11) == 0.8 exactly; length ratio 9/11 stays in band.
        x_hat = "aaaaaaaax"
        x_trans = "aaaaaaaayzw"
        assert similarity_ratio(x_hat, x_trans) == 0.8
        report = run_quality_checks(x_hat, x_trans, EMPTY, CFG)
        assert not report.similarity_ok
        assert failure_reason(report) == "low_similarity: 0.8000"
        relaxed = LocalizationConfig(seed=GOLD_SEED, similarity_threshold=0.79)
        assert run_quality_checks(x_hat, x_trans, EMPTY, relaxed).similarity_ok

    def test_empty_dict_identity_passes(self):
        report = run_quality_checks("abc", "abc", EMPTY, CFG)
        assert report.passed
        assert report.expected_length == 3
        assert report.similarity == 1.0

    def test_report_round_trips_through_dict(self, golden_dict):
        report = run_quality_checks(GOLD_X_LOC, GOLD_X_TRANS, golden_dict, CFG)
        assert QualityReport.from_dict(report.to_dict()) == report
