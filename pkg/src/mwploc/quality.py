"""Quality gates for localized problem text.

A candidate localization is accepted only if it drops every source entity,
carries every replacement that should have fired, stays within a length band
around the expected post-replacement length, and keeps a high character-level
gestalt similarity to the reference translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .config import LocalizationConfig
from .replace import (
    ReplacementDict,
    apply_replacements,
    contains_at_boundary,
    matched_entries,
    sources_present,
)

__all__ = [
    "QualityReport",
    "failure_reason",
    "run_quality_checks",
    "similarity_ratio",
]


def _longest_block(
    a: str, b: str, alo: int, ahi: int, blo: int, bhi: int
) -> tuple[int, int, int]:
    """Longest contiguous block with a[i:i+k] == b[j:j+k] inside the windows.

    Ties prefer the smallest i, then the smallest j.  Characters compare
    exactly; there is no junk or popularity heuristic.
    """
    b2j: dict[str, list[int]] = {}
    for j in range(blo, bhi):
        b2j.setdefault(b[j], []).append(j)
    besti, bestj, bestk = alo, blo, 0
    # j2len[j] = length of the longest match ending at a[i], b[j]
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        newj2len: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            k = j2len.get(j - 1, 0) + 1
            newj2len[j] = k
            if k > bestk:
                besti, bestj, bestk = i - k + 1, j - k + 1, k
        j2len = newj2len
    return besti, bestj, bestk


def similarity_ratio(a: str, b: str) -> float:
    """Gestalt similarity 2*M/(len(a)+len(b)), where M counts characters
    matched by recursively taking the longest common contiguous block and
    recursing on both sides.  Two empty strings score 1.0."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    matched = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        i, j, k = _longest_block(a, b, alo, ahi, blo, bhi)
        if k:
            matched += k
            stack.append((alo, i, blo, j))
            stack.append((i + k, ahi, j + k, bhi))
    return 2.0 * matched / total


@dataclass(frozen=True)
class QualityReport:
    """Outcome of the four gates plus the measurements behind them."""

    key_entities_absent: bool
    replacements_present: bool
    length_ok: bool
    similarity_ok: bool
    similarity: float
    length_ratio: float
    expected_length: int
    offending_sources: list[str] = field(default_factory=list)
    missing_targets: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.key_entities_absent
            and self.replacements_present
            and self.length_ok
            and self.similarity_ok
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "key_entities_absent": self.key_entities_absent,
            "replacements_present": self.replacements_present,
            "length_ok": self.length_ok,
            "similarity_ok": self.similarity_ok,
            "similarity": self.similarity,
            "length_ratio": self.length_ratio,
            "expected_length": self.expected_length,
            "offending_sources": list(self.offending_sources),
            "missing_targets": list(self.missing_targets),
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "QualityReport":
        return cls(
            key_entities_absent=bool(obj["key_entities_absent"]),
            replacements_present=bool(obj["replacements_present"]),
            length_ok=bool(obj["length_ok"]),
            similarity_ok=bool(obj["similarity_ok"]),
            similarity=float(obj["similarity"]),
            length_ratio=float(obj["length_ratio"]),
            expected_length=int(obj["expected_length"]),
            offending_sources=[str(s) for s in obj.get("offending_sources", [])],
            missing_targets=[str(t) for t in obj.get("missing_targets", [])],
        )


def run_quality_checks(
    x_hat: str,
    x_trans: str,
    rdict: ReplacementDict,
    cfg: LocalizationConfig,
) -> QualityReport:
    """Score a candidate localization x_hat against the reference x_trans."""
    offending = sources_present(x_hat, rdict)

    # A replacement must appear in x_hat only if its source occurs in x_trans.
    fired: list[str] = []
    for entry in matched_entries(x_trans, rdict):
        if entry.target not in fired:
            fired.append(entry.target)
    missing = [t for t in fired if not contains_at_boundary(x_hat, t)]

    expected = len(apply_replacements(x_trans, rdict))
    ratio = len(x_hat) / expected if expected else (1.0 if not x_hat else float("inf"))
    lo, hi = cfg.length_band

    sim = similarity_ratio(x_hat, x_trans)

    return QualityReport(
        key_entities_absent=not offending,
        replacements_present=not missing,
        length_ok=lo <= ratio <= hi,
        similarity_ok=sim > cfg.similarity_threshold,
        similarity=sim,
        length_ratio=ratio,
        expected_length=expected,
        offending_sources=offending,
        missing_targets=missing,
    )


def failure_reason(report: QualityReport) -> str | None:
    """Machine-readable reason for the first failed gate, None if all passed.

    Precedence: key entity still present, then missing replacement, then
    length, then similarity.
    """
    if not report.key_entities_absent:
        return "key_entity_present: " + ", ".join(report.offending_sources)
    if not report.replacements_present:
        return "replacement_missing: " + ", ".join(report.missing_targets)
    if not report.length_ok:
        return f"length_out_of_band: ratio={report.length_ratio:.4f}"
    if not report.similarity_ok:
        return f"low_similarity: {report.similarity:.4f}"
    return None
