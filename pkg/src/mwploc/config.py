"""Pipeline configuration shared by the localization and quality-gate stages."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_SIMILARITY_THRESHOLD = 0.8
DEFAULT_LENGTH_BAND = (0.70, 1.43)

PROMPT_VERSIONS = ("fixed-demo-v1", "pair-only-v1")


@dataclass(frozen=True)
class LocalizationConfig:
    """Knobs for one localization run.

    The length band is a ratio interval around the expected post-replacement
    length; the similarity threshold is exclusive (a score equal to it fails).
    """

    seed: int = 0
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    length_band: tuple[float, float] = DEFAULT_LENGTH_BAND
    max_llm_retries: int = 2
    prompt_version: str = "fixed-demo-v1"

    def __post_init__(self):
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ValueError(
                f"similarity_threshold must be in (0, 1], got {self.similarity_threshold}"
            )
        lo, hi = self.length_band
        if not 0.0 < lo < 1.0 < hi:
            raise ValueError(f"length_band must straddle 1.0, got ({lo}, {hi})")
        if self.max_llm_retries < 0:
            raise ValueError("max_llm_retries must be >= 0")
        if self.prompt_version not in PROMPT_VERSIONS:
            raise ValueError(
                f"unknown prompt_version {self.prompt_version!r}; "
                f"expected one of {', '.join(PROMPT_VERSIONS)}"
            )
