"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MwplocError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(MwplocError):
    """A corpus file is malformed; the message names the file, line and field."""


class EntityDbError(MwplocError):
    """The entity database failed structural validation."""


class UnknownLanguageError(EntityDbError):
    """A language code is not present in the entity database."""

    def __init__(self, lang: str):
        super().__init__(f"language {lang!r} is not in the entity database")
        self.lang = lang


class ReplacementExhaustedError(EntityDbError):
    """Every candidate for a kind is excluded or equals the source name."""

    def __init__(self, lang: str, kind: str, source: str):
        super().__init__(
            f"no usable {kind} replacement left for {source!r} in language {lang!r}"
        )
        self.lang = lang
        self.kind = kind
        self.source = source


class MultiCurrencyError(MwplocError):
    """The problem mentions currency forms outside the target language entry."""

    def __init__(self, forms: list[str]):
        super().__init__("unsupported currency forms: " + ", ".join(forms))
        self.forms = forms


class ExtractionError(MwplocError):
    """Entity classification produced no parsable result after a repair retry."""


class EntityParseError(ExtractionError):
    """A single model response could not be parsed into an entity set."""


class LlmError(MwplocError):
    """Base class for LLM client failures."""


class TransportError(LlmError):
    """Network failure, timeout, or retryable HTTP status after all retries."""


class AuthError(LlmError):
    """Missing API key or an HTTP 401/403 from the provider."""


class MockFixtureError(LlmError):
    """The scripted provider has no fixture for a request."""


class EvalError(MwplocError):
    """Evaluation inputs are inconsistent (id mismatches, bad scores, ...)."""
