"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class LinkforgeError(Exception):
    """Base class for all engine errors."""


# --- span / codec errors -----------------------------------------------------

class SpanError(LinkforgeError):
    """Invalid mention span."""


class SpanOutOfBounds(SpanError):
    pass


class OverlappingSpans(SpanError):
    pass


class TagTokenInText(LinkforgeError):
    """Document text contains a reserved annotation tag token."""


class MissingTitle(LinkforgeError):
    """Annotation lacks the KB title required for disambiguation output."""


class EmptyMentionList(LinkforgeError):
    """Mention-expansion prompt requested for zero mentions."""


# --- dictionary errors -------------------------------------------------------

class EmptyDictionary(LinkforgeError):
    """Dictionary file contained no valid records."""


# --- backend errors ----------------------------------------------------------

class BackendError(LinkforgeError):
    """Base class for backend client failures."""


class Timeout(BackendError):
    """Backend did not answer within the configured timeout (after retries)."""


class TransportError(BackendError):
    """Connection-level failure (after retries)."""


class ProtocolError(BackendError):
    """Backend answered, but the response violates the wire contract."""


class MockMiss(BackendError):
    """Mock backend has no fixture entry for the request (test aid)."""


class BackendUnavailable(LinkforgeError):
    """A backend required by the pipeline cannot serve the document."""


# --- corpus / evaluation errors ----------------------------------------------

class MalformedRecord(LinkforgeError):
    """Gold-corpus record failed validation."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateDocId(LinkforgeError):
    pass


class UnknownDocId(LinkforgeError):
    """Predictions reference a document absent from the corpus."""


# --- configuration errors ----------------------------------------------------

class ConfigError(LinkforgeError):
    """Pipeline configuration is invalid or incomplete."""
