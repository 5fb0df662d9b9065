"""Exception hierarchy shared across the package."""

from __future__ import annotations


class KubeDiagError(Exception):
    """Base class for all package errors."""


class InvalidQuery(KubeDiagError):
    """A query was empty or otherwise unusable."""


class InvalidArgument(KubeDiagError):
    """A numeric argument violated its documented range."""


class DuplicateId(KubeDiagError):
    """An id was inserted twice into the same store."""


class NotFound(KubeDiagError):
    """A referenced id does not exist."""


class SchemaViolation(KubeDiagError):
    """Persisted data did not match the expected schema or enum set."""


class ClassificationError(KubeDiagError):
    """A pluggable document classifier raised; carries the document id."""

    def __init__(self, doc_id: str, message: str = "") -> None:
        super().__init__(message or f"classification failed for document {doc_id!r}")
        self.doc_id = doc_id


class InvalidPath(KubeDiagError):
    """A node sequence does not correspond to edges in the graph."""


class InvalidContext(KubeDiagError):
    """A synthesis context was inconsistent with its declared mode."""


class NoEvidence(KubeDiagError):
    """Neither memories nor causal chains were available for a query."""


class SynthesisError(KubeDiagError):
    """The synthesis client failed; ``retryable`` hints whether to try again."""

    def __init__(self, message: str, retryable: bool = False) -> None:
        super().__init__(message)
        self.retryable = retryable


class EmptyHistory(KubeDiagError):
    """A controller operation needed session history and found none."""


class AlreadyRecorded(KubeDiagError):
    """Feedback arrived twice for the same diagnosis session."""


class StageFailure(KubeDiagError):
    """A diagnosis stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class ScenarioParseError(KubeDiagError):
    """A scenario line failed validation; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(KubeDiagError):
    """A configuration file or override was invalid."""
