"""Exception types shared across the package."""

from __future__ import annotations


class SceneweaverError(Exception):
    """Base class for all package errors."""


class InvalidRoleName(SceneweaverError):
    """Role name is empty after trimming and suffix stripping."""


class ParseError(SceneweaverError):
    """A persisted record could not be parsed.

    Attributes:
        line: 1-based line number of the offending record, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnbalancedDelimiter(SceneweaverError):
    """A message opened a delimited span that never closed."""

    def __init__(self, position: int, kind: "object"):
        super().__init__(f"unclosed {getattr(kind, 'value', kind)} span opened at position {position}")
        self.position = position
        self.kind = kind


class NotAnAction(SceneweaverError):
    """No well-formed action object could be found in the raw text."""


class UnknownActionTag(SceneweaverError):
    """The action object names a tag outside the action space."""


class MissingPayload(SceneweaverError):
    """The action object lacks a field its tag requires."""


class ContractViolation(SceneweaverError):
    """A state transition was requested outside its preconditions."""


class BackendFailure(SceneweaverError):
    """All attempts to obtain a usable completion failed."""


class ScriptUnderrun(BackendFailure):
    """A scripted backend ran out of responses (or lacks the requested key)."""


class SeedError(SceneweaverError):
    """A seed record is malformed."""

    def __init__(self, index: int, cause: str):
        super().__init__(f"seed {index}: {cause}")
        self.index = index
        self.cause = cause


class ExtractionError(SceneweaverError):
    """Chunk extraction failed to produce a parseable payload."""


class ProfileError(SceneweaverError):
    """Profile synthesis failed for a character."""

    def __init__(self, character: str, cause: str = ""):
        super().__init__(f"profile for {character!r} failed" + (f": {cause}" if cause else ""))
        self.character = character


class RecordRejected(SceneweaverError):
    """A generated record violates a structural constraint."""

    def __init__(self, cause: str):
        super().__init__(cause)
        self.cause = cause


class DuplicateMain(RecordRejected):
    """A generated record reuses an already-seen main character name."""

    def __init__(self, name: str):
        super().__init__(f"duplicate main character name: {name}")
        self.name = name


class FormatError(SceneweaverError):
    """A training sample could not be assembled."""


class JudgeError(SceneweaverError):
    """A judge response did not match the required schema."""

    def __init__(self, seed_id: str, cause: str = ""):
        super().__init__(f"judging {seed_id!r} failed" + (f": {cause}" if cause else ""))
        self.seed_id = seed_id


class AggregationError(SceneweaverError):
    """Aggregation was requested over an empty report list."""
