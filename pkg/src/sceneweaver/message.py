"""Parse and render the four-channel immersive message grammar.

A message interleaves [thought], (action), <environment state>, and unmarked
speech. Delimiters never nest: inside an open span, delimiters of other kinds
are literal text, and only the matching closer ends the span. Everything here
is a pure function.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional

from .errors import UnbalancedDelimiter
from .model import Segment, SegmentKind

_OPENERS = {"[": SegmentKind.THOUGHT, "(": SegmentKind.ACTION, "<": SegmentKind.ENVIRONMENT}
_CLOSERS = {SegmentKind.THOUGHT: "]", SegmentKind.ACTION: ")", SegmentKind.ENVIRONMENT: ">"}
_DELIMITER_CHARS = set("[]()<>")

_SENTENCE_END_RE = re.compile(r"[.!?]+")


@dataclass(frozen=True)
class ParsedMessage:
    """Result of scanning one transcript line."""

    speaker: Optional[str]
    segments: tuple[Segment, ...]
    raw: str


def parse_message(raw: str) -> ParsedMessage:
    """Scan a message left to right into its channel segments.

    Maximal [..] runs become thought, (..) action, <..> environment; the
    remaining runs, whitespace-trimmed and non-empty, become speech, in order.

    Raises:
        UnbalancedDelimiter: if a span is still open at end of input.
    """
    segments: list[Segment] = []
    buffer: list[str] = []
    open_kind: Optional[SegmentKind] = None
    open_pos = 0

    def flush_speech() -> None:
        text = "".join(buffer).strip()
        buffer.clear()
        if text:
            segments.append(Segment(SegmentKind.SPEECH, text))

    for pos, ch in enumerate(raw):
        if open_kind is None:
            kind = _OPENERS.get(ch)
            if kind is not None:
                flush_speech()
                open_kind = kind
                open_pos = pos
            else:
                buffer.append(ch)
        elif ch == _CLOSERS[open_kind]:
            segments.append(Segment(open_kind, "".join(buffer)))
            buffer.clear()
            open_kind = None
        else:
            buffer.append(ch)

    if open_kind is not None:
        raise UnbalancedDelimiter(open_pos, open_kind)
    flush_speech()
    return ParsedMessage(speaker=None, segments=tuple(segments), raw=raw)


def render_message(segments: tuple[Segment, ...] | list[Segment]) -> str:
    """Emit segments in order with their delimiters, single-space separated.

    Inverse of parse_message up to whitespace normalization: for well-formed
    segment lists (valid per the Segment invariants and without two adjacent
    speech segments), parse_message(render_message(s)).segments == tuple(s).
    """
    parts: list[str] = []
    for segment in segments:
        if segment.kind is SegmentKind.SPEECH:
            parts.append(segment.text)
        else:
            closer = _CLOSERS[segment.kind]
            opener = next(ch for ch, kind in _OPENERS.items() if kind is segment.kind)
            parts.append(f"{opener}{segment.text}{closer}")
    return " ".join(parts)


def split_speaker_prefix(line: str) -> tuple[Optional[str], str]:
    """Split a "Name: content" transcript line into speaker and body.

    The prefix counts as a speaker only when it precedes the first colon and
    contains no segment delimiters (so a colon inside a bracketed span never
    produces a speaker). Absence is a value, not an error.
    """
    idx = line.find(":")
    if idx <= 0:
        return None, line
    prefix = line[:idx]
    if any(ch in _DELIMITER_CHARS for ch in prefix):
        return None, line
    speaker = prefix.strip()
    if not speaker:
        return None, line
    return speaker, line[idx + 1 :].strip()


def parse_transcript_line(line: str) -> ParsedMessage:
    """Split a speaker prefix, then parse the body into segments."""
    speaker, body = split_speaker_prefix(line)
    parsed = parse_message(body)
    return ParsedMessage(speaker=speaker, segments=parsed.segments, raw=line)


class StyleViolation(enum.Enum):
    SPEECH_TOO_LONG = "speech_too_long"
    EMBEDDED_NEWLINE = "embedded_newline"
    EMPTY_MESSAGE = "empty_message"
    EMPTY_SEGMENT = "empty_segment"


@dataclass(frozen=True)
class ConstraintReport:
    """Advisory soft-style findings; never used to reject a message."""

    violations: tuple[tuple[StyleViolation, str], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> tuple[StyleViolation, ...]:
        return tuple(code for code, _ in self.violations)


def count_sentences(text: str) -> int:
    """Count sentences as maximal runs of terminal punctuation (. ! ?)."""
    return len(_SENTENCE_END_RE.findall(text))


def check_style_constraints(segments: tuple[Segment, ...] | list[Segment]) -> ConstraintReport:
    """Report soft violations of the speak-briefly style guidance."""
    violations: list[tuple[StyleViolation, str]] = []
    if not segments:
        violations.append((StyleViolation.EMPTY_MESSAGE, "message has no segments"))
    total_sentences = 0
    for segment in segments:
        if segment.kind is SegmentKind.SPEECH:
            total_sentences += count_sentences(segment.text)
            if "\n" in segment.text:
                violations.append(
                    (StyleViolation.EMBEDDED_NEWLINE, "speech contains a line break")
                )
        elif not segment.text:
            violations.append(
                (StyleViolation.EMPTY_SEGMENT, f"empty {segment.kind.value} span")
            )
    if total_sentences > 2:
        violations.append(
            (StyleViolation.SPEECH_TOO_LONG, f"spoken dialogue spans {total_sentences} sentences")
        )
    return ConstraintReport(tuple(violations))
