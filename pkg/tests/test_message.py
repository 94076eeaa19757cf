from __future__ import annotations

import random
import string

import pytest
from hypothesis import given, strategies as st

from sceneweaver.errors import UnbalancedDelimiter
from sceneweaver.message import (
    ConstraintReport,
    StyleViolation,
    check_style_constraints,
    count_sentences,
    parse_message,
    parse_transcript_line,
    render_message,
    split_speaker_prefix,
)
from sceneweaver.model import Segment, SegmentKind, action, speech, thought


class TestParseMessage:
    def test_three_channel_example(self):
        parsed = parse_message(
            "<The compass trembles> [The winds shift too fast] Keep sharp, Taron."
        )
        assert [(s.kind, s.text) for s in parsed.segments] == [
            (SegmentKind.ENVIRONMENT, "The compass trembles"),
            (SegmentKind.THOUGHT, "The winds shift too fast"),
            (SegmentKind.SPEECH, "Keep sharp, Taron."),
        ]

    def test_speech_only(self):
        assert parse_message("Hello.").segments == (speech("Hello."),)

    def test_unclosed_action_reports_position_and_kind(self):
        with pytest.raises(UnbalancedDelimiter) as excinfo:
            parse_message("(watches silently")
        assert excinfo.value.position == 0
        assert excinfo.value.kind is SegmentKind.ACTION

    def test_inner_delimiters_are_literal(self):
        parsed = parse_message("[a (b) <c>]")
        assert parsed.segments == (thought("a (b) <c>"),)

    def test_empty_brackets_parse_to_empty_thought(self):
        parsed = parse_message("[]")
        assert parsed.segments == (thought(""),)
        report = check_style_constraints(parsed.segments)
        assert StyleViolation.EMPTY_SEGMENT in report.codes()

    def test_closers_outside_span_are_speech(self):
        assert parse_message("a ] b").segments == (speech("a ] b"),)

    def test_whitespace_only_speech_dropped(self):
        assert parse_message("[a]   (b)").segments == (thought("a"), action("b"))


class TestRenderMessage:
    def test_single_thought(self):
        assert render_message([thought("I must stay calm")]) == "[I must stay calm]"

    def test_action_then_speech(self):
        rendered = render_message(
            [action("sketching rapidly"), speech("The currents twist like braided rivers...")]
        )
        assert rendered == "(sketching rapidly) The currents twist like braided rivers..."

    def test_empty_list_renders_empty(self):
        assert render_message([]) == ""


_SPEECH_ALPHABET = string.ascii_letters + string.digits + ",.'!?-]>) "
_SPAN_ALPHABET = string.ascii_letters + string.digits + ",.'!?- "


def _well_formed_segments(rng: random.Random) -> list[Segment]:
    """Random segment list in the renderable subset: valid per the Segment
    invariants and with no two adjacent speech segments."""
    segments: list[Segment] = []
    last_was_speech = False
    for _ in range(rng.randint(0, 8)):
        kind = rng.choice(list(SegmentKind))
        if kind is SegmentKind.SPEECH:
            if last_was_speech:
                continue
            text = "".join(rng.choice(_SPEECH_ALPHABET) for _ in range(rng.randint(1, 30))).strip()
            if not text:
                continue
            segments.append(Segment(kind, text))
            last_was_speech = True
        else:
            inner = {
                SegmentKind.THOUGHT: "()<>",
                SegmentKind.ACTION: "[]<>",
                SegmentKind.ENVIRONMENT: "[]()",
            }[kind]
            alphabet = _SPAN_ALPHABET + inner
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
            segments.append(Segment(kind, text))
            last_was_speech = False
    return segments


class TestRoundtrip:
    def test_roundtrip_10k_random_lists(self):
        rng = random.Random(42)
        for _ in range(10_000):
            segments = _well_formed_segments(rng)
            parsed = parse_message(render_message(segments))
            assert list(parsed.segments) == segments

    @given(st.data())
    def test_roundtrip_hypothesis(self, data):
        seed = data.draw(st.integers(0, 2**32 - 1))
        segments = _well_formed_segments(random.Random(seed))
        assert list(parse_message(render_message(segments)).segments) == segments

    def test_partition_reconstruction(self):
        raw = "<wind> hello [quiet] (nods) there"
        parsed = parse_message(raw)
        rebuilt = render_message(parsed.segments)
        assert " ".join(raw.split()) == " ".join(rebuilt.split())


class TestSplitSpeakerPrefix:
    def test_plain_prefix(self):
        speaker, body = split_speaker_prefix("Isolde Ferrowind: <The compass trembles> ...")
        assert speaker == "Isolde Ferrowind"
        assert body == "<The compass trembles> ..."

    def test_no_colon(self):
        assert split_speaker_prefix("no colon here") == (None, "no colon here")

    def test_colon_inside_span_is_not_a_speaker(self):
        line = "[aside: whisper] hello"
        assert split_speaker_prefix(line) == (None, line)
        parsed = parse_message(line)
        assert parsed.segments[0].kind is SegmentKind.THOUGHT

    def test_leading_colon(self):
        assert split_speaker_prefix(": hello") == (None, ": hello")

    def test_parse_transcript_line_carries_speaker(self):
        parsed = parse_transcript_line("Valdrex: (waves) hello")
        assert parsed.speaker == "Valdrex"
        assert parsed.segments == (action("waves"), speech("hello"))


class TestStyleConstraints:
    def test_three_sentences_flagged(self):
        segments = [speech("One. Two! Three?")]
        assert count_sentences("One. Two! Three?") == 3
        report = check_style_constraints(segments)
        codes = report.codes()
        assert StyleViolation.SPEECH_TOO_LONG in codes
        assert "3" in dict(report.violations)[StyleViolation.SPEECH_TOO_LONG]

    def test_thought_action_pair_clean(self):
        report = check_style_constraints(list(parse_message("[ok](nods)").segments))
        assert report.ok

    def test_empty_message_flagged(self):
        report = check_style_constraints([])
        assert report.codes() == (StyleViolation.EMPTY_MESSAGE,)

    def test_embedded_newline_flagged(self):
        report = check_style_constraints([Segment(SegmentKind.SPEECH, "a\nb")])
        assert StyleViolation.EMBEDDED_NEWLINE in report.codes()

    def test_ellipsis_counts_once(self):
        assert count_sentences("The currents twist like braided rivers...") == 1

    def test_advisory_only(self):
        report = check_style_constraints([speech("A. B. C. D.")])
        assert isinstance(report, ConstraintReport)
        assert not report.ok
