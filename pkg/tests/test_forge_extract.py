from __future__ import annotations

import json

import pytest

from sceneweaver.errors import ExtractionError, ProfileError
from sceneweaver.forge.chunking import Chunk
from sceneweaver.forge.extract import (
    build_extraction_prompt,
    build_profile_prompt,
    build_profiles,
    collect_character_evidence,
    extract_book,
    extract_chunk,
    plot_from_dict,
    plot_to_dict,
)
from sceneweaver.gateway import scripted_config, make_backend

CHUNK_TEXT = (
    "The storm broke at dawn. Isolde gripped the wheel. "
    '"Keep sharp," she said. Taron sketched the currents. The spires appeared at last.'
)

CHUNK = Chunk(book_id="b1", index=0, text=CHUNK_TEXT, token_estimate=40)


def example_plot_payload(state: str = "finished") -> dict:
    return {
        "chapter_title": "I",
        "first_sentence": "The storm broke at dawn.",
        "last_sentence": "The spires appeared at last.",
        "prominence": "high",
        "summary": "The crew survives a storm and sights the spires.",
        "key_characters": [
            {"name": "Isolde Ferrowind", "description": "captain", "experience": "held the wheel"},
            {"name": "Taron Corvith", "description": "cartographer", "experience": "charted currents"},
        ],
        "conversation": [
            {
                "scenario": "The deck at dawn after a storm.",
                "topic": "survival",
                "key_characters": [
                    {"name": "Isolde Ferrowind", "motivation": "keep the crew alive"},
                    {"name": "Taron Corvith", "motivation": "finish the chart"},
                ],
                "dialogues": [
                    {"character": "Isolde Ferrowind", "message": "(gripping the wheel) Keep sharp."},
                    {"character": "Taron Corvith", "message": "[Almost there] The spires are real."},
                ],
            }
        ],
        "state": state,
    }


def extraction_response(plots: list[dict], next_start: str) -> str:
    return json.dumps(
        {"chapter_beginnings": [], "plots": plots, "next_chunk_start": next_start}
    )


class TestExtractionPrompt:
    def test_contains_carried_plot_section(self):
        plot = plot_from_dict(example_plot_payload("truncated"))
        prompt = build_extraction_prompt("Title", "Author", CHUNK_TEXT, [plot])
        assert "Truncated plot from previous chunk" in prompt
        assert "The crew survives a storm" in prompt

    def test_none_sentinel_without_carried_plots(self):
        prompt = build_extraction_prompt("Title", "Author", CHUNK_TEXT, [])
        assert "==Truncated plot from previous chunk (to be finished)==\nNone" in prompt

    def test_verbatim_rule_present(self):
        prompt = build_extraction_prompt("T", "A", CHUNK_TEXT, [])
        assert "verbatim from the given chunk" in prompt


class TestExtractChunk:
    def test_valid_payload_parses_to_fixture(self):
        backend = make_backend(
            scripted_config([extraction_response([example_plot_payload()], "The spires appeared at last.")])
        )
        result = extract_chunk(CHUNK, [], backend)
        assert len(result.finished) == 1
        assert result.truncated == ()
        assert result.warnings == ()
        plot = result.finished[0]
        assert plot_to_dict(plot) == example_plot_payload()

    def test_missing_next_start_sets_warning(self):
        backend = make_backend(
            scripted_config([extraction_response([example_plot_payload()], "not in the chunk at all")])
        )
        result = extract_chunk(CHUNK, [], backend)
        assert any("next_chunk_start" in w for w in result.warnings)

    def test_nonverbatim_sentence_flags_plot_not_error(self):
        payload = example_plot_payload()
        payload["first_sentence"] = "A sentence never written."
        backend = make_backend(
            scripted_config([extraction_response([payload], "The spires appeared at last.")])
        )
        result = extract_chunk(CHUNK, [], backend)
        assert any("first_sentence" in w for w in result.finished[0].warnings)

    def test_schema_failure_retries_then_raises(self):
        backend = make_backend(scripted_config(["not json", "still not", "nope"]))
        with pytest.raises(ExtractionError):
            extract_chunk(CHUNK, [], backend)

    def test_schema_failure_then_success(self):
        backend = make_backend(
            scripted_config(
                ["garbage", extraction_response([example_plot_payload()], "The spires appeared at last.")]
            )
        )
        result = extract_chunk(CHUNK, [], backend)
        assert len(result.finished) == 1

    def test_unparseable_dialogue_is_advisory(self):
        payload = example_plot_payload()
        payload["conversation"][0]["dialogues"].append(
            {"character": "Isolde Ferrowind", "message": "(unclosed action"}
        )
        backend = make_backend(
            scripted_config([extraction_response([payload], "The spires appeared at last.")])
        )
        result = extract_chunk(CHUNK, [], backend)
        assert any("does not parse" in w for w in result.finished[0].warnings)


class TestExtractBook:
    def test_truncated_plot_replaced_by_its_extension(self):
        # chunk 1 ends mid-plot; chunk 2 re-emits the plot extended and
        # finished, so exactly one final plot comes out
        truncated = example_plot_payload("truncated")
        finished = example_plot_payload()
        responses = [
            extraction_response([truncated], "The spires appeared at last."),
            extraction_response([finished], "The spires appeared at last."),
        ]
        backend = make_backend(scripted_config(responses))
        chunks = [CHUNK, Chunk(book_id="b1", index=1, text=CHUNK_TEXT, token_estimate=40)]
        plots = extract_book(chunks, backend)
        assert len(plots) == 1
        assert plots[0].state == "finished"

    def test_end_of_book_keeps_open_plots(self):
        backend = make_backend(
            scripted_config(
                [extraction_response([example_plot_payload("truncated")], "The spires appeared at last.")]
            )
        )
        plots = extract_book([CHUNK], backend)
        assert len(plots) == 1
        assert plots[0].state == "truncated"


class TestBuildProfiles:
    def _profile_payload(self, name: str) -> str:
        return json.dumps(
            {
                "name": name,
                "short_description": "a captain",
                "identity_appearance": "tall, weathered",
                "personality_psychology": "stoic",
                "speaking_style": "clipped",
                "abilities_interests_achievements": "navigation",
                "social_historical_context": "fleet-born",
                "personal_history_arc": "seeking redemption",
                "relationships": "trusts the crew",
            }
        )

    def test_evidence_counts_plot_summaries(self):
        plots = [plot_from_dict(example_plot_payload()) for _ in range(3)]
        evidence = collect_character_evidence(plots)
        rendered = evidence["Isolde Ferrowind"].render()
        assert rendered.count("Plot summary:") == 3
        prompt = build_profile_prompt("Isolde Ferrowind", "The Voyage", rendered)
        assert prompt.count("Plot summary:") == 3

    def test_profiles_built_for_each_character(self):
        plots = [plot_from_dict(example_plot_payload())]
        backend = make_backend(
            scripted_config(
                [self._profile_payload("Isolde Ferrowind"), self._profile_payload("Taron Corvith")]
            )
        )
        profiles = build_profiles(plots, backend, book_title="The Voyage")
        assert [p.name for p in profiles] == ["Isolde Ferrowind", "Taron Corvith"]
        assert profiles[0].speaking_style == "clipped"
        assert profiles[0].short_description == "a captain"

    def test_empty_fields_accepted(self):
        plots = [plot_from_dict(example_plot_payload())]
        minimal = json.dumps({"name": "Isolde Ferrowind", "identity_appearance": ""})
        backend = make_backend(scripted_config([minimal, self._profile_payload("Taron Corvith")]))
        profiles = build_profiles(plots, backend)
        assert profiles[0].identity_appearance == ""

    def test_parse_failure_raises_profile_error(self):
        plots = [plot_from_dict(example_plot_payload())]
        backend = make_backend(scripted_config(["nope", "nada", "none"]))
        with pytest.raises(ProfileError) as excinfo:
            build_profiles(plots, backend)
        assert excinfo.value.character == "Isolde Ferrowind"


class TestPlotRoundtrip:
    def test_dict_roundtrip(self):
        payload = example_plot_payload()
        assert plot_to_dict(plot_from_dict(payload)) == payload

    def test_bad_state_rejected(self):
        payload = example_plot_payload()
        payload["state"] = "halfway"
        with pytest.raises(ValueError):
            plot_from_dict(payload)
