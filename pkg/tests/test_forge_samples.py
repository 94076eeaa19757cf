from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_role
from sceneweaver.errors import FormatError
from sceneweaver.forge.extract import plot_from_dict
from sceneweaver.forge.samples import (
    ActorSample,
    build_pick_reason_prompt,
    build_smset,
    format_actor_samples,
    manager_sample_message_count,
    parse_chat_action,
)
from sceneweaver.forge.synthesis import SynthesisRecord
from sceneweaver.gateway import make_backend, scripted_config
from sceneweaver.model import (
    ActionTag,
    ManagerAction,
    MessageKind,
    character_message,
    manager_message,
    speech,
)
from test_forge_extract import example_plot_payload


def reason_backend(n: int = 64):
    return make_backend(scripted_config([f"Reason sentence {i}." for i in range(n)]))


def simple_record(character_turns: int, switches: int = 1, adds: int = 1) -> SynthesisRecord:
    """[init, roles alternating..., switch x, add x, end] with valid rotation."""
    main = make_role("Ava Crane")
    other = make_role("Bram Holt")
    extra_name = "Nix Dale"
    messages = [
        manager_message(ManagerAction(tag=ActionTag.INIT_SCENE, initial_scene="A pier."), 0)
    ]
    step = 1
    for i in range(adds):
        messages.append(
            manager_message(
                ManagerAction(
                    tag=ActionTag.ADD_ROLE,
                    reason="needed",
                    new_role_name=extra_name if i == 0 else f"{extra_name} {i}",
                    new_role_profile="a newcomer",
                    new_role_motivation="join in",
                ),
                step,
            )
        )
        step += 1
    names = [main.name, other.name]
    for i in range(character_turns):
        if i == character_turns // 2 and switches:
            for s in range(switches):
                messages.append(
                    manager_message(
                        ManagerAction(tag=ActionTag.SWITCH_SCENE, new_scene=f"Scene {s}"), step
                    )
                )
                step += 1
        messages.append(character_message(names[i % 2], (speech(f"Line {i}."),), step))
        step += 1
    messages.append(manager_message(ManagerAction(tag=ActionTag.END, reason="done"), step))
    return SynthesisRecord(
        dialogue_topic="Friendship",
        topic_description="Building trust.",
        main_profile=main,
        other_characters=(other,),
        messages=tuple(messages),
    )


class TestFormatActorSamples:
    def test_synthesis_record_yields_one_sample(self, adventure_record):
        samples = format_actor_samples(adventure_record)
        assert len(samples) == 1
        sample = samples[0]
        assert sample.main_name == "Isolde Ferrowind"
        assert sample.messages[0][0] == "system"
        assert sample.messages[1][0] == "user"
        assert sample.messages[1][1].startswith("scene_manager: action: init_scene | initial_scene:")

    def test_main_turns_are_assistant_lines(self, adventure_record):
        sample = format_actor_samples(adventure_record)[0]
        assistant_lines = [c for role, c in sample.messages if role == "assistant"]
        assert all(line.startswith("Isolde Ferrowind: ") for line in assistant_lines)
        expected = sum(
            1
            for m in adventure_record.messages
            if m.kind is MessageKind.CHARACTER and m.author == "Isolde Ferrowind"
        )
        assert len(assistant_lines) == expected

    def test_manager_lines_kept_as_user_context(self, adventure_record):
        sample = format_actor_samples(adventure_record)[0]
        manager_lines = [c for role, c in sample.messages if c.startswith("scene_manager:")]
        assert any("switch_scene" in line for line in manager_lines)
        assert any("add_role" in line for line in manager_lines)

    def test_two_character_plot_six_turns(self):
        payload = example_plot_payload()
        payload["conversation"][0]["dialogues"] = [
            {"character": "Isolde Ferrowind" if i % 2 == 0 else "Taron Corvith", "message": f"Line {i}."}
            for i in range(6)
        ]
        plot = plot_from_dict(payload)
        samples = format_actor_samples(plot, {})
        assert len(samples) == 2
        for sample in samples:
            # init line + 6 dialogue turns after the system message
            assert len(sample.messages) - 1 == 7

    def test_profiles_injected_when_available(self):
        plot = plot_from_dict(example_plot_payload())
        profiles = {"Isolde Ferrowind": make_role("Isolde Ferrowind")}
        samples = format_actor_samples(plot, profiles)
        isolde = next(s for s in samples if s.main_name == "Isolde Ferrowind")
        assert "Isolde Ferrowind has a distinctive look." in isolde.messages[0][1]
        # the conversation-level motivation overrides the stored one
        assert "Motivation: keep the crew alive" in isolde.messages[0][1]

    def test_silent_character_dropped(self):
        payload = example_plot_payload()
        payload["conversation"][0]["key_characters"].append(
            {"name": "Mute Observer", "motivation": "watch"}
        )
        plot = plot_from_dict(payload)
        samples = format_actor_samples(plot, {})
        assert sorted(s.main_name for s in samples) == ["Isolde Ferrowind", "Taron Corvith"]

    def test_blank_author_raises_format_error(self):
        payload = example_plot_payload()
        payload["conversation"][0]["dialogues"][0]["character"] = "  "
        with pytest.raises(FormatError):
            format_actor_samples(plot_from_dict(payload), {})


class TestBuildSmset:
    def test_insertion_count_law_example(self):
        record = simple_record(3)  # [init, add, A, B, switch, A, end]
        sample = build_smset(record, reason_backend())
        assert manager_sample_message_count(sample) == len(record.messages) + 3

    def test_minimal_record_no_insertions(self):
        main, other = make_role("Ava Crane"), make_role("Bram Holt")
        record = SynthesisRecord(
            dialogue_topic="Friendship",
            topic_description="d",
            main_profile=main,
            other_characters=(other,),
            messages=(
                manager_message(ManagerAction(tag=ActionTag.INIT_SCENE, initial_scene="x"), 0),
                manager_message(ManagerAction(tag=ActionTag.END, reason="r"), 1),
            ),
        )
        sample = build_smset(record, reason_backend())
        picks = [
            c for role, c in sample.messages if role == "assistant" and "pick_speaker" in c
        ]
        assert picks == []
        assert manager_sample_message_count(sample) == 2

    def test_user_suffix_stripped_in_pick_speaker(self, adventure_record):
        from dataclasses import replace

        record = adventure_record
        # flag Valdrex as the user; transcripts should show the marker while
        # pick actions carry the canonical name
        others = tuple(
            replace(r, is_user=(r.name == "Valdrex")) for r in record.other_characters
        )
        record = SynthesisRecord(
            dialogue_topic=record.dialogue_topic,
            topic_description=record.topic_description,
            main_profile=record.main_profile,
            other_characters=others,
            messages=record.messages,
        )
        sample = build_smset(record, reason_backend())
        picks = [
            json.loads(c)
            for role, c in sample.messages
            if role == "assistant" and "pick_speaker" in c
        ]
        valdrex_picks = [p for p in picks if p["speaker"] == "Valdrex"]
        assert valdrex_picks, "expected Valdrex to be picked"
        assert all("(user)" not in p["speaker"] for p in picks)
        user_lines = [c for role, c in sample.messages if role == "user"]
        assert any(line.startswith("Valdrex (user):") for line in user_lines)

    def test_existing_actions_become_assistant_json(self, adventure_record):
        sample = build_smset(adventure_record, reason_backend())
        assistant_payloads = [
            json.loads(c) for role, c in sample.messages if role == "assistant"
        ]
        tags = [p["action"] for p in assistant_payloads]
        assert "switch_scene" in tags
        assert "add_role" in tags
        assert "end" in tags
        assert "init_scene" not in tags  # init stays a user line

    def test_reasons_come_from_backend(self):
        record = simple_record(2)
        sample = build_smset(record, reason_backend())
        picks = [
            json.loads(c)
            for role, c in sample.messages
            if role == "assistant" and "pick_speaker" in c
        ]
        assert picks[0]["reason"] == "Reason sentence 0."
        assert sample.flags == ()

    def test_backend_failure_uses_flagged_fallback(self):
        record = simple_record(2)
        sample = build_smset(record, make_backend(scripted_config([])))
        picks = [
            json.loads(c)
            for role, c in sample.messages
            if role == "assistant" and "pick_speaker" in c
        ]
        assert all(p["reason"] for p in picks)
        assert len(sample.flags) == 2

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 12), st.integers(0, 2), st.integers(0, 2))
    def test_insertion_law_randomized(self, turns, switches, adds):
        record = simple_record(turns, switches=switches, adds=adds)
        sample = build_smset(record, reason_backend(128))
        characters = sum(1 for m in record.messages if m.kind is MessageKind.CHARACTER)
        assert manager_sample_message_count(sample) == len(record.messages) + characters


class TestReasonPrompt:
    def test_prompt_mentions_speaker_and_history(self):
        prompt = build_pick_reason_prompt("SYSTEM TEXT", "A: hello", "Bram Holt")
        assert "Pending Speaker: Bram Holt" in prompt
        assert "A: hello" in prompt
        assert "Return ONLY a single sentence" in prompt


class TestChatActionParsing:
    def test_roundtrip(self):
        record = simple_record(1)
        sample = build_smset(record, reason_backend())
        for role, content in sample.messages:
            if role == "assistant":
                assert parse_chat_action(content) is not None

    def test_non_action_returns_none(self):
        assert parse_chat_action("not json") is None
        assert parse_chat_action('{"foo": 1}') is None


def test_actor_sample_serialization_shape(adventure_record):
    sample = format_actor_samples(adventure_record)[0]
    data = sample.to_dict()
    assert set(data) == {"main_name", "messages"}
    assert all(set(m) == {"role", "content"} for m in data["messages"])
    assert isinstance(sample, ActorSample)
