from __future__ import annotations

import io
import random
import string

import pytest
from hypothesis import given, strategies as st

from sceneweaver.errors import InvalidRoleName, ParseError
from sceneweaver.model import (
    ActionTag,
    InteractionState,
    ManagerAction,
    MessageKind,
    RoleProfile,
    Segment,
    SegmentKind,
    Termination,
    Trajectory,
    apply_character_message,
    canonicalize_role_name,
    character_message,
    manager_action_from_dict,
    manager_action_to_dict,
    manager_message,
    read_trajectory,
    role_profile_from_dict,
    role_profile_to_dict,
    segment_from_dict,
    segment_to_dict,
    speech,
    thought,
    turn_message_from_dict,
    turn_message_to_dict,
    write_trajectory,
)


class TestCanonicalizeRoleName:
    def test_strips_user_suffix(self):
        assert canonicalize_role_name("Cassian Mirell (user)") == ("Cassian Mirell", True)

    def test_plain_name_passes_through(self):
        assert canonicalize_role_name("Isolde Ferrowind") == ("Isolde Ferrowind", False)

    def test_blank_rejected(self):
        with pytest.raises(InvalidRoleName):
            canonicalize_role_name("   ")

    def test_suffix_only_rejected(self):
        with pytest.raises(InvalidRoleName):
            canonicalize_role_name(" (user) ")

    @given(st.text(min_size=1).filter(lambda s: s.strip()))
    def test_idempotent(self, raw):
        try:
            name, _ = canonicalize_role_name(raw)
        except InvalidRoleName:
            return
        name2, user2 = canonicalize_role_name(name)
        assert name2 == name
        assert user2 is False


class TestSegment:
    def test_thought_rejects_own_delimiters(self):
        with pytest.raises(ValueError):
            Segment(SegmentKind.THOUGHT, "a]b")

    def test_speech_rejects_empty(self):
        with pytest.raises(ValueError):
            Segment(SegmentKind.SPEECH, "  ")

    def test_empty_thought_allowed(self):
        assert Segment(SegmentKind.THOUGHT, "").text == ""


class TestManagerAction:
    def test_payload_required(self):
        with pytest.raises(ValueError):
            ManagerAction(tag=ActionTag.SWITCH_SCENE, reason="x")

    def test_foreign_payload_rejected(self):
        with pytest.raises(ValueError):
            ManagerAction(tag=ActionTag.END, speaker="A")

    def test_blank_speaker_rejected(self):
        with pytest.raises(ValueError):
            ManagerAction(tag=ActionTag.PICK_SPEAKER, speaker="  ")


class TestRoleProfile:
    def test_name_trimmed(self):
        assert RoleProfile(name="  A  ").name == "A"

    def test_suffix_in_name_rejected(self):
        with pytest.raises(InvalidRoleName):
            RoleProfile(name="A (user)")

    def test_display_name(self):
        assert RoleProfile(name="A", is_user=True).display_name == "A (user)"


class TestInteractionState:
    def test_dialogue_turn_count_enforced(self):
        msg = character_message("A", [speech("hi")], 1)
        with pytest.raises(ValueError):
            InteractionState(roles=(RoleProfile(name="A"),), history=(msg,), dialogue_turns=0)

    def test_duplicate_roles_rejected(self):
        with pytest.raises(ValueError):
            InteractionState(roles=(RoleProfile(name="A"), RoleProfile(name="A")))

    def test_pending_speaker_consumed(self):
        state = InteractionState(
            roles=(RoleProfile(name="A"),),
            history=(manager_message(ManagerAction(tag=ActionTag.INIT_SCENE, initial_scene="x"), 1),),
            step=1,
            pending_speaker="A",
        )
        after = apply_character_message(state, "A", [speech("hi")])
        assert after.dialogue_turns == 1
        assert after.last_speaker == "A"
        assert after.pending_speaker is None

    def test_current_scene_tracks_switches(self):
        init = manager_message(ManagerAction(tag=ActionTag.INIT_SCENE, initial_scene="deck"), 1)
        switch = manager_message(ManagerAction(tag=ActionTag.SWITCH_SCENE, new_scene="platform"), 2)
        state = InteractionState(roles=(RoleProfile(name="A"),), history=(init, switch), step=2)
        assert state.current_scene == "platform"


# ---------------------------------------------------------------------------
# Randomized serialization roundtrips (seeded, deterministic)
# ---------------------------------------------------------------------------

_TEXT_ALPHABET = string.ascii_letters + string.digits + " ,.'!?-"


def _rand_text(rng: random.Random, min_len: int = 0, max_len: int = 40) -> str:
    return "".join(rng.choice(_TEXT_ALPHABET) for _ in range(rng.randint(min_len, max_len)))


def random_segment(rng: random.Random) -> Segment:
    kind = rng.choice(list(SegmentKind))
    if kind is SegmentKind.SPEECH:
        text = _rand_text(rng, 1).strip() or "x"
        return Segment(kind, text)
    return Segment(kind, _rand_text(rng))


def random_role(rng: random.Random, name: str | None = None) -> RoleProfile:
    return RoleProfile(
        name=name or ("Role " + _rand_text(rng, 1, 8).strip() + str(rng.randint(0, 10**6))),
        identity_appearance=_rand_text(rng),
        personality_psychology=_rand_text(rng),
        speaking_style=_rand_text(rng),
        abilities_interests_achievements=_rand_text(rng),
        social_historical_context=_rand_text(rng),
        personal_history_arc=_rand_text(rng),
        relationships=_rand_text(rng),
        motivation=_rand_text(rng) if rng.random() < 0.7 else None,
        is_user=rng.random() < 0.3,
        short_description=_rand_text(rng),
    )


def random_action(rng: random.Random) -> ManagerAction:
    tag = rng.choice(list(ActionTag))
    kwargs = {"reason": _rand_text(rng)}
    if tag is ActionTag.INIT_SCENE:
        kwargs["initial_scene"] = _rand_text(rng, 1).strip() or "scene"
    elif tag is ActionTag.PICK_SPEAKER:
        kwargs["speaker"] = "Speaker" + str(rng.randint(0, 99))
    elif tag is ActionTag.SWITCH_SCENE:
        kwargs["new_scene"] = _rand_text(rng, 1).strip() or "scene"
    elif tag is ActionTag.ADD_ROLE:
        kwargs["new_role_name"] = "New" + str(rng.randint(0, 99))
        kwargs["new_role_profile"] = _rand_text(rng)
        kwargs["new_role_motivation"] = _rand_text(rng)
    return ManagerAction(tag=tag, **kwargs)


def random_message(rng: random.Random, step: int) -> object:
    if rng.random() < 0.4:
        return manager_message(random_action(rng), step)
    segments = [random_segment(rng) for _ in range(rng.randint(0, 4))]
    return character_message("Role" + str(rng.randint(0, 20)), segments, step)


def random_trajectory(rng: random.Random) -> Trajectory:
    roles = tuple(random_role(rng, name=f"Role {i}") for i in range(rng.randint(1, 4)))
    messages = tuple(random_message(rng, step + 1) for step in range(rng.randint(0, 12)))
    return Trajectory(
        seed_id="seed-" + str(rng.randint(0, 10**6)),
        topic=_rand_text(rng, 1).strip() or "Topic",
        roles_at_start=roles,
        messages=messages,
        termination=Termination.BACKEND_FAILURE,
        horizon=rng.randint(1, 40),
    )


class TestSerializationRoundtrips:
    def test_randomized_roundtrips_10k(self):
        rng = random.Random(20260810)
        for _ in range(2500):
            seg = random_segment(rng)
            assert segment_from_dict(segment_to_dict(seg)) == seg
        for _ in range(2500):
            role = random_role(rng)
            assert role_profile_from_dict(role_profile_to_dict(role)) == role
        for _ in range(2500):
            act = random_action(rng)
            assert manager_action_from_dict(manager_action_to_dict(act)) == act
        for _ in range(2500):
            msg = random_message(rng, rng.randint(0, 100))
            assert turn_message_from_dict(turn_message_to_dict(msg)) == msg

    def test_trajectory_file_roundtrip_randomized(self):
        rng = random.Random(7)
        for _ in range(200):
            trajectory = random_trajectory(rng)
            buffer = io.StringIO()
            write_trajectory(trajectory, buffer)
            buffer.seek(0)
            assert read_trajectory(buffer) == trajectory


class TestTrajectoryIO:
    def _simple_trajectory(self, n_messages: int) -> Trajectory:
        messages = [
            manager_message(ManagerAction(tag=ActionTag.INIT_SCENE, initial_scene="deck"), 1)
        ]
        names = ("A", "B")
        for i in range(n_messages - 1):
            messages.append(character_message(names[i % 2], [speech(f"line {i}")], i + 2))
        return Trajectory(
            seed_id="s",
            topic="Adventure",
            roles_at_start=(RoleProfile(name="A"), RoleProfile(name="B")),
            messages=tuple(messages),
            termination=Termination.BACKEND_FAILURE,
            horizon=20,
        )

    def test_empty_message_trajectory_roundtrips_header_only(self):
        trajectory = Trajectory(
            seed_id="s",
            topic="t",
            roles_at_start=(RoleProfile(name="A"),),
            messages=(),
            termination=Termination.BACKEND_FAILURE,
            horizon=20,
        )
        buffer = io.StringIO()
        write_trajectory(trajectory, buffer)
        assert len(buffer.getvalue().splitlines()) == 1
        buffer.seek(0)
        assert read_trajectory(buffer) == trajectory

    def test_line_count_is_messages_plus_header(self):
        trajectory = self._simple_trajectory(22)
        buffer = io.StringIO()
        write_trajectory(trajectory, buffer)
        assert len(buffer.getvalue().splitlines()) == 23

    def test_truncated_final_line_reports_line_number(self):
        trajectory = self._simple_trajectory(5)
        buffer = io.StringIO()
        write_trajectory(trajectory, buffer)
        lines = buffer.getvalue().splitlines()
        corrupted = "\n".join(lines[:-1] + [lines[-1][: len(lines[-1]) // 2]])
        with pytest.raises(ParseError) as excinfo:
            read_trajectory(io.StringIO(corrupted))
        assert excinfo.value.line == len(lines)

    def test_horizon_invariant_enforced(self):
        with pytest.raises(ValueError):
            Trajectory(
                seed_id="s",
                topic="t",
                roles_at_start=(RoleProfile(name="A"),),
                messages=(),
                termination=Termination.HORIZON_REACHED,
                horizon=20,
            )

    def test_manager_end_invariant_enforced(self):
        init = manager_message(ManagerAction(tag=ActionTag.INIT_SCENE, initial_scene="x"), 1)
        with pytest.raises(ValueError):
            Trajectory(
                seed_id="s",
                topic="t",
                roles_at_start=(RoleProfile(name="A"),),
                messages=(init,),
                termination=Termination.MANAGER_END,
                horizon=20,
            )


class TestTurnMessage:
    def test_exactly_one_payload(self):
        with pytest.raises(ValueError):
            character_message("A", [speech("hi")], 1).__class__(
                author="A",
                kind=MessageKind.CHARACTER,
                step_index=1,
                segments=(thought("x"),),
                manager_action=ManagerAction(tag=ActionTag.END),
            )
