from __future__ import annotations

import json
import os

import pytest

from sceneweaver.forge.synthesis import SynthesisRecord, record_from_dict
from sceneweaver.gateway import scripted_config
from sceneweaver.model import RoleProfile
from sceneweaver.protocol import Mode
from sceneweaver.simulation import EpisodeConfig, SeedRecord

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def load_fixture_json(name: str):
    with open(os.path.join(FIXTURES, name), "r", encoding="utf-8") as handle:
        return json.load(handle)


@pytest.fixture
def adventure_record() -> SynthesisRecord:
    return record_from_dict(load_fixture_json("adventure_record.json"))


def make_role(name: str, is_user: bool = False, motivation: str | None = None) -> RoleProfile:
    return RoleProfile(
        name=name,
        identity_appearance=f"{name} has a distinctive look.",
        personality_psychology=f"{name} is steady under pressure.",
        speaking_style=f"{name} speaks plainly.",
        abilities_interests_achievements=f"{name} is resourceful.",
        social_historical_context=f"{name} grew up near the harbor.",
        personal_history_arc=f"{name} is searching for a lost friend.",
        relationships=f"{name} trusts the crew.",
        motivation=motivation or f"{name} wants the voyage to succeed.",
        is_user=is_user,
    )


# ---------------------------------------------------------------------------
# Scripted episode builders
# ---------------------------------------------------------------------------

CAST = ("Astra Vale", "Cass Reed", "Bren Holt")  # Cass Reed is the user


def make_seed(seed_id: str = "seed-000", topic: str = "Adventure") -> SeedRecord:
    return SeedRecord(
        seed_id=seed_id,
        topic=topic,
        topic_description="Characters embark on a journey.",
        roles=(
            make_role(CAST[0]),
            make_role(CAST[1], is_user=True),
            make_role(CAST[2]),
        ),
        initial_scene="A narrow quay at first light, ropes creaking against the tide.",
    )


def pick_json(speaker: str) -> str:
    return json.dumps({"action": "pick_speaker", "speaker": speaker, "reason": "turn rotation"})


def end_json(reason: str = "story complete") -> str:
    return json.dumps({"action": "end", "reason": reason})


def rotation_scripts(horizon: int, seed_tag: str = "") -> tuple[list[str], list[str], list[str]]:
    """Manager/actor/user scripts for a pick rotation that runs to the horizon."""
    manager, actor, user = [], [], []
    for turn in range(horizon):
        speaker = CAST[turn % len(CAST)]
        manager.append(pick_json(speaker))
        line = f"{speaker}: (steady) [thinking it over] Turn {turn} holds{seed_tag}."
        if speaker == CAST[1]:
            user.append(line)
        else:
            actor.append(line)
    return manager, actor, user


def scripted_episode(
    seed_id: str = "seed-000",
    horizon: int = 20,
    manager_script: list[str] | None = None,
    actor_script: list[str] | None = None,
    user_script: list[str] | None = None,
    seed_tag: str = "",
    topic: str = "Adventure",
    **kwargs,
) -> EpisodeConfig:
    if manager_script is None:
        manager_script, default_actor, default_user = rotation_scripts(horizon, seed_tag)
        actor_script = default_actor if actor_script is None else actor_script
        user_script = default_user if user_script is None else user_script
    return EpisodeConfig(
        seed=make_seed(seed_id, topic=topic),
        horizon=horizon,
        manager_backend=scripted_config(manager_script or []),
        actor_backend=scripted_config(actor_script or []),
        user_backend=scripted_config(user_script or []),
        actor_mode=kwargs.pop("actor_mode", Mode.ENHANCE),
        manager_mode=kwargs.pop("manager_mode", Mode.ENHANCE),
        **kwargs,
    )
