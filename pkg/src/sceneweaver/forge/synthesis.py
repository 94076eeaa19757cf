"""Theme-driven synthesis of orchestrated role-play trajectories.

Every accepted record opens with init_scene and contains at least one scene
switch and one role addition; main-character names are deduplicated across the
corpus (canonical, case-sensitive comparison).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Sequence

from ..errors import DuplicateMain, MissingPayload, NotAnAction, RecordRejected
from ..gateway import Backend, ChatRequest, DEFAULT_ACTOR_TEMPERATURE
from ..jsontools import first_json_object
from ..lines import parse_manager_content, render_manager_content
from ..message import parse_message, split_speaker_prefix
from ..model import (
    ActionTag,
    MessageKind,
    RoleProfile,
    TurnMessage,
    canonicalize_role_name,
    character_message,
    manager_message,
    role_profile_from_dict,
    role_profile_to_dict,
)

log = logging.getLogger(__name__)

GENERATION_RETRIES = 2

# The twenty plot themes with their guiding descriptions.
THEMES: dict[str, str] = {
    "Adventure": "Characters embark on a journey, facing challenges and discovering new places.",
    "Quest": "A specific mission or goal drives the characters' actions.",
    "Rescue": "Characters must save someone or something in danger.",
    "Battle": "Conflict escalates into a physical or magical confrontation.",
    "Escape": "Characters attempt to flee from a dangerous situation.",
    "Exploration": "Discovering unknown territories, objects, or secrets.",
    "Mystery": "Unexplained phenomena or events spark investigation.",
    "Investigation": "Characters collect clues and analyze information to solve a case.",
    "Crime-solving": "Characters work together to uncover a criminal or culprit.",
    "Puzzle-solving": "Solving riddles, codes, or logical challenges.",
    "Conspiracy": "Hidden schemes or secrets are uncovered gradually.",
    "Romance": "Characters explore feelings of love, attraction, or affection.",
    "Friendship": "Building trust, bonds, and camaraderie between characters.",
    "Rivalry": "Competing interests or personalities create tension.",
    "Betrayal": "Trust is broken, and hidden motives are revealed.",
    "Reconciliation": "Conflicts are resolved, misunderstandings cleared, relationships repaired.",
    "Negotiation": "Characters attempt to reach agreements or compromises.",
    "Strategy": "Planning, scheming, or discussing complex plans for a goal.",
    "Magic": "Supernatural powers or magical phenomena influence events.",
    "Apocalypse": "Characters face large-scale disasters or catastrophic events.",
}

REJECT_NO_SCENE_SWITCH = "NoSceneSwitch"
REJECT_NO_ROLE_ADDITION = "NoRoleAddition"
REJECT_FIRST_NOT_INIT = "FirstMessageNotInit"
REJECT_MALFORMED = "MalformedRecord"


@dataclass(frozen=True)
class SynthesisRecord:
    """One generated plot: cast with profiles and an orchestrated trajectory."""

    dialogue_topic: str
    topic_description: str
    main_profile: RoleProfile
    other_characters: tuple[RoleProfile, ...]
    messages: tuple[TurnMessage, ...]

    @property
    def roles(self) -> tuple[RoleProfile, ...]:
        return (self.main_profile,) + self.other_characters


def structural_violations(record: SynthesisRecord) -> list[str]:
    """Constraint codes the record breaks; empty means it passes the gate."""
    causes: list[str] = []
    manager_tags = [
        m.manager_action.tag for m in record.messages if m.kind is MessageKind.MANAGER
    ]
    first = record.messages[0] if record.messages else None
    if (
        first is None
        or first.kind is not MessageKind.MANAGER
        or first.manager_action.tag is not ActionTag.INIT_SCENE
    ):
        causes.append(REJECT_FIRST_NOT_INIT)
    if ActionTag.SWITCH_SCENE not in manager_tags:
        causes.append(REJECT_NO_SCENE_SWITCH)
    if ActionTag.ADD_ROLE not in manager_tags:
        causes.append(REJECT_NO_ROLE_ADDITION)
    return causes


def _role_from_entry(entry: Mapping[str, Any]) -> RoleProfile:
    name, is_user = canonicalize_role_name(str(entry.get("name", "")))
    if isinstance(entry.get("profile"), str):
        return RoleProfile(
            name=name,
            is_user=is_user,
            short_description=entry["profile"],
            motivation=entry.get("motivation"),
        )
    data = dict(entry)
    data["name"] = name
    data["is_user"] = is_user
    return role_profile_from_dict(data)


def _message_from_entry(entry: Mapping[str, Any], step: int) -> TurnMessage:
    role = str(entry.get("role", ""))
    content = str(entry.get("content", ""))
    if role == "scene_manager":
        return manager_message(parse_manager_content(content), step)
    # The name prefix before the first colon wins; the role field is the
    # fallback. Either may carry a "(user)" marker.
    prefix, body = split_speaker_prefix(content)
    if prefix is not None:
        author, _ = canonicalize_role_name(prefix)
    else:
        author, _ = canonicalize_role_name(role)
        body = content
    return character_message(author, parse_message(body).segments, step)


def record_from_dict(data: Mapping[str, Any]) -> SynthesisRecord:
    main = _role_from_entry(data["main_profile"])
    others = tuple(_role_from_entry(e) for e in data.get("other_characters", ()))
    messages = tuple(
        _message_from_entry(entry, step)
        for step, entry in enumerate(data.get("messages", ()))
    )
    return SynthesisRecord(
        dialogue_topic=str(data.get("dialogue_topic", "")),
        topic_description=str(data.get("topic_description", "")),
        main_profile=main,
        other_characters=others,
        messages=messages,
    )


def record_to_dict(record: SynthesisRecord) -> dict[str, Any]:
    from ..message import render_message

    def role_entry(role: RoleProfile) -> dict[str, Any]:
        data = role_profile_to_dict(role)
        data["name"] = role.display_name
        del data["is_user"]
        return data

    messages = []
    for message in record.messages:
        if message.kind is MessageKind.MANAGER:
            messages.append(
                {"role": "scene_manager", "content": render_manager_content(message.manager_action)}
            )
        else:
            messages.append({"role": message.author, "content": render_message(message.segments)})
    return {
        "dialogue_topic": record.dialogue_topic,
        "topic_description": record.topic_description,
        "main_profile": role_entry(record.main_profile),
        "other_characters": [role_entry(r) for r in record.other_characters],
        "messages": messages,
    }


_SYNTHESIS_TEMPLATE = """You are writing one complete multi-character role-play plot as a single JSON object.

Theme: {theme}
Theme guideline: {description}

Requirements:
- Invent a main character and 2-3 other characters. Give every character a profile and an initial motivation. Avoid overly common names and do not reuse any of these existing main character names: {existing}
- Write a multi-turn dialogue trajectory. Each character message is a single string that may interleave [inner thought], (visible action), <environmental change>, and plain speech.
- The trajectory opens with a scene_manager message of the form "action: init_scene | initial_scene: ...".
- Include at least one scene_manager message "action: switch_scene | new_scene: ..." and at least one "action: add_role | reason: ... | new_role_name: ... | new_role_profile: ... | new_role_motivation: ..." at narratively justified moments.
- Close the trajectory with "action: end | reason: ...".
- Do not include any pick_speaker messages.

Return ONLY a JSON object with this structure:
{
  "dialogue_topic": "...",
  "topic_description": "...",
  "main_profile": {
    "name": "...",
    "identity_appearance": "...",
    "personality_psychology": "...",
    "speaking_style": "...",
    "abilities_interests_achievements": "...",
    "social_historical_context": "...",
    "personal_history_arc": "...",
    "relationships": "...",
    "motivation": "..."
  },
  "other_characters": [
    { "name": "...", "profile": "...", "motivation": "..." }
  ],
  "messages": [
    { "role": "scene_manager", "content": "action: init_scene | initial_scene: ..." },
    { "role": "Character Name", "content": "..." }
  ]
}"""


def build_synthesis_prompt(
    theme: str, theme_description: str, existing_main_names: Sequence[str]
) -> str:
    existing = ", ".join(existing_main_names) if existing_main_names else "None"
    return (
        _SYNTHESIS_TEMPLATE.replace("{theme}", theme)
        .replace("{description}", theme_description)
        .replace("{existing}", existing)
    )


def generate_synthesis(
    theme: str,
    theme_description: str,
    existing_main_names: Iterable[str],
    backend: Backend,
    *,
    retries: int = GENERATION_RETRIES,
) -> SynthesisRecord:
    """Generate one record for a theme and gate it structurally.

    Raises:
        RecordRejected: structural constraint violated (or unusable payload).
        DuplicateMain: the main character name was already used.
    """
    if theme not in THEMES:
        raise ValueError(f"unknown theme {theme!r}")
    existing = set(existing_main_names)
    prompt = build_synthesis_prompt(theme, theme_description, sorted(existing))
    request = ChatRequest(system=prompt, temperature=DEFAULT_ACTOR_TEMPERATURE)

    record: Optional[SynthesisRecord] = None
    last_cause = "no attempt"
    for _ in range(retries + 1):
        raw = backend.complete(request)
        payload = first_json_object(raw, require_key="main_profile")
        if payload is None:
            last_cause = "no record object in output"
            continue
        try:
            record = record_from_dict(payload)
            break
        except (KeyError, TypeError, ValueError, NotAnAction, MissingPayload) as exc:
            last_cause = f"schema mismatch: {exc}"
    if record is None:
        raise RecordRejected(f"{REJECT_MALFORMED}: {last_cause}")

    causes = structural_violations(record)
    if causes:
        raise RecordRejected(causes[0])
    if record.main_profile.name in existing:
        raise DuplicateMain(record.main_profile.name)
    return record


def filter_records(
    records: Sequence[SynthesisRecord],
) -> tuple[list[SynthesisRecord], list[tuple[int, str]]]:
    """Gate a corpus in stream order: structural constraints plus main-name dedup.

    Returns the accepted records and (index, cause) pairs for rejections.
    """
    accepted: list[SynthesisRecord] = []
    rejections: list[tuple[int, str]] = []
    seen_mains: set[str] = set()
    for index, record in enumerate(records):
        causes = structural_violations(record)
        if causes:
            rejections.append((index, causes[0]))
            continue
        if record.main_profile.name in seen_mains:
            rejections.append((index, f"DuplicateMain:{record.main_profile.name}"))
            continue
        seen_mains.add(record.main_profile.name)
        accepted.append(record)
    return accepted, rejections


def load_records(path: str) -> list[SynthesisRecord]:
    """Read records from a JSON array or JSONL file."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = handle.read()
    stripped = raw.lstrip()
    if stripped.startswith("["):
        entries = json.loads(raw)
    else:
        entries = [json.loads(line) for line in raw.splitlines() if line.strip()]
    return [record_from_dict(e) for e in entries]


def save_records(records: Sequence[SynthesisRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(record_to_dict(record), ensure_ascii=False, sort_keys=True))
            handle.write("\n")
