"""Training-sample formatting for the actor and the scene manager.

Actor samples are character-centric chat transcripts: the chosen main
character's turns are assistant messages (the loss-bearing role), everything
else is user-side context. Scene-manager samples insert one pick_speaker
decision before every character turn and keep the record's own actions as
assistant targets.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Any, Mapping, Optional

from ..errors import BackendFailure, FormatError
from ..gateway import Backend, ChatRequest, DEFAULT_MANAGER_TEMPERATURE
from ..lines import render_manager_content
from ..message import render_message
from ..model import (
    ACTION_PAYLOAD_FIELDS,
    ActionTag,
    ManagerAction,
    MessageKind,
    RoleProfile,
    canonicalize_role_name,
)
from ..prompts import build_actor_system, build_manager_system
from .extract import ExtractedPlot, PlotConversation
from .synthesis import SynthesisRecord

log = logging.getLogger(__name__)

ChatLine = tuple[str, str]


@dataclass(frozen=True)
class ActorSample:
    """One actor training instance: system wrapper plus the dialogue turns."""

    main_name: str
    messages: tuple[ChatLine, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "main_name": self.main_name,
            "messages": [{"role": role, "content": content} for role, content in self.messages],
        }


@dataclass(frozen=True)
class ManagerSample:
    """One scene-manager training instance; flags mark degraded reasons."""

    messages: tuple[ChatLine, ...]
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "messages": [{"role": role, "content": content} for role, content in self.messages],
            "flags": list(self.flags),
        }


def _init_user_line(initial_scene: str, reason: str = "") -> ChatLine:
    act = ManagerAction(tag=ActionTag.INIT_SCENE, reason=reason, initial_scene=initial_scene)
    return ("user", f"scene_manager: {render_manager_content(act)}")


def _display(author: str, user_names: set[str]) -> str:
    return f"{author} (user)" if author in user_names else author


def _record_samples(record: SynthesisRecord) -> list[ActorSample]:
    main = record.main_profile
    user_names = {r.name for r in record.roles if r.is_user}
    if not record.messages:
        raise FormatError("record has no messages")
    first = record.messages[0]
    if first.kind is not MessageKind.MANAGER or first.manager_action.tag is not ActionTag.INIT_SCENE:
        raise FormatError("record does not open with init_scene")

    lines: list[ChatLine] = [
        ("system", build_actor_system(main, record.other_characters)),
        ("user", f"scene_manager: {render_manager_content(first.manager_action)}"),
    ]
    for message in record.messages[1:]:
        if message.kind is MessageKind.MANAGER:
            lines.append(
                ("user", f"scene_manager: {render_manager_content(message.manager_action)}")
            )
        elif message.author == main.name:
            lines.append(("assistant", f"{main.name}: {render_message(message.segments)}"))
        else:
            display = _display(message.author, user_names)
            lines.append(("user", f"{display}: {render_message(message.segments)}"))
    return [ActorSample(main_name=main.name, messages=tuple(lines))]


def _conversation_samples(
    plot: ExtractedPlot,
    conversation: PlotConversation,
    profiles: Mapping[str, RoleProfile],
) -> list[ActorSample]:
    motivations = {c.name: c.motivation for c in conversation.key_characters}
    descriptions = {c.name: c.description for c in plot.key_characters}
    speakers: list[str] = []
    for line in conversation.dialogues:
        if not line.character.strip():
            raise FormatError(f"dialogue line without an author in plot {plot.summary[:40]!r}")
        if line.character not in speakers:
            speakers.append(line.character)

    def profile_of(name: str) -> RoleProfile:
        base = profiles.get(name)
        if base is None:
            base = RoleProfile(name=name, short_description=descriptions.get(name, ""))
        motivation = motivations.get(name) or base.motivation
        return replace(base, motivation=motivation)

    roster = [c.name for c in conversation.key_characters] or speakers
    samples: list[ActorSample] = []
    for name in roster:
        if name not in speakers:
            log.warning("character %r never speaks in this conversation; sample dropped", name)
            continue
        main = profile_of(name)
        others = tuple(profile_of(n) for n in roster if n != name)
        lines: list[ChatLine] = [
            ("system", build_actor_system(main, others)),
            _init_user_line(conversation.scenario),
        ]
        for line in conversation.dialogues:
            content = f"{line.character}: {line.message}"
            lines.append(("assistant" if line.character == name else "user", content))
        samples.append(ActorSample(main_name=name, messages=tuple(lines)))
    return samples


def format_actor_samples(
    source: SynthesisRecord | ExtractedPlot,
    profiles: Optional[Mapping[str, RoleProfile]] = None,
) -> list[ActorSample]:
    """Emit character-centric training samples from a record or extracted plot.

    Synthesis records yield one sample, centered on the main profile.
    Extracted plots yield one sample per conversation per participating
    character; cast members who never speak are dropped with a warning.
    """
    if isinstance(source, SynthesisRecord):
        return _record_samples(source)
    samples: list[ActorSample] = []
    for conversation in source.conversations:
        samples.extend(_conversation_samples(source, conversation, profiles or {}))
    return samples


def _action_json(act: ManagerAction) -> str:
    payload: dict[str, Any] = {"action": act.tag.value, "reason": act.reason}
    for name in ACTION_PAYLOAD_FIELDS[act.tag]:
        payload[name] = getattr(act, name)
    return json.dumps(payload, ensure_ascii=False)


_REASON_PROMPT = """You are generating a comprehensive and well-reasoned explanation for why the next speaker is chosen in this role-playing scenario.

Your analysis should synthesize multiple contextual factors:
1. Scene Information: Consider the initial scene setting, any scene transitions that have occurred, and scene-related details mentioned in the conversation history (including information within angle brackets < >).
2. Character Information and Relationships: Analyze the roles involved, including:
   - The main character (protagonist)
   - The user character
   - Any newly introduced characters
   - The relationships and dynamics between these characters
3. Current Scene Atmosphere: Assess the overall mood, tension, and emotional tone of the current scene.
4. Conversation Flow: Consider the natural progression of dialogue and who should logically speak next.

Based on these factors, provide an insightful reason that explains why this specific speaker is chosen at this moment in the narrative.

System Prompt:
{system_text}

Conversation History:
{history}

Pending Speaker: {speaker_name}

Return ONLY a single sentence that provides a clear, contextual explanation for why this speaker is chosen now.
CRITICAL: Avoid using fixed patterns like "Role_NAME is chosen to speak next" or "Role_NAME speaks next".
Use varied and natural sentence structures-avoid repetitive phrasing.

You may express the reason in different ways, such as:
- Starting with the speaker's action, response, or reaction
- Beginning with the scene context or situation
- Leading with character dynamics or relationships
- Focusing on narrative flow or story progression
- Using descriptive or contextual openings

The reason should reflect your comprehensive analysis of the scene, characters, relationships, and current narrative atmosphere.
Vary your sentence structure and phrasing to make each explanation unique and contextually appropriate.
Each explanation should feel natural and context-driven, not formulaic."""


def build_pick_reason_prompt(system_text: str, history: str, speaker_name: str) -> str:
    return (
        _REASON_PROMPT.replace("{system_text}", system_text)
        .replace("{history}", history)
        .replace("{speaker_name}", speaker_name)
    )


def _fallback_reason(speaker: str) -> str:
    return f"The story's momentum passes to {speaker}, whose perspective is needed next."


def build_smset(record: SynthesisRecord, backend: Backend) -> ManagerSample:
    """Turn one record into a scene-manager training sample.

    One pick_speaker assistant message is inserted before every character
    turn, so the output is exactly the input length plus the character-message
    count. Reasons come from the backend; on failure a deterministic fallback
    sentence is used and the sample is flagged.
    """
    if not record.messages:
        raise FormatError("record has no messages")
    first = record.messages[0]
    if first.kind is not MessageKind.MANAGER or first.manager_action.tag is not ActionTag.INIT_SCENE:
        raise FormatError("record does not open with init_scene")

    user_names = {r.name for r in record.roles if r.is_user}
    system_text = build_manager_system(record.main_profile, record.other_characters)
    lines: list[ChatLine] = [
        ("system", system_text),
        ("user", f"scene_manager: {render_manager_content(first.manager_action)}"),
    ]
    flags: list[str] = []

    def history_text() -> str:
        return "\n".join(content for role, content in lines[1:])

    for message in record.messages[1:]:
        if message.kind is MessageKind.MANAGER:
            lines.append(("assistant", _action_json(message.manager_action)))
            continue
        speaker, _ = canonicalize_role_name(message.author)
        prompt = build_pick_reason_prompt(system_text, history_text(), speaker)
        try:
            raw = backend.complete(
                ChatRequest(system=prompt, temperature=DEFAULT_MANAGER_TEMPERATURE)
            )
            reason = raw.strip().splitlines()[0].strip() if raw.strip() else ""
        except BackendFailure:
            reason = ""
        if not reason:
            reason = _fallback_reason(speaker)
            flags.append(f"reason_fallback:{len(lines)}")
        pick = ManagerAction(tag=ActionTag.PICK_SPEAKER, speaker=speaker, reason=reason)
        lines.append(("assistant", _action_json(pick)))
        display = _display(message.author, user_names)
        lines.append(("user", f"{display}: {render_message(message.segments)}"))
    return ManagerSample(messages=tuple(lines), flags=tuple(flags))


def sample_to_jsonl_line(sample: ActorSample | ManagerSample) -> str:
    return json.dumps(sample.to_dict(), ensure_ascii=False, sort_keys=True)


def manager_sample_message_count(sample: ManagerSample) -> int:
    """Conversation length of a manager sample (the system wrapper excluded)."""
    return len(sample.messages) - 1


def parse_chat_action(content: str) -> Optional[ManagerAction]:
    """Decode an assistant action JSON line back into a ManagerAction."""
    try:
        payload = json.loads(content)
    except json.JSONDecodeError:
        return None
    if not isinstance(payload, dict) or "action" not in payload:
        return None
    try:
        tag = ActionTag(str(payload["action"]).lower())
        kwargs = {"reason": str(payload.get("reason", ""))}
        for name in ACTION_PAYLOAD_FIELDS[tag]:
            kwargs[name] = str(payload[name])
        return ManagerAction(tag=tag, **kwargs)
    except (KeyError, ValueError):
        return None
