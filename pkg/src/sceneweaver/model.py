"""Core domain types and their serialization-stable on-disk forms.

Everything here is an immutable value object; successor states are built by
construction, never by mutation, so instances are safe to share across threads.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, replace
from typing import IO, Any, Iterable, Optional

from .errors import ContractViolation, InvalidRoleName, ParseError

SCHEMA_VERSION = 1

MANAGER_AUTHOR = "scene_manager"

_USER_SUFFIX_RE = re.compile(r"\s*\(user\)\s*$")


def canonicalize_role_name(raw: str) -> tuple[str, bool]:
    """Trim a raw role name and strip the optional "(user)" suffix.

    Returns the canonical name and whether the suffix was present. Idempotent:
    canonical names never end with the suffix.

    Raises:
        InvalidRoleName: if nothing remains after trimming.
    """
    stripped = raw.strip()
    is_user = False
    match = _USER_SUFFIX_RE.search(stripped)
    if match:
        is_user = True
        stripped = stripped[: match.start()].strip()
    if not stripped:
        raise InvalidRoleName(f"role name {raw!r} is empty after normalization")
    return stripped, is_user


def display_role_name(name: str, is_user: bool) -> str:
    """Render a canonical name for prompts, restoring the user marker."""
    return f"{name} (user)" if is_user else name


class SegmentKind(enum.Enum):
    THOUGHT = "thought"
    ACTION = "action"
    ENVIRONMENT = "environment"
    SPEECH = "speech"


# Characters that may not appear inside a segment's own text. Non-speech kinds
# exclude both delimiters of their kind; speech excludes every opener (an
# opener inside speech would start a new span on re-parse).
_FORBIDDEN_CHARS = {
    SegmentKind.THOUGHT: "[]",
    SegmentKind.ACTION: "()",
    SegmentKind.ENVIRONMENT: "<>",
    SegmentKind.SPEECH: "[(<",
}


@dataclass(frozen=True)
class Segment:
    """One channel-tagged run of a character message."""

    kind: SegmentKind
    text: str

    def __post_init__(self):
        forbidden = _FORBIDDEN_CHARS[self.kind]
        for ch in forbidden:
            if ch in self.text:
                raise ValueError(f"{self.kind.value} text may not contain {ch!r}: {self.text!r}")
        if self.kind is SegmentKind.SPEECH:
            if not self.text.strip():
                raise ValueError("speech segments must be non-empty; omit them instead")
            if self.text != self.text.strip():
                raise ValueError("speech text must not carry leading/trailing whitespace")


def thought(text: str) -> Segment:
    return Segment(SegmentKind.THOUGHT, text)


def action(text: str) -> Segment:
    return Segment(SegmentKind.ACTION, text)


def environment(text: str) -> Segment:
    return Segment(SegmentKind.ENVIRONMENT, text)


def speech(text: str) -> Segment:
    return Segment(SegmentKind.SPEECH, text)


class ActionTag(enum.Enum):
    INIT_SCENE = "init_scene"
    PICK_SPEAKER = "pick_speaker"
    SWITCH_SCENE = "switch_scene"
    ADD_ROLE = "add_role"
    END = "end"


# Payload fields required by each tag; everything else must stay unset.
ACTION_PAYLOAD_FIELDS: dict[ActionTag, tuple[str, ...]] = {
    ActionTag.INIT_SCENE: ("initial_scene",),
    ActionTag.PICK_SPEAKER: ("speaker",),
    ActionTag.SWITCH_SCENE: ("new_scene",),
    ActionTag.ADD_ROLE: ("new_role_name", "new_role_profile", "new_role_motivation"),
    ActionTag.END: (),
}

_ALL_PAYLOAD_FIELDS = (
    "initial_scene",
    "speaker",
    "new_scene",
    "new_role_name",
    "new_role_profile",
    "new_role_motivation",
)


@dataclass(frozen=True)
class ManagerAction:
    """One orchestration decision with its rationale.

    The reason is kept as empty text when a source omits it (seed files leave
    it off init_scene); payload fields are present exactly for their tag.
    """

    tag: ActionTag
    reason: str = ""
    initial_scene: Optional[str] = None
    speaker: Optional[str] = None
    new_scene: Optional[str] = None
    new_role_name: Optional[str] = None
    new_role_profile: Optional[str] = None
    new_role_motivation: Optional[str] = None

    # Fields that must be non-blank when their tag requires them; the role
    # profile/motivation blobs may legitimately be empty strings.
    _NON_BLANK = ("initial_scene", "speaker", "new_scene", "new_role_name")

    def __post_init__(self):
        required = ACTION_PAYLOAD_FIELDS[self.tag]
        for name in _ALL_PAYLOAD_FIELDS:
            value = getattr(self, name)
            if name in required:
                if value is None:
                    raise ValueError(f"{self.tag.value} requires field {name}")
                if name in self._NON_BLANK and not value.strip():
                    raise ValueError(f"{self.tag.value} field {name} must be non-blank")
            elif value is not None:
                raise ValueError(f"{self.tag.value} does not take field {name}")


@dataclass(frozen=True)
class RoleProfile:
    """Character sheet: seven descriptive dimensions plus name and motivation.

    ``short_description`` is optional condensed metadata; dynamically added
    roles carry their free-text profile there and leave the dimensions empty.
    The canonical ``name`` never carries the "(user)" marker; ``is_user``
    records it instead.
    """

    name: str
    identity_appearance: str = ""
    personality_psychology: str = ""
    speaking_style: str = ""
    abilities_interests_achievements: str = ""
    social_historical_context: str = ""
    personal_history_arc: str = ""
    relationships: str = ""
    motivation: Optional[str] = None
    is_user: bool = False
    short_description: str = ""

    def __post_init__(self):
        if not self.name.strip():
            raise InvalidRoleName("role name must be non-empty")
        if self.name != self.name.strip():
            object.__setattr__(self, "name", self.name.strip())
        if _USER_SUFFIX_RE.search(self.name):
            raise InvalidRoleName(
                f"store user roles with is_user=True, not a name suffix: {self.name!r}"
            )

    @property
    def display_name(self) -> str:
        return display_role_name(self.name, self.is_user)

    DIMENSION_FIELDS = (
        "identity_appearance",
        "personality_psychology",
        "speaking_style",
        "abilities_interests_achievements",
        "social_historical_context",
        "personal_history_arc",
        "relationships",
    )


class MessageKind(enum.Enum):
    CHARACTER = "character"
    MANAGER = "manager"


@dataclass(frozen=True)
class TurnMessage:
    """One transcript entry, either an in-character turn or a manager action."""

    author: str
    kind: MessageKind
    step_index: int
    segments: Optional[tuple[Segment, ...]] = None
    manager_action: Optional[ManagerAction] = None

    def __post_init__(self):
        if self.step_index < 0:
            raise ValueError("step_index must be non-negative")
        if self.kind is MessageKind.CHARACTER:
            if self.segments is None or self.manager_action is not None:
                raise ValueError("character messages carry segments only")
        else:
            if self.manager_action is None or self.segments is not None:
                raise ValueError("manager messages carry an action only")
            if self.author != MANAGER_AUTHOR:
                raise ValueError(f"manager messages are authored by {MANAGER_AUTHOR!r}")


def character_message(author: str, segments: Iterable[Segment], step_index: int) -> TurnMessage:
    return TurnMessage(
        author=author,
        kind=MessageKind.CHARACTER,
        step_index=step_index,
        segments=tuple(segments),
    )


def manager_message(action: ManagerAction, step_index: int) -> TurnMessage:
    return TurnMessage(
        author=MANAGER_AUTHOR,
        kind=MessageKind.MANAGER,
        step_index=step_index,
        manager_action=action,
    )


@dataclass(frozen=True)
class InteractionState:
    """Aggregate episode state threaded through the orchestration loop.

    ``pending_speaker`` is the marker set by an applied pick_speaker action and
    consumed by the next character message. The scene pointer is derived from
    history rather than stored.
    """

    roles: tuple[RoleProfile, ...]
    history: tuple[TurnMessage, ...] = ()
    step: int = 0
    dialogue_turns: int = 0
    last_action_tag: Optional[ActionTag] = None
    last_speaker: Optional[str] = None
    pending_speaker: Optional[str] = None

    def __post_init__(self):
        names = [role.name for role in self.roles]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate role names in role set: {names}")
        actual_turns = sum(1 for m in self.history if m.kind is MessageKind.CHARACTER)
        if actual_turns != self.dialogue_turns:
            raise ValueError(
                f"dialogue_turns={self.dialogue_turns} but history holds {actual_turns}"
            )

    def validate(self) -> None:
        """Check the full invariants, including ones replay paths may relax."""
        if self.history:
            first = self.history[0]
            if first.kind is not MessageKind.MANAGER or first.manager_action.tag is not ActionTag.INIT_SCENE:
                raise ValueError("a non-empty history must open with init_scene")

    @property
    def ended(self) -> bool:
        return self.last_action_tag is ActionTag.END

    @property
    def role_names(self) -> tuple[str, ...]:
        return tuple(role.name for role in self.roles)

    def find_role(self, name: str) -> Optional[RoleProfile]:
        for role in self.roles:
            if role.name == name:
                return role
        return None

    @property
    def user_role(self) -> Optional[RoleProfile]:
        for role in self.roles:
            if role.is_user:
                return role
        return None

    @property
    def current_scene(self) -> Optional[str]:
        for message in reversed(self.history):
            if message.kind is MessageKind.MANAGER:
                act = message.manager_action
                if act.tag is ActionTag.SWITCH_SCENE:
                    return act.new_scene
                if act.tag is ActionTag.INIT_SCENE:
                    return act.initial_scene
        return None

    def with_message(self, message: TurnMessage, **changes: Any) -> "InteractionState":
        return replace(self, history=self.history + (message,), **changes)


def apply_character_message(
    state: InteractionState, author: str, segments: Iterable[Segment]
) -> InteractionState:
    """Append the turn produced by the role a pick_speaker action designated."""
    if state.ended:
        raise ContractViolation("episode already ended")
    if state.pending_speaker is None:
        raise ContractViolation("no pick_speaker is pending")
    if author != state.pending_speaker:
        raise ContractViolation(
            f"pending speaker is {state.pending_speaker!r}, got message by {author!r}"
        )
    step = state.step + 1
    message = character_message(author, segments, step)
    return state.with_message(
        message,
        step=step,
        dialogue_turns=state.dialogue_turns + 1,
        last_speaker=author,
        pending_speaker=None,
    )


class Termination(enum.Enum):
    MANAGER_END = "manager_end"
    HORIZON_REACHED = "horizon_reached"
    BACKEND_FAILURE = "backend_failure"


@dataclass(frozen=True)
class Trajectory:
    """A finished episode: seed metadata, ordered messages, termination cause."""

    seed_id: str
    topic: str
    roles_at_start: tuple[RoleProfile, ...]
    messages: tuple[TurnMessage, ...]
    termination: Termination
    horizon: int

    def __post_init__(self):
        turns = self.dialogue_turn_count
        if self.termination is Termination.HORIZON_REACHED and turns != self.horizon:
            raise ValueError(
                f"horizon termination requires exactly {self.horizon} character turns, got {turns}"
            )
        if self.termination is Termination.MANAGER_END:
            last_manager = next(
                (m for m in reversed(self.messages) if m.kind is MessageKind.MANAGER), None
            )
            if last_manager is None or last_manager.manager_action.tag is not ActionTag.END:
                raise ValueError("manager_end termination requires a final end action")

    @property
    def dialogue_turn_count(self) -> int:
        return sum(1 for m in self.messages if m.kind is MessageKind.CHARACTER)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def role_profile_to_dict(role: RoleProfile) -> dict[str, Any]:
    return {
        "name": role.name,
        "identity_appearance": role.identity_appearance,
        "personality_psychology": role.personality_psychology,
        "speaking_style": role.speaking_style,
        "abilities_interests_achievements": role.abilities_interests_achievements,
        "social_historical_context": role.social_historical_context,
        "personal_history_arc": role.personal_history_arc,
        "relationships": role.relationships,
        "motivation": role.motivation,
        "is_user": role.is_user,
        "short_description": role.short_description,
    }


def role_profile_from_dict(data: dict[str, Any]) -> RoleProfile:
    return RoleProfile(
        name=data["name"],
        identity_appearance=data.get("identity_appearance", ""),
        personality_psychology=data.get("personality_psychology", ""),
        speaking_style=data.get("speaking_style", ""),
        abilities_interests_achievements=data.get("abilities_interests_achievements", ""),
        social_historical_context=data.get("social_historical_context", ""),
        personal_history_arc=data.get("personal_history_arc", ""),
        relationships=data.get("relationships", ""),
        motivation=data.get("motivation"),
        is_user=bool(data.get("is_user", False)),
        short_description=data.get("short_description", ""),
    )


def segment_to_dict(segment: Segment) -> dict[str, Any]:
    return {"kind": segment.kind.value, "text": segment.text}


def segment_from_dict(data: dict[str, Any]) -> Segment:
    return Segment(SegmentKind(data["kind"]), data["text"])


def manager_action_to_dict(act: ManagerAction) -> dict[str, Any]:
    payload: dict[str, Any] = {"tag": act.tag.value, "reason": act.reason}
    for name in ACTION_PAYLOAD_FIELDS[act.tag]:
        payload[name] = getattr(act, name)
    return payload


def manager_action_from_dict(data: dict[str, Any]) -> ManagerAction:
    tag = ActionTag(data["tag"])
    kwargs: dict[str, Any] = {"reason": data.get("reason", "")}
    for name in ACTION_PAYLOAD_FIELDS[tag]:
        kwargs[name] = data[name]
    return ManagerAction(tag=tag, **kwargs)


def turn_message_to_dict(message: TurnMessage) -> dict[str, Any]:
    record: dict[str, Any] = {
        "record": "message",
        "step": message.step_index,
        "kind": message.kind.value,
        "author": message.author,
    }
    if message.kind is MessageKind.CHARACTER:
        record["segments"] = [segment_to_dict(s) for s in message.segments]
    else:
        record["action"] = manager_action_to_dict(message.manager_action)
    return record


def turn_message_from_dict(data: dict[str, Any]) -> TurnMessage:
    kind = MessageKind(data["kind"])
    if kind is MessageKind.CHARACTER:
        return character_message(
            data["author"],
            [segment_from_dict(s) for s in data["segments"]],
            data["step"],
        )
    return manager_message(manager_action_from_dict(data["action"]), data["step"])


def _dump(record: dict[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True)


def write_trajectory(trajectory: Trajectory, stream: IO[str]) -> None:
    """Write one header line plus one line per message."""
    header = {
        "record": "header",
        "schema_version": SCHEMA_VERSION,
        "seed_id": trajectory.seed_id,
        "topic": trajectory.topic,
        "horizon": trajectory.horizon,
        "termination": trajectory.termination.value,
        "roles_at_start": [role_profile_to_dict(r) for r in trajectory.roles_at_start],
    }
    stream.write(_dump(header) + "\n")
    for message in trajectory.messages:
        stream.write(_dump(turn_message_to_dict(message)) + "\n")


def read_trajectory(stream: IO[str]) -> Trajectory:
    """Inverse of write_trajectory; raises ParseError with the bad line number."""
    header: Optional[dict[str, Any]] = None
    messages: list[TurnMessage] = []
    line_no = 0
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid record: {exc}", line=line_no) from exc
        try:
            if record.get("record") == "header":
                if header is not None:
                    raise ParseError("duplicate header record", line=line_no)
                if record.get("schema_version") != SCHEMA_VERSION:
                    raise ParseError(
                        f"unsupported schema_version {record.get('schema_version')}", line=line_no
                    )
                header = record
            elif record.get("record") == "message":
                messages.append(turn_message_from_dict(record))
            else:
                raise ParseError(f"unknown record type {record.get('record')!r}", line=line_no)
        except ParseError:
            raise
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"malformed record: {exc}", line=line_no) from exc
    if header is None:
        raise ParseError("missing header record", line=line_no or 1)
    try:
        return Trajectory(
            seed_id=header["seed_id"],
            topic=header["topic"],
            roles_at_start=tuple(role_profile_from_dict(r) for r in header["roles_at_start"]),
            messages=tuple(messages),
            termination=Termination(header["termination"]),
            horizon=header["horizon"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"inconsistent trajectory: {exc}", line=1) from exc


def save_trajectory(trajectory: Trajectory, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        write_trajectory(trajectory, handle)


def load_trajectory(path: str) -> Trajectory:
    with open(path, "r", encoding="utf-8") as handle:
        return read_trajectory(handle)
