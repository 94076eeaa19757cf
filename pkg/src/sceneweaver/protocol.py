"""Scene-manager action parsing, discipline validation, and state transitions.

validate_action returns verdicts (never raises); apply_action raises on
contract breaches. audit_trajectory replays a finished episode through the
same rule set and adds two statistical turn-balance flags.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any, Optional

from .errors import (
    ContractViolation,
    InvalidRoleName,
    MissingPayload,
    NotAnAction,
    UnknownActionTag,
)
from .jsontools import first_json_object
from .model import (
    ACTION_PAYLOAD_FIELDS,
    ActionTag,
    InteractionState,
    ManagerAction,
    MessageKind,
    RoleProfile,
    Trajectory,
    canonicalize_role_name,
    manager_message,
)

# A non-user role may hold the floor for at most this many consecutive
# character turns before the user counts as sidelined.
USER_SIDELINE_LIMIT = 4
# Monopoly heuristic: within any window of this many consecutive character
# turns, one role authoring strictly more than half of them is flagged.
MONOPOLY_WINDOW = 8


class Mode(enum.Enum):
    BASIC = "basic"
    ENHANCE = "enhance"


class ViolationCode(enum.Enum):
    UNKNOWN_SPEAKER = "unknown_speaker"
    CONSECUTIVE_SAME_SPEAKER = "consecutive_same_speaker"
    CONSECUTIVE_SWITCH_SCENE = "consecutive_switch_scene"
    DUPLICATE_ROLE_NAME = "duplicate_role_name"
    MISSING_PAYLOAD = "missing_payload"
    FIRST_ACTION_NOT_INIT = "first_action_not_init"
    ACTION_AFTER_END = "action_after_end"
    USER_SIDELINED = "user_sidelined"
    ROLE_MONOPOLY = "role_monopoly"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    message: str
    step: Optional[int] = None


@dataclass(frozen=True)
class ValidationVerdict:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> tuple[ViolationCode, ...]:
        return tuple(v.code for v in self.violations)


_TAG_VALUES = {tag.value: tag for tag in ActionTag}


def parse_action(raw: str) -> ManagerAction:
    """Extract the first action object from raw model output.

    Tolerates surrounding prose and code fences; uses the first JSON object
    carrying an "action" field. The speaker payload is canonicalized.

    Raises:
        NotAnAction: no action object found.
        UnknownActionTag: the tag is outside the action space.
        MissingPayload: a tag-required field is absent or blank.
    """
    obj = first_json_object(raw, require_key="action")
    if obj is None:
        raise NotAnAction(f"no action object in: {raw[:120]!r}")

    tag_raw = str(obj["action"]).strip().lower()
    tag = _TAG_VALUES.get(tag_raw)
    if tag is None:
        raise UnknownActionTag(f"unknown action tag {obj['action']!r}")

    kwargs: dict[str, Any] = {"reason": str(obj.get("reason", "") or "")}
    for name in ACTION_PAYLOAD_FIELDS[tag]:
        value = obj.get(name)
        if value is None:
            raise MissingPayload(f"{tag.value} requires field {name}")
        kwargs[name] = str(value)
    if tag is ActionTag.PICK_SPEAKER:
        try:
            kwargs["speaker"], _ = canonicalize_role_name(kwargs["speaker"])
        except InvalidRoleName as exc:
            raise MissingPayload(f"pick_speaker has a blank speaker: {exc}") from exc
    try:
        return ManagerAction(tag=tag, **kwargs)
    except ValueError as exc:
        raise MissingPayload(str(exc)) from exc


@dataclass(frozen=True)
class _ReplayState:
    """Minimal rule-relevant view of an episode used by validation and audit."""

    role_names: tuple[str, ...]
    history_empty: bool
    last_speaker: Optional[str]
    last_action_tag: Optional[ActionTag]
    ended: bool


def _check_rules(view: _ReplayState, act: ManagerAction, mode: Mode, step: Optional[int]) -> list[Violation]:
    found: list[Violation] = []

    def flag(code: ViolationCode, text: str) -> None:
        found.append(Violation(code, text, step=step))

    if view.history_empty and act.tag is not ActionTag.INIT_SCENE:
        flag(ViolationCode.FIRST_ACTION_NOT_INIT, f"episode must open with init_scene, got {act.tag.value}")
    if not view.history_empty and act.tag is ActionTag.INIT_SCENE:
        flag(ViolationCode.FIRST_ACTION_NOT_INIT, "init_scene is only legal as the opening action")
    if act.tag is ActionTag.PICK_SPEAKER:
        if act.speaker not in view.role_names:
            flag(ViolationCode.UNKNOWN_SPEAKER, f"{act.speaker!r} is not in the role set")
        if view.last_speaker is not None and act.speaker == view.last_speaker:
            flag(ViolationCode.CONSECUTIVE_SAME_SPEAKER, f"{act.speaker!r} spoke the previous turn")
    if (
        mode is Mode.ENHANCE
        and act.tag is ActionTag.SWITCH_SCENE
        and view.last_action_tag is ActionTag.SWITCH_SCENE
    ):
        flag(ViolationCode.CONSECUTIVE_SWITCH_SCENE, "switch_scene twice in a row")
    if act.tag is ActionTag.ADD_ROLE:
        try:
            name, _ = canonicalize_role_name(act.new_role_name)
        except InvalidRoleName:
            name = act.new_role_name
        if name in view.role_names:
            flag(ViolationCode.DUPLICATE_ROLE_NAME, f"{name!r} is already in the role set")
    if view.ended:
        flag(ViolationCode.ACTION_AFTER_END, f"{act.tag.value} issued after end")
    return found


def _view_of(state: InteractionState) -> _ReplayState:
    return _ReplayState(
        role_names=state.role_names,
        history_empty=not state.history,
        last_speaker=state.last_speaker,
        last_action_tag=state.last_action_tag,
        ended=state.ended,
    )


def validate_action(state: InteractionState, act: ManagerAction, mode: Mode) -> ValidationVerdict:
    """Check an action against the discipline rules; verdicts, not exceptions."""
    return ValidationVerdict(tuple(_check_rules(_view_of(state), act, mode, step=state.step + 1)))


def role_from_add_action(act: ManagerAction) -> RoleProfile:
    """Instantiate the profile a validated add_role action describes."""
    name, _ = canonicalize_role_name(act.new_role_name)
    return RoleProfile(
        name=name,
        short_description=act.new_role_profile or "",
        motivation=act.new_role_motivation or None,
        is_user=False,
    )


def apply_action(state: InteractionState, act: ManagerAction, *, validated: bool = False) -> InteractionState:
    """Produce the successor state of a validated action.

    pick_speaker only sets the pending-speaker marker; the picked role's
    message is the artifact that enters history (see apply_character_message).

    Raises:
        ContractViolation: when called without validation, after end, or on an
            out-of-order init_scene.
    """
    if not validated:
        raise ContractViolation("apply_action requires a prior ok verdict")
    if state.ended:
        raise ContractViolation("episode already ended")
    if state.history and act.tag is ActionTag.INIT_SCENE:
        raise ContractViolation("init_scene after the episode began")
    if not state.history and act.tag is not ActionTag.INIT_SCENE:
        raise ContractViolation("the first action must be init_scene")

    step = state.step + 1
    if act.tag is ActionTag.PICK_SPEAKER:
        return replace(
            state,
            step=step,
            last_action_tag=ActionTag.PICK_SPEAKER,
            pending_speaker=act.speaker,
        )
    message = manager_message(act, step)
    if act.tag is ActionTag.ADD_ROLE:
        return state.with_message(
            message,
            step=step,
            roles=state.roles + (role_from_add_action(act),),
            last_action_tag=ActionTag.ADD_ROLE,
        )
    return state.with_message(message, step=step, last_action_tag=act.tag)


def audit_trajectory(trajectory: Trajectory, mode: Mode) -> ValidationVerdict:
    """Replay a trajectory through the discipline rules and accumulate findings.

    Character messages not announced by a persisted pick_speaker are treated
    as implied picks of their author. Two statistical flags follow the replay:
    the user sidelined for more than USER_SIDELINE_LIMIT consecutive character
    turns (skipped when the cast has no user role), and any role authoring
    more than half of a MONOPOLY_WINDOW-long window of character turns.
    """
    violations: list[Violation] = []
    role_names = list(r.name for r in trajectory.roles_at_start)
    user_names = {r.name for r in trajectory.roles_at_start if r.is_user}
    history_empty = True
    last_speaker: Optional[str] = None
    last_tag: Optional[ActionTag] = None
    ended = False
    pending_pick: Optional[str] = None
    character_turns: list[tuple[str, int]] = []

    for msg in trajectory.messages:
        if msg.kind is MessageKind.MANAGER:
            act = msg.manager_action
            view = _ReplayState(tuple(role_names), history_empty, last_speaker, last_tag, ended)
            violations.extend(_check_rules(view, act, mode, step=msg.step_index))
            if act.tag is ActionTag.PICK_SPEAKER:
                pending_pick = act.speaker
            else:
                history_empty = False
                pending_pick = None
                if act.tag is ActionTag.ADD_ROLE:
                    try:
                        name, _ = canonicalize_role_name(act.new_role_name)
                    except InvalidRoleName:
                        name = act.new_role_name
                    if name not in role_names:
                        role_names.append(name)
                elif act.tag is ActionTag.END:
                    ended = True
            last_tag = act.tag
        else:
            if msg.author != pending_pick:
                implied = ManagerAction(tag=ActionTag.PICK_SPEAKER, speaker=msg.author)
                view = _ReplayState(tuple(role_names), history_empty, last_speaker, last_tag, ended)
                violations.extend(_check_rules(view, implied, mode, step=msg.step_index))
            pending_pick = None
            history_empty = False
            last_speaker = msg.author
            last_tag = ActionTag.PICK_SPEAKER
            character_turns.append((msg.author, msg.step_index))

    violations.extend(_sideline_flags(character_turns, user_names))
    violations.extend(_monopoly_flags(character_turns))
    return ValidationVerdict(tuple(violations))


def _sideline_flags(turns: list[tuple[str, int]], user_names: set[str]) -> list[Violation]:
    if not user_names:
        return []
    flags: list[Violation] = []
    run: list[tuple[str, int]] = []
    for author, step in turns + [(next(iter(user_names)), -1)]:
        if author in user_names:
            if len(run) > USER_SIDELINE_LIMIT:
                flags.append(
                    Violation(
                        ViolationCode.USER_SIDELINED,
                        f"user silent for {len(run)} consecutive character turns",
                        step=run[USER_SIDELINE_LIMIT][1],
                    )
                )
            run = []
        else:
            run.append((author, step))
    return flags


def _monopoly_flags(turns: list[tuple[str, int]]) -> list[Violation]:
    threshold = MONOPOLY_WINDOW // 2 + 1
    flagged: dict[str, int] = {}
    for end in range(MONOPOLY_WINDOW, len(turns) + 1):
        window = turns[end - MONOPOLY_WINDOW : end]
        counts: dict[str, int] = {}
        for author, _ in window:
            counts[author] = counts.get(author, 0) + 1
        for author, count in counts.items():
            if count >= threshold and author not in flagged:
                flagged[author] = window[-1][1]
    return [
        Violation(
            ViolationCode.ROLE_MONOPOLY,
            f"{author!r} dominates a window of {MONOPOLY_WINDOW} character turns",
            step=step,
        )
        for author, step in flagged.items()
    ]
