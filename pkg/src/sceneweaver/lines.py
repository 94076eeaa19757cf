"""The pipe-separated transcript form of manager actions.

Manager decisions appear in rendered histories and ingested records as
"scene_manager: action: init_scene | initial_scene: ..." lines. Rendering is
canonical (lowercase tags, reason omitted when empty); parsing tolerates the
variants seen in the wild: uppercase tags and "action=..." key separators.
"""

from __future__ import annotations

import re
from typing import Optional

from .errors import MissingPayload, NotAnAction
from .model import ACTION_PAYLOAD_FIELDS, ActionTag, ManagerAction

_FIELD_ORDER = (
    "initial_scene",
    "speaker",
    "new_scene",
    "new_role_name",
    "new_role_profile",
    "new_role_motivation",
)

_KNOWN_KEYS = ("action", "reason") + _FIELD_ORDER

_KEY_RE = re.compile(
    r"^\s*(" + "|".join(_KNOWN_KEYS) + r")\s*[:=]\s*(.*)$", re.IGNORECASE | re.DOTALL
)

_TAG_VALUES = {tag.value: tag for tag in ActionTag}


def render_manager_content(act: ManagerAction) -> str:
    """Canonical "action: tag | field: value" content for one action."""
    parts = [f"action: {act.tag.value}"]
    if act.reason:
        parts.append(f"reason: {act.reason}")
    for name in _FIELD_ORDER:
        value = getattr(act, name)
        if value is not None and name in ACTION_PAYLOAD_FIELDS[act.tag]:
            parts.append(f"{name}: {value}")
    return " | ".join(parts)


def parse_manager_content(content: str) -> ManagerAction:
    """Parse a pipe-separated action line back into a ManagerAction.

    Segments that do not open with a known key are treated as continuations of
    the previous value (payload text may itself contain pipes).

    Raises:
        NotAnAction: no action key present or the tag is unknown.
        MissingPayload: a tag-required field is absent.
    """
    fields: dict[str, str] = {}
    current: Optional[str] = None
    for part in content.split(" | "):
        match = _KEY_RE.match(part)
        if match:
            current = match.group(1).lower()
            fields[current] = match.group(2).strip()
        elif current is not None:
            fields[current] = f"{fields[current]} | {part}"
        # A leading keyless segment has nothing to attach to; skip it.

    tag_raw = fields.get("action")
    if tag_raw is None:
        raise NotAnAction(f"no action key in content: {content[:80]!r}")
    tag = _TAG_VALUES.get(tag_raw.strip().lower())
    if tag is None:
        raise NotAnAction(f"unknown action tag {tag_raw!r}")

    kwargs: dict[str, str] = {"reason": fields.get("reason", "")}
    for name in ACTION_PAYLOAD_FIELDS[tag]:
        if name not in fields:
            raise MissingPayload(f"{tag.value} line lacks field {name}")
        kwargs[name] = fields[name]
    try:
        return ManagerAction(tag=tag, **kwargs)
    except ValueError as exc:
        raise MissingPayload(str(exc)) from exc
