"""Adaptive multi-character role-play orchestration toolkit.

Subsystems: the four-channel message grammar (message), the scene-manager
action protocol (protocol), prompt assembly (prompts), chat backends
(gateway), the episode simulator (simulation), dataset pipelines (forge),
judge-based evaluation (evaluation), and the live session service (service).
"""

from .model import (
    ActionTag,
    InteractionState,
    ManagerAction,
    MessageKind,
    RoleProfile,
    Segment,
    SegmentKind,
    Termination,
    Trajectory,
    TurnMessage,
    canonicalize_role_name,
)

__all__ = [
    "ActionTag",
    "InteractionState",
    "ManagerAction",
    "MessageKind",
    "RoleProfile",
    "Segment",
    "SegmentKind",
    "Termination",
    "Trajectory",
    "TurnMessage",
    "canonicalize_role_name",
]

__version__ = "0.1.0"
