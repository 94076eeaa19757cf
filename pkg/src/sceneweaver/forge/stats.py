"""Descriptive corpus statistics: message-count distributions and action mixes.

Standard deviations are population form throughout (documented choice; the
sample form is a one-line change in _std).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

from ..model import ActionTag, MessageKind, Trajectory, TurnMessage
from .extract import ExtractedPlot
from .samples import ManagerSample, parse_chat_action
from .synthesis import SynthesisRecord

ACTION_ORDER = tuple(tag.value for tag in ActionTag)


@dataclass(frozen=True)
class DistributionSummary:
    count: int
    mean: float
    median: float
    std: float
    minimum: int
    maximum: int


@dataclass(frozen=True)
class StatReport:
    """Counts plus the per-conversation message distribution and action mix."""

    conversations: int
    utterances: int
    roles: int
    plots: Optional[int]
    messages_per_conversation: DistributionSummary
    action_totals: dict[str, int]
    action_means: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        dist = self.messages_per_conversation
        return {
            "conversations": self.conversations,
            "utterances": self.utterances,
            "roles": self.roles,
            "plots": self.plots,
            "messages_per_conversation": {
                "mean": dist.mean,
                "median": dist.median,
                "std": dist.std,
                "min": dist.minimum,
                "max": dist.maximum,
            },
            "action_totals": dict(self.action_totals),
            "action_means": dict(self.action_means),
        }

    def to_text(self) -> str:
        dist = self.messages_per_conversation
        lines = [
            f"{'conversations':<28}{self.conversations}",
            f"{'utterances':<28}{self.utterances}",
            f"{'roles':<28}{self.roles}",
        ]
        if self.plots is not None:
            lines.append(f"{'plots':<28}{self.plots}")
        lines.extend(
            [
                f"{'messages/conv mean':<28}{_round2(dist.mean):.2f}",
                f"{'messages/conv median':<28}{_round2(dist.median):.2f}",
                f"{'messages/conv std':<28}{_round2(dist.std):.2f}",
                f"{'messages/conv min':<28}{dist.minimum}",
                f"{'messages/conv max':<28}{dist.maximum}",
            ]
        )
        for tag in ACTION_ORDER:
            total = self.action_totals.get(tag, 0)
            mean = self.action_means.get(tag, 0.0)
            lines.append(f"{tag + ' total':<28}{total}")
            lines.append(f"{tag + ' per conv':<28}{_round2(mean):.2f}")
        return "\n".join(lines)


def _round2(value: float) -> float:
    from decimal import ROUND_HALF_UP, Decimal

    return float(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _std(values: Sequence[float], mean: float) -> float:
    # Population form: divide by N.
    if not values:
        return 0.0
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def _median(values: Sequence[int]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return float(ordered[mid])
    return (ordered[mid - 1] + ordered[mid]) / 2.0


@dataclass
class _Conversation:
    message_count: int
    action_counts: dict[str, int]
    authors: set[str]


def _from_turn_messages(messages: Sequence[TurnMessage]) -> _Conversation:
    actions: dict[str, int] = {}
    authors: set[str] = set()
    for message in messages:
        if message.kind is MessageKind.MANAGER:
            tag = message.manager_action.tag.value
            actions[tag] = actions.get(tag, 0) + 1
        else:
            authors.add(message.author)
    return _Conversation(len(messages), actions, authors)


def _from_manager_sample(sample: ManagerSample) -> _Conversation:
    actions: dict[str, int] = {}
    authors: set[str] = set()
    count = 0
    for role, content in sample.messages:
        if role == "system":
            continue
        count += 1
        if role == "assistant":
            act = parse_chat_action(content)
            if act is not None:
                actions[act.tag.value] = actions.get(act.tag.value, 0) + 1
        elif content.startswith("scene_manager:"):
            if "init_scene" in content.split("|")[0]:
                actions["init_scene"] = actions.get("init_scene", 0) + 1
        else:
            authors.add(content.split(":", 1)[0].strip())
    return _Conversation(count, actions, authors)


def corpus_stats(items: Iterable[object]) -> StatReport:
    """Compute corpus statistics over records, trajectories, samples, or plots.

    Extracted plots contribute one conversation per extracted dialogue;
    everything else contributes one conversation per item.
    """
    conversations: list[_Conversation] = []
    roles: set[str] = set()
    plots = 0
    saw_plots = False

    for item in items:
        if isinstance(item, SynthesisRecord):
            conversations.append(_from_turn_messages(item.messages))
            roles.update(r.name for r in item.roles)
        elif isinstance(item, Trajectory):
            conversations.append(_from_turn_messages(item.messages))
            roles.update(r.name for r in item.roles_at_start)
        elif isinstance(item, ManagerSample):
            conversations.append(_from_manager_sample(item))
        elif isinstance(item, ExtractedPlot):
            saw_plots = True
            plots += 1
            roles.update(c.name for c in item.key_characters)
            for conversation in item.conversations:
                authors = {d.character for d in conversation.dialogues}
                roles.update(authors)
                conversations.append(
                    _Conversation(len(conversation.dialogues), {}, authors)
                )
        elif isinstance(item, (list, tuple)) and all(isinstance(m, TurnMessage) for m in item):
            conversations.append(_from_turn_messages(item))
        else:
            raise TypeError(f"unsupported corpus item type: {type(item).__name__}")

    for conversation in conversations:
        roles.update(conversation.authors)

    counts = [c.message_count for c in conversations]
    mean = sum(counts) / len(counts) if counts else 0.0
    summary = DistributionSummary(
        count=len(counts),
        mean=mean,
        median=_median(counts) if counts else 0.0,
        std=_std(counts, mean),
        minimum=min(counts) if counts else 0,
        maximum=max(counts) if counts else 0,
    )
    totals: dict[str, int] = {}
    for conversation in conversations:
        for tag, count in conversation.action_counts.items():
            totals[tag] = totals.get(tag, 0) + count
    means = {
        tag: (totals.get(tag, 0) / len(conversations) if conversations else 0.0)
        for tag in ACTION_ORDER
    }
    return StatReport(
        conversations=len(conversations),
        utterances=sum(counts),
        roles=len(roles),
        plots=plots if saw_plots else None,
        messages_per_conversation=summary,
        action_totals={tag: totals.get(tag, 0) for tag in ACTION_ORDER},
        action_means=means,
    )


def stats_to_json(report: StatReport) -> str:
    return json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)
