"""Trajectory judging, score aggregation, ranking, and arena win-rates.

Aggregation uses population standard deviation over all reports and renders
cells as "M.MM±S.SS" with half-up rounding. Arena cells are exact rationals so
complementarity identities hold exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence

from .errors import AggregationError, JudgeError
from .gateway import Backend, ChatRequest, DEFAULT_JUDGE_TEMPERATURE
from .jsontools import first_json_object
from .model import Trajectory
from .prompts import build_actor_judge_prompt, build_manager_judge_prompt

JUDGE_RETRIES = 2

ACTOR_METRIC_GROUPS: tuple[tuple[str, tuple[str, ...]], ...] = (
    (
        "character_consistency",
        (
            "internal_coherence",
            "speaking_style_fidelity",
            "language_fluency_humanlikeness",
            "identity_profile_fidelity",
            "motivation_value_stability",
        ),
    ),
    ("environmental_grounding", ("environmental_awareness", "environmental_utilization")),
    ("interpersonal_interaction", ("contextual_responsiveness", "relationship_awareness")),
    ("narrative_progression", ("narrative_attractiveness", "stability")),
)

ACTOR_METRICS: tuple[str, ...] = tuple(
    metric for _, metrics in ACTOR_METRIC_GROUPS for metric in metrics
) + ("instruction_compliance",)

MANAGER_METRICS: tuple[str, ...] = (
    "scene_understanding",
    "turn_speaker_discipline",
    "role_introduction_judgment",
    "overall_assessment",
)


@dataclass(frozen=True)
class MetricScore:
    score: float
    reasoning: str = ""

    def __post_init__(self):
        if not 0.0 <= self.score <= 10.0:
            raise ValueError(f"score {self.score} outside [0, 10]")


def _freeze_scores(scores: Mapping[str, MetricScore], required: Sequence[str]) -> dict[str, MetricScore]:
    missing = [m for m in required if m not in scores]
    if missing:
        raise ValueError(f"missing metrics: {missing}")
    extra = [m for m in scores if m not in required]
    if extra:
        raise ValueError(f"unknown metrics: {extra}")
    return {m: scores[m] for m in required}


@dataclass(frozen=True)
class ActorScoreReport:
    seed_id: str
    scores: Mapping[str, MetricScore]

    def __post_init__(self):
        object.__setattr__(self, "scores", _freeze_scores(self.scores, ACTOR_METRICS))


@dataclass(frozen=True)
class ManagerScoreReport:
    seed_id: str
    scores: Mapping[str, MetricScore]

    def __post_init__(self):
        object.__setattr__(self, "scores", _freeze_scores(self.scores, MANAGER_METRICS))


def _metric_entry(payload: Any, where: str) -> MetricScore:
    if not isinstance(payload, Mapping) or "score" not in payload:
        raise ValueError(f"{where}: expected an object with a score field")
    score = payload["score"]
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise ValueError(f"{where}: score must be a number")
    return MetricScore(score=float(score), reasoning=str(payload.get("reasoning", "")))


def parse_actor_report(payload: Mapping[str, Any], seed_id: str = "") -> ActorScoreReport:
    """Decode the nested judge object into the flat 12-metric report.

    Raises ValueError on any missing sub-metric or out-of-range score.
    """
    scores: dict[str, MetricScore] = {}
    for group, metrics in ACTOR_METRIC_GROUPS:
        block = payload.get(group)
        if not isinstance(block, Mapping):
            raise ValueError(f"missing group {group}")
        for metric in metrics:
            if metric not in block:
                raise ValueError(f"missing metric {group}.{metric}")
            scores[metric] = _metric_entry(block[metric], f"{group}.{metric}")
    if "instruction_compliance" not in payload:
        raise ValueError("missing metric instruction_compliance")
    scores["instruction_compliance"] = _metric_entry(
        payload["instruction_compliance"], "instruction_compliance"
    )
    return ActorScoreReport(seed_id=seed_id, scores=scores)


def parse_manager_report(payload: Mapping[str, Any], seed_id: str = "") -> ManagerScoreReport:
    scores: dict[str, MetricScore] = {}
    for metric in MANAGER_METRICS:
        if metric not in payload:
            raise ValueError(f"missing metric {metric}")
        scores[metric] = _metric_entry(payload[metric], metric)
    return ManagerScoreReport(seed_id=seed_id, scores=scores)


def _run_judge(prompt: str, backend: Backend, seed_id: str, parse) -> Any:
    request = ChatRequest(system=prompt, temperature=DEFAULT_JUDGE_TEMPERATURE)
    last_cause = "no attempt"
    for _ in range(JUDGE_RETRIES + 1):
        raw = backend.complete(request)
        payload = first_json_object(raw)
        if payload is None:
            last_cause = "no JSON object in judge output"
            continue
        try:
            return parse(payload, seed_id)
        except ValueError as exc:
            last_cause = str(exc)
    raise JudgeError(seed_id, last_cause)


def _average_repeats(reports: list, seed_id: str, cls):
    if len(reports) == 1:
        return reports[0]
    metrics = list(reports[0].scores.keys())
    averaged = {
        metric: MetricScore(
            score=sum(r.scores[metric].score for r in reports) / len(reports),
            reasoning=reports[0].scores[metric].reasoning,
        )
        for metric in metrics
    }
    return cls(seed_id=seed_id, scores=averaged)


def judge_actor(
    trajectory: Trajectory, judge_backend: Backend, repeats: int = 1
) -> ActorScoreReport:
    """Score one trajectory with the actor rubric; retries schema failures.

    With repeats > 1 the trajectory is judged that many times and per-metric
    scores are averaged (a hedge against judge nondeterminism).
    """
    prompt = build_actor_judge_prompt(trajectory)
    reports = [
        _run_judge(prompt, judge_backend, trajectory.seed_id, parse_actor_report)
        for _ in range(max(repeats, 1))
    ]
    return _average_repeats(reports, trajectory.seed_id, ActorScoreReport)


def judge_manager(
    trajectory: Trajectory, judge_backend: Backend, repeats: int = 1
) -> ManagerScoreReport:
    """Score one trajectory with the orchestration rubric."""
    prompt = build_manager_judge_prompt(trajectory)
    reports = [
        _run_judge(prompt, judge_backend, trajectory.seed_id, parse_manager_report)
        for _ in range(max(repeats, 1))
    ]
    return _average_repeats(reports, trajectory.seed_id, ManagerScoreReport)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def round_half_up(value: float, places: int = 2) -> Decimal:
    return Decimal(repr(value)).quantize(Decimal(10) ** -places, rounding=ROUND_HALF_UP)


def format_cell(mean: float, std: float) -> str:
    return f"{round_half_up(mean):.2f}±{round_half_up(std):.2f}"


@dataclass(frozen=True)
class MetricAggregate:
    mean: float
    std: float

    @property
    def cell(self) -> str:
        return format_cell(self.mean, self.std)


@dataclass(frozen=True)
class AggregateReport:
    metrics: Mapping[str, MetricAggregate]
    overall: float
    report_count: int

    def cell(self, metric: str) -> str:
        return self.metrics[metric].cell


def aggregate(reports: Sequence[ActorScoreReport] | Sequence[ManagerScoreReport]) -> AggregateReport:
    """Per-metric mean and population std, plus the mean-of-means overall.

    Raises:
        AggregationError: on an empty report list.
    """
    if not reports:
        raise AggregationError("cannot aggregate zero reports")
    metric_names = list(reports[0].scores.keys())
    aggregates: dict[str, MetricAggregate] = {}
    for metric in metric_names:
        values = [float(r.scores[metric].score) for r in reports]
        mean = sum(values) / len(values)
        variance = sum((v - mean) ** 2 for v in values) / len(values)
        aggregates[metric] = MetricAggregate(mean=mean, std=variance**0.5)
    overall = sum(a.mean for a in aggregates.values()) / len(aggregates)
    return AggregateReport(metrics=aggregates, overall=overall, report_count=len(reports))


@dataclass(frozen=True)
class RankedModel:
    rank: int
    model: str
    overall: float


def rank_models(aggregates: Mapping[str, AggregateReport]) -> list[RankedModel]:
    """Order models by overall average, descending; ties break by name."""
    if len(aggregates) < 2:
        raise ValueError("ranking needs at least two models")
    ordered = sorted(aggregates.items(), key=lambda kv: (-kv[1].overall, kv[0]))
    return [
        RankedModel(rank=i + 1, model=name, overall=agg.overall)
        for i, (name, agg) in enumerate(ordered)
    ]


def ranking_table(ranking: Sequence[RankedModel]) -> str:
    width = max(len(r.model) for r in ranking)
    lines = [f"{'#':<4}{'Model':<{width + 2}}Average"]
    for row in ranking:
        lines.append(f"{row.rank:<4}{row.model:<{width + 2}}{round_half_up(row.overall):.2f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Arena win-rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArenaVerdict:
    seed_id: str
    winner: str
    rationale: str = ""

    def __post_init__(self):
        if self.winner not in ("A", "B"):
            raise ValueError(f"winner must be 'A' or 'B', got {self.winner!r}")


@dataclass(frozen=True)
class ArenaMatrix:
    """Pairwise win-rate matrix; cells are exact fractions of verdicts won."""

    models: tuple[str, ...]
    cells: Mapping[tuple[str, str], Fraction]

    def cell(self, model_a: str, model_b: str) -> Optional[Fraction]:
        return self.cells.get((model_a, model_b))

    def cell_text(self, model_a: str, model_b: str) -> str:
        value = self.cell(model_a, model_b)
        if value is None:
            return "--"
        percent = value * 100
        # Exact half-up rounding of the non-negative rational percent.
        rounded = (percent.numerator * 2 + percent.denominator) // (2 * percent.denominator)
        return f"{rounded}%"

    def to_text(self) -> str:
        width = max(len(m) for m in self.models) + 2
        header = " " * width + "".join(f"{m:>{width}}" for m in self.models)
        lines = [header]
        for row in self.models:
            cells = "".join(f"{self.cell_text(row, col):>{width}}" for col in self.models)
            lines.append(f"{row:<{width}}{cells}")
        return "\n".join(lines)


def arena_matrix(
    verdicts_by_pair: Mapping[tuple[str, str], Sequence[ArenaVerdict]]
) -> ArenaMatrix:
    """Build the win-rate matrix; both orientations of each pair come from the
    same verdict set, so cell(A,B) + cell(B,A) == 1 exactly."""
    cells: dict[tuple[str, str], Fraction] = {}
    models: list[str] = []
    for (model_a, model_b), verdicts in verdicts_by_pair.items():
        if not verdicts:
            raise ValueError(f"no verdicts for pair ({model_a}, {model_b})")
        wins_a = sum(1 for v in verdicts if v.winner == "A")
        total = len(verdicts)
        cells[(model_a, model_b)] = Fraction(wins_a, total)
        cells[(model_b, model_a)] = Fraction(total - wins_a, total)
        for model in (model_a, model_b):
            if model not in models:
                models.append(model)
    return ArenaMatrix(models=tuple(models), cells=cells)


# ---------------------------------------------------------------------------
# Report persistence
# ---------------------------------------------------------------------------


def report_to_dict(report: ActorScoreReport | ManagerScoreReport) -> dict[str, Any]:
    return {
        "seed_id": report.seed_id,
        "scores": {
            metric: {"score": ms.score, "reasoning": ms.reasoning}
            for metric, ms in report.scores.items()
        },
    }


def actor_report_from_dict(data: Mapping[str, Any]) -> ActorScoreReport:
    scores = {
        metric: MetricScore(float(entry["score"]), str(entry.get("reasoning", "")))
        for metric, entry in data["scores"].items()
    }
    return ActorScoreReport(seed_id=str(data.get("seed_id", "")), scores=scores)


def manager_report_from_dict(data: Mapping[str, Any]) -> ManagerScoreReport:
    scores = {
        metric: MetricScore(float(entry["score"]), str(entry.get("reasoning", "")))
        for metric, entry in data["scores"].items()
    }
    return ManagerScoreReport(seed_id=str(data.get("seed_id", "")), scores=scores)


def load_arena_verdicts(path: str) -> dict[tuple[str, str], list[ArenaVerdict]]:
    """Read verdicts from JSONL: model_a, model_b, seed_id, winner, rationale."""
    grouped: dict[tuple[str, str], list[ArenaVerdict]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            entry = json.loads(line)
            pair = (str(entry["model_a"]), str(entry["model_b"]))
            grouped.setdefault(pair, []).append(
                ArenaVerdict(
                    seed_id=str(entry.get("seed_id", "")),
                    winner=str(entry["winner"]),
                    rationale=str(entry.get("rationale", "")),
                )
            )
    return grouped
