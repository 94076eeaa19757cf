"""Episode simulation: drive manager and speaker turns to a horizon.

One episode is strictly sequential; across episodes everything is
embarrassingly parallel because each episode owns its backend handles and the
run directory is written via per-episode files plus a final manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

from .errors import BackendFailure, MissingPayload, NotAnAction, SeedError, UnbalancedDelimiter, UnknownActionTag
from .gateway import (
    Backend,
    BackendConfig,
    ChatRequest,
    DEFAULT_ACTOR_TEMPERATURE,
    DEFAULT_MANAGER_TEMPERATURE,
    BackendKind,
    make_backend,
)
from .message import parse_message, split_speaker_prefix
from .model import (
    ActionTag,
    InteractionState,
    ManagerAction,
    MessageKind,
    RoleProfile,
    Segment,
    Termination,
    Trajectory,
    TurnMessage,
    apply_character_message,
    canonicalize_role_name,
    manager_message,
    role_profile_from_dict,
    save_trajectory,
)
from .prompts import build_actor_prompt, build_manager_prompt, build_user_prompt, render_history
from .protocol import Mode, apply_action, parse_action, validate_action

log = logging.getLogger(__name__)

DEFAULT_HORIZON = 20
# Invalid manager output is re-requested this many times before the engine
# falls back to round-robin speaker rotation.
MANAGER_RETRIES = 2
TURN_PARSE_RETRIES = 2


@dataclass(frozen=True)
class SeedRecord:
    """One evaluation seed: topic, cast with exactly one user role, and scene."""

    seed_id: str
    topic: str
    topic_description: str
    roles: tuple[RoleProfile, ...]
    initial_scene: str
    init_reason: str = ""

    def __post_init__(self):
        users = [r for r in self.roles if r.is_user]
        if len(users) != 1:
            raise ValueError(f"seed needs exactly one user role, found {len(users)}")
        if not self.initial_scene.strip():
            raise ValueError("seed needs a non-empty initial scene")
        if len(self.roles) < 2:
            raise ValueError("seed needs the main character plus at least one other role")


def _role_from_seed_entry(entry: dict[str, Any]) -> RoleProfile:
    name, is_user = canonicalize_role_name(str(entry.get("name", "")))
    if "profile" in entry and isinstance(entry["profile"], str):
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


def seed_from_dict(data: dict[str, Any], seed_id: str) -> SeedRecord:
    main = _role_from_seed_entry(data["main_profile"])
    others = tuple(_role_from_seed_entry(e) for e in data.get("other_characters", ()))
    return SeedRecord(
        seed_id=str(data.get("seed_id", seed_id)),
        topic=str(data.get("dialogue_topic", "")),
        topic_description=str(data.get("topic_description", "")),
        roles=(main,) + others,
        initial_scene=str(data.get("initial_scene", "")),
        init_reason=str(data.get("init_reason", "")),
    )


def seed_to_dict(seed: SeedRecord) -> dict[str, Any]:
    main, others = seed.roles[0], seed.roles[1:]

    def entry(role: RoleProfile) -> dict[str, Any]:
        from .model import role_profile_to_dict

        data = role_profile_to_dict(role)
        data["name"] = role.display_name
        del data["is_user"]
        return data

    return {
        "seed_id": seed.seed_id,
        "dialogue_topic": seed.topic,
        "topic_description": seed.topic_description,
        "main_profile": entry(main),
        "other_characters": [entry(r) for r in others],
        "initial_scene": seed.initial_scene,
    }


@dataclass(frozen=True)
class EpisodeSettings:
    """Shared per-run knobs applied to every seed when loading a seed set."""

    horizon: int = DEFAULT_HORIZON
    actor_backend: BackendConfig = BackendConfig(kind=BackendKind.SCRIPTED)
    user_backend: BackendConfig = BackendConfig(kind=BackendKind.SCRIPTED)
    manager_backend: BackendConfig = BackendConfig(kind=BackendKind.SCRIPTED)
    actor_mode: Mode = Mode.ENHANCE
    manager_mode: Mode = Mode.ENHANCE
    persist_pick_speaker: bool = False


@dataclass(frozen=True)
class EpisodeConfig:
    seed: SeedRecord
    horizon: int = DEFAULT_HORIZON
    actor_backend: BackendConfig = BackendConfig(kind=BackendKind.SCRIPTED)
    user_backend: BackendConfig = BackendConfig(kind=BackendKind.SCRIPTED)
    manager_backend: BackendConfig = BackendConfig(kind=BackendKind.SCRIPTED)
    actor_mode: Mode = Mode.ENHANCE
    manager_mode: Mode = Mode.ENHANCE
    persist_pick_speaker: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


def episode_config(seed: SeedRecord, settings: EpisodeSettings) -> EpisodeConfig:
    return EpisodeConfig(
        seed=seed,
        horizon=settings.horizon,
        actor_backend=settings.actor_backend,
        user_backend=settings.user_backend,
        manager_backend=settings.manager_backend,
        actor_mode=settings.actor_mode,
        manager_mode=settings.manager_mode,
        persist_pick_speaker=settings.persist_pick_speaker,
    )


def load_seed_set(path: str, settings: Optional[EpisodeSettings] = None) -> list[EpisodeConfig]:
    """Load a seed file (JSON array or one JSON object per line), in file order.

    Raises:
        SeedError: with the failing record index and cause.
    """
    settings = settings or EpisodeSettings()
    with open(path, "r", encoding="utf-8") as handle:
        raw = handle.read()
    stripped = raw.lstrip()
    try:
        if stripped.startswith("["):
            entries = json.loads(raw)
        else:
            entries = [json.loads(line) for line in raw.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise SeedError(0, f"unparseable seed file: {exc}")

    configs: list[EpisodeConfig] = []
    for index, entry in enumerate(entries):
        try:
            seed = seed_from_dict(entry, seed_id=f"seed-{index:03d}")
        except (KeyError, ValueError, TypeError) as exc:
            raise SeedError(index, str(exc))
        configs.append(episode_config(seed, settings))
    return configs


@dataclass
class EpisodeBackends:
    """Runtime backend handles; one set per episode keeps runs isolated."""

    actor: Backend
    user: Backend
    manager: Backend


BackendFactory = Callable[[EpisodeConfig], EpisodeBackends]


def default_backend_factory(cfg: EpisodeConfig) -> EpisodeBackends:
    return EpisodeBackends(
        actor=make_backend(cfg.actor_backend),
        user=make_backend(cfg.user_backend),
        manager=make_backend(cfg.manager_backend),
    )


def _fallback_pick(state: InteractionState) -> ManagerAction:
    """Round-robin over the roles least recently heard, skipping the last speaker."""
    last_spoken: dict[str, int] = {}
    for message in state.history:
        if message.kind is MessageKind.CHARACTER:
            last_spoken[message.author] = message.step_index
    candidates = [r.name for r in state.roles if r.name != state.last_speaker]
    if not candidates:
        candidates = [r.name for r in state.roles]
    order = {r.name: i for i, r in enumerate(state.roles)}
    speaker = min(candidates, key=lambda n: (last_spoken.get(n, -1), order[n]))
    return ManagerAction(
        tag=ActionTag.PICK_SPEAKER,
        speaker=speaker,
        reason="Round-robin fallback after repeated invalid manager output.",
    )


def _request_manager_action(
    state: InteractionState, cfg: EpisodeConfig, backends: EpisodeBackends
) -> ManagerAction:
    prompt = build_manager_prompt(state, cfg.manager_mode)
    request = ChatRequest(
        system=prompt,
        temperature=DEFAULT_MANAGER_TEMPERATURE,
        model_id=cfg.manager_backend.model_id,
    )
    for attempt in range(MANAGER_RETRIES + 1):
        raw = backends.manager.complete(request)
        try:
            act = parse_action(raw)
        except (NotAnAction, UnknownActionTag, MissingPayload) as exc:
            log.warning("manager output unparseable (attempt %d): %s", attempt + 1, exc)
            continue
        verdict = validate_action(state, act, cfg.manager_mode)
        if verdict.ok:
            return act
        log.warning(
            "manager action rejected (attempt %d): %s",
            attempt + 1,
            [v.code.value for v in verdict.violations],
        )
    return _fallback_pick(state)


def _request_character_turn(
    state: InteractionState,
    speaker: RoleProfile,
    cfg: EpisodeConfig,
    backends: EpisodeBackends,
) -> tuple[Segment, ...]:
    others = tuple(r for r in state.roles if r.name != speaker.name)
    history = render_history(state.history, {r.name for r in state.roles if r.is_user})
    if speaker.is_user:
        prompt = build_user_prompt(speaker, others, history)
        backend = backends.user
        model_id = cfg.user_backend.model_id
    else:
        prompt = build_actor_prompt(speaker, others, cfg.actor_mode, history)
        backend = backends.actor
        model_id = cfg.actor_backend.model_id
    request = ChatRequest(
        system=prompt, temperature=DEFAULT_ACTOR_TEMPERATURE, model_id=model_id
    )
    role_names = {r.name for r in state.roles}
    last_error: Optional[Exception] = None
    for _ in range(TURN_PARSE_RETRIES + 1):
        raw = backend.complete(request)
        prefix, body = split_speaker_prefix(raw.strip())
        if prefix is not None:
            # Strip a name prefix only when it names a known role; otherwise a
            # colon in speech would be misread as an attribution.
            try:
                canonical, _ = canonicalize_role_name(prefix)
            except Exception:
                canonical = ""
            if canonical not in role_names:
                body = raw.strip()
        try:
            return parse_message(body).segments
        except UnbalancedDelimiter as exc:
            last_error = exc
            log.warning("unusable turn from %s: %s", speaker.name, exc)
    raise BackendFailure(f"no parseable turn from {speaker.name}: {last_error}")


def run_episode(cfg: EpisodeConfig, backends: Optional[EpisodeBackends] = None) -> Trajectory:
    """Run one episode to manager end, the turn horizon, or backend failure.

    Manager messages do not count toward the horizon; when the horizon closes
    the episode a synthetic end action is appended so downstream judging always
    sees a closed transcript. pick_speaker decisions enter the persisted
    message list only when cfg.persist_pick_speaker is set.
    """
    backends = backends or default_backend_factory(cfg)
    seed = cfg.seed
    state = InteractionState(roles=seed.roles)
    init = ManagerAction(
        tag=ActionTag.INIT_SCENE, reason=seed.init_reason, initial_scene=seed.initial_scene
    )
    state = apply_action(state, init, validated=True)
    persisted: list[TurnMessage] = [state.history[-1]]
    termination = Termination.BACKEND_FAILURE

    try:
        while True:
            if state.dialogue_turns >= cfg.horizon:
                end = ManagerAction(
                    tag=ActionTag.END,
                    reason=f"Reached the {cfg.horizon}-turn dialogue limit.",
                )
                state = apply_action(state, end, validated=True)
                persisted.append(state.history[-1])
                termination = Termination.HORIZON_REACHED
                break
            act = _request_manager_action(state, cfg, backends)
            if act.tag is ActionTag.PICK_SPEAKER:
                state = apply_action(state, act, validated=True)
                if cfg.persist_pick_speaker:
                    persisted.append(manager_message(act, state.step))
                speaker = state.find_role(act.speaker)
                segments = _request_character_turn(state, speaker, cfg, backends)
                state = apply_character_message(state, speaker.name, segments)
                persisted.append(state.history[-1])
            else:
                state = apply_action(state, act, validated=True)
                persisted.append(state.history[-1])
                if act.tag is ActionTag.END:
                    termination = Termination.MANAGER_END
                    break
    except BackendFailure as exc:
        log.warning("episode %s aborted: %s", seed.seed_id, exc)
        termination = Termination.BACKEND_FAILURE

    return Trajectory(
        seed_id=seed.seed_id,
        topic=seed.topic,
        roles_at_start=seed.roles,
        messages=tuple(persisted),
        termination=termination,
        horizon=cfg.horizon,
    )


@dataclass
class BenchResult:
    trajectories: list[Optional[Trajectory]]
    manifest: dict[str, Any]
    run_dir: str


def _episode_summary(cfg: EpisodeConfig) -> dict[str, Any]:
    return {
        "seed_id": cfg.seed.seed_id,
        "topic": cfg.seed.topic,
        "horizon": cfg.horizon,
        "actor_mode": cfg.actor_mode.value,
        "manager_mode": cfg.manager_mode.value,
        "actor_backend": cfg.actor_backend.kind.value,
        "user_backend": cfg.user_backend.kind.value,
        "manager_backend": cfg.manager_backend.kind.value,
    }


def run_bench(
    configs: Sequence[EpisodeConfig],
    out_dir: str,
    parallelism: int = 1,
    backend_factory: BackendFactory = default_backend_factory,
) -> BenchResult:
    """Run a seed set, up to `parallelism` episodes concurrently.

    Outputs land under out_dir as trajectories/<seed_id>.traj plus a
    run.manifest; manifest order always matches seed order. Individual episode
    failures are recorded and the run continues.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    traj_dir = os.path.join(out_dir, "trajectories")
    os.makedirs(traj_dir, exist_ok=True)

    results: list[Optional[Trajectory]] = [None] * len(configs)
    entries: list[dict[str, Any]] = [{} for _ in configs]

    def run_one(index: int) -> None:
        cfg = configs[index]
        entry = _episode_summary(cfg)
        started = time.perf_counter()
        try:
            trajectory = run_episode(cfg, backend_factory(cfg))
            path = os.path.join(traj_dir, f"{cfg.seed.seed_id}.traj")
            save_trajectory(trajectory, path)
            with open(path, "rb") as handle:
                digest = hashlib.sha256(handle.read()).hexdigest()
            entry.update(
                status="ok" if trajectory.termination is not Termination.BACKEND_FAILURE else "backend_failure",
                termination=trajectory.termination.value,
                digest=digest,
                path=os.path.relpath(path, out_dir),
            )
            results[index] = trajectory
        except Exception as exc:  # episode isolation: a bad seed never kills the run
            log.exception("episode %s failed", cfg.seed.seed_id)
            entry.update(status="error", error=str(exc))
        entry["seconds"] = round(time.perf_counter() - started, 6)
        entries[index] = entry

    if parallelism == 1:
        for i in range(len(configs)):
            run_one(i)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            list(pool.map(run_one, range(len(configs))))

    manifest = {
        "schema_version": 1,
        "episodes": entries,
        "ok": sum(1 for e in entries if e.get("status") == "ok"),
        "failed": sum(1 for e in entries if e.get("status") != "ok"),
    }
    manifest_path = os.path.join(out_dir, "run.manifest")
    tmp_path = manifest_path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")
    os.replace(tmp_path, manifest_path)
    return BenchResult(trajectories=results, manifest=manifest, run_dir=out_dir)
