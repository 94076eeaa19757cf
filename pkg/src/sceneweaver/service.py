"""HTTP session service for human-in-the-loop episodes.

The engine advances through manager and actor turns server-side and pauses
only when the human's role is picked. Each session is single-writer (its
advance loop runs under the session lock); reads are snapshot-consistent.
State lives in memory with write-through trajectory persistence on close.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .errors import BackendFailure, SeedError, UnbalancedDelimiter
from .message import check_style_constraints, parse_message, split_speaker_prefix
from .model import (
    ActionTag,
    InteractionState,
    ManagerAction,
    Termination,
    Trajectory,
    TurnMessage,
    apply_character_message,
    canonicalize_role_name,
    role_profile_to_dict,
    save_trajectory,
    turn_message_to_dict,
)
from .prompts import render_history_line
from .protocol import apply_action
from .simulation import (
    EpisodeBackends,
    EpisodeConfig,
    EpisodeSettings,
    _request_character_turn,
    _request_manager_action,
    default_backend_factory,
    episode_config,
    seed_from_dict,
)

log = logging.getLogger(__name__)

PHASE_AWAITING_MANAGER = "awaiting_manager"
PHASE_AWAITING_USER = "awaiting_user_turn"
PHASE_AWAITING_ACTOR = "awaiting_actor_turn"
PHASE_CLOSED = "closed"


@dataclass
class Event:
    index: int
    kind: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"index": self.index, "kind": self.kind, "payload": self.payload}


@dataclass
class Session:
    session_id: str
    config: EpisodeConfig
    backends: EpisodeBackends
    state: InteractionState
    persist_dir: Optional[str] = None
    phase: str = PHASE_AWAITING_MANAGER
    picked: Optional[str] = None
    events: list[Event] = field(default_factory=list)
    messages: list[TurnMessage] = field(default_factory=list)
    termination: Termination = Termination.BACKEND_FAILURE
    error: Optional[str] = None
    seen_turn_keys: dict[str, dict[str, Any]] = field(default_factory=dict)
    lock: threading.RLock = field(default_factory=threading.RLock)

    def emit(self, kind: str, payload: dict[str, Any]) -> None:
        self.events.append(Event(index=len(self.events), kind=kind, payload=payload))

    def set_phase(self, phase: str, picked: Optional[str] = None) -> None:
        self.phase = phase
        self.picked = picked
        payload: dict[str, Any] = {"phase": phase}
        if picked is not None:
            payload["picked"] = picked
        self.emit("phase", payload)

    @property
    def user_names(self) -> set[str]:
        return {r.name for r in self.state.roles if r.is_user}

    def record_message(self) -> None:
        message = self.state.history[-1]
        self.messages.append(message)
        self.emit(
            "message",
            {
                "message": turn_message_to_dict(message),
                "line": render_history_line(message, self.user_names),
                "scene": self.state.current_scene,
            },
        )

    def trajectory(self) -> Trajectory:
        return Trajectory(
            seed_id=self.config.seed.seed_id,
            topic=self.config.seed.topic,
            roles_at_start=self.config.seed.roles,
            messages=tuple(self.messages),
            termination=self.termination,
            horizon=self.config.horizon,
        )


class SessionStore:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session


def _advance(session: Session) -> None:
    """Drive the episode until the user is picked, it closes, or it stalls."""
    cfg = session.config
    state = session.state
    try:
        while True:
            if state.ended:
                break
            if state.dialogue_turns >= cfg.horizon:
                end = ManagerAction(
                    tag=ActionTag.END,
                    reason=f"Reached the {cfg.horizon}-turn dialogue limit.",
                )
                state = apply_action(state, end, validated=True)
                session.state = state
                session.record_message()
                session.termination = Termination.HORIZON_REACHED
                session.set_phase(PHASE_CLOSED)
                _persist(session)
                return
            act = _request_manager_action(state, cfg, session.backends)
            if act.tag is ActionTag.PICK_SPEAKER:
                state = apply_action(state, act, validated=True)
                session.state = state
                speaker = state.find_role(act.speaker)
                session.emit("action", {"action": "pick_speaker", "speaker": speaker.name, "reason": act.reason})
                if speaker.is_user:
                    session.set_phase(PHASE_AWAITING_USER, picked=speaker.name)
                    return
                session.set_phase(PHASE_AWAITING_ACTOR, picked=speaker.name)
                segments = _request_character_turn(state, speaker, cfg, session.backends)
                state = apply_character_message(state, speaker.name, segments)
                session.state = state
                session.record_message()
                session.set_phase(PHASE_AWAITING_MANAGER)
            else:
                state = apply_action(state, act, validated=True)
                session.state = state
                session.record_message()
                if act.tag is ActionTag.END:
                    session.termination = Termination.MANAGER_END
                    session.set_phase(PHASE_CLOSED)
                    _persist(session)
                    return
        session.termination = Termination.MANAGER_END
        session.set_phase(PHASE_CLOSED)
        _persist(session)
    except BackendFailure as exc:
        # The session stalls in its current phase; a later retry could resume.
        session.error = str(exc)
        session.emit("error", {"message": str(exc)})


def _persist(session: Session) -> None:
    if session.persist_dir is None:
        return
    try:
        os.makedirs(session.persist_dir, exist_ok=True)
        path = os.path.join(session.persist_dir, f"{session.session_id}.traj")
        save_trajectory(session.trajectory(), path)
    except Exception:
        log.exception("failed to persist session %s", session.session_id)


class CreateSessionBody(BaseModel):
    seed: dict[str, Any]
    horizon: Optional[int] = None


class TurnBody(BaseModel):
    text: str
    idempotency_key: Optional[str] = None


def create_app(
    settings: Optional[EpisodeSettings] = None,
    backend_factory=default_backend_factory,
    trajectory_dir: Optional[str] = None,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    """Build the session service; backends come from the given settings.

    When ui_dir points at a built browser client, it is served under /ui.
    """
    settings = settings or EpisodeSettings()
    app = FastAPI(title="sceneweaver session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore()
    app.state.store = store
    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        try:
            seed = seed_from_dict(body.seed, seed_id=f"live-{uuid.uuid4().hex[:8]}")
        except (KeyError, ValueError, TypeError, SeedError) as exc:
            raise HTTPException(status_code=422, detail=f"bad seed: {exc}")
        cfg = episode_config(seed, settings)
        if body.horizon is not None:
            cfg = dataclasses.replace(cfg, horizon=body.horizon)
        session = Session(
            session_id=uuid.uuid4().hex,
            config=cfg,
            backends=backend_factory(cfg),
            state=InteractionState(roles=seed.roles),
            persist_dir=trajectory_dir,
        )
        init = ManagerAction(
            tag=ActionTag.INIT_SCENE, reason=seed.init_reason, initial_scene=seed.initial_scene
        )
        with session.lock:
            session.state = apply_action(session.state, init, validated=True)
            session.record_message()
            store.add(session)
            _advance(session)
        return {"session_id": session.session_id}

    def snapshot(session: Session) -> dict[str, Any]:
        state = session.state
        return {
            "session_id": session.session_id,
            "phase": session.phase,
            "picked": session.picked,
            "scene": state.current_scene,
            "dialogue_turns": state.dialogue_turns,
            "roles": [
                {"name": r.name, "is_user": r.is_user, "display_name": r.display_name}
                for r in state.roles
            ],
            "event_count": len(session.events),
            "error": session.error,
            "manager_mode": session.config.manager_mode.value,
        }

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return snapshot(session)

    @app.get("/v1/sessions/{session_id}/events")
    def get_events(session_id: str, since: int = -1, wait: float = 0.0):
        session = store.get(session_id)
        deadline = time.monotonic() + min(wait, 30.0)
        while True:
            with session.lock:
                events = [e.to_dict() for e in session.events if e.index > since]
            if events or time.monotonic() >= deadline:
                return {"events": events, "phase": session.phase}
            time.sleep(0.05)

    @app.post("/v1/sessions/{session_id}/turn")
    def post_turn(session_id: str, body: TurnBody):
        session = store.get(session_id)
        with session.lock:
            key = body.idempotency_key
            if key and key in session.seen_turn_keys:
                return session.seen_turn_keys[key]
            if session.phase != PHASE_AWAITING_USER:
                raise HTTPException(
                    status_code=409,
                    detail=f"turn rejected: session is in phase {session.phase}",
                )
            text = body.text.strip()
            prefix, body_text = split_speaker_prefix(text)
            if prefix is not None:
                try:
                    canonical, _ = canonicalize_role_name(prefix)
                except Exception:
                    canonical = ""
                if canonical != session.picked:
                    body_text = text
            try:
                segments = parse_message(body_text).segments
            except UnbalancedDelimiter as exc:
                raise HTTPException(status_code=422, detail=f"unparseable turn: {exc}")
            report = check_style_constraints(segments)
            session.state = apply_character_message(session.state, session.picked, segments)
            session.record_message()
            session.set_phase(PHASE_AWAITING_MANAGER)
            _advance(session)
            result = {
                "accepted": True,
                "style_violations": [
                    {"code": code.value, "detail": detail} for code, detail in report.violations
                ],
                "phase": session.phase,
            }
            if key:
                session.seen_turn_keys[key] = result
            return result

    @app.post("/v1/sessions/{session_id}/end")
    def end_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            if session.phase == PHASE_CLOSED:
                return {"phase": PHASE_CLOSED}
            end = ManagerAction(tag=ActionTag.END, reason="Ended by the user.")
            session.state = apply_action(session.state, end, validated=True)
            session.record_message()
            session.termination = Termination.MANAGER_END
            session.set_phase(PHASE_CLOSED)
            _persist(session)
            return {"phase": PHASE_CLOSED}

    @app.get("/v1/sessions/{session_id}/trajectory")
    def get_trajectory(session_id: str):
        session = store.get(session_id)
        with session.lock:
            trajectory = session.trajectory()
            return {
                "seed_id": trajectory.seed_id,
                "topic": trajectory.topic,
                "horizon": trajectory.horizon,
                "termination": trajectory.termination.value,
                "roles_at_start": [role_profile_to_dict(r) for r in trajectory.roles_at_start],
                "messages": [turn_message_to_dict(m) for m in trajectory.messages],
            }

    return app
