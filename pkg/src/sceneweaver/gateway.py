"""Uniform chat-completion interface over remote HTTP and scripted backends.

Scripted backends make full pipelines byte-reproducible: ordered mode pops a
fixed response list (pops are serialized behind a lock), keyed mode answers by
a digest of the request so responses are order-independent.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import requests

from .errors import BackendFailure, ScriptUnderrun

DEFAULT_ACTOR_TEMPERATURE = 0.7
DEFAULT_MANAGER_TEMPERATURE = 0.2
DEFAULT_JUDGE_TEMPERATURE = 0.2
DEFAULT_MAX_TOKENS = 1024


@dataclass(frozen=True)
class ChatRequest:
    """One completion request; system and history are both optional-but-one."""

    system: str = ""
    messages: tuple[tuple[str, str], ...] = ()
    temperature: float = DEFAULT_ACTOR_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    model_id: str = ""

    def __post_init__(self):
        if not self.system and not self.messages:
            raise ValueError("a request needs a system prompt or at least one message")


def request_digest(req: ChatRequest) -> str:
    """Stable content digest used as the keyed-script lookup key."""
    payload = {
        "system": req.system,
        "messages": list(req.messages),
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
        "model_id": req.model_id,
    }
    canonical = json.dumps(payload, ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class BackendKind(enum.Enum):
    REMOTE_HTTP = "remote_http"
    SCRIPTED = "scripted"


@dataclass(frozen=True)
class BackendConfig:
    """Declarative backend description; make_backend turns it into a handle."""

    kind: BackendKind
    endpoint: str = ""
    api_key_env: str = ""
    model_id: str = ""
    script: tuple[str, ...] = ()
    keyed_script: tuple[tuple[str, str], ...] = ()
    script_path: str = ""
    retry_limit: int = 2
    timeout: float = 30.0
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        if self.kind is BackendKind.REMOTE_HTTP and not self.endpoint:
            raise ValueError("remote backends need an endpoint")


def scripted_config(responses: list[str] | tuple[str, ...], **kwargs) -> BackendConfig:
    return BackendConfig(kind=BackendKind.SCRIPTED, script=tuple(responses), **kwargs)


def keyed_config(mapping: dict[str, str], **kwargs) -> BackendConfig:
    return BackendConfig(
        kind=BackendKind.SCRIPTED, keyed_script=tuple(sorted(mapping.items())), **kwargs
    )


class Backend(Protocol):
    def complete(self, req: ChatRequest) -> str: ...


class ScriptedBackend:
    """Ordered scripted responses; also logs (digest, response) exchanges."""

    def __init__(self, responses: tuple[str, ...]):
        self._responses = list(responses)
        self._next = 0
        self._lock = threading.Lock()
        self.exchange_log: list[tuple[str, str]] = []

    def complete(self, req: ChatRequest) -> str:
        with self._lock:
            if self._next >= len(self._responses):
                raise ScriptUnderrun(
                    f"scripted backend exhausted after {len(self._responses)} responses"
                )
            response = self._responses[self._next]
            self._next += 1
            self.exchange_log.append((request_digest(req), response))
        return response


class KeyedScriptedBackend:
    """Digest-keyed scripted responses; immune to request ordering."""

    def __init__(self, mapping: dict[str, str]):
        self._mapping = dict(mapping)

    def complete(self, req: ChatRequest) -> str:
        digest = request_digest(req)
        try:
            return self._mapping[digest]
        except KeyError:
            raise ScriptUnderrun(f"no scripted response for request digest {digest[:12]}...")


class RemoteBackend:
    """Chat-completions endpoint client with retry and exponential backoff."""

    def __init__(self, cfg: BackendConfig, sleep: Callable[[float], None] = time.sleep):
        self._cfg = cfg
        self._sleep = sleep
        self._api_key = ""
        if cfg.api_key_env:
            key = os.environ.get(cfg.api_key_env)
            if not key:
                raise ValueError(f"environment variable {cfg.api_key_env} is not set")
            self._api_key = key

    def complete(self, req: ChatRequest) -> str:
        body = {
            "model": req.model_id or self._cfg.model_id,
            "messages": self._wire_messages(req),
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        last_error: Optional[str] = None
        for attempt in range(self._cfg.retry_limit + 1):
            if attempt:
                self._sleep(self._cfg.backoff_base * (2 ** (attempt - 1)))
            try:
                response = requests.post(
                    self._cfg.endpoint, json=body, headers=headers, timeout=self._cfg.timeout
                )
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code >= 500:
                last_error = f"server error {response.status_code}"
                continue
            if response.status_code >= 400:
                raise BackendFailure(f"request rejected: {response.status_code} {response.text[:200]}")
            try:
                payload = response.json()
                return payload["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendFailure(f"malformed completion payload: {exc}")
        raise BackendFailure(f"retries exhausted: {last_error}")

    @staticmethod
    def _wire_messages(req: ChatRequest) -> list[dict[str, str]]:
        messages: list[dict[str, str]] = []
        if req.system:
            messages.append({"role": "system", "content": req.system})
        messages.extend({"role": role, "content": content} for role, content in req.messages)
        return messages


def make_backend(cfg: BackendConfig) -> Backend:
    """Instantiate a runtime handle for a backend config.

    Ordered scripted backends are stateful; create one handle per consumer and
    reuse it across calls.
    """
    if cfg.kind is BackendKind.REMOTE_HTTP:
        return RemoteBackend(cfg)
    script, keyed = cfg.script, dict(cfg.keyed_script)
    if cfg.script_path:
        with open(cfg.script_path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        if isinstance(data, list):
            script = tuple(str(item) for item in data)
        elif isinstance(data, dict):
            keyed = {str(k): str(v) for k, v in data.items()}
        else:
            raise ValueError(f"script file {cfg.script_path} must hold a list or an object")
    if keyed:
        return KeyedScriptedBackend(keyed)
    return ScriptedBackend(script)


def complete(backend: Backend, req: ChatRequest) -> str:
    """Obtain one completion from a backend handle.

    Raises:
        BackendFailure: retries exhausted or the response was unusable.
        ScriptUnderrun: a scripted backend had no response left (or no key).
    """
    return backend.complete(req)


def backend_config_from_dict(data: dict) -> BackendConfig:
    """Parse the JSON form used by CLI --backends files."""
    kind = BackendKind(data.get("kind", "scripted"))
    keyed = data.get("keyed_script", {})
    return BackendConfig(
        kind=kind,
        endpoint=data.get("endpoint", ""),
        api_key_env=data.get("api_key_env", ""),
        model_id=data.get("model_id", ""),
        script=tuple(data.get("script", ())),
        keyed_script=tuple(sorted((str(k), str(v)) for k, v in dict(keyed).items())),
        script_path=data.get("script_path", ""),
        retry_limit=int(data.get("retry_limit", 2)),
        timeout=float(data.get("timeout", 30.0)),
        backoff_base=float(data.get("backoff_base", 0.5)),
    )
