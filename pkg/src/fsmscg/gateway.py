"""Chat sessions against a pluggable model backend, plus reply payload extraction.

Two backends ship: ``http-chat`` (OpenAI-compatible chat-completions) and
``scripted-mock``, a deterministic replay of canned replies used by tests and
reproducible batch runs.
"""
from __future__ import annotations

import itertools
import json
import logging
import os
import re
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Literal, Protocol

import httpx

from .prompts import Prompt

log = logging.getLogger(__name__)

API_KEY_ENV = "FSMSCG_API_KEY"


class GatewayError(Exception):
    """Base class for backend failures."""


class ConfigError(GatewayError, ValueError):
    pass


class BackendUnreachable(GatewayError):
    pass


class ScriptLoadError(GatewayError):
    pass


class BackendTimeout(GatewayError):
    pass


class BackendError(GatewayError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ScriptExhausted(GatewayError):
    pass


class PromptTooLong(GatewayError):
    pass


class NoPayloadFound(ValueError):
    pass


@dataclass
class BackendConfig:
    kind: Literal["http-chat", "scripted-mock"]
    endpoint: str | None = None
    model: str | None = None
    script: Path | None = None
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = 2
    backoff: tuple[float, ...] = (1.0, 4.0)
    max_prompt_chars: int = 100_000
    system_prompt: str | None = None

    def __post_init__(self):
        if self.kind not in ("http-chat", "scripted-mock"):
            raise ConfigError(f"backend kind must be http-chat or scripted-mock, got {self.kind!r}")
        if self.kind == "scripted-mock" and not self.script:
            raise ConfigError("scripted-mock backend needs a script path")
        if self.kind == "http-chat" and not (self.endpoint and self.model):
            raise ConfigError("http-chat backend needs endpoint and model")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.script is not None:
            self.script = Path(self.script)
        self.backoff = tuple(self.backoff)


@dataclass(frozen=True)
class Turn:
    role: Literal["user", "assistant"]
    text: str
    kind: str | None = None


class Backend(Protocol):
    def complete(self, session: "Session", prompt_text: str) -> str: ...


# ---------------------------------------------------------- scripted mock


@dataclass(frozen=True)
class ScriptedReply:
    """A canned reply guarded by a matcher.

    The matcher fields are all optional and must all hold: ``turn`` is the
    0-based index of the send within the session, ``contains`` a substring
    of the incoming prompt, ``tag`` a substring of the session tag (the run
    id in pipeline runs). A reply with no matcher fields matches anything.
    """

    reply: str
    turn: int | None = None
    contains: str | None = None
    tag: str | None = None

    def matches(self, turn: int, prompt: str, tag: str) -> bool:
        return (
            (self.turn is None or self.turn == turn)
            and (self.contains is None or self.contains in prompt)
            and (self.tag is None or self.tag in tag)
        )

    @classmethod
    def from_dict(cls, d: dict) -> "ScriptedReply":
        if not isinstance(d, dict) or not isinstance(d.get("reply"), str):
            raise ScriptLoadError(f"script entry needs a string 'reply': {d!r}")
        match = d.get("match")
        fields: dict[str, Any] = {}
        if isinstance(match, bool):
            raise ScriptLoadError(f"invalid matcher {match!r}")
        if isinstance(match, int):
            fields["turn"] = match
        elif isinstance(match, str):
            fields["contains"] = match
        elif isinstance(match, dict):
            unknown = set(match) - {"turn", "contains", "tag"}
            if unknown:
                raise ScriptLoadError(f"unknown matcher keys {sorted(unknown)}")
            fields.update(match)
        elif match is not None:
            raise ScriptLoadError(f"invalid matcher {match!r}")
        return cls(reply=d["reply"], **fields)

    def to_dict(self) -> dict:
        match = {k: v for k, v in (("turn", self.turn), ("contains", self.contains), ("tag", self.tag)) if v is not None}
        return {"match": match or None, "reply": self.reply}


def load_script(path: Path) -> list[ScriptedReply]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScriptLoadError(f"cannot load script {path}: {exc}") from exc
    if not isinstance(data, list):
        raise ScriptLoadError("script must be a JSON list of reply records")
    return [ScriptedReply.from_dict(d) for d in data]


class ScriptedBackend:
    """Each session replays the script independently; a reply is used at most once per session."""

    def __init__(self, replies: list[ScriptedReply]):
        self.replies = list(replies)

    def complete(self, session: "Session", prompt_text: str) -> str:
        used = session._script_used
        turn = len(session.turns) // 2
        for i, entry in enumerate(self.replies):
            if i not in used and entry.matches(turn, prompt_text, session.tag):
                used.add(i)
                return entry.reply
        raise ScriptExhausted(f"no scripted reply left for turn {turn} of session {session.tag or session.id}")


# --------------------------------------------------------------- HTTP chat


class _Transient(Exception):
    def __init__(self, error: GatewayError):
        self.error = error


class HttpChatBackend:
    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None, sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.sleep = sleep
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.client = httpx.Client(timeout=config.timeout, headers=headers, transport=transport)

    def probe(self) -> None:
        try:
            self.client.request("OPTIONS", self.config.endpoint)
        except httpx.TransportError as exc:
            raise BackendUnreachable(f"cannot reach {self.config.endpoint}: {exc}") from exc

    def _messages(self, session: "Session", prompt_text: str) -> list[dict[str, str]]:
        messages = []
        if self.config.system_prompt:
            messages.append({"role": "system", "content": self.config.system_prompt})
        messages += [{"role": t.role, "content": t.text} for t in session.turns]
        messages.append({"role": "user", "content": prompt_text})
        return messages

    def _attempt(self, body: dict) -> str:
        try:
            resp = self.client.post(self.config.endpoint, json=body)
        except httpx.TimeoutException as exc:
            raise _Transient(BackendTimeout(f"request timed out after {self.config.timeout}s")) from exc
        except httpx.TransportError as exc:
            raise _Transient(BackendUnreachable(str(exc))) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(BackendError(f"backend returned HTTP {resp.status_code}", resp.status_code))
        if resp.status_code >= 400:
            raise BackendError(f"backend returned HTTP {resp.status_code}: {resp.text[:300]}", resp.status_code)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat-completions response: {exc}", resp.status_code) from exc

    def complete(self, session: "Session", prompt_text: str) -> str:
        body = {
            "model": self.config.model,
            "messages": self._messages(session, prompt_text),
            "temperature": self.config.temperature,
        }
        for attempt in itertools.count():
            try:
                return self._attempt(body)
            except _Transient as t:
                if attempt >= self.config.max_retries:
                    raise t.error from None
                delay = self.config.backoff[min(attempt, len(self.config.backoff) - 1)] if self.config.backoff else 0
                log.warning("transient backend failure (%s); retrying in %ss", t.error, delay)
                self.sleep(delay)
        raise AssertionError("unreachable")


# ------------------------------------------------------------------ session


@dataclass
class Session:
    backend: Backend
    config: BackendConfig
    tag: str = ""
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    _turns: list[Turn] = field(default_factory=list, repr=False)
    _script_used: set[int] = field(default_factory=set, repr=False)

    @property
    def turns(self) -> tuple[Turn, ...]:
        return tuple(self._turns)

    def send(self, prompt: Prompt | str) -> str:
        kind = prompt.kind if isinstance(prompt, Prompt) else None
        text = prompt.text if isinstance(prompt, Prompt) else prompt
        if len(text) > self.config.max_prompt_chars:
            raise PromptTooLong(f"prompt has {len(text)} characters, limit {self.config.max_prompt_chars}")
        reply = self.backend.complete(self, text)
        self._turns.append(Turn("user", text, kind))
        self._turns.append(Turn("assistant", reply, kind))
        return reply

    def transcript(self) -> list[dict]:
        return [{"role": t.role, "kind": t.kind, "text": t.text} for t in self._turns]


def make_backend(config: BackendConfig, transport: httpx.BaseTransport | None = None) -> Backend:
    if config.kind == "scripted-mock":
        return ScriptedBackend(load_script(config.script))
    backend = HttpChatBackend(config, transport=transport)
    backend.probe()
    return backend


def open_session(config: BackendConfig, tag: str = "", backend: Backend | None = None) -> Session:
    """Fresh session bound to *backend*, or to a new one built from *config*."""
    return Session(backend=backend or make_backend(config), config=config, tag=tag)


def send(session: Session, prompt: Prompt | str) -> str:
    return session.send(prompt)


# ---------------------------------------------------------------- extraction


def _balanced_object_end(text: str, start: int) -> int:
    """End index (exclusive) of the JSON object opening at *start*, or -1."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        c = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_string = False
        elif c == '"':
            in_string = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return -1


def extract_fsm_payload(reply: str) -> bytes:
    """First balanced top-level JSON object in *reply*.

    A reply that is nothing but the object (plus surrounding whitespace) is
    returned unchanged.
    """
    pos = 0
    while True:
        start = reply.find("{", pos)
        if start < 0:
            raise NoPayloadFound("no JSON object in reply")
        end = _balanced_object_end(reply, start)
        if end > 0:
            candidate = reply[start:end]
            try:
                if isinstance(json.loads(candidate), dict):
                    if not reply[:start].strip() and not reply[end:].strip():
                        return reply.encode("utf-8")
                    return candidate.encode("utf-8")
            except json.JSONDecodeError:
                pass
        pos = start + 1


_FENCE_RE = re.compile(r"```[ \t]*([\w+-]*)[^\n]*\n(.*?)```", re.DOTALL)
_CODE_START_RE = re.compile(
    r"\A\s*(?://\s*SPDX-License-Identifier|pragma\s|(?:abstract\s+)?contract\s|library\s|interface\s|import\s)"
)


def extract_code_payload(reply: str) -> str:
    """Contents of the first fenced block, else the reply itself if it looks like Solidity."""
    m = _FENCE_RE.search(reply)
    if m:
        return m.group(2)
    if _CODE_START_RE.match(reply):
        return reply
    raise NoPayloadFound("no contract code in reply")
