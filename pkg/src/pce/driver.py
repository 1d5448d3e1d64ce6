"""Conversations with a chat model: single-shot and two-phase protocols.

Backends implement ``complete(messages, conversation_id=...) -> Message``.
:class:`ReplayBackend` answers from recorded scripts and is what the tests
and offline experiments use; :class:`ChatCompletionsBackend` talks to any
OpenAI-compatible ``/chat/completions`` endpoint.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence, Union

import httpx

log = logging.getLogger(__name__)

__all__ = [
    "API_KEY_ENV",
    "Backend",
    "BackendError",
    "Budget",
    "ChatCompletionsBackend",
    "Message",
    "ParameterSet",
    "ProtocolError",
    "ReplayBackend",
    "STANDARD_PARAMETERS",
    "Transcript",
    "TranscriptStore",
    "detect_questions",
    "load_fixture",
    "render_parameters",
    "run_single",
    "run_two_phase",
]

API_KEY_ENV = "PCE_API_KEY"
ROLES = ("system", "user", "assistant")


class BackendError(RuntimeError):
    def __init__(self, message: str, turn: int | None = None):
        self.turn = turn
        super().__init__(message if turn is None else f"turn {turn}: {message}")


class ProtocolError(RuntimeError):
    def __init__(self, message: str, transcript: Transcript | None = None):
        self.transcript = transcript
        super().__init__(message)


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content or not self.content.strip():
            raise ValueError("message content must not be empty")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class Transcript:
    id: str
    unit: str = "custom"
    messages: list[Message] = field(default_factory=list)
    model_name: str = ""
    created_at: str = field(default_factory=_now, compare=False)

    def __post_init__(self) -> None:
        msgs, self.messages = list(self.messages), []
        for m in msgs:
            self.append(m)

    def append(self, message: Message) -> None:
        expected = self._next_role()
        if message.role == "system" and not self.messages:
            self.messages.append(message)
            return
        if message.role != expected:
            raise ValueError(f"expected a {expected} message, got {message.role}")
        self.messages.append(message)

    def _next_role(self) -> str:
        turns = [m for m in self.messages if m.role != "system"]
        return "user" if not turns or turns[-1].role == "assistant" else "assistant"

    @property
    def replies(self) -> list[str]:
        return [m.content for m in self.messages if m.role == "assistant"]

    @property
    def final_reply(self) -> str:
        replies = self.replies
        if not replies:
            raise ValueError(f"transcript {self.id!r} has no assistant reply")
        return replies[-1]

    def to_dict(self, include_timestamp: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "unit": self.unit,
            "model_name": self.model_name,
            "messages": [m.to_dict() for m in self.messages],
        }
        if include_timestamp:
            out["created_at"] = self.created_at
        return out

    def to_json(self, include_timestamp: bool = True) -> str:
        return json.dumps(self.to_dict(include_timestamp), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Transcript:
        return cls(
            id=data["id"],
            unit=data.get("unit", "custom"),
            messages=[Message(m["role"], m["content"]) for m in data.get("messages", [])],
            model_name=data.get("model_name", ""),
            created_at=data.get("created_at") or _now(),
        )


class TranscriptStore:
    """One JSON file per transcript under *directory*."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def path_for(self, transcript_id: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9._-]", "_", transcript_id)
        return self.directory / f"{safe}.json"

    def save(self, transcript: Transcript) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(transcript.id)
        path.write_text(transcript.to_json(), encoding="utf-8")
        return path

    def load(self, transcript_id: str) -> Transcript:
        return Transcript.from_dict(json.loads(self.path_for(transcript_id).read_text(encoding="utf-8")))

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class Budget:
    amount: Decimal
    currency: str = "USD"
    period: str = "week"

    def __post_init__(self) -> None:
        object.__setattr__(self, "amount", Decimal(str(self.amount)))
        if self.amount <= 0:
            raise ValueError("budget amount must be positive")

    def __str__(self) -> str:
        amount = self.amount
        text = str(amount.quantize(Decimal(1))) if amount == amount.to_integral_value() else f"{amount:.2f}"
        singular, plural = _CURRENCY_WORDS.get(self.currency.upper(), (self.currency, self.currency))
        word = singular if amount == 1 else plural
        return f"{text} {word} per {self.period}"


_CURRENCY_WORDS = {
    "USD": ("dollar", "dollars"),
    "EUR": ("euro", "euros"),
    "GBP": ("pound", "pounds"),
    "BRL": ("real", "reais"),
}


@dataclass(frozen=True)
class ParameterSet:
    diet: str
    goal: str
    budget: Budget

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ParameterSet:
        b = data["budget"]
        return cls(data["diet"], data["goal"], Budget(b["amount"], b.get("currency", "USD"), b.get("period", "week")))


STANDARD_PARAMETERS = ParameterSet("Paleolithic", "Gain in lean mass", Budget(Decimal(50), "USD", "week"))


def render_parameters(params: ParameterSet) -> str:
    return f"1. {params.diet}\n2. {params.goal}\n3. {params.budget}"


_ENUMERATED = re.compile(r"^\s*(?:\d+[.)]\s|\*\*\d+[.)])", re.MULTILINE)


def detect_questions(msg: Message) -> bool:
    """True when a reply asks numbered questions (a ``?`` plus an enumerated line)."""
    if msg.role != "assistant":
        raise ValueError("detect_questions expects an assistant message")
    return "?" in msg.content and bool(_ENUMERATED.search(msg.content))


# ---------------------------------------------------------------------------
# backends


class Backend(Protocol):
    name: str

    def complete(self, messages: Sequence[Message], *, conversation_id: str) -> Message: ...


def load_fixture(path: Union[str, Path]) -> dict[str, Any]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data.get("replies"), list) or "id" not in data:
        raise ValueError(f"{path}: replay fixture needs 'id' and a 'replies' list")
    return data


class ReplayBackend:
    """Answers from recorded scripts keyed by conversation id.

    The reply for a call is chosen by (conversation id, number of assistant
    turns already in *messages*), so the backend holds no per-call state.
    """

    name = "replay"

    def __init__(self, scripts: Mapping[str, Sequence[str]]):
        self.scripts = {k: tuple(v) for k, v in scripts.items()}

    @classmethod
    def from_fixtures(cls, paths: Iterable[Union[str, Path]]) -> ReplayBackend:
        scripts = {}
        for path in paths:
            data = load_fixture(path)
            scripts[data["id"]] = data["replies"]
        return cls(scripts)

    @classmethod
    def from_directory(cls, directory: Union[str, Path]) -> ReplayBackend:
        return cls.from_fixtures(sorted(Path(directory).glob("*.json")))

    def complete(self, messages: Sequence[Message], *, conversation_id: str) -> Message:
        turn = sum(1 for m in messages if m.role == "assistant")
        script = self.scripts.get(conversation_id)
        if script is None:
            raise BackendError(f"no replay script for conversation {conversation_id!r}", turn)
        if turn >= len(script):
            raise BackendError(f"replay script {conversation_id!r} exhausted", turn)
        return Message("assistant", script[turn])


class ChatCompletionsBackend:
    """Client for an OpenAI-compatible chat-completions endpoint."""

    name = "live"
    transient_status = frozenset({408, 409, 429, 500, 502, 503, 504})

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key: str | None = None,
        options: Mapping[str, Any] | None = None,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.options = dict(options or {})
        self.retries = retries
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def _payload(self, messages: Sequence[Message]) -> dict[str, Any]:
        return {"model": self.model, "messages": [m.to_dict() for m in messages], **self.options}

    def complete(self, messages: Sequence[Message], *, conversation_id: str) -> Message:
        turn = sum(1 for m in messages if m.role == "assistant")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.endpoint}/chat/completions"
        attempt = 0
        while True:
            try:
                resp = self.client.post(url, json=self._payload(messages), headers=headers)
            except httpx.TransportError as exc:
                problem = f"transport error: {exc}"
            else:
                if resp.status_code < 400:
                    return Message("assistant", self._content(resp, turn))
                problem = f"HTTP {resp.status_code}"
                if resp.status_code not in self.transient_status:
                    raise BackendError(problem, turn)
            if attempt >= self.retries:
                raise BackendError(f"{problem} after {attempt + 1} attempts", turn)
            delay = self.backoff * 2**attempt
            log.warning("%s (conversation %s); retrying in %.1fs", problem, conversation_id, delay)
            self._sleep(delay)
            attempt += 1

    @staticmethod
    def _content(resp: httpx.Response, turn: int) -> str:
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {exc!r}", turn) from exc
        if not content or not str(content).strip():
            raise BackendError("empty completion", turn)
        return str(content)


# ---------------------------------------------------------------------------
# protocols


def _send(transcript: Transcript, backend: Backend, text: str) -> Message:
    transcript.append(Message("user", text))
    turn = len(transcript.replies)
    try:
        reply = backend.complete(list(transcript.messages), conversation_id=transcript.id)
    except BackendError as exc:
        if exc.turn is None:
            exc.turn = turn
        raise
    except Exception as exc:
        raise BackendError(f"{type(exc).__name__}: {exc}", turn) from exc
    if reply.role != "assistant":
        raise BackendError(f"backend returned a {reply.role} message", turn)
    transcript.append(reply)
    return reply


def _new_transcript(transcript_id: str, unit: str, backend: Backend, clock: Callable[[], str] | None) -> Transcript:
    model = getattr(backend, "model", None) or getattr(backend, "name", type(backend).__name__)
    return Transcript(transcript_id, unit, [], str(model), (clock or _now)())


def run_single(
    prompt: str,
    backend: Backend,
    *,
    transcript_id: str = "conversation",
    unit: str = "custom",
    clock: Callable[[], str] | None = None,
) -> Transcript:
    """One prompt, one reply."""
    if not prompt or not prompt.strip():
        raise ValueError("prompt must not be empty")
    transcript = _new_transcript(transcript_id, unit, backend, clock)
    _send(transcript, backend, prompt)
    return transcript


def run_two_phase(
    prompt: str,
    params: ParameterSet,
    backend: Backend,
    *,
    transcript_id: str = "conversation",
    unit: str = "custom",
    clock: Callable[[], str] | None = None,
) -> Transcript:
    """Send *prompt*, expect numbered questions back, then answer with *params*."""
    if not prompt or not prompt.strip():
        raise ValueError("prompt must not be empty")
    transcript = _new_transcript(transcript_id, unit, backend, clock)
    first = _send(transcript, backend, prompt)
    if not detect_questions(first):
        raise ProtocolError(
            f"conversation {transcript_id!r}: first reply does not ask for the parameters", transcript
        )
    _send(transcript, backend, render_parameters(params))
    return transcript
