"""Chat-completion gateway: HTTP providers, scripted stand-ins, and transcript replay.

Every LLM exchange in the engine goes through the ``ChatProvider`` protocol so
that production providers (OpenAI-compatible HTTP endpoints) and offline
stand-ins (scripted responses, recorded transcripts) are interchangeable.
Requests are hashed over ``(model_id, messages, temperature)``; the hash keys
both transcript replay and scripted providers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence, runtime_checkable

import httpx

logger = logging.getLogger(__name__)

MESSAGE_ROLES = ("system", "user", "assistant")


class GatewayError(Exception):
    """Provider call failed after exhausting its retry budget."""

    def __init__(self, provider: str, attempts: int, last_status: int | None = None,
                 detail: str = ""):
        self.provider = provider
        self.attempts = attempts
        self.last_status = last_status
        msg = f"provider '{provider}' failed after {attempts} attempt(s)"
        if last_status is not None:
            msg += f" (last status {last_status})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class GatewayConfigError(Exception):
    """Provider is misconfigured (e.g. auth token env var unset)."""


class ReplayMiss(Exception):
    """No recorded response exists for the request hash."""

    def __init__(self, request_hash: str):
        self.request_hash = request_hash
        super().__init__(f"no recorded response for request hash {request_hash}")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in MESSAGE_ROLES:
            raise ValueError(f"unknown message role: {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    """A single chat-completion request.

    ``messages`` must be non-empty and end with a user turn; ``temperature``
    defaults to 0 so that pipelines are as deterministic as the provider
    allows.
    """

    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[-1].role != "user":
            raise ValueError("last message must have role 'user'")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


def chat_request(model_id: str, user: str, *, system: str | None = None,
                 temperature: float = 0.0, max_tokens: int | None = None) -> ChatRequest:
    """Build the common one-shot request shape (optional system + one user turn)."""
    messages: list[ChatMessage] = []
    if system is not None:
        messages.append(ChatMessage("system", system))
    messages.append(ChatMessage("user", user))
    return ChatRequest(model_id=model_id, messages=tuple(messages),
                       temperature=temperature, max_tokens=max_tokens)


def request_hash(request: ChatRequest) -> str:
    """Stable digest of (model_id, messages, temperature).

    max_tokens is deliberately excluded: it bounds output length but does not
    identify the exchange.
    """
    payload = {
        "model_id": request.model_id,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": request.temperature,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@runtime_checkable
class ChatProvider(Protocol):
    """Anything that can turn a ChatRequest into assistant text."""

    name: str

    def complete(self, request: ChatRequest) -> str: ...


def complete(request: ChatRequest, provider: ChatProvider) -> str:
    """Run one chat completion against the given provider."""
    return provider.complete(request)


# --- provider profiles and the HTTP client ---------------------------------

@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff_s: float = 0.5

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_backoff_s < 0:
            raise ValueError("base_backoff_s must be >= 0")


@dataclass(frozen=True)
class ProviderProfile:
    """Connection settings for one OpenAI-compatible chat endpoint."""

    name: str
    endpoint: str
    auth_env: str
    model: str
    timeout_s: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_in_flight: int = 4

    @classmethod
    def from_dict(cls, data: dict) -> "ProviderProfile":
        retry = data.get("retry", {})
        return cls(
            name=data["name"],
            endpoint=data["endpoint"],
            auth_env=data["auth_env"],
            model=data["model"],
            timeout_s=float(data.get("timeout_s", 60.0)),
            retry=RetryPolicy(
                max_attempts=int(retry.get("max_attempts", 3)),
                base_backoff_s=float(retry.get("base_backoff_s", 0.5)),
            ),
            max_in_flight=int(data.get("max_in_flight", 4)),
        )


# transport signature: (url, headers, json_body, timeout_s) -> (status_code, parsed_body)
Transport = Callable[[str, dict, dict, float], tuple[int, dict]]

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


def _httpx_transport(url: str, headers: dict, body: dict, timeout_s: float) -> tuple[int, dict]:
    response = httpx.post(url, headers=headers, json=body, timeout=timeout_s)
    try:
        payload = response.json()
    except ValueError:
        payload = {}
    return response.status_code, payload


class HttpChatProvider:
    """Chat completions over an OpenAI-compatible HTTP endpoint.

    Retries transport errors and retryable statuses (429/5xx) with exponential
    backoff. The transport and sleep functions are injectable for tests.
    Concurrent calls are capped per provider by a semaphore.
    """

    def __init__(self, profile: ProviderProfile, *, transport: Transport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.profile = profile
        self.name = profile.name
        self.default_model = profile.model
        self._transport = transport or _httpx_transport
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(profile.max_in_flight)

    def _auth_token(self) -> str:
        token = os.environ.get(self.profile.auth_env, "")
        if not token:
            raise GatewayConfigError(
                f"auth token env var {self.profile.auth_env!r} is not set "
                f"for provider {self.profile.name!r}"
            )
        return token

    def complete(self, request: ChatRequest) -> str:
        token = self._auth_token()
        headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}
        body: dict = {
            "model": request.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens

        retry = self.profile.retry
        delay = retry.base_backoff_s
        last_status: int | None = None
        last_detail = ""
        with self._slots:
            for attempt in range(1, retry.max_attempts + 1):
                try:
                    status, payload = self._transport(
                        self.profile.endpoint, headers, body, self.profile.timeout_s)
                except httpx.HTTPError as exc:
                    last_status = None
                    last_detail = str(exc)
                else:
                    if status == 200:
                        try:
                            return payload["choices"][0]["message"]["content"]
                        except (KeyError, IndexError, TypeError) as exc:
                            raise GatewayError(self.profile.name, attempt,
                                               last_status=status,
                                               detail=f"malformed response body: {exc}")
                    if status not in RETRYABLE_STATUS:
                        raise GatewayError(self.profile.name, attempt, last_status=status,
                                           detail="non-retryable status")
                    last_status = status
                    last_detail = "retryable status"
                if attempt < retry.max_attempts:
                    logger.debug("provider %s attempt %d failed, backing off %.2fs",
                                 self.profile.name, attempt, delay)
                    self._sleep(delay)
                    delay *= 2
        raise GatewayError(self.profile.name, retry.max_attempts,
                           last_status=last_status, detail=last_detail)


# --- offline providers ------------------------------------------------------

class ScriptedProvider:
    """Responses keyed by request hash; used to pin exact exchanges in tests."""

    name = "scripted"
    default_model = "scripted"

    def __init__(self, responses: dict[str, str], default: str | None = None):
        self._responses = dict(responses)
        self._default = default

    def complete(self, request: ChatRequest) -> str:
        digest = request_hash(request)
        if digest in self._responses:
            return self._responses[digest]
        if self._default is not None:
            return self._default
        raise ReplayMiss(digest)


class SequenceProvider:
    """Returns scripted responses in call order; exhaustion is a gateway error."""

    name = "scripted-sequence"
    default_model = "scripted"

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self._cursor = 0
        self.requests: list[ChatRequest] = []

    def complete(self, request: ChatRequest) -> str:
        self.requests.append(request)
        if self._cursor >= len(self._responses):
            raise GatewayError(self.name, 1, detail="scripted response sequence exhausted")
        text = self._responses[self._cursor]
        self._cursor += 1
        return text


# --- transcript recording and replay ---------------------------------------

@dataclass(frozen=True)
class TranscriptEntry:
    request_hash: str
    request: dict
    response: str
    timestamp: float
    provider: str

    def to_dict(self) -> dict:
        return {
            "request_hash": self.request_hash,
            "request": self.request,
            "response": self.response,
            "timestamp": self.timestamp,
            "provider": self.provider,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TranscriptEntry":
        return cls(
            request_hash=data["request_hash"],
            request=data["request"],
            response=data["response"],
            timestamp=float(data["timestamp"]),
            provider=data["provider"],
        )


def _request_to_dict(request: ChatRequest) -> dict:
    return {
        "model_id": request.model_id,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }


class TranscriptRecorder:
    """Wraps a provider and records every exchange for later replay.

    Appends are serialized so concurrent completions interleave cleanly.
    """

    def __init__(self, inner: ChatProvider, clock: Callable[[], float] = time.time):
        self._inner = inner
        self._clock = clock
        self._lock = threading.Lock()
        self.name = getattr(inner, "name", "recorded")
        self.default_model = getattr(inner, "default_model", "default")
        self.entries: list[TranscriptEntry] = []

    def complete(self, request: ChatRequest) -> str:
        text = self._inner.complete(request)
        entry = TranscriptEntry(
            request_hash=request_hash(request),
            request=_request_to_dict(request),
            response=text,
            timestamp=self._clock(),
            provider=self.name,
        )
        with self._lock:
            self.entries.append(entry)
        return text

    def save(self, path: str | Path) -> None:
        save_transcript(self.entries, path)


def save_transcript(entries: Iterable[TranscriptEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")


def load_transcript(path: str | Path) -> list[TranscriptEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(TranscriptEntry.from_dict(json.loads(line)))
    return entries


class ReplayProvider:
    """Serves recorded responses by request hash; misses raise ReplayMiss."""

    name = "replay"

    def __init__(self, entries: Iterable[TranscriptEntry]):
        entries = list(entries)
        self._by_hash = {e.request_hash: e.response for e in entries}
        # adopt the recorded model id so default-model requests re-hash
        # to the recorded hashes
        self.default_model = "replay"
        for entry in entries:
            model = entry.request.get("model_id") if \
                isinstance(entry.request, dict) else None
            if model:
                self.default_model = model
                break

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayProvider":
        return cls(load_transcript(path))

    def complete(self, request: ChatRequest) -> str:
        digest = request_hash(request)
        if digest not in self._by_hash:
            raise ReplayMiss(digest)
        return self._by_hash[digest]


def replay(request: ChatRequest, transcript: Iterable[TranscriptEntry]) -> str:
    """Look up the recorded response for ``request`` in a loaded transcript."""
    return ReplayProvider(transcript).complete(request)


# --- shared LLM-output plumbing --------------------------------------------

_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_-]+)?\s*\n(.*?)\n?\s*```", re.DOTALL)


def strip_code_fence(text: str) -> str:
    """Return the contents of the first fenced code block, or the text unchanged."""
    match = _FENCE_RE.search(text)
    return match.group(1) if match else text


def extract_json_object(text: str) -> dict:
    """Parse a JSON object from raw LLM output, tolerating markdown fences.

    Raises ValueError when no JSON object can be recovered.
    """
    candidate = strip_code_fence(text).strip()
    try:
        parsed = json.loads(candidate)
    except json.JSONDecodeError:
        # Fall back to the outermost brace span, for outputs with prose around
        # the object.
        start, end = candidate.find("{"), candidate.rfind("}")
        if start == -1 or end <= start:
            raise ValueError("no JSON object found in output")
        try:
            parsed = json.loads(candidate[start:end + 1])
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid JSON object in output: {exc}") from exc
    if not isinstance(parsed, dict):
        raise ValueError(f"expected a JSON object, got {type(parsed).__name__}")
    return parsed


def ask(provider: ChatProvider, user: str, *, system: str | None = None,
        model_id: str | None = None, temperature: float = 0.0,
        max_tokens: int | None = None) -> str:
    """One-shot convenience: build a request for the provider's default model."""
    model = model_id or getattr(provider, "default_model", "default")
    return provider.complete(chat_request(model, user, system=system,
                                          temperature=temperature,
                                          max_tokens=max_tokens))
