"""Model access: one HTTP chat-completions client and one scripted mock.

Everything upstream (navigator, executor, synthesizer, tools) talks to a model
through the tiny ``ModelHandle`` protocol — ``complete(messages, decoding)`` —
so the scripted mock is a drop-in replacement for the network client in tests
and golden runs. Stop-sequence semantics live here in one place: completions
always *retain* the stop string that ended them, re-appending it if a server
stripped it, because the downstream parser keys off those closing tags.
"""

from __future__ import annotations

import base64
import json
import logging
import mimetypes
import os
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Protocol

import requests

logger = logging.getLogger(__name__)


class GatewayError(Exception):
    """Base class for model-access failures."""


class TransportError(GatewayError):
    """Network/HTTP-level failure that survived the retry budget."""


class ProtocolError(GatewayError):
    """The server answered, but not with a usable chat completion."""


class BudgetExceeded(GatewayError):
    """The server rejected the request for exceeding its token budget."""


class ScriptMismatch(GatewayError):
    """A scripted reply's predicate did not match the incoming prompt."""


class ScriptExhausted(GatewayError):
    """The scripted mock ran out of replies."""


class StopReason(Enum):
    STOP_SEQUENCE = "StopSequence"
    END_OF_SEQUENCE = "EndOfSequence"
    LENGTH_CAP = "LengthCap"


@dataclass(frozen=True)
class DecodingConfig:
    """Sampling parameters for one completion call.

    ``stop_sequences`` are matched verbatim and retained in the returned text.
    """

    temperature: float
    top_p: float
    top_k: int
    repetition_penalty: float
    max_new_tokens: int = 2048
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p out of range: {self.top_p}")
        if self.top_k < 0:
            raise ValueError(f"top_k must be >= 0: {self.top_k}")
        if self.repetition_penalty <= 0.0:
            raise ValueError(
                f"repetition_penalty must be > 0: {self.repetition_penalty}"
            )
        if self.max_new_tokens <= 0:
            raise ValueError(f"max_new_tokens must be > 0: {self.max_new_tokens}")

    def with_stops(self, stops: tuple[str, ...]) -> "DecodingConfig":
        return replace(self, stop_sequences=stops)


#: Stock sampling profiles; select by name in the run config.
DECODING_PRESETS: dict[str, DecodingConfig] = {
    "preset-a": DecodingConfig(
        temperature=0.7, top_p=0.9, top_k=50, repetition_penalty=1.05
    ),
    "preset-b": DecodingConfig(
        temperature=0.8, top_p=0.8, top_k=40, repetition_penalty=1.05
    ),
}


def named_preset(name: str) -> DecodingConfig:
    try:
        return DECODING_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown decoding preset {name!r} (have: {sorted(DECODING_PRESETS)})"
        ) from None


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    """Opaque image reference: a local path or a URL, passed through as-is
    (local files are inlined as data URLs at the wire boundary)."""

    ref: str


Part = TextPart | ImagePart


@dataclass(frozen=True)
class Message:
    role: str
    parts: tuple[Part, ...]

    @classmethod
    def user(cls, text: str, image: str | None = None) -> "Message":
        parts: tuple[Part, ...] = (TextPart(text),)
        if image is not None:
            parts = (ImagePart(image), TextPart(text))
        return cls("user", parts)

    def text_content(self) -> str:
        return "\n".join(p.text for p in self.parts if isinstance(p, TextPart))


@dataclass(frozen=True)
class Completion:
    """One model reply. If ``stop_reason`` is STOP_SEQUENCE, ``text`` ends
    with ``matched_stop`` and ``matched_stop`` is one of the configured stops.
    ``model_time`` is the wall time of the call in seconds (0.0 for mocks)."""

    text: str
    stop_reason: StopReason
    matched_stop: str | None
    model_time: float


class ModelHandle(Protocol):
    def complete(
        self, messages: list[Message], decoding: DecodingConfig
    ) -> Completion:
        ...


def apply_stops(
    text: str, stops: tuple[str, ...]
) -> tuple[str, str | None]:
    """Cut ``text`` at the earliest stop occurrence, retaining the stop.

    Returns (possibly truncated text, matched stop or None). Used both on raw
    scripted replies and defensively on server output.
    """
    best_at = -1
    best_stop: str | None = None
    for stop in stops:
        at = text.find(stop)
        if at != -1 and (best_at == -1 or at < best_at):
            best_at, best_stop = at, stop
    if best_stop is None:
        return text, None
    return text[: best_at + len(best_stop)], best_stop


def _rendered_prompt(messages: list[Message]) -> str:
    return "\n".join(m.text_content() for m in messages)


# --------------------------------------------------------------------------
# HTTP client


def _image_part_to_wire(ref: str) -> dict:
    if os.path.isfile(ref):
        mime = mimetypes.guess_type(ref)[0] or "image/png"
        with open(ref, "rb") as fh:
            b64 = base64.b64encode(fh.read()).decode("ascii")
        url = f"data:{mime};base64,{b64}"
    else:
        url = ref
    return {"type": "image_url", "image_url": {"url": url}}


def _message_to_wire(msg: Message) -> dict:
    has_image = any(isinstance(p, ImagePart) for p in msg.parts)
    if not has_image:
        return {"role": msg.role, "content": msg.text_content()}
    content = []
    for part in msg.parts:
        if isinstance(part, ImagePart):
            content.append(_image_part_to_wire(part.ref))
        else:
            content.append({"type": "text", "text": part.text})
    return {"role": msg.role, "content": content}


_BUDGET_MARKERS = ("context length", "context_length", "maximum context", "too many tokens")


class HttpGateway:
    """Chat-completions JSON-over-HTTP client with bounded retries.

    Retries transport failures, 5xx and 429 up to ``max_attempts`` with
    exponential backoff; malformed responses raise ProtocolError without
    retry. Concurrency is bounded by a semaphore sized to the connection pool.
    """

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key: str | None = None,
        *,
        timeout: float = 120.0,
        max_attempts: int = 3,
        pool_size: int = 8,
    ) -> None:
        if "/chat/completions" not in endpoint:
            endpoint = endpoint.rstrip("/") + "/v1/chat/completions"
        self.endpoint = endpoint
        self.model_id = model_id
        self.timeout = timeout
        self.max_attempts = max_attempts
        self._slots = threading.Semaphore(pool_size)
        self._session = requests.Session()
        adapter = requests.adapters.HTTPAdapter(
            pool_connections=pool_size, pool_maxsize=pool_size
        )
        self._session.mount("http://", adapter)
        self._session.mount("https://", adapter)
        if api_key:
            self._session.headers["Authorization"] = f"Bearer {api_key}"

    def _payload(self, messages: list[Message], decoding: DecodingConfig) -> dict:
        body = {
            "model": self.model_id,
            "messages": [_message_to_wire(m) for m in messages],
            "temperature": decoding.temperature,
            "top_p": decoding.top_p,
            "top_k": decoding.top_k,
            "repetition_penalty": decoding.repetition_penalty,
            "max_tokens": decoding.max_new_tokens,
        }
        if decoding.stop_sequences:
            body["stop"] = list(decoding.stop_sequences)
        return body

    def complete(
        self, messages: list[Message], decoding: DecodingConfig
    ) -> Completion:
        body = self._payload(messages, decoding)
        last_err: Exception | None = None
        with self._slots:
            started = time.monotonic()
            for attempt in range(self.max_attempts):
                if attempt:
                    time.sleep(min(0.5 * 2 ** (attempt - 1), 4.0))
                try:
                    resp = self._session.post(
                        self.endpoint, json=body, timeout=self.timeout
                    )
                except requests.RequestException as exc:
                    last_err = exc
                    logger.warning("gateway attempt %d failed: %s", attempt + 1, exc)
                    continue
                if resp.status_code in (429,) or resp.status_code >= 500:
                    last_err = TransportError(
                        f"HTTP {resp.status_code}: {resp.text[:200]}"
                    )
                    logger.warning("gateway attempt %d: %s", attempt + 1, last_err)
                    continue
                if resp.status_code >= 400:
                    text = resp.text[:500]
                    if any(m in text.lower() for m in _BUDGET_MARKERS):
                        raise BudgetExceeded(f"HTTP {resp.status_code}: {text}")
                    raise ProtocolError(f"HTTP {resp.status_code}: {text}")
                return self._parse_response(resp, decoding, time.monotonic() - started)
        raise TransportError(f"gateway gave up after {self.max_attempts} attempts: {last_err}")

    def _parse_response(
        self, resp: requests.Response, decoding: DecodingConfig, elapsed: float
    ) -> Completion:
        try:
            data = resp.json()
            choice = data["choices"][0]
            text = choice["message"]["content"]
            if not isinstance(text, str):
                raise TypeError("content is not a string")
            finish = choice.get("finish_reason")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}") from exc

        cut, matched = apply_stops(text, decoding.stop_sequences)
        if matched is not None:
            return Completion(cut, StopReason.STOP_SEQUENCE, matched, elapsed)
        if finish == "stop":
            # Some servers strip the stop string; they may name it so we can
            # restore it. Without a name there is nothing to re-append.
            named = choice.get("stop_reason") or choice.get("matched_stop")
            if isinstance(named, str) and named in decoding.stop_sequences:
                return Completion(
                    text + named, StopReason.STOP_SEQUENCE, named, elapsed
                )
        if finish == "length":
            return Completion(text, StopReason.LENGTH_CAP, None, elapsed)
        return Completion(text, StopReason.END_OF_SEQUENCE, None, elapsed)


# --------------------------------------------------------------------------
# Scripted mock


@dataclass(frozen=True)
class ScriptEntry:
    reply: str
    predicate: str | None = None


class ScriptedModel:
    """Deterministic stand-in for the HTTP gateway.

    Replies are consumed in order. An entry's ``predicate`` (a substring that
    must occur in the rendered prompt) guards against calls arriving out of
    the expected order; a mismatch raises ScriptMismatch with enough context
    to see what diverged. Stop handling matches the real gateway, so replies
    containing a closing tag are truncated after it with the stop retained.
    """

    def __init__(self, entries: list[ScriptEntry]):
        self._entries = list(entries)
        self._next = 0
        self._lock = threading.Lock()

    @property
    def calls_made(self) -> int:
        return self._next

    def complete(
        self, messages: list[Message], decoding: DecodingConfig
    ) -> Completion:
        with self._lock:
            if self._next >= len(self._entries):
                raise ScriptExhausted(
                    f"script exhausted after {len(self._entries)} replies"
                )
            entry = self._entries[self._next]
            self._next += 1
        prompt = _rendered_prompt(messages)
        if entry.predicate is not None and entry.predicate not in prompt:
            raise ScriptMismatch(
                f"reply #{self._next} expected prompt containing "
                f"{entry.predicate!r}; prompt tail was: ...{prompt[-320:]!r}"
            )
        cut, matched = apply_stops(entry.reply, decoding.stop_sequences)
        if matched is not None:
            return Completion(cut, StopReason.STOP_SEQUENCE, matched, 0.0)
        return Completion(entry.reply, StopReason.END_OF_SEQUENCE, None, 0.0)


def parse_script_entries(raw: object) -> list[ScriptEntry]:
    if not isinstance(raw, list):
        raise ValueError("mock script must be a JSON array of entries")
    entries = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "reply" not in item:
            raise ValueError(f"script entry {i} must be an object with a 'reply' key")
        pred = item.get("predicate")
        if pred is not None and not isinstance(pred, str):
            raise ValueError(f"script entry {i}: predicate must be a string")
        entries.append(ScriptEntry(reply=str(item["reply"]), predicate=pred))
    return entries


def load_script(path: str | Path) -> ScriptedModel:
    """Load a mock script file: a JSON array of {predicate?, reply} objects."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return ScriptedModel(parse_script_entries(raw))


class MeteredModel:
    """Per-task wrapper that sums reported model time across calls."""

    def __init__(self, inner: ModelHandle):
        self._inner = inner
        self.model_time = 0.0
        self.calls = 0

    def complete(
        self, messages: list[Message], decoding: DecodingConfig
    ) -> Completion:
        completion = self._inner.complete(messages, decoding)
        self.model_time += completion.model_time
        self.calls += 1
        return completion
