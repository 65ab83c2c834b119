"""Chat-completion gateway: remote HTTP, deterministic mock, record/replay.

All backends share one request shape and one deterministic fingerprint so
that responses can be cached and replayed byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Protocol

import httpx

CACHE_SCHEMA_VERSION = 1

# Generation defaults: temperature 0.7, max_tokens 1000, top_p 1,
# frequency_penalty 0, presence_penalty 0.
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 1000
DEFAULT_TOP_P = 1.0
DEFAULT_FREQUENCY_PENALTY = 0.0
DEFAULT_PRESENCE_PENALTY = 0.0


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class AuthenticationError(GatewayError):
    pass


class RateLimitError(GatewayError):
    def __init__(self, message: str, backoff_hint_s: float = 1.0):
        super().__init__(message)
        self.backoff_hint_s = backoff_hint_s


class ContextOverflowError(GatewayError):
    """Request estimated too large for the model context; never retried."""


class CacheMissError(GatewayError):
    """Replay backend saw a fingerprint that was never recorded."""


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    top_p: float = DEFAULT_TOP_P
    frequency_penalty: float = DEFAULT_FREQUENCY_PENALTY
    presence_penalty: float = DEFAULT_PRESENCE_PENALTY
    model_name: str = "gpt-4"

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")


@dataclass(frozen=True)
class ChatRequest:
    system_message: str
    user_message: str
    params: GenerationParams = field(default_factory=GenerationParams)

    def __post_init__(self):
        if not self.system_message or not self.user_message:
            raise ValueError("messages must be non-empty")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    backend_id: str  # "remote" | "mock" | "replay"
    request_fingerprint: str
    usage: dict | None = None


def estimate_tokens(text: str) -> int:
    """Default token estimator: ceil(character count / 4)."""
    return (len(text) + 3) // 4


def fingerprint(request: ChatRequest) -> str:
    payload = json.dumps(
        {
            "system": request.system_message,
            "user": request.user_message,
            "params": asdict(request.params),
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    backend_id: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


# --- mock ------------------------------------------------------------------

_RETRIEVAL_PREAMBLE = (
    "From a legal information retrieval system, you receive a list of "
    "sentences from case law mentioning a specific term of interest:"
)

DEFAULT_FABRICATED_CITATIONS = (
    "712 F.2d 91982 (13th Cir. 1907)",
    "845 F. Supp. 2d 77321 (D. Nowhere 1911)",
)


def _parse_prompt(user_message: str) -> tuple[str, list[str]]:
    """Pull the term phrase and supplied citations out of a built prompt."""
    term = ""
    citations: list[str] = []
    in_block = False
    for line in user_message.split("\n"):
        if line.startswith("Term of interest: "):
            term = line[len("Term of interest: "):]
        elif line == _RETRIEVAL_PREAMBLE:
            in_block = True
        elif in_block and line.startswith("- "):
            # citation is the last parenthesized group on the line
            close = line.rfind(")")
            open_ = line.rfind("(", 0, close)
            if close != -1 and open_ != -1:
                citations.append(line[open_ + 1:close])
        elif in_block and not line.startswith("- "):
            in_block = False
    return term, citations


class MockBackend:
    """Pure-function stand-in for the chat model.

    For prompts that carry a retrieved-sentence block, the reply enumerates
    exactly the supplied citations, in order.  For plain prompts it emits a
    configurable set of fabricated citations (or none, when disabled), which
    lets the grounding checker be exercised in both regimes offline.
    """

    backend_id = "mock"

    def __init__(self, fabricated_citations: tuple[str, ...] = DEFAULT_FABRICATED_CITATIONS):
        self.fabricated_citations = tuple(fabricated_citations)

    def complete(self, request: ChatRequest) -> ChatResponse:
        term, citations = _parse_prompt(request.user_message)
        parts = [f'Courts have examined the term "{term}" on several occasions.']
        if citations:
            for i, cit in enumerate(citations, start=1):
                parts.append(
                    f'In one line of decisions the term "{term}" was applied to the '
                    f"facts before the court (see {cit})."
                )
            parts.append(
                f'Taken together, these decisions trace how "{term}" has been '
                "understood in practice."
            )
        else:
            for cit in self.fabricated_citations:
                parts.append(
                    f'One notable decision discussed "{term}" at length (see {cit}).'
                )
            parts.append(
                f'Overall, the courts treat "{term}" according to its ordinary meaning.'
            )
        text = " ".join(parts)
        return ChatResponse(
            text=text,
            backend_id=self.backend_id,
            request_fingerprint=fingerprint(request),
            usage={"completion_estimate": estimate_tokens(text)},
        )


# --- record / replay -------------------------------------------------------


class ReplayBackend:
    """Line-delimited record/replay cache keyed by request fingerprint.

    Reads operate on an immutable in-memory snapshot; writes append through
    a single lock-guarded writer.  When a ``recorder`` backend is supplied,
    cache misses fall through to it and the response is recorded; otherwise
    a miss raises :class:`CacheMissError`.
    """

    backend_id = "replay"

    def __init__(self, cache_path: str | Path, recorder: Backend | None = None):
        self.cache_path = Path(cache_path)
        self.recorder = recorder
        self._lock = threading.Lock()
        self._snapshot = self._load()

    def _load(self) -> dict[str, str]:
        snap: dict[str, str] = {}
        if self.cache_path.exists():
            with self.cache_path.open("r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    if rec.get("kind") == "header":
                        if rec.get("schema_version") != CACHE_SCHEMA_VERSION:
                            raise GatewayError(
                                f"unsupported cache schema_version "
                                f"{rec.get('schema_version')!r}"
                            )
                        continue
                    snap[rec["fingerprint"]] = rec["text"]
        return snap

    def complete(self, request: ChatRequest) -> ChatResponse:
        fp = fingerprint(request)
        text = self._snapshot.get(fp)
        if text is None:
            if self.recorder is None:
                raise CacheMissError(f"no recorded response for {fp}")
            recorded = self.recorder.complete(request)
            text = recorded.text
            self._append(fp, request, text)
        return ChatResponse(text=text, backend_id=self.backend_id, request_fingerprint=fp)

    def _append(self, fp: str, request: ChatRequest, text: str) -> None:
        with self._lock:
            new_file = not self.cache_path.exists()
            with self.cache_path.open("a", encoding="utf-8") as fh:
                if new_file:
                    fh.write(json.dumps(
                        {"kind": "header", "schema_version": CACHE_SCHEMA_VERSION}
                    ) + "\n")
                fh.write(json.dumps({
                    "fingerprint": fp,
                    "model": request.params.model_name,
                    "system_digest": hashlib.sha256(
                        request.system_message.encode()).hexdigest()[:16],
                    "user_digest": hashlib.sha256(
                        request.user_message.encode()).hexdigest()[:16],
                    "text": text,
                }, ensure_ascii=False) + "\n")
            self._snapshot = {**self._snapshot, fp: text}


# --- remote ----------------------------------------------------------------


class RemoteBackend:
    """Standard chat-completion HTTP API client.

    Endpoint, model and API key come from configuration or the environment
    (LEXGLOSS_API_URL / LEXGLOSS_API_KEY).  Rate-limit responses are retried
    up to 3 times with exponential backoff; context overflow is detected
    before sending and never retried.
    """

    backend_id = "remote"

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        context_limit_tokens: int = 8192,
        max_retries: int = 3,
        client: httpx.Client | None = None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint or os.environ.get(
            "LEXGLOSS_API_URL", "https://api.openai.com/v1/chat/completions"
        )
        self.api_key = api_key or os.environ.get("LEXGLOSS_API_KEY", "")
        self.context_limit_tokens = context_limit_tokens
        self.max_retries = max_retries
        self._client = client or httpx.Client(timeout=60.0)
        self._sleep = sleep

    def complete(self, request: ChatRequest) -> ChatResponse:
        est = estimate_tokens(request.system_message) + estimate_tokens(request.user_message)
        if est + request.params.max_tokens > self.context_limit_tokens:
            raise ContextOverflowError(
                f"estimated {est} prompt tokens + {request.params.max_tokens} "
                f"completion tokens exceeds limit {self.context_limit_tokens}"
            )
        body = {
            "model": request.params.model_name,
            "messages": [
                {"role": "system", "content": request.system_message},
                {"role": "user", "content": request.user_message},
            ],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
            "top_p": request.params.top_p,
            "frequency_penalty": request.params.frequency_penalty,
            "presence_penalty": request.params.presence_penalty,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"}
        attempt = 0
        while True:
            try:
                resp = self._client.post(self.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
            if resp.status_code in (401, 403):
                raise AuthenticationError(f"HTTP {resp.status_code} from backend")
            if resp.status_code == 429:
                attempt += 1
                if attempt > self.max_retries:
                    raise RateLimitError("rate limited; retries exhausted")
                self._sleep(2.0 ** (attempt - 1))
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            payload = resp.json()
            text = payload["choices"][0]["message"]["content"]
            if not text:
                raise TransportError("backend returned an empty completion")
            return ChatResponse(
                text=text,
                backend_id=self.backend_id,
                request_fingerprint=fingerprint(request),
                usage=payload.get("usage"),
            )


def complete(request: ChatRequest, backend: Backend) -> ChatResponse:
    return backend.complete(request)
