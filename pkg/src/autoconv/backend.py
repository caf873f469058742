"""Completion backends: an OpenAI-compatible HTTP client with retry/backoff,
and a deterministic scripted backend for offline runs and tests.

Every backend handle exposes a single-attempt transport; :func:`complete`
wraps it with the retry policy and stop-sequence stripping, so HTTP and
scripted backends behave identically from the caller's point of view.
"""

from __future__ import annotations

import os
import random
import threading
import time
from dataclasses import dataclass, field

import requests

DEFAULT_AUTH_ENV = "AUTOCONV_API_KEY"

GREEDY = "greedy"
NUCLEUS = "nucleus"
BEAM = "beam"
STRATEGIES = (GREEDY, NUCLEUS, BEAM)

FINISH_REASONS = ("stop", "length", "error")


class BackendError(Exception):
    """Base class for completion-backend failures."""

    #: transient errors are retried by :func:`complete`; the others surface at once
    transient = False


class BackendTimeout(BackendError):
    """The request timed out or the connection failed."""

    transient = True


class RateLimitError(BackendError):
    """HTTP 429; retried until the attempt budget runs out."""

    transient = True


class TransientBackendError(BackendError):
    """A retryable failure injected or reported by a backend."""

    transient = True


class ProtocolError(BackendError):
    """Non-2xx HTTP response. 5xx responses are treated as transient."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status
        self.transient = status is not None and status >= 500


class MalformedResponseError(BackendError):
    """2xx response whose body does not match the completions schema."""


class CapabilityError(BackendError):
    """The backend cannot honor the requested decoding strategy."""


class ScriptExhaustedError(BackendError):
    """A scripted backend received more requests than it has entries."""


@dataclass(frozen=True)
class DecodingConfig:
    """Decoding strategy plus generation limits.

    ``strategy`` is one of ``greedy``, ``nucleus`` (with ``top_p``) or
    ``beam`` (with ``beam_width``).
    """

    strategy: str
    top_p: float | None = None
    beam_width: int | None = None
    max_new_tokens: int = 128
    stop_sequences: tuple[str, ...] = ()
    temperature: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        # construction stays permissive so validate_config can enumerate
        # violations; complete() rejects invalid configs before any request
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))

    @classmethod
    def greedy(cls, **kwargs) -> "DecodingConfig":
        kwargs.setdefault("temperature", 0.0)
        return cls(strategy=GREEDY, **kwargs)

    @classmethod
    def nucleus(cls, top_p: float = 0.9, **kwargs) -> "DecodingConfig":
        return cls(strategy=NUCLEUS, top_p=top_p, **kwargs)

    @classmethod
    def beam(cls, width: int = 4, **kwargs) -> "DecodingConfig":
        kwargs.setdefault("temperature", 0.0)
        return cls(strategy=BEAM, beam_width=width, **kwargs)

    def to_dict(self) -> dict:
        out: dict = {
            "strategy": self.strategy,
            "max_new_tokens": self.max_new_tokens,
            "temperature": self.temperature,
        }
        if self.strategy == NUCLEUS:
            out["top_p"] = self.top_p
        if self.strategy == BEAM:
            out["width"] = self.beam_width
        if self.stop_sequences:
            out["stop_sequences"] = list(self.stop_sequences)
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DecodingConfig":
        return cls(
            strategy=data["strategy"],
            top_p=data.get("top_p"),
            beam_width=data.get("width"),
            max_new_tokens=data.get("max_new_tokens", 128),
            stop_sequences=tuple(data.get("stop_sequences", ())),
            temperature=data.get("temperature", 1.0),
            seed=data.get("seed"),
        )


def validate_config(config: DecodingConfig) -> list[str]:
    """Return every invariant violation of ``config`` (empty list means ok)."""
    violations = []
    if config.strategy not in STRATEGIES:
        violations.append(f"unknown strategy {config.strategy!r}")
    if config.strategy == NUCLEUS:
        if config.top_p is None or not 0.0 < config.top_p <= 1.0:
            violations.append("top_p out of range (0, 1]")
    elif config.top_p is not None:
        violations.append(f"top_p set for {config.strategy} strategy")
    if config.strategy == BEAM:
        if config.beam_width is None or config.beam_width < 1:
            violations.append("beam width must be >= 1")
    elif config.beam_width is not None:
        violations.append(f"beam width set for {config.strategy} strategy")
    if config.max_new_tokens < 1:
        violations.append("max_new_tokens must be >= 1")
    if config.temperature < 0.0:
        violations.append("temperature must be >= 0")
    return violations


@dataclass(frozen=True)
class Completion:
    """One generated continuation, with token logprobs when available."""

    text: str
    tokens: tuple[str, ...] | None = None
    token_logprobs: tuple[float, ...] | None = None
    finish_reason: str = "stop"

    def __post_init__(self):
        if self.tokens is not None:
            object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.token_logprobs is not None:
            object.__setattr__(self, "token_logprobs", tuple(self.token_logprobs))
        if (self.tokens is None) != (self.token_logprobs is None):
            raise ValueError("tokens and token_logprobs must be present together")
        if self.tokens is not None and len(self.tokens) != len(self.token_logprobs):
            raise ValueError("tokens and token_logprobs must have equal length")
        if self.token_logprobs is not None and any(lp > 0 for lp in self.token_logprobs):
            raise ValueError("token logprobs must be <= 0")
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff: attempt k waits base_backoff * 2^(k-1) * (1 +/- jitter)."""

    max_attempts: int = 3
    base_backoff: float = 1.0
    jitter: float = 0.1

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_backoff < 0:
            raise ValueError("base_backoff must be >= 0")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must be in [0, 1)")

    def delay(self, attempt: int, rng: random.Random | None = None) -> float:
        base = self.base_backoff * 2 ** (attempt - 1)
        if self.jitter == 0.0:
            return base
        rng = rng or random
        return base * rng.uniform(1.0 - self.jitter, 1.0 + self.jitter)


@dataclass(frozen=True)
class BackendSpec:
    """Connection settings for an OpenAI-compatible completions endpoint."""

    endpoint: str
    model_id: str
    auth_env: str = DEFAULT_AUTH_ENV
    timeout: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")


def wire_request(model_id: str, prompt: str, config: DecodingConfig) -> dict:
    """Map a decoding config onto the completions wire format.

    The mapping is injective over strategies: greedy -> temperature 0 and no
    top_p, nucleus -> top_p as configured, beam -> best_of with temperature 0.
    """
    body: dict = {
        "model": model_id,
        "prompt": prompt,
        "max_tokens": config.max_new_tokens,
        "logprobs": 0,
    }
    if config.strategy == GREEDY:
        body["temperature"] = 0.0
    elif config.strategy == NUCLEUS:
        body["temperature"] = config.temperature
        body["top_p"] = config.top_p
    elif config.strategy == BEAM:
        body["temperature"] = 0.0
        body["best_of"] = config.beam_width
    if config.stop_sequences:
        body["stop"] = list(config.stop_sequences)
    if config.seed is not None:
        body["seed"] = config.seed
    return body


def complete(backend, prompt: str, config: DecodingConfig) -> Completion:
    """Request one completion, retrying transient failures per the backend's policy.

    ``backend`` is either a :class:`BackendSpec` (HTTP transport) or any
    object with an ``attempt(prompt, config)`` method and a ``retry``
    attribute (e.g. :class:`ScriptedBackend`).
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    violations = validate_config(config)
    if violations:
        raise ValueError("invalid decoding config: " + "; ".join(violations))

    policy: RetryPolicy = backend.retry
    last: BackendError | None = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            if isinstance(backend, BackendSpec):
                completion = _http_attempt(backend, prompt, config)
            else:
                completion = backend.attempt(prompt, config)
        except BackendError as err:
            if not err.transient:
                raise
            last = err
            if attempt < policy.max_attempts:
                time.sleep(policy.delay(attempt))
            continue
        return _strip_stop_sequences(completion, config.stop_sequences)
    assert last is not None
    raise last


def _http_attempt(spec: BackendSpec, prompt: str, config: DecodingConfig) -> Completion:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(spec.auth_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = wire_request(spec.model_id, prompt, config)
    try:
        resp = requests.post(spec.endpoint, json=body, headers=headers, timeout=spec.timeout)
    except (requests.Timeout, requests.ConnectionError) as err:
        raise BackendTimeout(f"{spec.endpoint}: {err}") from err

    if resp.status_code == 429:
        raise RateLimitError(f"{spec.endpoint}: rate limited (429)")
    if not 200 <= resp.status_code < 300:
        raise ProtocolError(
            f"{spec.endpoint}: HTTP {resp.status_code}: {resp.text[:200]}",
            status=resp.status_code,
        )

    try:
        choice = resp.json()["choices"][0]
        text = choice["text"]
    except (ValueError, KeyError, IndexError, TypeError) as err:
        raise MalformedResponseError(f"{spec.endpoint}: bad completion body: {err}") from err

    tokens, logprobs = _extract_logprobs(choice.get("logprobs"))
    finish = choice.get("finish_reason")
    if finish not in FINISH_REASONS:
        finish = "stop"
    return Completion(text=text, tokens=tokens, token_logprobs=logprobs, finish_reason=finish)


def _extract_logprobs(payload) -> tuple[tuple[str, ...] | None, tuple[float, ...] | None]:
    # Absent or malformed logprobs degrade to None; NLL is then unavailable.
    if not isinstance(payload, dict):
        return None, None
    tokens = payload.get("tokens")
    logprobs = payload.get("token_logprobs")
    if not isinstance(tokens, list) or not isinstance(logprobs, list):
        return None, None
    if len(tokens) != len(logprobs):
        return None, None
    if any(not isinstance(lp, (int, float)) or lp > 0 for lp in logprobs):
        return None, None
    return tuple(tokens), tuple(float(lp) for lp in logprobs)


def _strip_stop_sequences(completion: Completion, stops: tuple[str, ...]) -> Completion:
    """Truncate the text at the earliest stop sequence occurrence."""
    cut = -1
    for stop in stops:
        if not stop:
            continue
        i = completion.text.find(stop)
        if i != -1 and (cut == -1 or i < cut):
            cut = i
    if cut == -1:
        return completion
    # token alignment is lost after truncation, so logprobs are dropped
    return Completion(text=completion.text[:cut], finish_reason="stop")


class ScriptedBackend:
    """Replays canned completions in request order; records every request.

    Entries may be strings or :class:`Completion` values. ``fail_once_every``
    injects one transient failure on the first attempt of every Nth request,
    which makes robustness tests deterministic. Ordinal assignment is
    serialized, so replay order is well defined under concurrency.
    """

    def __init__(
        self,
        script,
        *,
        model_id: str = "scripted",
        retry: RetryPolicy | None = None,
        fail_once_every: int = 0,
        supported_strategies=STRATEGIES,
    ):
        entries = [Completion(text=e) if isinstance(e, str) else e for e in script]
        if not entries:
            raise ValueError("script must be non-empty")
        self._entries = entries
        self._supported = tuple(supported_strategies)
        self._fail_once_every = fail_once_every
        self._failed_ordinals: set[int] = set()
        self._lock = threading.Lock()
        self._cursor = 0
        self.model_id = model_id
        self.retry = retry or RetryPolicy(max_attempts=3, base_backoff=0.0, jitter=0.0)
        self.requests: list[tuple[str, DecodingConfig]] = []
        self.injected_failures = 0

    def attempt(self, prompt: str, config: DecodingConfig) -> Completion:
        if config.strategy not in self._supported:
            raise CapabilityError(f"scripted backend does not support {config.strategy}")
        with self._lock:
            ordinal = self._cursor
            if (
                self._fail_once_every
                and (ordinal + 1) % self._fail_once_every == 0
                and ordinal not in self._failed_ordinals
            ):
                self._failed_ordinals.add(ordinal)
                self.injected_failures += 1
                raise TransientBackendError(f"injected transient failure at request {ordinal}")
            if ordinal >= len(self._entries):
                raise ScriptExhaustedError(
                    f"script exhausted after {len(self._entries)} completions"
                )
            self._cursor += 1
            self.requests.append((prompt, config))
            return self._entries[ordinal]


def scripted_backend(script, **kwargs) -> ScriptedBackend:
    """Build a deterministic scripted backend from canned completions."""
    return ScriptedBackend(script, **kwargs)
