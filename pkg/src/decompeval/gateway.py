"""Uniform chat-completion access for judge and repair roles.

Exchanges are persisted to a content-addressed replay store keyed by a hash of
(model_id, messages), so completed judge/repair calls are never re-issued on
resume and the whole test suite runs without a network. Decoding defaults are
deterministic: temperature 0, top_p 1.0.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from statistics import mean


class GatewayError(RuntimeError):
    """Transport failure that survived the retry budget."""


class ContextOverflowError(GatewayError):
    """Prompt exceeds the model's configured context hint; raised before transport."""


class ReplayMissError(GatewayError):
    """Replay-only client found no recording for the request key."""


class ReplayConflictError(GatewayError):
    """A live response disagreed with an existing recording for the same key."""


class ExtractionError(ValueError):
    """No well-formed JSON object found in a model response."""


class SchemaValidationError(ValueError):
    def __init__(self, schema_id: str, missing: list[str]):
        self.schema_id = schema_id
        self.missing = missing
        super().__init__(f"response JSON does not satisfy '{schema_id}': missing {missing}")


@dataclass(frozen=True)
class ModelConfig:
    model_id: str
    temperature: float = 0.0
    top_p: float = 1.0
    endpoint: str = ""
    auth_env: str = ""  # name of the env var holding the secret, never the secret itself
    max_context_hint: int = 0  # tokens; 0 disables the local guard

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")


@dataclass(frozen=True)
class UsageRecord:
    prompt_tokens: int
    completion_tokens: int
    wall_time_ms: int

    def __post_init__(self):
        if min(self.prompt_tokens, self.completion_tokens, self.wall_time_ms) < 0:
            raise ValueError("usage fields must be non-negative")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class ChatExchange:
    request_messages: tuple[tuple[str, str], ...]  # (role, text)
    response_text: str
    usage: UsageRecord
    key: str = ""


def exchange_key(model_id: str, messages) -> str:
    canonical = json.dumps(
        {"model_id": model_id, "messages": [[r, t] for r, t in messages]},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def estimate_tokens(messages) -> int:
    return sum(len(text) for _, text in messages) // 4 + 4 * len(list(messages))


class ReplayStore:
    """Content-addressed exchange files under <run dir>/exchanges/. Thread-safe."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> ChatExchange | None:
        path = self._path(key)
        if not path.is_file():
            return None
        raw = json.loads(path.read_text(encoding="utf-8"))
        return ChatExchange(
            request_messages=tuple((r, t) for r, t in raw["request_messages"]),
            response_text=raw["response_text"],
            usage=UsageRecord(**raw["usage"]),
            key=key,
        )

    def put(self, exchange: ChatExchange) -> None:
        with self._lock:
            existing = self.get(exchange.key)
            if existing is not None and existing.response_text != exchange.response_text:
                raise ReplayConflictError(
                    f"recording {exchange.key} already exists with a different response"
                )
            self.root.mkdir(parents=True, exist_ok=True)
            payload = {
                "request_messages": [[r, t] for r, t in exchange.request_messages],
                "response_text": exchange.response_text,
                "usage": {
                    "prompt_tokens": exchange.usage.prompt_tokens,
                    "completion_tokens": exchange.usage.completion_tokens,
                    "wall_time_ms": exchange.usage.wall_time_ms,
                },
            }
            self._path(exchange.key).write_text(
                json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8"
            )


class RateLimiter:
    """Minimum spacing between calls per endpoint, safe under concurrent use."""

    def __init__(self, min_interval_s: float = 0.0):
        self.min_interval_s = min_interval_s
        self._lock = threading.Lock()
        self._last: dict[str, float] = {}

    def wait(self, endpoint: str) -> None:
        if self.min_interval_s <= 0:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                last = self._last.get(endpoint, 0.0)
                delay = last + self.min_interval_s - now
                if delay <= 0:
                    self._last[endpoint] = now
                    return
            time.sleep(delay)


class ScriptedClient:
    """Deterministic offline stand-in: response = fn(config, messages)."""

    def __init__(self, fn):
        self.fn = fn

    def send(self, config: ModelConfig, messages) -> tuple[str, UsageRecord]:
        start = time.monotonic()
        text = self.fn(config, messages)
        wall = int((time.monotonic() - start) * 1000)
        return text, UsageRecord(
            prompt_tokens=estimate_tokens(messages),
            completion_tokens=len(text) // 4,
            wall_time_ms=wall,
        )


class HttpClient:
    """Provider-agnostic chat-completion POST (model, messages, temperature, top_p)."""

    def __init__(self, timeout_s: float = 120.0):
        self.timeout_s = timeout_s

    def send(self, config: ModelConfig, messages) -> tuple[str, UsageRecord]:
        import os

        import requests

        headers = {"Content-Type": "application/json"}
        if config.auth_env:
            secret = os.environ.get(config.auth_env, "")
            if secret:
                headers["Authorization"] = f"Bearer {secret}"
        body = {
            "model": config.model_id,
            "messages": [{"role": r, "content": t} for r, t in messages],
            "temperature": config.temperature,
            "top_p": config.top_p,
        }
        start = time.monotonic()
        resp = requests.post(config.endpoint, json=body, headers=headers, timeout=self.timeout_s)
        resp.raise_for_status()
        data = resp.json()
        wall = int((time.monotonic() - start) * 1000)
        text = data["choices"][0]["message"]["content"]
        usage = data.get("usage", {})
        return text, UsageRecord(
            prompt_tokens=int(usage.get("prompt_tokens", estimate_tokens(messages))),
            completion_tokens=int(usage.get("completion_tokens", len(text) // 4)),
            wall_time_ms=wall,
        )


class Gateway:
    """complete() with store-first resume, bounded retries, and usage accounting.

    mode 'record' consults the store, then the wrapped client; mode 'replay'
    never touches the client and errors on a store miss.
    """

    def __init__(
        self,
        store: ReplayStore,
        client=None,
        mode: str = "record",
        max_attempts: int = 3,
        backoff_s: float = 0.5,
        rate_limiter: RateLimiter | None = None,
    ):
        if mode not in ("record", "replay"):
            raise ValueError(f"unknown gateway mode: {mode}")
        if mode == "record" and client is None:
            raise ValueError("record mode requires a client")
        self.store = store
        self.client = client
        self.mode = mode
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.rate_limiter = rate_limiter or RateLimiter()

    def complete(self, config: ModelConfig, messages) -> ChatExchange:
        messages = [(r, t) for r, t in messages]
        if not messages:
            raise ValueError("messages must be non-empty")
        if config.max_context_hint and estimate_tokens(messages) > config.max_context_hint:
            raise ContextOverflowError(
                f"prompt (~{estimate_tokens(messages)} tokens) exceeds the "
                f"{config.max_context_hint}-token context hint for {config.model_id}"
            )
        key = exchange_key(config.model_id, messages)
        recorded = self.store.get(key)
        if recorded is not None:
            return recorded
        if self.mode == "replay":
            raise ReplayMissError(f"no recording for key {key} ({config.model_id})")

        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                self.rate_limiter.wait(config.endpoint)
                text, usage = self.client.send(config, messages)
                exchange = ChatExchange(
                    request_messages=tuple(messages), response_text=text, usage=usage, key=key
                )
                self.store.put(exchange)
                return exchange
            except (ContextOverflowError, ReplayConflictError):
                raise
            except Exception as exc:  # noqa: BLE001 - transport errors are client-specific
                last_error = exc
        raise GatewayError(
            f"completion failed after {self.max_attempts} attempts: {last_error}"
        ) from last_error


# ---------------------------------------------------------------------------
# Deterministic JSON extraction


@dataclass(frozen=True)
class Schema:
    schema_id: str
    validate: object  # callable(parsed) -> list of missing-field names


_SCHEMA_REGISTRY: dict[str, Schema] = {}


def register_schema(schema_id: str, validate) -> None:
    _SCHEMA_REGISTRY[schema_id] = Schema(schema_id=schema_id, validate=validate)


def _ensure_builtin_schemas() -> None:
    # Scorecard and edit schemas register on their owning module's import.
    import decompeval.readability  # noqa: F401
    import decompeval.repair  # noqa: F401


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _candidate_objects(text: str):
    """Yield parseable JSON objects in order: fenced blocks first, then brace scan."""
    for m in _FENCE_RE.finditer(text):
        block = m.group(1).strip()
        if block.startswith("{"):
            try:
                yield json.loads(block)
            except json.JSONDecodeError:
                pass
    decoder = json.JSONDecoder()
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
            if isinstance(obj, dict):
                yield obj
        except json.JSONDecodeError:
            pass
        pos = text.find("{", pos + 1)


def extract_json(response_text: str, schema_id: str) -> dict:
    """Extract the first well-formed JSON object satisfying the registered schema.

    Raises ExtractionError when no JSON object parses at all, and
    SchemaValidationError (naming the missing fields) when objects parse but
    none satisfies the schema.
    """
    if schema_id not in _SCHEMA_REGISTRY:
        _ensure_builtin_schemas()
    if schema_id not in _SCHEMA_REGISTRY:
        raise ValueError(f"schema '{schema_id}' is not registered")
    schema = _SCHEMA_REGISTRY[schema_id]
    first_missing: list[str] | None = None
    found_any = False
    for obj in _candidate_objects(response_text):
        found_any = True
        missing = schema.validate(obj)
        if not missing:
            return obj
        if first_missing is None:
            first_missing = missing
    if not found_any:
        raise ExtractionError("no JSON object found in model response")
    raise SchemaValidationError(schema_id, first_missing or [])


# ---------------------------------------------------------------------------
# Efficiency accounting


@dataclass(frozen=True)
class UsageSummary:
    total_tokens: int
    avg_tokens: float
    median_tokens: float
    avg_time_ms: float
    median_time_ms: float


def _lower_median(values: list[float]) -> float:
    # Lower-middle element for even counts (documented reporting convention).
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def aggregate_usage(task_exchanges: list[list[ChatExchange]]) -> UsageSummary:
    """Totals and order statistics over per-task token/time sums."""
    if not task_exchanges:
        return UsageSummary(0, 0.0, 0.0, 0.0, 0.0)
    token_sums = [sum(e.usage.total_tokens for e in task) for task in task_exchanges]
    time_sums = [sum(e.usage.wall_time_ms for e in task) for task in task_exchanges]
    return UsageSummary(
        total_tokens=sum(token_sums),
        avg_tokens=mean(token_sums),
        median_tokens=_lower_median(token_sums),
        avg_time_ms=mean(time_sums),
        median_time_ms=_lower_median(time_sums),
    )
