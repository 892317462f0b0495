"""Chat-completion backends: request/response wire formats, on-disk response
cache, retries, scripted test backend and cost accounting."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping

import httpx

from .errors import (
    AuthFailed,
    BackendTimeout,
    BackendUnreachable,
    ConfigError,
    MalformedBackendReply,
    MissingRateCard,
)
from .prompts import PromptInstance

log = logging.getLogger(__name__)

SCRIPT_CASE_HEADER = "X-Sentinel-Case"
SCRIPT_ATTEMPT_HEADER = "X-Sentinel-Attempt"
SCRIPT_DIGEST_HEADER = "X-Sentinel-Digest"


class ApiFlavor(str, Enum):
    CHAT_COMPLETIONS = "chat_completions"
    LOCAL_DAEMON = "local_daemon"


@dataclass(frozen=True)
class RateCard:
    input_cost_per_1k_tokens: Decimal = Decimal(0)
    output_cost_per_1k_tokens: Decimal = Decimal(0)

    def __post_init__(self):
        for name in ("input_cost_per_1k_tokens", "output_cost_per_1k_tokens"):
            value = Decimal(str(getattr(self, name)))
            if value < 0:
                raise ConfigError(f"{name} must be >= 0")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class BackendProfile:
    name: str
    endpoint_url: str
    model_id: str
    api_flavor: ApiFlavor = ApiFlavor.CHAT_COMPLETIONS
    default_temperature: float = 0.8
    auth_token_env: str | None = None
    rate_card: RateCard = field(default_factory=RateCard)
    max_retries: int = 3
    timeout: float = 120.0
    max_in_flight: int = 2
    # path to a scripted reply file; turns the profile into an offline mock
    script: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "api_flavor", ApiFlavor(self.api_flavor))
        if not self.name:
            raise ConfigError("backend name must be non-empty")
        if not 0.0 <= float(self.default_temperature) <= 1.0:
            raise ConfigError(f"{self.name}: default_temperature must lie in [0, 1]")
        if self.max_retries < 0:
            raise ConfigError(f"{self.name}: max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError(f"{self.name}: max_in_flight must be >= 1")
        if self.timeout <= 0:
            raise ConfigError(f"{self.name}: timeout must be positive")

    @property
    def is_scripted(self) -> bool:
        return self.script is not None

    @classmethod
    def from_mapping(cls, raw: Mapping, base_dir: Path | None = None) -> "BackendProfile":
        raw = dict(raw)
        rate = RateCard(
            Decimal(str(raw.pop("input_cost_per_1k_tokens", 0))),
            Decimal(str(raw.pop("output_cost_per_1k_tokens", 0))),
        )
        if "timeout_secs" in raw:
            raw["timeout"] = float(raw.pop("timeout_secs"))
        script = raw.get("script")
        if script is not None and base_dir is not None and not Path(script).is_absolute():
            raw["script"] = str((base_dir / script).resolve())
        raw.setdefault("endpoint_url", "mock://scripted" if script else "")
        raw.setdefault("model_id", raw.get("name", ""))
        known = set(cls.__dataclass_fields__) - {"rate_card"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown backend keys: {', '.join(sorted(unknown))}")
        return cls(rate_card=rate, **raw)


def normalize_temperature(t: float) -> str:
    """Canonical text for a temperature, used in digests and directory names."""
    return format(Decimal(str(float(t))).normalize(), "f") if t else "0"


def request_digest(backend: str, model: str, prompt_text: str, temperature: float, attempt_index: int) -> str:
    payload = json.dumps(
        {
            "backend": backend,
            "model": model,
            "prompt": prompt_text,
            "temperature": normalize_temperature(temperature),
            "attempt_index": attempt_index,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AttemptRecord:
    case_id: str
    backend_name: str
    attempt_index: int
    temperature: float
    raw_response: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    from_cache: bool
    request_digest: str
    model_id: str = ""

    def __post_init__(self):
        if self.attempt_index < 1:
            raise ValueError("attempt_index is 1-based")
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("from_cache")
        return d

    @classmethod
    def from_dict(cls, d: Mapping, from_cache: bool = False) -> "AttemptRecord":
        d = dict(d)
        d.pop("from_cache", None)
        return cls(from_cache=from_cache, **d)


class ResponseCache:
    """Append-only directory of attempt records, one JSON file per digest."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def path_for(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, digest: str) -> AttemptRecord | None:
        path = self.path_for(digest)
        if not path.exists():
            return None
        return AttemptRecord.from_dict(json.loads(path.read_text(encoding="utf-8")), from_cache=True)

    def put(self, record: AttemptRecord) -> None:
        path = self.path_for(record.request_digest)
        with self._write_lock:
            if path.exists():
                return
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                           encoding="utf-8")
            os.replace(tmp, path)

    def __iter__(self):
        for path in sorted(self.root.glob("*.json")):
            yield AttemptRecord.from_dict(json.loads(path.read_text(encoding="utf-8")), from_cache=True)


# ----------------------------------------------------------------- wire format


def build_request(profile: BackendProfile, prompt_text: str, temperature: float) -> tuple[str, dict]:
    messages = [{"role": "user", "content": prompt_text}]
    base = profile.endpoint_url.rstrip("/")
    if profile.api_flavor is ApiFlavor.CHAT_COMPLETIONS:
        body = {"model": profile.model_id, "messages": messages, "temperature": temperature, "stream": False}
        return f"{base}/chat/completions", body
    body = {"model": profile.model_id, "messages": messages, "stream": False, "options": {"temperature": temperature}}
    return f"{base}/api/chat", body


def parse_reply(profile: BackendProfile, payload) -> tuple[str, int, int]:
    """Extract (text, prompt_tokens, completion_tokens) or raise
    MALFORMED_BACKEND_REPLY."""
    try:
        if profile.api_flavor is ApiFlavor.CHAT_COMPLETIONS:
            text = payload["choices"][0]["message"]["content"]
            usage = payload.get("usage") or {}
            pt, ct = usage.get("prompt_tokens", 0), usage.get("completion_tokens", 0)
        else:
            text = payload["message"]["content"]
            pt, ct = payload.get("prompt_eval_count", 0), payload.get("eval_count", 0)
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedBackendReply(f"{profile.name}: reply lacks completion text ({exc!r})") from None
    if not isinstance(text, str):
        raise MalformedBackendReply(f"{profile.name}: completion text is not a string")
    try:
        pt, ct = int(pt or 0), int(ct or 0)
    except (TypeError, ValueError):
        raise MalformedBackendReply(f"{profile.name}: token usage is not numeric") from None
    return text, pt, ct


# --------------------------------------------------------------------- gateway


class Gateway:
    """Issues completions with caching, bounded concurrency and retries.

    ``transport`` overrides the HTTP transport for every non-scripted
    profile (tests use ``httpx.MockTransport``). Scripted profiles always go
    through a :class:`ScriptedBackend` built from their script file.
    """

    def __init__(self, cache_dir=None, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep, backoff_base: float = 0.5):
        self.cache = ResponseCache(cache_dir) if cache_dir is not None else None
        self._transport = transport
        self._sleep = sleep
        self.backoff_base = backoff_base
        self._clients: dict[str, httpx.Client] = {}
        self._scripted: dict[str, ScriptedBackend] = {}
        self._semaphores: dict[str, threading.BoundedSemaphore] = {}
        self._digest_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._lock = threading.Lock()
        self.network_calls: dict[str, int] = defaultdict(int)

    def close(self) -> None:
        for c in self._clients.values():
            c.close()
        self._clients.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def scripted_backend(self, profile: BackendProfile) -> "ScriptedBackend":
        with self._lock:
            return self._scripted_for(profile)

    def _scripted_for(self, profile: BackendProfile) -> "ScriptedBackend":
        if profile.name not in self._scripted:
            self._scripted[profile.name] = ScriptedBackend.from_file(profile.script)
        return self._scripted[profile.name]

    def _client(self, profile: BackendProfile) -> httpx.Client:
        with self._lock:
            if profile.name not in self._clients:
                transport = self._scripted_for(profile).transport() if profile.is_scripted else self._transport
                self._clients[profile.name] = httpx.Client(transport=transport)
            return self._clients[profile.name]

    def _semaphore(self, profile: BackendProfile) -> threading.BoundedSemaphore:
        with self._lock:
            if profile.name not in self._semaphores:
                self._semaphores[profile.name] = threading.BoundedSemaphore(profile.max_in_flight)
            return self._semaphores[profile.name]

    def complete(self, profile: BackendProfile, prompt: PromptInstance, temperature: float | None = None,
                 attempt_index: int = 1) -> AttemptRecord:
        if not prompt.text:
            raise ValueError("prompt text is empty")
        t = profile.default_temperature if temperature is None else float(temperature)
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"temperature {t} outside [0, 1]")
        digest = request_digest(profile.name, profile.model_id, prompt.text, t, attempt_index)
        with self._digest_locks[digest]:
            if self.cache is not None:
                hit = self.cache.get(digest)
                if hit is not None:
                    return hit
            text, pt, ct, latency = self._call(profile, prompt, t, attempt_index, digest)
            record = AttemptRecord(prompt.case_id, profile.name, attempt_index, t, text, pt, ct,
                                   0.0 if profile.is_scripted else round(latency, 6), False, digest,
                                   profile.model_id)
            if self.cache is not None:
                self.cache.put(record)
            return record

    def import_record(self, profile: BackendProfile, prompt: PromptInstance, raw_response: str,
                      temperature: float | None = None, attempt_index: int = 1,
                      prompt_tokens: int = 0, completion_tokens: int = 0) -> AttemptRecord:
        """Store a transcript obtained outside the gateway (e.g. a web UI
        session) as if it had been returned by ``profile``."""
        t = profile.default_temperature if temperature is None else float(temperature)
        digest = request_digest(profile.name, profile.model_id, prompt.text, t, attempt_index)
        record = AttemptRecord(prompt.case_id, profile.name, attempt_index, t, raw_response, prompt_tokens,
                               completion_tokens, 0.0, False, digest, profile.model_id)
        if self.cache is not None:
            self.cache.put(record)
        return record

    def _headers(self, profile: BackendProfile, prompt: PromptInstance, attempt_index: int, digest: str) -> dict:
        headers = {"Content-Type": "application/json"}
        if profile.auth_token_env:
            token = os.environ.get(profile.auth_token_env)
            if not token:
                raise AuthFailed(f"{profile.name}: environment variable {profile.auth_token_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        if profile.is_scripted:
            headers[SCRIPT_CASE_HEADER] = prompt.case_id
            headers[SCRIPT_ATTEMPT_HEADER] = str(attempt_index)
            headers[SCRIPT_DIGEST_HEADER] = digest
        return headers

    def _call(self, profile, prompt, temperature, attempt_index, digest):
        url, body = build_request(profile, prompt.text, temperature)
        headers = self._headers(profile, prompt, attempt_index, digest)
        client = self._client(profile)
        last: Exception | None = None
        for attempt in range(profile.max_retries + 1):
            if attempt:
                delay = self.backoff_base * (2 ** (attempt - 1))
                log.info("%s: retry %d/%d in %.2fs (%s)", profile.name, attempt, profile.max_retries, delay, last)
                self._sleep(delay)
            start = time.perf_counter()
            try:
                with self._semaphore(profile):
                    with self._lock:
                        self.network_calls[profile.name] += 1
                    resp = client.post(url, json=body, headers=headers, timeout=profile.timeout)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"{profile.name}: {exc}")
                continue
            except httpx.TransportError as exc:
                last = BackendUnreachable(f"{profile.name}: {url}: {exc}")
                continue
            latency = time.perf_counter() - start
            if resp.status_code in (401, 403):
                raise AuthFailed(f"{profile.name}: HTTP {resp.status_code}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendUnreachable(f"{profile.name}: HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise MalformedBackendReply(f"{profile.name}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                payload = resp.json()
            except ValueError:
                raise MalformedBackendReply(f"{profile.name}: reply body is not JSON") from None
            text, pt, ct = parse_reply(profile, payload)
            return text, pt, ct, latency
        assert last is not None
        raise last


# ----------------------------------------------------------- scripted backend


class ScriptedBackend:
    """Offline backend replaying canned replies.

    Script format (JSON)::

        {"replies": {"<case_id>": ["reply for attempt 1", {"content": "...",
                      "prompt_tokens": 10, "completion_tokens": 5}, ...]},
         "default": "NO\\n..."}

    A reply may also be ``{"fail": "unreachable" | "timeout" | <http status>}``,
    and any reply may carry ``"delay"`` seconds to wait before answering.
    Attempts past the end of a case's list reuse its last entry. When
    ``call_log`` is set, each answered request appends its digest there.
    """

    def __init__(self, replies: Mapping[str, list], default=None, call_log=None):
        self.replies = {k: list(v) for k, v in replies.items()}
        self.default = default
        self.call_log = Path(call_log) if call_log else None
        self.calls: list[tuple[str, int]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        log_path = doc.get("call_log")
        if log_path and not Path(log_path).is_absolute():
            log_path = path.parent / log_path
        return cls(doc.get("replies", {}), doc.get("default"), log_path)

    def reply_for(self, case_id: str, attempt: int):
        seq = self.replies.get(case_id)
        if not seq:
            return self.default
        return seq[min(attempt, len(seq)) - 1]

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handle)

    def handle(self, request: httpx.Request) -> httpx.Response:
        case_id = request.headers.get(SCRIPT_CASE_HEADER, "")
        attempt = int(request.headers.get(SCRIPT_ATTEMPT_HEADER, "1"))
        with self._lock:
            self.calls.append((case_id, attempt))
        body = json.loads(request.content)
        prompt_text = body["messages"][0]["content"]
        reply = self.reply_for(case_id, attempt)
        if reply is None:
            return httpx.Response(404, json={"error": f"no scripted reply for {case_id}"})
        if isinstance(reply, str):
            reply = {"content": reply}
        if reply.get("delay"):
            time.sleep(float(reply["delay"]))
        fail = reply.get("fail")
        if fail == "unreachable":
            raise httpx.ConnectError("scripted: unreachable", request=request)
        if fail == "timeout":
            raise httpx.ReadTimeout("scripted: timeout", request=request)
        if fail is not None:
            return httpx.Response(int(fail), json={"error": "scripted failure"})
        content = reply["content"]
        if self.call_log is not None:
            with self._lock, self.call_log.open("a", encoding="utf-8") as fh:
                fh.write(request.headers.get(SCRIPT_DIGEST_HEADER, "") + "\n")
        pt = int(reply.get("prompt_tokens", len(prompt_text.split())))
        ct = int(reply.get("completion_tokens", len(content.split())))
        if request.url.path.endswith("/api/chat"):
            payload = {"message": {"role": "assistant", "content": content},
                       "prompt_eval_count": pt, "eval_count": ct, "done": True}
        else:
            payload = {"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
                       "usage": {"prompt_tokens": pt, "completion_tokens": ct}}
        return httpx.Response(200, json=payload)


# ------------------------------------------------------------------------ cost


class CostGrouping(str, Enum):
    TOTAL = "total"
    BY_BUG_KIND = "by_bug_kind"


_FOUR_PLACES = Decimal("0.0001")


def record_cost(record: AttemptRecord, card: RateCard) -> Decimal:
    if record.from_cache:
        return Decimal(0)
    return (Decimal(record.prompt_tokens) / 1000 * card.input_cost_per_1k_tokens
            + Decimal(record.completion_tokens) / 1000 * card.output_cost_per_1k_tokens)


def cost_summary(records: Iterable[AttemptRecord], rate_cards: Mapping[str, RateCard],
                 grouping: CostGrouping | str = CostGrouping.TOTAL,
                 bug_kinds: Mapping[str, object] | None = None) -> dict[str, Decimal]:
    """Currency spent, rounded half-up to 4 places per group.

    ``bug_kinds`` maps case id to bug kind and is required for BY_BUG_KIND.
    Records served from cache cost nothing.
    """
    grouping = CostGrouping(grouping)
    totals: dict[str, Decimal] = defaultdict(Decimal)
    if grouping is CostGrouping.TOTAL:
        totals["total"] = Decimal(0)
    for rec in records:
        card = rate_cards.get(rec.backend_name)
        if card is None:
            if rec.from_cache:
                continue
            raise MissingRateCard(f"no rate card for backend {rec.backend_name!r}")
        if grouping is CostGrouping.TOTAL:
            key = "total"
        else:
            if bug_kinds is None or rec.case_id not in bug_kinds:
                raise KeyError(f"bug kind unknown for case {rec.case_id!r}")
            kind = bug_kinds[rec.case_id]
            key = getattr(kind, "value", str(kind))
        totals[key] += record_cost(rec, card)
    return {k: v.quantize(_FOUR_PLACES, rounding=ROUND_HALF_UP) for k, v in sorted(totals.items())}
