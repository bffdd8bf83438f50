"""Chat-completions client for the teacher model, with retries and a disk cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import httpx

from .prompts import TEMPLATE_VERSION, VARIANTS, MissingAnalysis, PromptVariant, build_distill_prompt

log = logging.getLogger(__name__)


class TeacherError(RuntimeError):
    code = "TeacherError"


class AuthConfigMissing(TeacherError):
    code = "AuthConfigMissing"


class AuthFailure(TeacherError):
    code = "AuthFailure"


class RateLimited(TeacherError):
    code = "RateLimited"


class ProviderError(TeacherError):
    code = "ProviderError"


class Timeout(TeacherError):
    code = "Timeout"


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    base_backoff: float = 1.0
    jitter: float = 0.25
    max_backoff: float = 60.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_backoff < 0 or self.max_backoff < 0:
            raise ValueError("backoff must be non-negative")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")

    def delays(self, rng: random.Random) -> list:
        """Sleep before each retry. Jitter below 1 keeps the sequence non-decreasing."""
        return [
            min(self.max_backoff, self.base_backoff * 2 ** i * (1 + self.jitter * rng.random()))
            for i in range(self.max_attempts - 1)
        ]


@dataclass(frozen=True)
class TeacherConfig:
    base_url: str = "https://openrouter.ai/api/v1"
    model_name: str = "google/gemini-3-flash-preview"
    api_key_env: str = "OPENROUTER_API_KEY"
    temperature: float = 0.7
    max_output_tokens: int = 2048
    max_concurrency: int = 8
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    cache_dir: Optional[str] = None
    request_timeout: float = 120.0

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise AuthConfigMissing(f"environment variable {self.api_key_env} is not set")
        return key


@dataclass(frozen=True)
class Completion:
    text: str
    usage: Optional[dict]
    attempts: int = 1
    cached: bool = False

    @property
    def completion_tokens(self) -> Optional[int]:
        return self.usage.get("completion_tokens") if self.usage else None


def _usage(payload: dict) -> Optional[dict]:
    raw = payload.get("usage")
    if not isinstance(raw, dict):
        return None
    return {k: raw.get(k) if isinstance(raw.get(k), int) else None for k in ("prompt_tokens", "completion_tokens")}


def _parse_response(resp: httpx.Response) -> tuple:
    try:
        payload = resp.json()
        text = payload["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise ProviderError(f"unexpected response shape (HTTP {resp.status_code})") from None
    if not isinstance(text, str):
        raise ProviderError("assistant content is not text")
    return text, _usage(payload)


def complete(
    cfg: TeacherConfig,
    prompt: str,
    client: Optional[httpx.Client] = None,
    temperature: Optional[float] = None,
    sleep: Callable[[float], None] = time.sleep,
    rng: Optional[random.Random] = None,
) -> Completion:
    """One chat completion with retries on 429, 5xx, transport errors and timeouts."""
    key = cfg.api_key()
    body = {
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature if temperature is None else temperature,
        "max_tokens": cfg.max_output_tokens,
    }
    headers = {"Authorization": f"Bearer {key}"}
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    own = client is None
    if own:
        client = httpx.Client(timeout=cfg.request_timeout)
    delays = cfg.retry.delays(rng or random.Random())
    last: TeacherError = ProviderError("no attempt made")
    try:
        for attempt in range(1, cfg.retry.max_attempts + 1):
            try:
                resp = client.post(url, json=body, headers=headers, timeout=cfg.request_timeout)
            except httpx.TimeoutException:
                last = Timeout(f"request timed out after {cfg.request_timeout}s")
            except httpx.TransportError as exc:
                last = ProviderError(f"transport error: {type(exc).__name__}")
            else:
                status = resp.status_code
                if status in (401, 403):
                    raise AuthFailure(f"HTTP {status} from provider")
                if status == 429:
                    last = RateLimited("HTTP 429 after retries")
                elif status >= 500:
                    last = ProviderError(f"HTTP {status}")
                elif status >= 400:
                    raise ProviderError(f"HTTP {status}")
                else:
                    text, usage = _parse_response(resp)
                    return Completion(text, usage, attempts=attempt)
            if attempt < cfg.retry.max_attempts:
                log.debug("attempt %d failed (%s), retrying in %.2fs", attempt, last.code, delays[attempt - 1])
                sleep(delays[attempt - 1])
        raise last
    finally:
        if own:
            client.close()


def cache_key(model_name: str, prompt: str) -> str:
    h = hashlib.sha256()
    h.update(model_name.encode())
    h.update(b"\0")
    h.update(prompt.encode())
    return h.hexdigest()


class ResponseCache:
    """One JSON file per (model, prompt) hash; writes are atomic renames."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict = {}
        self._guard = threading.Lock()

    def lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def get(self, key: str) -> Optional[Completion]:
        path = self._path(key)
        if not path.exists():
            return None
        data = json.loads(path.read_text(encoding="utf-8"))
        return Completion(data["text"], data["usage"], cached=True)

    def put(self, key: str, completion: Completion) -> None:
        path = self._path(key)
        tmp = path.with_suffix(f".tmp{threading.get_ident()}")
        tmp.write_text(json.dumps({"text": completion.text, "usage": completion.usage}, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)


@dataclass(frozen=True)
class DistillationRecord:
    puzzle_id: str
    variant: str
    prompt: str
    trace: str
    usage: Optional[dict]
    teacher_model: str
    template_version: str = TEMPLATE_VERSION
    verdict: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "puzzle_id": self.puzzle_id,
            "variant": self.variant,
            "prompt": self.prompt,
            "trace": self.trace,
            "usage": self.usage,
            "teacher_model": self.teacher_model,
            "template_version": self.template_version,
            "verdict": self.verdict,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DistillationRecord":
        return cls(**{k: data.get(k) for k in cls.__dataclass_fields__ if k in data})


@dataclass(frozen=True)
class ItemError:
    puzzle_id: str
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"puzzle_id": self.puzzle_id, "code": self.code, "message": self.message}


@dataclass
class BatchResult:
    records: list
    errors: list
    network_calls: int = 0

    @property
    def failures(self) -> int:
        return len(self.errors)


def _variant_name(variant: PromptVariant) -> str:
    for name, v in VARIANTS.items():
        if v == variant:
            return name
    return "custom"


def batch_distill(
    cfg: TeacherConfig,
    puzzles: Sequence,
    analyses: Optional[Mapping] = None,
    variant: Optional[PromptVariant] = None,
    client: Optional[httpx.Client] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> BatchResult:
    """Generate one teacher trace per puzzle; results keep input order.

    ``analyses`` maps puzzle id to :class:`~chessdistill.engine.Analysis`.
    A failing item becomes an :class:`ItemError` and never stops the batch.
    """
    cfg.api_key()
    variant = variant or VARIANTS["best_move"]
    name = _variant_name(variant)
    analyses = analyses or {}
    cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
    calls = 0
    calls_lock = threading.Lock()
    own = client is None
    if own:
        limits = httpx.Limits(max_connections=cfg.max_concurrency)
        client = httpx.Client(timeout=cfg.request_timeout, limits=limits)

    def work(puzzle):
        try:
            prompt = build_distill_prompt(puzzle, analyses.get(puzzle.id), variant)
        except MissingAnalysis as exc:
            return ItemError(puzzle.id, exc.code, str(exc))

        def fetch():
            nonlocal calls
            with calls_lock:
                calls += 1
            return complete(cfg, prompt, client=client, sleep=sleep)

        try:
            if cache is None:
                result = fetch()
            else:
                key = cache_key(cfg.model_name, prompt)
                with cache.lock(key):
                    result = cache.get(key)
                    if result is None:
                        result = fetch()
                        cache.put(key, result)
        except TeacherError as exc:
            log.warning("teacher request for %s failed: %s", puzzle.id, exc.code)
            return ItemError(puzzle.id, exc.code, str(exc))
        return DistillationRecord(puzzle.id, name, prompt, result.text, result.usage, cfg.model_name)

    try:
        with ThreadPoolExecutor(max_workers=cfg.max_concurrency) as pool:
            outcomes = list(pool.map(work, puzzles))
    finally:
        if own:
            client.close()
    records = [o for o in outcomes if isinstance(o, DistillationRecord)]
    errors = [o for o in outcomes if isinstance(o, ItemError)]
    log.info("distilled %d puzzles: %d records, %d failures, %d network calls", len(outcomes), len(records), len(errors), calls)
    return BatchResult(records, errors, calls)
