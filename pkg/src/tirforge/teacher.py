"""HTTP client for the teacher (or any chat-completions-compatible) endpoint.

The client retries transient failures with exponential backoff, caps
in-flight requests with a semaphore shared across worker threads, and
caches raw responses on disk keyed by (prompt, model, temperature) so a
10k-problem run can be resumed without re-spending tokens.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

import requests

from .schema import PatternLabel, Problem

API_KEY_ENV = "TIRFORGE_API_KEY"
PROMPT_SLOT = "<the math problem here>"
_TEMPLATE_CACHE: str | None = None

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
AUTH_STATUSES = frozenset({401, 403})


class TeacherClientError(Exception):
    pass


class EndpointUnreachable(TeacherClientError):
    pass


class ExhaustedRetries(TeacherClientError):
    pass


class AuthFailure(TeacherClientError):
    pass


class UnexpectedStatus(TeacherClientError):
    def __init__(self, status: int, body: str):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class UnparseableJudgment(TeacherClientError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key: str = ""
    max_concurrency: int = 4
    timeout_s: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0
    backoff_base_s: float = 0.5

    def __post_init__(self) -> None:
        parsed = urlparse(self.base_url)
        if not parsed.scheme or not parsed.netloc:
            raise ValueError(f"base_url is not a valid URL: {self.base_url!r}")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.timeout_s <= 0 or self.max_retries < 0 or self.temperature < 0:
            raise ValueError("invalid endpoint configuration")

    @property
    def chat_url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"


def _load_template() -> str:
    global _TEMPLATE_CACHE
    if _TEMPLATE_CACHE is None:
        path = Path(__file__).parent / "assets" / "double_pattern_prompt.txt"
        _TEMPLATE_CACHE = path.read_text(encoding="utf-8")
    return _TEMPLATE_CACHE


def build_double_pattern_prompt(problem: Problem) -> str:
    """Fill the dual-pattern prompt template with the problem statement."""
    if not problem.statement.strip():
        raise ValueError("problem statement must be non-empty")
    return _load_template().replace(PROMPT_SLOT, problem.statement)


JUDGE_PROMPT = (
    "A math problem can be solved with a python interpreter in one of two usage patterns.\n"
    "Pattern A: treat the problem as a coding problem and write a complete program.\n"
    "Pattern B: treat the interpreter as a simple calculator for arithmetic or verification.\n\n"
    "Which pattern is more appropriate for the following problem? "
    "Answer with the single letter A or B.\n\n"
    f"{PROMPT_SLOT}\n"
)


def build_pattern_judge_prompt(problem: Problem) -> str:
    if not problem.statement.strip():
        raise ValueError("problem statement must be non-empty")
    return JUDGE_PROMPT.replace(PROMPT_SLOT, problem.statement)


_PATTERN_AFTER_WORD = re.compile(r"\bpattern\s*[:#]?\s*([AB])\b", re.IGNORECASE)
_STANDALONE_LABEL = re.compile(r"\b([AB])\b")


def extract_pattern_judgment(reply: str) -> PatternLabel:
    """Pull an A/B verdict out of free-form judge text.

    Preference order: the first label following the word "pattern", else
    the first standalone A/B token.
    """
    m = _PATTERN_AFTER_WORD.search(reply)
    if m is None:
        m = _STANDALONE_LABEL.search(reply)
    if m is None:
        raise UnparseableJudgment(f"no pattern label in reply: {reply[:120]!r}")
    return PatternLabel(m.group(1).upper())


class CacheStore:
    """One-file-per-entry response cache: cache/<first2ofhash>/<hash>.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()

    @staticmethod
    def key_for(prompt: str, model_name: str, temperature: float) -> str:
        payload = f"{model_name}\x1f{temperature!r}\x1f{prompt}".encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as fh:
            entry = json.load(fh)
        return entry["raw_response"]

    def put(self, key: str, raw_response: str) -> None:
        path = self._path(key)
        entry = {"key": key, "raw_response": raw_response, "created_at": time.time()}
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False)
            os.replace(tmp, path)


@dataclass
class ClientStats:
    requests: int = 0
    retries: int = 0
    cache_hits: int = 0


class TeacherClient:
    """Thread-safe chat-completions client with retry, backoff, and caching.

    At most cfg.max_concurrency requests are in flight at any moment, no
    matter how many worker threads share the client.
    """

    def __init__(self, cfg: EndpointConfig, cache: CacheStore | None = None):
        self.cfg = cfg
        self.cache = cache
        self.stats = ClientStats()
        self._stats_lock = threading.Lock()
        self._gate = threading.BoundedSemaphore(cfg.max_concurrency)
        self._session = requests.Session()

    @staticmethod
    def retry_delays(base_s: float, max_retries: int) -> list[float]:
        """Exponential, hence non-decreasing, backoff schedule."""
        return [min(base_s * (2**i), 30.0) for i in range(max_retries)]

    def _bump(self, **deltas: int) -> None:
        with self._stats_lock:
            for name, delta in deltas.items():
                setattr(self.stats, name, getattr(self.stats, name) + delta)

    def chat(self, prompt: str) -> str:
        """POST one user message; returns the assistant message text."""
        if not self.cfg.api_key:
            raise AuthFailure(
                f"no API key configured; set {API_KEY_ENV} or pass --api-key"
            )
        body = {
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        }
        headers = {
            "Authorization": f"Bearer {self.cfg.api_key}",
            "Content-Type": "application/json",
        }
        delays = self.retry_delays(self.cfg.backoff_base_s, self.cfg.max_retries)
        attempt = 0
        while True:
            try:
                with self._gate:
                    self._bump(requests=1)
                    resp = self._session.post(
                        self.cfg.chat_url,
                        json=body,
                        headers=headers,
                        timeout=self.cfg.timeout_s,
                    )
            except requests.exceptions.RequestException as exc:
                if attempt < len(delays):
                    time.sleep(delays[attempt])
                    attempt += 1
                    self._bump(retries=1)
                    continue
                raise EndpointUnreachable(f"{self.cfg.chat_url}: {exc}") from exc

            if resp.status_code in AUTH_STATUSES:
                raise AuthFailure(f"HTTP {resp.status_code} from {self.cfg.chat_url}")
            if resp.status_code in RETRYABLE_STATUSES:
                if attempt < len(delays):
                    time.sleep(delays[attempt])
                    attempt += 1
                    self._bump(retries=1)
                    continue
                raise ExhaustedRetries(
                    f"gave up after {attempt} retries, last status {resp.status_code}"
                )
            if resp.status_code != 200:
                raise UnexpectedStatus(resp.status_code, resp.text)

            try:
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise UnexpectedStatus(
                    resp.status_code, f"malformed completion payload: {resp.text[:200]}"
                ) from exc

    def _cached_chat(self, prompt: str) -> str:
        if self.cache is None:
            return self.chat(prompt)
        key = CacheStore.key_for(prompt, self.cfg.model_name, self.cfg.temperature)
        hit = self.cache.get(key)
        if hit is not None:
            self._bump(cache_hits=1)
            return hit
        raw = self.chat(prompt)
        self.cache.put(key, raw)
        return raw

    def completion(self, prompt: str) -> str:
        """Fetch one completion for an arbitrary prompt (cache-aware)."""
        return self._cached_chat(prompt)

    def request_solution(self, problem: Problem) -> str:
        """Fetch the teacher's dual-pattern reply for one problem."""
        return self._cached_chat(build_double_pattern_prompt(problem))

    def judge_pattern(self, problem: Problem) -> PatternLabel:
        """Ask only for the pattern decision and parse the A/B verdict."""
        return extract_pattern_judgment(self._cached_chat(build_pattern_judge_prompt(problem)))


def request_solution(problem: Problem, cfg: EndpointConfig, cache: CacheStore | None = None) -> str:
    return TeacherClient(cfg, cache).request_solution(problem)


def judge_pattern(problem: Problem, cfg: EndpointConfig, cache: CacheStore | None = None) -> PatternLabel:
    return TeacherClient(cfg, cache).judge_pattern(problem)


def api_key_from_env() -> str:
    return os.environ.get(API_KEY_ENV, "")
