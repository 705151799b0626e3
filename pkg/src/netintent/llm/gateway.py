"""Model endpoints, prompt bundles and the completion transport."""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Optional, Protocol, Sequence, Union

import requests

from netintent.errors import LlmError, LlmTimeout, ServerError, TransportError

class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"


class Task(str, Enum):
    TRANSLATE = "translate"
    SLICING_CLASSIFY = "slicing_classify"
    CONFLICT_DETECT = "conflict_detect"
    REMEDIATE = "remediate"


@dataclass(frozen=True)
class Segment:
    role: Role
    text: str
    # structural tag used by builders and tests: instructions, schema, example, intent, ...
    kind: str = ""


@dataclass(frozen=True)
class PromptBundle:
    segments: tuple
    task: Task

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not any(s.role is Role.USER for s in self.segments):
            raise ValueError("a prompt bundle needs at least one user segment")

    def of_kind(self, kind: str) -> list[Segment]:
        return [s for s in self.segments if s.kind == kind]

    def extended(self, *segments: Segment) -> "PromptBundle":
        return PromptBundle(self.segments + tuple(segments), self.task)

    def flatten(self) -> str:
        return "\n\n".join(s.text for s in self.segments)


def _check_sampling(temperature: float, top_p: float) -> None:
    if not 0 <= temperature <= 2:
        raise ValueError(f"temperature {temperature} outside [0, 2]")
    if not 0 < top_p <= 1:
        raise ValueError(f"top_p {top_p} outside (0, 1]")


@dataclass(frozen=True)
class SamplingProfile:
    translate: tuple = (0.6, 0.3)
    conflict: tuple = (0.3, 0.5)
    remediate: Optional[tuple] = None

    def __post_init__(self):
        for entry in (self.translate, self.conflict, self.remediate):
            if entry is not None:
                _check_sampling(*entry)

    def for_task(self, task: Task) -> tuple:
        if task is Task.TRANSLATE:
            return self.translate
        if task is Task.REMEDIATE:
            return self.remediate or self.conflict
        # slot extraction and conflict checks both want the low-temperature profile
        return self.conflict


DEFAULT_SAMPLING = SamplingProfile()


class Backend(Protocol):
    def generate(self, endpoint: "LlmEndpoint", prompt: str, temperature: float, top_p: float) -> str: ...


@dataclass(frozen=True)
class LlmEndpoint:
    model_name: str
    base_url: str = "http://localhost:11434"
    temperature: float = 0.6
    top_p: float = 0.3
    rank: int = 1
    timeout_s: int = 120
    # in-process backend (mock or custom); None means HTTP to base_url
    backend: Optional[Any] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        _check_sampling(self.temperature, self.top_p)
        if self.rank < 1:
            raise ValueError("rank must be a positive integer")
        if self.timeout_s < 1:
            raise ValueError("timeout_s must be at least 1")


def ordered_roster(roster: Iterable[LlmEndpoint]) -> list[LlmEndpoint]:
    """Roster sorted by rank; ranks must be unique."""
    items = list(roster)
    if not items:
        raise ValueError("roster is empty")
    ranks = [e.rank for e in items]
    if len(set(ranks)) != len(ranks):
        raise ValueError(f"duplicate ranks in roster: {sorted(ranks)}")
    return sorted(items, key=lambda e: e.rank)


class Completion(NamedTuple):
    text: str
    latency_s: float


class HttpBackend:
    """Client for the ``/api/generate`` convention of local inference servers."""

    def __init__(self, session: Optional[requests.Session] = None):
        self.session = session or requests.Session()

    def generate(self, endpoint: LlmEndpoint, prompt: str, temperature: float, top_p: float) -> str:
        url = endpoint.base_url.rstrip("/") + "/api/generate"
        body = {"model": endpoint.model_name, "prompt": prompt,
                "options": {"temperature": temperature, "top_p": top_p}, "stream": False}
        try:
            resp = self.session.post(url, json=body, timeout=endpoint.timeout_s)
        except requests.Timeout as exc:
            raise LlmTimeout(f"{endpoint.model_name}: no answer within {endpoint.timeout_s}s") from exc
        except requests.RequestException as exc:
            raise TransportError(f"{endpoint.model_name} at {url}: {exc}") from exc
        if resp.status_code >= 400:
            raise ServerError(resp.status_code, resp.text)
        try:
            return resp.json()["response"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ServerError(resp.status_code, f"unexpected reply body: {resp.text[:200]}") from exc


_default_http = None


def _http() -> HttpBackend:
    global _default_http
    if _default_http is None:
        _default_http = HttpBackend()
    return _default_http


ScriptItem = Union[str, BaseException, Callable[[str], str]]


class MockBackend:
    """Scripted stand-in for a model server.

    Each call consumes the next script item: a string is returned, an
    exception instance is raised and a callable receives the flattened prompt.
    A delay longer than the endpoint timeout waits out the timeout and raises
    ``LlmTimeout``.  Once the script runs dry, ``repeat_last`` keeps answering
    with the final item; otherwise calls fail with ``LlmError``.
    """

    def __init__(self, script: Sequence[ScriptItem] = (), delay_s: float = 0.0, repeat_last: bool = False):
        self._queue = deque(script)
        self._last: Optional[ScriptItem] = None
        self.delay_s = delay_s
        self.repeat_last = repeat_last
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def push(self, *items: ScriptItem) -> None:
        with self._lock:
            self._queue.extend(items)

    @property
    def remaining(self) -> int:
        with self._lock:
            return len(self._queue)

    def generate(self, endpoint: LlmEndpoint, prompt: str, temperature: float, top_p: float) -> str:
        with self._lock:
            self.calls.append({"model": endpoint.model_name, "prompt": prompt,
                               "temperature": temperature, "top_p": top_p})
            if self._queue:
                item = self._queue.popleft()
                self._last = item
            elif self.repeat_last and self._last is not None:
                item = self._last
            else:
                raise LlmError(f"mock script for {endpoint.model_name} is exhausted")
        if self.delay_s:
            if self.delay_s > endpoint.timeout_s:
                time.sleep(endpoint.timeout_s)
                raise LlmTimeout(f"{endpoint.model_name}: mock delay exceeds {endpoint.timeout_s}s")
            time.sleep(self.delay_s)
        if isinstance(item, BaseException):
            raise item
        if callable(item):
            return item(prompt)
        return item


class EchoBackend:
    """Answers with the reference output of whichever known intent the prompt ends on.

    Prompts embed example intents before the target intent, so the case whose
    text occurs last in the prompt is the one being asked about.
    """

    def __init__(self, cases: Mapping[str, str]):
        self.cases = dict(cases)

    def generate(self, endpoint: LlmEndpoint, prompt: str, temperature: float, top_p: float) -> str:
        best, best_pos = None, -1
        for intent, answer in self.cases.items():
            pos = prompt.rfind(intent)
            if pos > best_pos or (pos == best_pos and pos >= 0 and len(intent) > len(best[0])):
                best, best_pos = (intent, answer), pos
        if best is None:
            return "{}"
        return best[1]


def complete(endpoint: LlmEndpoint, prompt: PromptBundle,
             profile_entry: Optional[tuple] = None) -> Completion:
    """Run one completion; latency covers marshaling plus the round trip."""
    temperature, top_p = profile_entry or (endpoint.temperature, endpoint.top_p)
    _check_sampling(temperature, top_p)
    backend = endpoint.backend or _http()
    start = time.perf_counter()
    text = backend.generate(endpoint, prompt.flatten(), temperature, top_p)
    latency = time.perf_counter() - start
    return Completion(text, max(latency, 1e-9))
