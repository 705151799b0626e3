"""Detection of slicing/queue intents and extraction of their switch, queue and port."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from typing import Optional

from netintent.errors import NoJsonFound
from netintent.llm.extract import extract_json
from netintent.llm.gateway import DEFAULT_SAMPLING, LlmEndpoint, SamplingProfile, Task, complete
from netintent.llm.prompts import build_slicing_prompt

KEYWORDS = ("queue", "slice", "slicing", "priorit")

_SWITCH_RE = re.compile(r"\b(?:switch|node|device)\s*#?\s*(\d+)", re.IGNORECASE)
_QUEUE_RE = re.compile(r"\bqueue(?:[\s_-]*id)?\s*#?\s*(\d+)", re.IGNORECASE)
# egress phrasing; "on port 80" names a transport port, not the out port
_OUT_PORT_RE = re.compile(r"\b(?:via|through|out|using|out\s+of)\s+(?:output\s+|egress\s+)?(?:port|interface)\s+(\d+)",
                          re.IGNORECASE)
_TO_PORT_RE = re.compile(r"\bto\s+(?:output\s+)?(?:port|interface)\s+(\d+)", re.IGNORECASE)


@dataclass(frozen=True)
class SliceMeta:
    switch_id: Optional[int] = None
    queue_id: Optional[int] = None
    port_id: Optional[int] = None

    def as_dict(self) -> dict:
        return asdict(self)


def mentions_slicing(intent: str) -> bool:
    low = intent.lower()
    return any(k in low for k in KEYWORDS)


def _first_int(pattern: re.Pattern, text: str) -> Optional[int]:
    m = pattern.search(text)
    return int(m.group(1)) if m else None


def extract_slice_meta(intent: str) -> SliceMeta:
    port = _first_int(_OUT_PORT_RE, intent)
    if port is None:
        port = _first_int(_TO_PORT_RE, intent)
    return SliceMeta(_first_int(_SWITCH_RE, intent), _first_int(_QUEUE_RE, intent), port)


def _as_int(value) -> Optional[int]:
    if value is None or isinstance(value, bool):
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        return None


def classify_slicing(intent: str, endpoint: Optional[LlmEndpoint] = None,
                     sampling: SamplingProfile = DEFAULT_SAMPLING) -> Optional[SliceMeta]:
    if not mentions_slicing(intent):
        return None
    if endpoint is None:
        return extract_slice_meta(intent)
    text, _ = complete(endpoint, build_slicing_prompt(intent), sampling.for_task(Task.SLICING_CLASSIFY))
    try:
        doc = extract_json(text)
    except NoJsonFound:
        return None
    if not isinstance(doc, dict) or not doc:
        return None
    meta = SliceMeta(_as_int(doc.get("switch_id")), _as_int(doc.get("queue_id")), _as_int(doc.get("port_id")))
    return None if meta == SliceMeta() else meta
