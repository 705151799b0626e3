"""JSON canonicalization and semantic equality.

Paths are dot-separated object keys; list positions are transparent, so
``flows.selector.criteria`` addresses the criteria list of every flow.
``*`` matches one key and ``**`` matches any run of keys (including none).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

_NUMBER_RE = re.compile(r"^-?(0|[1-9]\d*)(\.\d+)?([eE][+-]?\d+)?$")
_HEX_RE = re.compile(r"^0[xX][0-9a-fA-F]+$")


def _check_pattern(pattern: str) -> tuple[str, ...]:
    parts = tuple(pattern.split("."))
    if not pattern or any(p == "" for p in parts):
        raise ValueError(f"invalid path pattern {pattern!r}: empty segment")
    return parts


@dataclass(frozen=True)
class CanonPolicy:
    coerce_numeric_strings: bool = True
    order_insensitive_paths: frozenset = field(default_factory=frozenset)
    ignore_paths: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "order_insensitive_paths", frozenset(self.order_insensitive_paths))
        object.__setattr__(self, "ignore_paths", frozenset(self.ignore_paths))
        # compile once; validates syntax
        object.__setattr__(self, "_unordered", tuple(_check_pattern(p) for p in self.order_insensitive_paths))
        object.__setattr__(self, "_ignored", tuple(_check_pattern(p) for p in self.ignore_paths))

    def with_ignored(self, paths: Iterable[str]) -> "CanonPolicy":
        return CanonPolicy(self.coerce_numeric_strings, self.order_insensitive_paths,
                           self.ignore_paths | frozenset(paths))


# Action lists stay ordered: action sequence changes packet treatment.
DEFAULT_POLICY = CanonPolicy(
    coerce_numeric_strings=True,
    order_insensitive_paths=frozenset({"**.selector.criteria", "**.match"}),
)

# Every list unordered, no coercion.
FULL_SORT_POLICY = CanonPolicy(coerce_numeric_strings=False, order_insensitive_paths=frozenset({"**"}))

# Fields controllers add to stored flows.
BOOKKEEPING_PATHS = frozenset({
    "**.opendaylight-flow-statistics:flow-statistics", "**.flow-statistics", "**.cookie",
    "**.cookie_mask", "**.packets", "**.bytes", "**.life", "**.lastSeen", "**.state",
    "**.appId", "**.groupId", "**.liveType", "**.duration",
})


def path_matches(pattern: Sequence[str], path: Sequence[str]) -> bool:
    if not pattern:
        return not path
    head, rest = pattern[0], pattern[1:]
    if head == "**":
        return any(path_matches(rest, path[i:]) for i in range(len(path) + 1))
    if not path:
        return False
    return (head == "*" or head == path[0]) and path_matches(rest, path[1:])


def _coerce(text: str) -> Any:
    if _NUMBER_RE.match(text):
        if re.match(r"^-?\d+$", text):
            return int(text)
        return _normalize_number(float(text))
    if _HEX_RE.match(text):
        return int(text, 16)
    return text


def _normalize_number(x: float) -> Any:
    if math.isfinite(x) and x.is_integer():
        return int(x)
    return x


def canonical_dumps(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonicalize_json(value: Any, policy: CanonPolicy = DEFAULT_POLICY) -> Any:
    """Return a canonical copy of ``value`` under ``policy``."""
    return _canon(value, (), policy)


def _canon(value: Any, path: tuple, policy: CanonPolicy) -> Any:
    if isinstance(value, dict):
        out = {}
        for key in sorted(value):
            child = path + (key,)
            if any(path_matches(p, child) for p in policy._ignored):
                continue
            out[key] = _canon(value[key], child, policy)
        return out
    if isinstance(value, list):
        items = [_canon(v, path, policy) for v in value]
        if any(path_matches(p, path) for p in policy._unordered):
            items.sort(key=canonical_dumps)
        return items
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return _normalize_number(value)
    if isinstance(value, str) and policy.coerce_numeric_strings:
        return _coerce(value)
    return value


def semantic_equal(a: Any, b: Any, policy: CanonPolicy = DEFAULT_POLICY) -> bool:
    # Compare serializations so that True and 1 stay distinct.
    return canonical_dumps(canonicalize_json(a, policy)) == canonical_dumps(canonicalize_json(b, policy))
