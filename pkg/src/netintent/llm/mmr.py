"""Few-shot example selection by maximal marginal relevance over TF cosine similarity."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Any, Sequence

from netintent.errors import KTooLarge

_TOKEN_RE = re.compile(r"\w+")


@dataclass(frozen=True)
class ContextExample:
    input_text: str
    output_json: Any

    def __hash__(self):
        return hash(self.input_text)


def tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _vector(text: str) -> Counter:
    return Counter(tokens(text))


def _cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(n * b[t] for t, n in a.items() if t in b)
    return dot / (math.sqrt(sum(n * n for n in a.values())) * math.sqrt(sum(n * n for n in b.values())))


def similarity(a: str, b: str) -> float:
    return _cosine(_vector(a), _vector(b))


def select_examples_mmr(query: str, pool: Sequence[ContextExample], k: int,
                        lam: float = 0.5) -> list[ContextExample]:
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > len(pool):
        raise KTooLarge(f"asked for {k} examples from a pool of {len(pool)}")
    if not 0 <= lam <= 1:
        raise ValueError("lambda must lie in [0, 1]")
    vecs = [_vector(e.input_text) for e in pool]
    q = _vector(query)
    relevance = [_cosine(q, v) for v in vecs]
    chosen: list[int] = []
    # running max similarity of each candidate to the chosen set
    redundancy = [0.0] * len(pool)
    remaining = list(range(len(pool)))
    while len(chosen) < k:
        best, best_score = None, -math.inf
        for i in remaining:
            score = lam * relevance[i] - (1 - lam) * (redundancy[i] if chosen else 0.0)
            if score > best_score + 1e-12:
                best, best_score = i, score
        chosen.append(best)
        remaining.remove(best)
        for i in remaining:
            redundancy[i] = max(redundancy[i], _cosine(vecs[i], vecs[best]))
    return [pool[i] for i in chosen]
