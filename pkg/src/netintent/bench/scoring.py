"""Per-case translation scores and confusion-matrix metrics for conflict detection."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Iterator, Optional, Sequence

from netintent.bench.datasets import CaseFormat, ConflictCase, TranslationCase
from netintent.errors import LengthMismatch
from netintent.flow_model import FULL_SORT_POLICY, canonical_dumps, canonicalize_json, semantic_equal


def _leaves(value: Any, path: tuple = ()) -> Iterator[tuple[tuple, Any]]:
    if isinstance(value, dict):
        for k in sorted(value):
            yield from _leaves(value[k], path + (k,))
    elif isinstance(value, list):
        for i, item in enumerate(value):
            yield from _leaves(item, path + (i,))
    else:
        yield path, value


_MISSING = object()


def _lookup(value: Any, path: tuple) -> Any:
    for step in path:
        if isinstance(step, int):
            if not isinstance(value, list) or step >= len(value):
                return _MISSING
        elif not isinstance(value, dict) or step not in value:
            return _MISSING
        value = value[step]
    return value


def _same_leaf(a: Any, b: Any) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    return type(a) is type(b) and a == b


def count_mistakes(expected: Any, output: Any) -> tuple[int, int]:
    """``(mistakes, total)`` over the primitive leaves of ``expected``."""
    total = mistakes = 0
    for path, want in _leaves(expected):
        total += 1
        got = _lookup(output, path)
        if got is _MISSING or isinstance(got, (dict, list)) or not _same_leaf(want, got):
            mistakes += 1
    return mistakes, total


def score_translation(case: TranslationCase, output: Any) -> float:
    if case.fmt is CaseFormat.FORMAL_SPEC:
        mistakes, total = count_mistakes(case.expected, output)
        if total == 0:
            return 1.0 if canonical_dumps(canonicalize_json(output)) == canonical_dumps(
                canonicalize_json(case.expected)) else 0.0
        return max(0.0, (total - mistakes) / total)
    if case.fmt is CaseFormat.NFV_CONFIG:
        return float(canonicalize_json(case.expected, FULL_SORT_POLICY)
                     == canonicalize_json(output, FULL_SORT_POLICY))
    return float(semantic_equal(case.expected, output))


def round2(x: Optional[float]) -> Optional[float]:
    if x is None:
        return None
    return float(Decimal(repr(x)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def fmt2(x: Optional[float]) -> str:
    return "--" if x is None else f"{round2(x):.2f}"


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> Optional[float]:
        return _ratio(self.tp + self.tn, self.total)

    @property
    def precision(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> Optional[float]:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> Optional[float]:
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    @property
    def fpr(self) -> Optional[float]:
        return _ratio(self.fp, self.fp + self.tn)

    def metrics(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "fpr": self.fpr}

    def rounded(self) -> dict:
        return {k: round2(v) for k, v in self.metrics().items()}

    def display(self) -> dict:
        return {k: fmt2(v) for k, v in self.metrics().items()}

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn, **self.metrics()}


def score_conflicts(cases: Sequence[ConflictCase], verdicts: Sequence[bool]) -> ConfusionCounts:
    if len(cases) != len(verdicts):
        raise LengthMismatch(f"{len(cases)} cases but {len(verdicts)} verdicts")
    tp = fp = tn = fn = 0
    for case, v in zip(cases, verdicts):
        if v and case.label:
            tp += 1
        elif v:
            fp += 1
        elif case.label:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)
