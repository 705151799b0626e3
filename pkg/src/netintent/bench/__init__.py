"""Benchmark datasets, scoring methods and the benchmark runner."""

from netintent.bench.datasets import (
    CaseFormat,
    ConflictCase,
    DatasetKind,
    TranslationCase,
    bundled_path,
    dataset_hash,
    load_bundled,
    load_dataset,
    split_cases,
)
from netintent.bench.runner import (
    BenchConfig,
    BenchReport,
    BenchRow,
    BenchTask,
    CaseResult,
    EngineKind,
    echo_endpoint,
    run_benchmark,
)
from netintent.bench.scoring import ConfusionCounts, count_mistakes, fmt2, round2, score_conflicts, score_translation

__all__ = [
    "CaseFormat", "ConflictCase", "DatasetKind", "TranslationCase", "bundled_path", "dataset_hash",
    "load_bundled", "load_dataset", "split_cases", "BenchConfig", "BenchReport", "BenchRow", "BenchTask",
    "CaseResult", "EngineKind", "echo_endpoint", "run_benchmark", "ConfusionCounts", "count_mistakes",
    "fmt2", "round2", "score_conflicts", "score_translation",
]
