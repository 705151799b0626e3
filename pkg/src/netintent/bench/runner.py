"""Benchmark execution over a roster and context schedule, with report emission."""

from __future__ import annotations

import hashlib
import json
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from netintent.activation import parse_conflict_reply
from netintent.bench.datasets import CaseFormat, ConflictCase, TranslationCase, split_cases
from netintent.bench.scoring import ConfusionCounts, fmt2, score_conflicts, score_translation
from netintent.conflict import OverlapSemantics, detect_conflict
from netintent.errors import NetIntentError
from netintent.flow_model import canonical_dumps, flow_from_dict
from netintent.flow_model.codec import ENVELOPES
from netintent.llm import EchoBackend, extract_json
from netintent.llm.gateway import DEFAULT_SAMPLING, LlmEndpoint, SamplingProfile, Task, complete, ordered_roster
from netintent.llm.mmr import ContextExample, select_examples_mmr
from netintent.llm.prompts import build_conflict_prompt, build_structured_prompt, build_translation_prompt

ORACLE_MODEL = "oracle"


class BenchTask(str, Enum):
    TRANSLATE = "translate"
    CONFLICT = "conflict"


class EngineKind(str, Enum):
    LLM = "llm"
    ORACLE = "oracle"


@dataclass
class BenchConfig:
    task: BenchTask
    cases: Sequence[Union[TranslationCase, ConflictCase]]
    roster: Sequence[LlmEndpoint] = ()
    contexts: Sequence[int] = (0,)
    engine: EngineKind = EngineKind.LLM
    semantics: OverlapSemantics = OverlapSemantics.WILDCARD
    sampling: SamplingProfile = DEFAULT_SAMPLING
    parallelism: int = 1
    mmr_lambda: float = 0.5
    template_dir: Optional[Path] = None
    dataset_name: str = ""

    def __post_init__(self):
        self.task = BenchTask(self.task)
        self.engine = EngineKind(self.engine)
        self.semantics = OverlapSemantics(self.semantics)
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if any(k < 0 for k in self.contexts):
            raise ValueError("context counts must be non-negative")
        if self.engine is EngineKind.LLM and not self.roster:
            raise ValueError("the llm engine needs a non-empty roster")


@dataclass(frozen=True)
class BenchRow:
    model: str
    context_count: int
    metric_name: str
    value: Optional[float]
    mean_latency_s: float
    n: int = 0
    unparseable: int = 0
    errors: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CaseResult:
    case_id: str
    model: str
    context_count: int
    score: float
    latency_s: float
    unparseable: bool = False
    error: str = ""
    verdict: Optional[bool] = None


@dataclass
class BenchReport:
    rows: list
    environment: dict
    results: list = field(default_factory=list)
    confusion: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "rows": [r.to_json() for r in self.rows],
            "environment": self.environment,
            "confusion": {k: v.to_json() for k, v in self.confusion.items()},
            "results": [dict(r.__dict__) for r in self.results],
        }

    def metric(self, model: str, context_count: int, metric_name: str = "accuracy") -> Optional[float]:
        for r in self.rows:
            if (r.model, r.context_count, r.metric_name) == (model, context_count, metric_name):
                return r.value
        raise KeyError((model, context_count, metric_name))

    def render_table(self) -> str:
        head = ("model", "contexts", "metric", "value", "avg time (s)", "n", "unparseable")
        body = [(r.model, str(r.context_count), r.metric_name, fmt2(r.value), f"{r.mean_latency_s:.3f}",
                 str(r.n), str(r.unparseable)) for r in self.rows]
        widths = [max(len(x) for x in col) for col in zip(head, *body)]
        line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        return "\n".join([line(head), line(["-" * w for w in widths])] + [line(b) for b in body]) + "\n"

    def write(self, path: Union[str, Path], table_path: Optional[Union[str, Path]] = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if table_path is not None:
            Path(table_path).write_text(self.render_table(), encoding="utf-8")


def cases_hash(cases: Sequence) -> str:
    blob = canonical_dumps([{k: getattr(c, k) if not isinstance(getattr(c, k), Enum) else getattr(c, k).value
                             for k in c.__dataclass_fields__} for c in cases])
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def echo_endpoint(cases: Sequence[TranslationCase], name: str = "echo", rank: int = 1) -> LlmEndpoint:
    """Mock model answering every known intent with its reference output."""
    answers = {c.intent: json.dumps(c.expected) for c in cases}
    return LlmEndpoint(name, rank=rank, backend=EchoBackend(answers))


def _unwrap(value: Any) -> Any:
    """A single flow inside a controller envelope compares as the bare flow."""
    if isinstance(value, dict) and len(value) == 1:
        (key, inner), = value.items()
        if key in ENVELOPES.values() and isinstance(inner, list) and len(inner) == 1:
            return inner[0]
    return value


def _translation_prompt(case: TranslationCase, examples, template_dir):
    if case.fmt.dialect is not None:
        return build_translation_prompt(case.intent, case.fmt.dialect, examples, template_dir=template_dir)
    template = "translate_formal_spec.txt" if case.fmt is CaseFormat.FORMAL_SPEC else "translate_nfv_config.txt"
    return build_structured_prompt(template, case.intent, examples, template_dir=template_dir)


def _run_translation_case(cfg: BenchConfig, ep: LlmEndpoint, k: int, pool: list,
                          case: TranslationCase) -> CaseResult:
    start = time.perf_counter()
    try:
        examples = select_examples_mmr(case.intent, pool, min(k, len(pool)), cfg.mmr_lambda) if k else []
        bundle = _translation_prompt(case, examples, cfg.template_dir)
        text = complete(ep, bundle, cfg.sampling.for_task(Task.TRANSLATE)).text
    except NetIntentError as exc:
        return CaseResult(case.id, ep.model_name, k, 0.0, time.perf_counter() - start, error=str(exc))
    try:
        output = extract_json(text)
    except NetIntentError:
        return CaseResult(case.id, ep.model_name, k, 0.0, time.perf_counter() - start, unparseable=True)
    expected = case.expected
    if case.fmt.dialect is not None:
        output, expected = _unwrap(output), _unwrap(expected)
    score = score_translation(TranslationCase(case.id, case.intent, expected, case.fmt), output)
    return CaseResult(case.id, ep.model_name, k, score, time.perf_counter() - start)


def _oracle_verdict(cfg: BenchConfig, case: ConflictCase) -> CaseResult:
    start = time.perf_counter()
    try:
        r1 = flow_from_dict(case.dialect, case.flow1, device_id=case.device_id)
        r2 = flow_from_dict(case.dialect, case.flow2, device_id=case.device_id)
        verdict = detect_conflict(r1, r2, cfg.semantics).conflict_status
    except NetIntentError as exc:
        return CaseResult(case.id, ORACLE_MODEL, 0, 0.0, time.perf_counter() - start, error=str(exc), verdict=False)
    return CaseResult(case.id, ORACLE_MODEL, 0, float(verdict == case.label), time.perf_counter() - start,
                      verdict=verdict)


def _llm_verdict(cfg: BenchConfig, ep: LlmEndpoint, case: ConflictCase) -> CaseResult:
    start = time.perf_counter()
    try:
        bundle = build_conflict_prompt(case.flow1, case.flow2, case.dialect, cfg.template_dir)
        text = complete(ep, bundle, cfg.sampling.for_task(Task.CONFLICT_DETECT)).text
    except NetIntentError as exc:
        return CaseResult(case.id, ep.model_name, 0, float(not case.label), time.perf_counter() - start,
                          error=str(exc), verdict=False)
    try:
        verdict, _ = parse_conflict_reply(extract_json(text))
    except NetIntentError:
        return CaseResult(case.id, ep.model_name, 0, float(not case.label), time.perf_counter() - start,
                          unparseable=True, verdict=False)
    return CaseResult(case.id, ep.model_name, 0, float(verdict == case.label), time.perf_counter() - start,
                      verdict=verdict)


def _map(cfg: BenchConfig, fn, items) -> list:
    if cfg.parallelism == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        return list(pool.map(fn, items))


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def _environment(cfg: BenchConfig, roster: list, extra: dict) -> dict:
    return {
        "task": cfg.task.value,
        "engine": cfg.engine.value,
        "semantics": cfg.semantics.value,
        "dataset": cfg.dataset_name,
        "dataset_hash": cases_hash(cfg.cases),
        "roster": [{"model": e.model_name, "rank": e.rank, "base_url": e.base_url} for e in roster],
        "sampling": {"translate": list(cfg.sampling.translate), "conflict": list(cfg.sampling.conflict)},
        "contexts": list(cfg.contexts),
        "mmr_lambda": cfg.mmr_lambda,
        "parallelism": cfg.parallelism,
        "python": platform.python_version(),
        **extra,
    }


def _run_translate(cfg: BenchConfig) -> BenchReport:
    pool_cases, test_cases = split_cases(cfg.cases)
    pool = [ContextExample(c.intent, c.expected) for c in pool_cases]
    roster = ordered_roster(cfg.roster)
    rows, results = [], []
    for ep in roster:
        for k in cfg.contexts:
            cell = _map(cfg, lambda c: _run_translation_case(cfg, ep, k, pool, c), test_cases)
            results.extend(cell)
            rows.append(BenchRow(ep.model_name, k, "accuracy", _mean(r.score for r in cell) if cell else None,
                                 _mean(r.latency_s for r in cell), len(cell),
                                 sum(r.unparseable for r in cell), sum(bool(r.error) for r in cell)))
    env = _environment(cfg, roster, {"pool_size": len(pool_cases), "test_size": len(test_cases)})
    return BenchReport(rows, env, results)


def _run_conflict(cfg: BenchConfig) -> BenchReport:
    cases = list(cfg.cases)
    if cfg.engine is EngineKind.ORACLE:
        cells = [(ORACLE_MODEL, lambda c: _oracle_verdict(cfg, c))]
        roster = []
    else:
        roster = ordered_roster(cfg.roster)
        cells = [(ep.model_name, lambda c, ep=ep: _llm_verdict(cfg, ep, c)) for ep in roster]
    rows, results, confusion = [], [], {}
    for model, fn in cells:
        cell = _map(cfg, fn, cases)
        results.extend(cell)
        counts: ConfusionCounts = score_conflicts(cases, [bool(r.verdict) for r in cell])
        confusion[model] = counts
        latency = _mean(r.latency_s for r in cell)
        unparseable = sum(r.unparseable for r in cell)
        errors = sum(bool(r.error) for r in cell)
        for name, value in counts.metrics().items():
            rows.append(BenchRow(model, 0, name, value, latency, len(cell), unparseable, errors))
    return BenchReport(rows, _environment(cfg, roster, {}), results, confusion)


def run_benchmark(cfg: BenchConfig) -> BenchReport:
    """Score every (model, context count) cell; per-case failures are tallied, never raised."""
    if cfg.task is BenchTask.TRANSLATE:
        return _run_translate(cfg)
    return _run_conflict(cfg)
