"""Ranked multi-model intent translation with context escalation and output validation."""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from netintent.errors import FieldDomain, LlmError, NoJsonFound, Unclassifiable, UnknownShape
from netintent.flow_model.codec import ENVELOPES, flow_from_dict
from netintent.flow_model.devices import DeviceTable
from netintent.flow_model.types import ControllerDialect, FlowRule
from netintent.llm.extract import extract_json
from netintent.llm.gateway import DEFAULT_SAMPLING, LlmEndpoint, SamplingProfile, Task, complete, ordered_roster
from netintent.llm.mmr import ContextExample, select_examples_mmr
from netintent.llm.prompts import build_translation_prompt, with_correction
from netintent.llm.slicing import SliceMeta, classify_slicing
from netintent.metadata import IntentType, classify_actions

log = logging.getLogger(__name__)


class IssueCode(str, Enum):
    MISSING_TAG = "MissingTag"
    BAD_TYPE = "BadType"
    BAD_DOMAIN = "BadDomain"
    UNKNOWN_ENVELOPE = "UnknownEnvelope"
    SEMANTIC_RULE = "SemanticRule"


@dataclass(frozen=True)
class ValidationIssue:
    path: str
    code: IssueCode
    message: str

    def to_json(self) -> dict:
        return {"path": self.path, "code": self.code.value, "message": self.message}


@dataclass(frozen=True)
class ValidationFeedback:
    valid: bool
    issues: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "issues", tuple(self.issues))
        if self.valid != (not self.issues):
            raise ValueError("feedback is valid exactly when it lists no issues")

    @classmethod
    def of(cls, issues: Sequence[ValidationIssue]) -> "ValidationFeedback":
        return cls(not issues, tuple(issues))

    def to_json(self) -> dict:
        return {"valid": self.valid, "issues": [i.to_json() for i in self.issues]}

    def serialize(self) -> str:
        return json.dumps(self.to_json(), indent=2)


# -- validation ------------------------------------------------------------------

REQUIRED_TAGS = {
    ControllerDialect.ODL: ("id", "table_id", "priority", "match", "instructions"),
    ControllerDialect.ONOS: ("deviceId", "priority", "selector"),
}
_ONOS_DEVICE_RE = re.compile(r"^of:[0-9a-fA-F]{16}$")
_ETH_IPV4 = 2048


def _is_intlike(value: Any) -> bool:
    if isinstance(value, bool):
        return False
    return isinstance(value, int) or (isinstance(value, str) and value.strip().isdigit())


def _check_odl_shape(flow: dict, base: str, issues: list) -> None:
    if "id" in flow and not isinstance(flow["id"], (str, int)):
        issues.append(ValidationIssue(f"{base}.id", IssueCode.BAD_TYPE, "id must be a string"))
    for key, hi in (("table_id", 254), ("priority", 65535)):
        if key not in flow:
            continue
        if not _is_intlike(flow[key]):
            issues.append(ValidationIssue(f"{base}.{key}", IssueCode.BAD_TYPE, f"{key} must be an integer"))
        elif not 0 <= int(flow[key]) <= hi:
            issues.append(ValidationIssue(f"{base}.{key}", IssueCode.BAD_DOMAIN, f"{key} must lie in 0..{hi}"))
    if "match" in flow and not isinstance(flow["match"], dict):
        issues.append(ValidationIssue(f"{base}.match", IssueCode.BAD_TYPE, "match must be an object"))
    ins = flow.get("instructions")
    if "instructions" in flow and not (isinstance(ins, dict) and isinstance(ins.get("instruction"), list)):
        issues.append(ValidationIssue(f"{base}.instructions", IssueCode.BAD_TYPE,
                                      "instructions must be an object holding an 'instruction' array"))


def _check_onos_shape(flow: dict, base: str, issues: list) -> None:
    dev = flow.get("deviceId")
    if "deviceId" in flow and not (isinstance(dev, str) and _ONOS_DEVICE_RE.match(dev)):
        issues.append(ValidationIssue(f"{base}.deviceId", IssueCode.BAD_DOMAIN,
                                      "deviceId must look like of:<16 hex digits>"))
    if "priority" in flow:
        if not _is_intlike(flow["priority"]):
            issues.append(ValidationIssue(f"{base}.priority", IssueCode.BAD_TYPE, "priority must be an integer"))
        elif not 0 <= int(flow["priority"]) <= 65535:
            issues.append(ValidationIssue(f"{base}.priority", IssueCode.BAD_DOMAIN, "priority must lie in 0..65535"))
    sel = flow.get("selector")
    if "selector" in flow and not (isinstance(sel, dict) and isinstance(sel.get("criteria"), list)):
        issues.append(ValidationIssue(f"{base}.selector", IssueCode.BAD_TYPE,
                                      "selector must be an object holding a 'criteria' array"))
    tr = flow.get("treatment")
    if "treatment" in flow and not (isinstance(tr, dict) and isinstance(tr.get("instructions", []), list)):
        issues.append(ValidationIssue(f"{base}.treatment", IssueCode.BAD_TYPE,
                                      "treatment must be an object holding an 'instructions' array"))


def _semantic_checks(dialect: ControllerDialect, rule: FlowRule, base: str,
                     intent_type: Optional[IntentType], issues: list) -> None:
    m, acts = rule.match, rule.actions
    if not acts.is_consistent():
        issues.append(ValidationIssue(base, IssueCode.SEMANTIC_RULE, "drop and output actions cannot be combined"))
    if dialect is ControllerDialect.ODL and not len(acts):
        issues.append(ValidationIssue(f"{base}.instructions", IssueCode.SEMANTIC_RULE, "flow has no actions"))
    eth = m.get("eth_type")
    uses_ip = any(m.get(n) is not None for n in ("src_ip", "dst_ip", "ip_proto"))
    if uses_ip and (eth is None or eth.value != _ETH_IPV4):
        issues.append(ValidationIssue(base, IssueCode.SEMANTIC_RULE,
                                      "IPv4 or protocol matches require ethernet type 2048"))
    uses_l4 = m.get("src_port") is not None or m.get("dst_port") is not None
    proto = m.get("ip_proto")
    if uses_l4 and (proto is None or proto.value not in (6, 17)):
        issues.append(ValidationIssue(base, IssueCode.SEMANTIC_RULE, "port matches require ip protocol 6 or 17"))
    if intent_type is IntentType.SECURITY:
        if dialect is ControllerDialect.ODL and not acts.drops:
            issues.append(ValidationIssue(f"{base}.instructions", IssueCode.SEMANTIC_RULE,
                                          "a security rule needs a drop-action"))
        if acts.forwards:
            what = "output-action" if dialect is ControllerDialect.ODL else "OUTPUT instruction"
            issues.append(ValidationIssue(base, IssueCode.SEMANTIC_RULE, f"a security rule must not carry an {what}"))
    elif intent_type is IntentType.QOS and not acts.queue_ids:
        issues.append(ValidationIssue(base, IssueCode.SEMANTIC_RULE, "a QoS rule needs a queue action"))
    elif intent_type is IntentType.FORWARDING and not acts.forwards:
        issues.append(ValidationIssue(base, IssueCode.SEMANTIC_RULE, "a forwarding rule needs an output action"))


def validate_flow(dialect, candidate: Any, intent_type: Optional[IntentType] = None) -> ValidationFeedback:
    """Every problem found in ``candidate``, not just the first."""
    dialect = ControllerDialect.parse(dialect)
    key = ENVELOPES[dialect]
    if not isinstance(candidate, dict) or key not in candidate:
        return ValidationFeedback.of([ValidationIssue(".", IssueCode.UNKNOWN_ENVELOPE,
                                                      f"top-level object must contain {key!r}")])
    flows = candidate[key]
    if not isinstance(flows, list) or not flows:
        return ValidationFeedback.of([ValidationIssue(f".{key}", IssueCode.UNKNOWN_ENVELOPE,
                                                      f"{key!r} must be a non-empty array")])
    issues: list[ValidationIssue] = []
    for i, flow in enumerate(flows):
        base = f".{key}[{i}]"
        if not isinstance(flow, dict):
            issues.append(ValidationIssue(base, IssueCode.BAD_TYPE, "flow entry must be an object"))
            continue
        for tag in REQUIRED_TAGS[dialect]:
            if tag not in flow:
                issues.append(ValidationIssue(f"{base}.{tag}", IssueCode.MISSING_TAG, f"required tag {tag!r} missing"))
        shape_issues: list[ValidationIssue] = []
        (_check_odl_shape if dialect is ControllerDialect.ODL else _check_onos_shape)(flow, base, shape_issues)
        issues.extend(shape_issues)
        if shape_issues:
            continue
        try:
            rule = flow_from_dict(dialect, flow)
        except FieldDomain as exc:
            issues.append(ValidationIssue(base, IssueCode.BAD_DOMAIN, str(exc)))
            continue
        except (UnknownShape, TypeError, AttributeError, ValueError) as exc:
            issues.append(ValidationIssue(base, IssueCode.BAD_TYPE, f"unreadable flow: {exc}"))
            continue
        _semantic_checks(dialect, rule, base, intent_type, issues)
    return ValidationFeedback.of(issues)


# -- translation loop --------------------------------------------------------------

DEFAULT_SCHEDULE = (0, 1, 3, 6, 9)


@dataclass(frozen=True)
class TranslationConfig:
    roster: Sequence[LlmEndpoint]
    dialect: ControllerDialect = ControllerDialect.ODL
    context_schedule: Sequence[int] = DEFAULT_SCHEDULE
    example_pool: Sequence[ContextExample] = ()
    sampling: SamplingProfile = DEFAULT_SAMPLING
    device_table: Optional[DeviceTable] = None
    # None keeps slot extraction deterministic (regex); an endpoint routes it through a model
    slicing_endpoint: Optional[LlmEndpoint] = None
    intent_type: Optional[IntentType] = None
    mmr_lambda: float = 0.5
    template_dir: Optional[Path] = None

    def __post_init__(self):
        object.__setattr__(self, "dialect", ControllerDialect.parse(self.dialect))
        object.__setattr__(self, "roster", tuple(ordered_roster(self.roster)))
        sched = tuple(self.context_schedule)
        if not sched or any(x < 0 for x in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError(f"context schedule must be non-empty, non-negative and strictly increasing: {sched}")
        object.__setattr__(self, "context_schedule", sched)
        object.__setattr__(self, "example_pool", tuple(self.example_pool))
        if self.device_table is None:
            object.__setattr__(self, "device_table", DeviceTable(self.dialect))


@dataclass(frozen=True)
class AttemptTrace:
    model: str
    context_count: int
    latency_s: float
    feedback: ValidationFeedback
    examples_used: int = 0
    raw_output: Optional[str] = None
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {"model": self.model, "context_count": self.context_count, "examples_used": self.examples_used,
                "latency_s": round(self.latency_s, 6), "feedback": self.feedback.to_json(), "error": self.error}


@dataclass(frozen=True)
class FailureReport:
    feedback: ValidationFeedback
    attempts: tuple

    def to_json(self) -> dict:
        return {"status": "failed", "feedback": self.feedback.to_json(),
                "attempts": [a.to_json() for a in self.attempts]}


@dataclass(frozen=True)
class TranslationOutcome:
    result: Union[FlowRule, FailureReport]
    trace: tuple
    flow_json: Optional[dict] = None
    slice_meta: Optional[SliceMeta] = None
    intent_type: Optional[IntentType] = None

    @property
    def ok(self) -> bool:
        return isinstance(self.result, FlowRule)

    @property
    def rule(self) -> FlowRule:
        if not self.ok:
            raise ValueError("translation failed; no rule available")
        return self.result

    def to_json(self) -> dict:
        out = {"ok": self.ok, "trace": [a.to_json() for a in self.trace]}
        if self.ok:
            out["flow"] = self.flow_json
            out["intent_type"] = self.intent_type.value if self.intent_type else None
        else:
            out["failure"] = self.result.to_json()
        return out


def _no_output_feedback(message: str) -> ValidationFeedback:
    return ValidationFeedback.of([ValidationIssue(".", IssueCode.UNKNOWN_ENVELOPE, message)])


def _expected_type(config: TranslationConfig, meta: Optional[SliceMeta]) -> Optional[IntentType]:
    if config.intent_type is not None:
        return config.intent_type
    if meta is not None and meta.queue_id is not None:
        return IntentType.QOS
    return None


def translate_intent(intent: str, config: TranslationConfig) -> TranslationOutcome:
    """Walk the roster in rank order and each model's context schedule until a candidate validates.

    An invalid attempt feeds its output and feedback into the next prompt as
    a correction block; the feedback is dropped when the next model starts.
    Transport failures count as invalid attempts.
    """
    meta = classify_slicing(intent, config.slicing_endpoint, config.sampling)
    if meta == SliceMeta():
        meta = None
    expected = _expected_type(config, meta)
    profile = config.sampling.for_task(Task.TRANSLATE)
    pool = config.example_pool
    trace: list[AttemptTrace] = []
    last = _no_output_feedback("no attempt made")

    for endpoint in config.roster:
        correction: Optional[tuple[str, str]] = None
        for x in config.context_schedule:
            start = time.perf_counter()
            k = min(x, len(pool))
            examples = select_examples_mmr(intent, pool, k, config.mmr_lambda)
            bundle = build_translation_prompt(intent, config.dialect, examples, meta, config.template_dir)
            if correction is not None:
                bundle = with_correction(bundle, correction[0], correction[1], config.template_dir)
            raw, error, candidate = None, None, None
            try:
                raw = complete(endpoint, bundle, profile).text
                candidate = extract_json(raw)
                feedback = validate_flow(config.dialect, candidate, expected)
            except LlmError as exc:
                error = f"{type(exc).__name__}: {exc}"
                feedback = _no_output_feedback(f"model call failed: {error}")
            except NoJsonFound as exc:
                error = str(exc)
                feedback = _no_output_feedback("output contains no JSON value")
            trace.append(AttemptTrace(endpoint.model_name, x, time.perf_counter() - start, feedback,
                                      k, raw, error))
            last = feedback
            if feedback.valid:
                device = config.device_table.from_intent(intent)
                if device is None and config.dialect is ControllerDialect.ODL:
                    device = config.device_table.resolve(1)
                rule = flow_from_dict(config.dialect, candidate[ENVELOPES[config.dialect]][0], device_id=device)
                try:
                    itype = classify_actions(rule)
                except Unclassifiable:
                    itype = None
                return TranslationOutcome(rule, tuple(trace), candidate, meta, itype)
            log.info("attempt %d (%s, ctx %d) invalid: %d issue(s)", len(trace), endpoint.model_name, x,
                     len(feedback.issues))
            correction = (feedback.serialize(), raw if raw is not None else "(no output)")
    return TranslationOutcome(FailureReport(last, tuple(trace)), tuple(trace), None, meta, None)
