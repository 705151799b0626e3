"""Conflict-aware activation of translated flow rules."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

from netintent.conflict.engine import (
    ConflictVerdict,
    OverlapSemantics,
    detect_conflict,
    match_relation,
)
from netintent.controllers.base import Controller
from netintent.errors import NetIntentError, SchemaError, Unclassifiable, VerifyFailed
from netintent.flow_model.codec import flow_to_dict
from netintent.flow_model.types import ControllerDialect, FlowRule
from netintent.llm.extract import extract_json
from netintent.llm.gateway import DEFAULT_SAMPLING, LlmEndpoint, SamplingProfile, Task, complete
from netintent.llm.prompts import build_conflict_prompt
from netintent.metadata import IntentType, RuleMetadata, classify_actions, infer_metadata, specificity
from netintent.store import IntentRecord, IntentStore, RecordStatus
from netintent.traffic import TestTrafficSpec

log = logging.getLogger(__name__)

SPECIFICITY_EPS = 1e-9


class Decision(str, Enum):
    KEEP_NEW = "KeepNew"
    KEEP_EXISTING = "KeepExisting"
    MANUAL = "Manual"


@dataclass(frozen=True)
class ResolutionDecision:
    decision: Decision
    rationale: str
    criterion: str = ""   # "security", "specificity", "priority" or "" for Manual

    def to_json(self) -> dict:
        return {"decision": self.decision.value, "rationale": self.rationale, "criterion": self.criterion}


def resolve_conflict(new: tuple, existing: tuple) -> ResolutionDecision:
    """Pick the surviving rule of a conflicting pair.

    Security beats everything; otherwise the more specific rule wins, then
    the higher priority.  Rules of different non-security types are
    compared on specificity like rules of the same type.
    """
    (r_new, m_new), (r_old, m_old) = new, existing
    sec_new = m_new.intent_type is IntentType.SECURITY
    sec_old = m_old.intent_type is IntentType.SECURITY
    if sec_new != sec_old:
        winner = Decision.KEEP_NEW if sec_new else Decision.KEEP_EXISTING
        return ResolutionDecision(winner, "security rule takes precedence", "security")
    diff = m_new.specificity - m_old.specificity
    if abs(diff) > SPECIFICITY_EPS:
        winner = Decision.KEEP_NEW if diff > 0 else Decision.KEEP_EXISTING
        return ResolutionDecision(
            winner, f"more specific rule kept ({m_new.specificity:g} vs {m_old.specificity:g})", "specificity")
    if r_new.priority != r_old.priority:
        winner = Decision.KEEP_NEW if r_new.priority > r_old.priority else Decision.KEEP_EXISTING
        return ResolutionDecision(
            winner, f"higher priority kept ({r_new.priority} vs {r_old.priority})", "priority")
    types = "both security" if sec_new else f"{m_new.intent_type.value} vs {m_old.intent_type.value}"
    return ResolutionDecision(
        Decision.MANUAL,
        f"no precedence ({types}): specificity tied at {m_new.specificity:g}, priority tied at {r_new.priority}")


# -- conflict engines ---------------------------------------------------------------

class ConflictEngine(Protocol):
    def check(self, new: FlowRule, existing: FlowRule) -> ConflictVerdict: ...


@dataclass
class OracleEngine:
    semantics: OverlapSemantics = OverlapSemantics.STRICT

    def __post_init__(self):
        self.semantics = OverlapSemantics(self.semantics)

    def check(self, new: FlowRule, existing: FlowRule) -> ConflictVerdict:
        return detect_conflict(new, existing, self.semantics)


def parse_conflict_reply(obj) -> tuple[bool, str]:
    """``(status, explanation)`` from a decoded model reply."""
    if isinstance(obj, list) and len(obj) == 1:
        obj = obj[0]
    if not isinstance(obj, dict) or "conflict_status" not in obj:
        raise SchemaError(None, "reply lacks conflict_status")
    raw = obj["conflict_status"]
    if isinstance(raw, bool):
        status = raw
    elif isinstance(raw, (int, float)) and raw in (0, 1):
        status = bool(raw)
    elif isinstance(raw, str) and raw.strip().lower() in ("0", "1", "true", "false", "yes", "no"):
        status = raw.strip().lower() in ("1", "true", "yes")
    else:
        raise SchemaError(None, f"conflict_status {raw!r} is not 0/1")
    explanation = obj.get("conflict_explanation") or ""
    if not isinstance(explanation, str):
        explanation = str(explanation)
    return status, explanation


@dataclass
class LlmEngine:
    """Asks a model whether two rules conflict; its verdict is taken as given.

    With ``cross_check`` the deterministic engine also runs and disagreements
    are kept in ``disagreements`` for audit.
    """

    endpoint: LlmEndpoint
    dialect: ControllerDialect = ControllerDialect.ODL
    sampling: SamplingProfile = DEFAULT_SAMPLING
    cross_check: bool = False
    disagreements: list = field(default_factory=list)

    def __post_init__(self):
        self.dialect = ControllerDialect.parse(self.dialect)

    def check(self, new: FlowRule, existing: FlowRule) -> ConflictVerdict:
        prompt = build_conflict_prompt(flow_to_dict(self.dialect, new), flow_to_dict(self.dialect, existing),
                                       self.dialect)
        text = complete(self.endpoint, prompt, self.sampling.for_task(Task.CONFLICT_DETECT)).text
        status, explanation = parse_conflict_reply(extract_json(text))
        verdict = ConflictVerdict(status, explanation if status else "", match_relation(new.match, existing.match))
        if self.cross_check:
            oracle = detect_conflict(new, existing)
            if oracle.conflict_status != status:
                self.disagreements.append((new.flow_id, existing.flow_id, status, oracle.conflict_status))
        return verdict


# -- activation ------------------------------------------------------------------------

@dataclass(frozen=True)
class ConflictFinding:
    peer: FlowRule
    verdict: ConflictVerdict
    decision: ResolutionDecision

    def to_json(self, dialect) -> dict:
        return {"peer": flow_to_dict(dialect, self.peer), "verdict": self.verdict.to_json(),
                "decision": self.decision.to_json()}


@dataclass
class ActivationOutcome:
    installed: bool
    rule: FlowRule
    conflicts: list = field(default_factory=list)
    record: Optional[IntentRecord] = None
    non_priority: list = field(default_factory=list)   # losing existing rules, logged for audit
    report: str = ""

    @property
    def status(self) -> RecordStatus:
        return self.record.status if self.record else RecordStatus.REJECTED

    def to_json(self, dialect) -> dict:
        return {"installed": self.installed, "status": self.status.value, "flow_id": self.rule.flow_id,
                "device_id": self.rule.device_id, "report": self.report,
                "conflicts": [c.to_json(dialect) for c in self.conflicts],
                "non_priority": [r.flow_id for r in self.non_priority]}


_locks_guard = threading.Lock()
_device_locks: dict = {}


def device_lock(device_id: str) -> threading.Lock:
    with _locks_guard:
        return _device_locks.setdefault(device_id, threading.Lock())


def _peer_metadata(rule: FlowRule) -> Optional[RuleMetadata]:
    try:
        return infer_metadata(rule)
    except Unclassifiable:
        return None


def _free_flow_id(rule: FlowRule, installed: list, store: IntentStore) -> FlowRule:
    """Rename ``rule`` when its id already names a different rule on the device."""
    taken = {r.flow_id: r for r in installed}
    for rec in store.installed():
        if rec.device_id == rule.device_id and rec.rule.table_id == rule.table_id:
            taken.setdefault(rec.flow_id, rec.rule)

    def clashes(fid):
        return fid in taken and taken[fid].core() != rule.replace(flow_id=fid).core()

    if not clashes(rule.flow_id):
        return rule
    n = 2
    while f"{rule.flow_id}-{n}" in taken:
        n += 1
    return rule.replace(flow_id=f"{rule.flow_id}-{n}")


def activate(rule: FlowRule, intent_text: str, controller: Controller, engine: ConflictEngine,
             store: IntentStore, flow_json: Optional[dict] = None,
             traffic_spec: Optional[TestTrafficSpec] = None,
             intent_type: Optional[IntentType] = None) -> ActivationOutcome:
    """Scan the device table for conflicts, resolve them and install the survivor.

    Any Manual decision escalates; any KeepExisting rejects.  Otherwise the
    rule is installed, its presence in the operational view is verified and
    an Installed record is journalled.  Losing existing rules stay in place.
    ``intent_type`` records what the operator asked for when it differs
    from what the rule's actions imply; resolution always uses the latter.
    """
    dialect = controller.dialect
    with device_lock(rule.device_id):
        installed = controller.fetch_installed(rule.device_id, rule.table_id)
        rule = _free_flow_id(rule, installed, store)
        current = store.get(rule.device_id, rule.flow_id)
        if current is not None and current.status is RecordStatus.INSTALLED \
                and any(p.core() == rule.core() for p in installed):
            return ActivationOutcome(True, rule, [], current, report="already installed")
        meta = RuleMetadata(classify_actions(rule), specificity(rule))
        findings: list[ConflictFinding] = []
        for peer in installed:
            if peer.core() == rule.core():
                continue
            try:
                verdict = engine.check(rule, peer)
            except NetIntentError as exc:
                verdict = ConflictVerdict(True, f"conflict engine failed: {exc}", match_relation(rule.match, peer.match))
                findings.append(ConflictFinding(peer, verdict, ResolutionDecision(
                    Decision.MANUAL, f"conflict check could not complete ({type(exc).__name__})")))
                continue
            if not verdict.conflict_status:
                continue
            peer_meta = _peer_metadata(peer)
            if peer_meta is None:
                decision = ResolutionDecision(Decision.MANUAL, f"existing rule {peer.flow_id!r} has no classifiable action")
            else:
                decision = resolve_conflict((rule, meta), (peer, peer_meta))
            findings.append(ConflictFinding(peer, verdict, decision))

        flow_json = flow_json if flow_json is not None else flow_to_dict(dialect, rule)
        base = dict(intent_text=intent_text, intent_type=intent_type or meta.intent_type, flow_json=flow_json, rule=rule,
                    dialect=dialect, specificity=meta.specificity, traffic_spec=traffic_spec)
        decisions = [f.decision.decision for f in findings]
        if Decision.MANUAL in decisions:
            report = _report(rule, findings, "escalated for manual resolution")
            log.warning(report)
            rec = IntentRecord(status=RecordStatus.ESCALATED, note=report, **base)
            store.append(rec)
            return ActivationOutcome(False, rule, findings, rec, report=report)
        if Decision.KEEP_EXISTING in decisions:
            report = _report(rule, findings, "rejected in favour of existing rules")
            log.info(report)
            rec = IntentRecord(status=RecordStatus.REJECTED, note=report, **base)
            store.append(rec)
            return ActivationOutcome(False, rule, findings, rec, report=report)

        losers = [f.peer for f in findings]
        for peer in losers:
            log.info("non-priority rule kept for audit: %s/%s", peer.device_id, peer.flow_id)
        stored = controller.install_rule(rule)
        if stored.flow_id != rule.flow_id:
            rule = stored
            base["rule"] = stored
        if controller.fetch_flow(stored.device_id, stored.flow_id, stored.table_id) is None:
            raise VerifyFailed(f"flow {stored.flow_id!r} missing from the operational view of {stored.device_id!r}")
        previous = store.get(stored.device_id, stored.flow_id)
        if previous is not None and previous.status is RecordStatus.INSTALLED:
            store.append(previous.with_status(RecordStatus.SUPERSEDED, "replaced by a new activation"))
        rec = IntentRecord(status=RecordStatus.INSTALLED, **base)
        store.append(rec)
        report = _report(rule, findings, "installed") if findings else "installed without conflicts"
        return ActivationOutcome(True, rule, findings, rec, losers, report)


def _report(rule: FlowRule, findings: list, outcome: str) -> str:
    lines = [f"flow {rule.flow_id!r} on {rule.device_id}: {outcome}"]
    for f in findings:
        lines.append(f"  vs {f.peer.flow_id!r} (priority {f.peer.priority}): {f.verdict.conflict_explanation}; "
                     f"{f.decision.decision.value}: {f.decision.rationale}")
    return "\n".join(lines)


__all__ = [
    "ActivationOutcome", "ConflictEngine", "ConflictFinding", "Decision", "IntentType", "LlmEngine",
    "OracleEngine", "ResolutionDecision", "RuleMetadata", "activate", "classify_actions", "device_lock",
    "infer_metadata", "parse_conflict_reply", "resolve_conflict", "specificity",
]
