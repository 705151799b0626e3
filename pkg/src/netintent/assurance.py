"""Closed-loop verification of installed intents with model-guided remediation."""

from __future__ import annotations

import dataclasses
import logging
import shlex
import subprocess
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional, Protocol, Sequence

from netintent.controllers.base import Controller
from netintent.controllers.topology import Topology
from netintent.errors import (
    ControllerUnreachable,
    CounterRegression,
    NetIntentError,
    NoActionableSuggestion,
    NoJsonFound,
    NoSuchFlow,
    UnresolvableEndpoints,
)
from netintent.flow_model.codec import flow_to_dict
from netintent.flow_model.devices import switch_number
from netintent.flow_model.types import ActionSet, Drop, FlowRule, Output, SetQueue
from netintent.llm.extract import extract_json
from netintent.llm.gateway import DEFAULT_SAMPLING, LlmEndpoint, SamplingProfile, Task, complete
from netintent.llm.prompts import RemediationContext, build_remediation_prompt
from netintent.metadata import IntentType
from netintent.store import IntentRecord, IntentStore, RecordStatus
from netintent.traffic import TestTrafficSpec, TrafficProtocol, TrafficStats

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AssuranceConfig:
    """Thresholds and synthetic-traffic defaults.

    ``rate_tolerance`` (bits/s) defaults to 10% of the spec's expected rate;
    ``expected_blocked`` defaults to the number of probe packets sent.
    """

    alpha: float = 0.98
    rate_tolerance: Optional[float] = None
    max_attempts: int = 3
    expected_blocked: Optional[int] = None
    probe_packets: int = 10
    qos_bytes: int = 1_250_000
    qos_rate_bps: float = 1_000_000.0
    qos_duration_s: float = 10.0
    exhaust_actions: bool = False
    sampling: SamplingProfile = DEFAULT_SAMPLING

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.rate_tolerance is not None and self.rate_tolerance <= 0:
            raise ValueError("rate_tolerance must be positive")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.expected_blocked is not None and self.expected_blocked < 0:
            raise ValueError("expected_blocked must be non-negative")

    def tolerance_for(self, spec: TestTrafficSpec) -> float:
        return self.rate_tolerance if self.rate_tolerance is not None else 0.1 * spec.expected_rate_bps

    def blocked_for(self, spec: TestTrafficSpec) -> int:
        return self.expected_blocked if self.expected_blocked is not None else spec.expected_packets


# -- traffic specs ------------------------------------------------------------------------

def _protocol_for(rule: FlowRule) -> Optional[TrafficProtocol]:
    proto = rule.match.get("ip_proto")
    if proto is None:
        return None
    return {1: TrafficProtocol.ICMP, 6: TrafficProtocol.TCP, 17: TrafficProtocol.UDP}.get(proto.value)


def _single_port(rule: FlowRule, name: str) -> Optional[int]:
    c = rule.match.get(name)
    if c is None:
        return None
    return c.interval((0, 0xFFFF))[0]   # a range is probed at its low end


def _endpoints(rule: FlowRule, topology: Topology) -> tuple[str, str]:
    dst_c, src_c = rule.match.get("dst_ip"), rule.match.get("src_ip")
    if dst_c is None and src_c is None:
        raise UnresolvableEndpoints(f"flow {rule.flow_id!r} names no source or destination address")
    dsts = topology.hosts_in(dst_c)
    srcs = topology.hosts_in(src_c)
    if not dsts or not srcs:
        raise UnresolvableEndpoints(f"flow {rule.flow_id!r} covers no host in topology {topology.name!r}")
    device = _topology_name(rule.device_id, topology)
    local = [h for h in srcs if h.device == device]
    for src in local + [h for h in srcs if h not in local]:
        for dst in dsts:
            if dst.name != src.name:
                return src.name, dst.name
    raise UnresolvableEndpoints(f"flow {rule.flow_id!r} leaves no distinct source and destination")


def _topology_name(device_id: str, topology: Topology) -> Optional[str]:
    n = switch_number(device_id)
    for name in topology.devices:
        if name == device_id or (n is not None and switch_number(name) == n):
            return name
    return None


def make_traffic_spec(record: IntentRecord, topology: Topology, cfg: AssuranceConfig = AssuranceConfig()
                      ) -> TestTrafficSpec:
    """Probe traffic for one record.

    Forwarding and Security rules get ``probe_packets`` packets; these are
    ICMP unless the match pins a transport protocol, in which case the
    probes use it so that they can hit the rule at all.  QoS rules get a
    TCP (or UDP) transfer of ``qos_bytes`` at ``qos_rate_bps``.
    """
    rule = record.rule
    src, dst = _endpoints(rule, topology)
    proto = _protocol_for(rule)
    dst_port = _single_port(rule, "dst_port")
    src_port = _single_port(rule, "src_port") if rule.match.get("src_port") else None
    if record.intent_type is IntentType.QOS:
        p = proto if proto in (TrafficProtocol.TCP, TrafficProtocol.UDP) else TrafficProtocol.TCP
        return TestTrafficSpec(src, dst, p, expected_bytes=cfg.qos_bytes, expected_rate_bps=cfg.qos_rate_bps,
                               duration_s=cfg.qos_duration_s, dst_port=dst_port, src_port=src_port)
    p = proto or TrafficProtocol.ICMP
    if p is TrafficProtocol.ICMP:
        dst_port = src_port = None
    return TestTrafficSpec(src, dst, p, expected_packets=cfg.probe_packets, dst_port=dst_port, src_port=src_port)


# -- deltas and verdicts ---------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaStats:
    d_packets: int
    d_bytes: int
    d_queue_bytes: int
    t_start: float
    t_end: float

    @property
    def window_s(self) -> float:
        return self.t_end - self.t_start

    def to_json(self) -> dict:
        return {"d_packets": self.d_packets, "d_bytes": self.d_bytes, "d_queue_bytes": self.d_queue_bytes,
                "t_start": self.t_start, "t_end": self.t_end}


def compute_delta(s_i: TrafficStats, s_f: TrafficStats, queue_id: Optional[int] = None) -> DeltaStats:
    if s_f.captured_at <= s_i.captured_at:
        raise ValueError("final snapshot must be captured after the initial one")
    d_packets = s_f.packet_count - s_i.packet_count
    d_bytes = s_f.byte_count - s_i.byte_count
    if queue_id is None:
        d_queue = d_bytes
    else:
        d_queue = s_f.queue_tx_bytes.get(queue_id, 0) - s_i.queue_tx_bytes.get(queue_id, 0)
    if min(d_packets, d_bytes, d_queue) < 0:
        raise CounterRegression(f"counters went backwards (packets {d_packets}, bytes {d_bytes}, queue {d_queue})")
    return DeltaStats(d_packets, d_bytes, d_queue, s_i.captured_at, s_f.captured_at)


@dataclass(frozen=True)
class Verdict:
    verified: bool
    reason: str
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verified": self.verified, "reason": self.reason, "metrics": self.metrics}


def verify_intent(record: IntentRecord, delta: DeltaStats, spec: TestTrafficSpec,
                  cfg: AssuranceConfig = AssuranceConfig()) -> Verdict:
    kind = record.intent_type
    if kind is IntentType.FORWARDING:
        m = {"d_packets": delta.d_packets, "expected_packets": spec.expected_packets}
        if delta.d_packets < spec.expected_packets:
            return Verdict(False, "packets", m)
        return Verdict(True, "ok", m)
    if kind is IntentType.SECURITY:
        blocked = cfg.blocked_for(spec)
        m = {"d_packets": delta.d_packets, "expected_blocked": blocked}
        if record.rule.actions.forwards:
            return Verdict(False, "forwarding behavior", m)
        if delta.d_packets < blocked:
            return Verdict(False, "packets", m)
        return Verdict(True, "ok", m)
    rate = delta.d_queue_bytes * 8 / delta.window_s
    eps = cfg.tolerance_for(spec)
    need = cfg.alpha * spec.expected_bytes
    m = {"d_queue_bytes": delta.d_queue_bytes, "required_bytes": need, "rate_measured_bps": rate,
         "expected_rate_bps": spec.expected_rate_bps, "rate_tolerance_bps": eps}
    if delta.d_queue_bytes < need:
        return Verdict(False, "volume", m)
    if abs(rate - spec.expected_rate_bps) > eps:
        return Verdict(False, "rate", m)
    return Verdict(True, "ok", m)


# -- remediation -----------------------------------------------------------------------------

class ActionKind(str, Enum):
    CHECK_MATCH_FIELDS = "check_match_fields"
    INCREASE_PRIORITY = "increase_priority"
    VERIFY_QUEUE_MAPPING = "verify_queue_mapping"
    RETRANSLATE_INTENT = "retranslate_intent"
    REMOVE_OUTPUT_ACTION = "remove_output_action"


@dataclass(frozen=True)
class RemediationAction:
    kind: ActionKind
    argument: Optional[dict] = None
    cause: str = ""

    def to_json(self) -> dict:
        return {"action": self.kind.value, "argument": self.argument or {}, "cause": self.cause}


@dataclass(frozen=True)
class ExecutionResult:
    ok: bool
    detail: str
    record: Optional[IntentRecord] = None   # updated record when the rule changed

    def to_json(self) -> dict:
        return {"ok": self.ok, "detail": self.detail}


@dataclass
class RemediationEnv:
    controller: Controller
    store: IntentStore
    installed_rules: Sequence[FlowRule] = ()
    queue_stats: Optional[dict] = None
    history: list = field(default_factory=list)
    translation: Optional[object] = None   # TranslationConfig used by retranslate_intent
    spec: Optional[TestTrafficSpec] = None


def parse_actions(obj) -> tuple[list[RemediationAction], list[str]]:
    """Mapped actions in ranked order plus the names that were skipped."""
    if isinstance(obj, dict):
        obj = obj.get("actions", obj.get("recommendations", [obj]))
    if not isinstance(obj, list):
        return [], [repr(obj)]
    actions, skipped = [], []
    for item in obj:
        if isinstance(item, str):
            item = {"action": item}
        if not isinstance(item, dict):
            skipped.append(repr(item))
            continue
        name = str(item.get("action", "")).strip().lower()
        try:
            kind = ActionKind(name)
        except ValueError:
            log.warning("skipping unknown remediation action %r", name)
            skipped.append(name)
            continue
        arg = item.get("argument")
        actions.append(RemediationAction(kind, arg if isinstance(arg, dict) else None, str(item.get("cause", ""))))
    return actions, skipped


def _replace_rule(record: IntentRecord, new_rule: FlowRule, env: RemediationEnv, note: str) -> IntentRecord:
    """Swap the installed rule for ``new_rule`` and journal the change."""
    ctl, dialect = env.controller, record.dialect
    try:
        ctl.delete_rule(record.device_id, record.flow_id, record.rule.table_id)
    except NoSuchFlow:
        pass
    stored = ctl.install_rule(new_rule)
    updated = record.with_status(RecordStatus.INSTALLED, note, rule=stored, flow_json=flow_to_dict(dialect, stored))
    if updated.key != record.key:
        env.store.append(record.with_status(RecordStatus.SUPERSEDED, f"replaced by {stored.flow_id}"))
        updated = dataclasses.replace(updated, record_id=uuid.uuid4().hex)
    env.store.append(updated)
    return updated


def execute_action(action: RemediationAction, record: IntentRecord, env: RemediationEnv) -> ExecutionResult:
    rule = record.rule
    arg = action.argument or {}
    kind = action.kind
    if kind is ActionKind.INCREASE_PRIORITY:
        delta = int(arg.get("delta", 10))
        if delta <= 0:
            return ExecutionResult(False, f"delta {delta} does not raise priority")
        new = rule.replace(priority=min(rule.priority + delta, 65535))
        rec = _replace_rule(record, new, env, f"priority {rule.priority} -> {new.priority}")
        return ExecutionResult(True, f"priority raised to {new.priority}", rec)
    if kind is ActionKind.REMOVE_OUTPUT_ACTION:
        kept = tuple(a for a in rule.actions if not isinstance(a, (Output, SetQueue)))
        if len(kept) == len(rule.actions):
            return ExecutionResult(False, "rule has no output action")
        if not any(isinstance(a, Drop) for a in kept):
            kept = kept + (Drop(),)
        new = rule.replace(actions=ActionSet(kept))
        rec = _replace_rule(record, new, env, "output action removed")
        return ExecutionResult(True, "output action removed", rec)
    if kind is ActionKind.VERIFY_QUEUE_MAPPING:
        queues = sorted(rule.actions.queue_ids)
        port = int(arg.get("port", min(rule.actions.output_ports, default=0)))
        queue = int(arg.get("queue_id", queues[0] if queues else 0))
        remap = getattr(env.controller, "remap_queue", None)
        if remap is None:
            return ExecutionResult(False, f"controller cannot rebind queue {queue} on port {port}")
        if remap(record.device_id, port, queue):
            return ExecutionResult(True, f"queue {queue} rebound on port {port}")
        return ExecutionResult(False, f"queue {queue} on port {port} was already mapped")
    if kind is ActionKind.CHECK_MATCH_FIELDS:
        live = env.controller.fetch_flow(record.device_id, record.flow_id, rule.table_id)
        if live is not None and live.match == rule.match:
            return ExecutionResult(False, "installed match fields agree with the stored rule")
        rec = _replace_rule(record, rule, env, "match fields restored")
        return ExecutionResult(True, "match fields restored from the store", rec)
    # retranslate
    from netintent.translation import translate_intent

    if env.translation is None:
        return ExecutionResult(False, "no translation configuration available")
    outcome = translate_intent(record.intent_text, env.translation)
    if not outcome.ok:
        return ExecutionResult(False, "retranslation produced no valid rule")
    new = outcome.rule.replace(device_id=record.device_id, flow_id=record.flow_id)
    rec = _replace_rule(record, new, env, "retranslated")
    return ExecutionResult(True, "rule regenerated from the intent text", rec)


def remediate(record: IntentRecord, verdict: Verdict, env: RemediationEnv, endpoint: LlmEndpoint,
              cfg: AssuranceConfig = AssuranceConfig()) -> list[tuple[RemediationAction, ExecutionResult]]:
    """Ask the model for ranked fixes and run the first one it names that maps to an action."""
    ctx = RemediationContext(
        intent=record.intent_text,
        flow_rule=record.flow_json or flow_to_dict(record.dialect, record.rule),
        traffic_spec=env.spec.to_json() if env.spec else None,
        deviation=verdict.to_json(),
        installed_rules=[flow_to_dict(record.dialect, r) for r in env.installed_rules],
        queue_stats=env.queue_stats,
        controller=getattr(env.controller, "name", type(env.controller).__name__),
        feedback=tuple(env.history),
    )
    text = complete(endpoint, build_remediation_prompt(ctx), cfg.sampling.for_task(Task.REMEDIATE)).text
    try:
        actions, skipped = parse_actions(extract_json(text))
    except NoJsonFound as exc:
        raise NoActionableSuggestion("remediation reply held no JSON") from exc
    if not actions:
        raise NoActionableSuggestion(f"no known action in reply (skipped: {', '.join(skipped) or 'none'})")
    results = []
    for action in actions if cfg.exhaust_actions else actions[:1]:
        try:
            result = execute_action(action, record, env)
        except NetIntentError as exc:
            result = ExecutionResult(False, f"{type(exc).__name__}: {exc}")
        if result.record is not None:
            record = result.record
        env.history.append({**action.to_json(), **result.to_json()})
        results.append((action, result))
    return results


# -- traffic drivers ----------------------------------------------------------------------------

class TrafficDriver(Protocol):
    def send(self, spec: TestTrafficSpec) -> None: ...


class SimTrafficDriver:
    def __init__(self, sim):
        self.sim = sim
        self.rounds = 0

    def send(self, spec: TestTrafficSpec) -> None:
        self.rounds += 1
        self.sim.inject_traffic(spec)


class LiveTrafficDriver:
    """Runs ping or iperf3 inside the source host's namespace.

    ``host_prefix`` is formatted with the host name, e.g. ``"m {host}"`` for
    Mininet's helper script.
    """

    def __init__(self, topology: Topology, host_prefix: str = "m {host}",
                 runner: Optional[Callable[[list], None]] = None):
        self.topology = topology
        self.host_prefix = host_prefix
        self.runner = runner or _run_live

    def commands(self, spec: TestTrafficSpec) -> list[list[str]]:
        dst = self.topology.host(spec.dst_host).ip_text
        prefix = shlex.split(self.host_prefix.format(host=spec.src_host))
        if spec.protocol is TrafficProtocol.ICMP:
            return [prefix + ["ping", "-c", str(spec.expected_packets), "-i", "0.2", dst]]
        cmd = prefix + ["iperf3", "-c", dst, "-p", str(spec.dst_port or 5201)]
        if spec.protocol is TrafficProtocol.UDP:
            cmd.append("-u")
        if spec.expected_bytes:
            cmd += ["-n", str(spec.expected_bytes)]
        else:
            cmd += ["-k", str(spec.expected_packets)]
        if spec.expected_rate_bps:
            cmd += ["-b", str(int(spec.expected_rate_bps))]
        return [cmd]

    def send(self, spec: TestTrafficSpec) -> None:
        for cmd in self.commands(spec):
            self.runner(cmd)


def _run_live(argv: list) -> None:
    try:
        subprocess.run(argv, check=True, capture_output=True, timeout=600)
    except (OSError, subprocess.SubprocessError) as exc:
        raise ControllerUnreachable(f"traffic command failed: {exc}") from exc


# -- the loop --------------------------------------------------------------------------------------

class EventKind(str, Enum):
    VERIFIED = "Verified"
    FAILED = "Failed"
    REINSTALLED = "Reinstalled"
    REMEDIATED = "Remediated"
    NO_ACTION = "NoActionableSuggestion"
    ESCALATED = "Escalated"
    ERROR = "Error"


@dataclass(frozen=True)
class AssuranceEvent:
    kind: EventKind
    device_id: str
    flow_id: str
    attempt: int
    detail: dict = field(default_factory=dict)
    at: float = field(default_factory=time.time)

    def to_json(self) -> dict:
        return {"event": self.kind.value, "device_id": self.device_id, "flow_id": self.flow_id,
                "attempt": self.attempt, "detail": self.detail}


def _reinstall(record: IntentRecord, controller: Controller) -> None:
    try:
        controller.delete_rule(record.device_id, record.flow_id, record.rule.table_id)
    except NoSuchFlow:
        pass
    controller.install_rule(record.rule)


def _queue_for(rule: FlowRule) -> Optional[int]:
    queues = sorted(rule.actions.queue_ids)
    return queues[0] if queues else None


def assure_record(record: IntentRecord, store: IntentStore, controller: Controller, traffic: TrafficDriver,
                  cfg: AssuranceConfig, endpoint: Optional[LlmEndpoint], topology: Topology,
                  translation=None) -> Iterator[AssuranceEvent]:
    env = RemediationEnv(controller, store, translation=translation)
    for attempt in range(1, cfg.max_attempts + 1):
        dev, fid, table = record.device_id, record.flow_id, record.rule.table_id
        live = controller.fetch_flow(dev, fid, table)
        if live is None or live.core() != record.rule.core():
            _reinstall(record, controller)
            yield AssuranceEvent(EventKind.REINSTALLED, dev, fid, attempt,
                                 {"reason": "missing" if live is None else "mismatched"})
            continue
        spec = record.traffic_spec or make_traffic_spec(record, topology, cfg)
        s_i = controller.fetch_stats(dev, fid, table)
        traffic.send(spec)
        s_f = controller.fetch_stats(dev, fid, table)
        try:
            delta = compute_delta(s_i, s_f, _queue_for(record.rule))
        except CounterRegression as exc:
            _reinstall(record, controller)
            yield AssuranceEvent(EventKind.REINSTALLED, dev, fid, attempt, {"reason": str(exc)})
            continue
        verdict = verify_intent(record, delta, spec, cfg)
        if verdict.verified:
            yield AssuranceEvent(EventKind.VERIFIED, dev, fid, attempt, verdict.to_json())
            return
        yield AssuranceEvent(EventKind.FAILED, dev, fid, attempt, {**verdict.to_json(), "delta": delta.to_json()})
        if endpoint is None or attempt == cfg.max_attempts:
            continue
        env.installed_rules = controller.fetch_installed(dev, None)
        env.queue_stats = controller.queue_stats(dev) or None
        env.spec = spec
        try:
            results = remediate(record, verdict, env, endpoint, cfg)
        except NoActionableSuggestion as exc:
            yield AssuranceEvent(EventKind.NO_ACTION, dev, fid, attempt, {"reason": str(exc)})
            continue
        for action, result in results:
            if result.record is not None:
                record = result.record
            yield AssuranceEvent(EventKind.REMEDIATED, dev, fid, attempt, {**action.to_json(), **result.to_json()})
    current = store.get(record.device_id, record.flow_id) or record
    if current.status is RecordStatus.INSTALLED:
        store.append(current.with_status(RecordStatus.ESCALATED, "assurance attempts exhausted"))
    yield AssuranceEvent(EventKind.ESCALATED, record.device_id, record.flow_id, cfg.max_attempts,
                         {"reason": "max attempts reached"})


def assurance_loop(store: IntentStore, controller: Controller, traffic: TrafficDriver,
                   cfg: AssuranceConfig = AssuranceConfig(), endpoint: Optional[LlmEndpoint] = None,
                   topology: Optional[Topology] = None, translation=None) -> Iterator[AssuranceEvent]:
    """One pass over every Installed record; per-record errors become events."""
    topology = topology or getattr(controller, "topology", None) or Topology.diamond()
    keys = [r.key for r in store.installed()]
    for key in keys:
        record = store.get(*key)   # re-read: activations may run concurrently
        if record is None or record.status is not RecordStatus.INSTALLED:
            continue
        try:
            yield from assure_record(record, store, controller, traffic, cfg, endpoint, topology, translation)
        except NetIntentError as exc:
            yield AssuranceEvent(EventKind.ERROR, record.device_id, record.flow_id, 0,
                                 {"error": type(exc).__name__, "message": str(exc)})
