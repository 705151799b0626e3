"""In-memory SDN controller with a packet-level traffic engine and fault injection."""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from typing import Optional, Union

from netintent.errors import InstallRejected, NoSuchDevice, NoSuchFlow, UnresolvableEndpoints
from netintent.flow_model.codec import flow_from_dict, flow_to_dict
from netintent.flow_model.devices import native_device_id, switch_number
from netintent.flow_model.types import DIMENSIONS, ActionSet, ControllerDialect, Drop, FlowRule, Output
from netintent.controllers.topology import Topology
from netintent.traffic import TestTrafficSpec, TrafficProtocol, TrafficStats

MSS = 1460
ICMP_PACKET_BYTES = 64
DEFAULT_TTL = 16
EPHEMERAL_PORT = 40000


# -- faults ---------------------------------------------------------------------

@dataclass(frozen=True)
class ShadowRule:
    rule: FlowRule

    @classmethod
    def over(cls, victim: FlowRule, bump: int = 10, actions: Optional[ActionSet] = None) -> "ShadowRule":
        """A rule with the victim's match, higher priority and (by default) a drop action."""
        return cls(victim.replace(flow_id=f"shadow-{victim.flow_id}", priority=victim.priority + bump,
                                  actions=actions or ActionSet.of(Drop()), name=None, extras={}))


@dataclass(frozen=True)
class QueueUnmapped:
    device_id: str
    port: int
    queue_id: int


@dataclass(frozen=True)
class SilentDrop:
    device_id: str
    flow_id: str


@dataclass(frozen=True)
class DeleteRule:
    device_id: str
    flow_id: str


FaultSpec = Union[ShadowRule, QueueUnmapped, SilentDrop, DeleteRule]


@dataclass
class InjectionReport:
    sent: int = 0
    delivered: int = 0
    dropped_by_rule: int = 0
    dropped_by_link: int = 0
    dropped_no_route: int = 0
    bytes_delivered: int = 0
    matched: dict = field(default_factory=dict)   # (device, flow_id) -> packets

    def to_json(self) -> dict:
        return {"sent": self.sent, "delivered": self.delivered, "dropped_by_rule": self.dropped_by_rule,
                "dropped_by_link": self.dropped_by_link, "dropped_no_route": self.dropped_no_route,
                "bytes_delivered": self.bytes_delivered,
                "matched": {f"{d}/{f}": n for (d, f), n in sorted(self.matched.items())}}


@dataclass
class _Packet:
    fields: dict     # dimension -> int or None
    size: int


@dataclass
class _Device:
    name: str
    tables: dict = field(default_factory=dict)       # table_id -> {flow_id: FlowRule}
    counters: dict = field(default_factory=dict)     # (table_id, flow_id) -> [packets, bytes]
    queue_bytes: dict = field(default_factory=dict)  # (port, queue_id) -> tx bytes


class SimulatedController:
    """Thread-safe simulated controller over a static topology.

    Only table 0 takes part in packet processing; other tables are stored
    and reported but never consulted.  Unmatched packets follow the shortest
    path to their destination host unless ``table_miss`` is ``"drop"``.
    """

    def __init__(self, topology: Optional[Topology] = None, dialect=ControllerDialect.ODL,
                 table_miss: str = "forward", ttl: int = DEFAULT_TTL, clock: float = 0.0):
        if table_miss not in ("forward", "drop"):
            raise ValueError("table_miss must be 'forward' or 'drop'")
        self.topology = topology or Topology.diamond()
        self.dialect = ControllerDialect.parse(dialect)
        self.name = f"sim-{self.dialect.value}"
        self.table_miss = table_miss
        self.ttl = ttl
        self.clock = clock
        self._lock = threading.RLock()
        self._devices = {n: _Device(n) for n in self.topology.devices}
        self._unmapped: set = set()
        self._silent: set = set()
        self._ids = itertools.count(1)
        self.host_rx: dict = {h: 0 for h in self.topology.hosts}

    # -- naming -------------------------------------------------------------------

    def device_id(self, name: str) -> str:
        n = switch_number(name)
        return native_device_id(self.dialect, n) if n is not None else name

    def _device(self, device_id: str) -> _Device:
        if device_id in self._devices:
            return self._devices[device_id]
        n = switch_number(device_id)
        for name, dev in self._devices.items():
            if n is not None and switch_number(name) == n:
                return dev
        raise NoSuchDevice(f"no device {device_id!r} in topology {self.topology.name!r}")

    @property
    def device_ids(self) -> list[str]:
        return [self.device_id(n) for n in sorted(self._devices)]

    # -- controller interface ----------------------------------------------------------

    def install_rule(self, rule: FlowRule) -> FlowRule:
        with self._lock:
            dev = self._device(rule.device_id)
            if not rule.actions.is_consistent():
                raise InstallRejected(400, "drop and output cannot share one action set")
            if not rule.flow_id:
                rule = rule.replace(flow_id=f"sim{next(self._ids)}")
            rule = rule.replace(device_id=self.device_id(dev.name))
            table = dev.tables.setdefault(rule.table_id, {})
            table[rule.flow_id] = rule
            dev.counters.setdefault((rule.table_id, rule.flow_id), [0, 0])
            return rule

    def fetch_installed(self, device_id: str, table_id: Optional[int] = 0) -> list[FlowRule]:
        with self._lock:
            dev = self._device(device_id)
            tables = sorted(dev.tables) if table_id is None else [table_id]
            out = []
            for t in tables:
                out.extend(_ordered(dev.tables.get(t, {}).values()))
            return out

    def fetch_flow(self, device_id: str, flow_id: str, table_id: int = 0) -> Optional[FlowRule]:
        with self._lock:
            return self._device(device_id).tables.get(table_id, {}).get(flow_id)

    def fetch_stats(self, device_id: str, flow_id: str, table_id: int = 0) -> TrafficStats:
        with self._lock:
            dev = self._device(device_id)
            rule = dev.tables.get(table_id, {}).get(flow_id)
            if rule is None:
                raise NoSuchFlow(f"flow {flow_id!r} not installed on {device_id!r} table {table_id}")
            packets, nbytes = dev.counters[(table_id, flow_id)]
            queues: dict = {}
            for (port, q), b in dev.queue_bytes.items():
                if port in rule.actions.output_ports:
                    queues[q] = queues.get(q, 0) + b
            return TrafficStats(packets, nbytes, queues, self.clock)

    def delete_rule(self, device_id: str, flow_id: str, table_id: int = 0) -> None:
        with self._lock:
            dev = self._device(device_id)
            if dev.tables.get(table_id, {}).pop(flow_id, None) is None:
                raise NoSuchFlow(f"flow {flow_id!r} not installed on {device_id!r} table {table_id}")
            dev.counters.pop((table_id, flow_id), None)
            self._silent.discard((dev.name, flow_id))

    def queue_stats(self, device_id: str) -> dict:
        with self._lock:
            dev = self._device(device_id)
            out: dict = {}
            for (d, port), qs in self.topology.queues.items():
                if d == dev.name:
                    out[port] = {q: 0 for q in qs}
            for (port, q), b in dev.queue_bytes.items():
                out.setdefault(port, {})[q] = b
            return {p: dict(sorted(qs.items())) for p, qs in sorted(out.items())}

    def configured_queues(self, device_id: str) -> dict:
        name = self._device(device_id).name
        return {p: dict(q) for (d, p), q in self.topology.queues.items() if d == name}

    def unmapped_queues(self, device_id: str) -> set:
        name = self._device(device_id).name
        return {(p, q) for (d, p, q) in self._unmapped if d == name}

    def remap_queue(self, device_id: str, port: int, queue_id: int) -> bool:
        """Undo a ``QueueUnmapped`` fault; True when one was active."""
        with self._lock:
            key = (self._device(device_id).name, port, queue_id)
            if key in self._unmapped:
                self._unmapped.discard(key)
                return True
            return False

    # -- faults -----------------------------------------------------------------------------

    def inject_fault(self, fault: FaultSpec) -> None:
        with self._lock:
            if isinstance(fault, ShadowRule):
                self.install_rule(fault.rule)
            elif isinstance(fault, QueueUnmapped):
                dev = self._device(fault.device_id)
                if fault.port not in self.topology.devices[dev.name]:
                    raise NoSuchDevice(f"{dev.name} has no port {fault.port}")
                self._unmapped.add((dev.name, fault.port, fault.queue_id))
            elif isinstance(fault, SilentDrop):
                dev = self._device(fault.device_id)
                if not any(fault.flow_id in t for t in dev.tables.values()):
                    raise NoSuchFlow(f"flow {fault.flow_id!r} not installed on {fault.device_id!r}")
                self._silent.add((dev.name, fault.flow_id))
            elif isinstance(fault, DeleteRule):
                dev = self._device(fault.device_id)
                for t, rules in dev.tables.items():
                    if fault.flow_id in rules:
                        self.delete_rule(fault.device_id, fault.flow_id, t)
                        return
                raise NoSuchFlow(f"flow {fault.flow_id!r} not installed on {fault.device_id!r}")
            else:
                raise TypeError(f"unknown fault {fault!r}")

    def reset_counters(self) -> None:
        """Zero every counter, as a controller restart would."""
        with self._lock:
            for dev in self._devices.values():
                for key in dev.counters:
                    dev.counters[key] = [0, 0]
                dev.queue_bytes.clear()

    # -- traffic engine ------------------------------------------------------------------------

    def _packets(self, spec: TestTrafficSpec, src, dst) -> list[_Packet]:
        proto = spec.protocol
        base = {
            "eth_type": 2048, "src_mac": src.mac, "dst_mac": dst.mac, "src_ip": src.ip, "dst_ip": dst.ip,
            "ip_proto": proto.ip_proto, "src_port": None, "dst_port": None, "in_port": None, "vlan_id": None,
        }
        if proto is TrafficProtocol.ICMP:
            return [_Packet(dict(base), ICMP_PACKET_BYTES) for _ in range(spec.expected_packets)]
        base["src_port"] = spec.src_port if spec.src_port is not None else EPHEMERAL_PORT
        base["dst_port"] = spec.dst_port if spec.dst_port is not None else 0
        if spec.expected_bytes > 0:
            n = math.ceil(spec.expected_bytes / MSS)
            sizes = [MSS] * (n - 1) + [spec.expected_bytes - MSS * (n - 1)]
        else:
            sizes = [MSS] * spec.expected_packets
        return [_Packet(dict(base), s) for s in sizes]

    def inject_traffic(self, spec: TestTrafficSpec) -> InjectionReport:
        """Send the spec's packets from source to destination host.

        Each egress link and queue gets a byte budget of rate × duration for
        this injection; packets over budget are dropped.  The clock advances
        by ``duration_s``.
        """
        with self._lock:
            topo = self.topology
            if spec.src_host not in topo.hosts or spec.dst_host not in topo.hosts:
                raise UnresolvableEndpoints(f"unknown host in {spec.src_host!r} -> {spec.dst_host!r}")
            src, dst = topo.hosts[spec.src_host], topo.hosts[spec.dst_host]
            report = InjectionReport()
            link_budget: dict = {}
            queue_budget: dict = {}
            for pkt in self._packets(spec, src, dst):
                report.sent += 1
                self._walk(pkt, src, report, link_budget, queue_budget, spec.duration_s)
            self.clock += spec.duration_s
            return report

    def _walk(self, pkt: _Packet, src, report: InjectionReport, link_budget: dict, queue_budget: dict,
              duration: float) -> None:
        topo = self.topology
        dev_name, in_port = src.device, src.port
        for _ in range(self.ttl):
            dev = self._devices[dev_name]
            pkt.fields["in_port"] = in_port
            rule = self._lookup(dev, pkt)
            queue = None
            if rule is not None:
                counter = dev.counters[(0, rule.flow_id)]
                counter[0] += 1
                counter[1] += pkt.size
                key = (self.device_id(dev_name), rule.flow_id)
                report.matched[key] = report.matched.get(key, 0) + 1
                if (dev_name, rule.flow_id) in self._silent or rule.actions.drops:
                    report.dropped_by_rule += 1
                    return
                ports = [a.port for a in rule.actions if isinstance(a, Output)]
                if not ports:
                    report.dropped_by_rule += 1
                    return
                port = ports[0]
                queues = sorted(rule.actions.queue_ids)
                queue = queues[0] if queues else None
            else:
                if self.table_miss == "drop":
                    report.dropped_no_route += 1
                    return
                target = topo.host_by_ip(pkt.fields["dst_ip"])
                port = topo.next_hop_port(dev_name, target.name) if target else None
                if port is None:
                    report.dropped_no_route += 1
                    return
            peer = topo.peers.get((dev_name, port))
            if peer is None:
                report.dropped_no_route += 1
                return
            lk = (dev_name, port)
            link_budget.setdefault(lk, peer.rate_bps * duration / 8)
            if link_budget[lk] < pkt.size:
                report.dropped_by_link += 1
                return
            if queue is not None and (dev_name, port, queue) not in self._unmapped:
                # unconfigured queues are only limited by the link itself
                rate = topo.queues.get((dev_name, port), {}).get(queue, peer.rate_bps)
                qk = (dev_name, port, queue)
                queue_budget.setdefault(qk, rate * duration / 8)
                if queue_budget[qk] < pkt.size:
                    report.dropped_by_link += 1
                    return
                queue_budget[qk] -= pkt.size
                dev.queue_bytes[(port, queue)] = dev.queue_bytes.get((port, queue), 0) + pkt.size
            link_budget[lk] -= pkt.size
            if peer.host is not None:
                self.host_rx[peer.host] += 1
                report.delivered += 1
                report.bytes_delivered += pkt.size
                return
            dev_name, in_port = peer.device, peer.port
        report.dropped_no_route += 1

    @staticmethod
    def _lookup(dev: _Device, pkt: _Packet) -> Optional[FlowRule]:
        for rule in _ordered(dev.tables.get(0, {}).values()):
            if _matches(rule, pkt):
                return rule
        return None

    # -- persistence ------------------------------------------------------------------------------

    def to_state(self) -> dict:
        with self._lock:
            devices = {}
            for name, dev in self._devices.items():
                flows = []
                for t in sorted(dev.tables):
                    for rule in _ordered(dev.tables[t].values()):
                        flows.append({"flow": flow_to_dict(self.dialect, rule), "device_id": rule.device_id,
                                      "counters": dev.counters[(t, rule.flow_id)]})
                devices[name] = {"flows": flows,
                                 "queue_bytes": [[p, q, b] for (p, q), b in sorted(dev.queue_bytes.items())]}
            return {"v": 1, "dialect": self.dialect.value, "clock": self.clock, "table_miss": self.table_miss,
                    "devices": devices, "unmapped": sorted(list(x) for x in self._unmapped),
                    "silent": sorted(list(x) for x in self._silent), "host_rx": dict(self.host_rx),
                    "topology": self.topology.raw}

    @classmethod
    def from_state(cls, state: dict, topology: Optional[Topology] = None) -> "SimulatedController":
        topo = topology or (Topology.from_json(state["topology"]) if state.get("topology") else None)
        sim = cls(topo, state.get("dialect", "odl"), state.get("table_miss", "forward"), clock=state.get("clock", 0.0))
        for name, body in state.get("devices", {}).items():
            dev = sim._device(name)
            for entry in body.get("flows", []):
                rule = flow_from_dict(sim.dialect, entry["flow"], device_id=entry.get("device_id"))
                rule = sim.install_rule(rule)
                dev.counters[(rule.table_id, rule.flow_id)] = list(entry.get("counters", [0, 0]))
            for p, q, b in body.get("queue_bytes", []):
                dev.queue_bytes[(int(p), int(q))] = b
        sim._unmapped = {tuple(x) for x in state.get("unmapped", [])}
        sim._silent = {tuple(x) for x in state.get("silent", [])}
        sim.host_rx.update(state.get("host_rx", {}))
        return sim


def _ordered(rules) -> list[FlowRule]:
    return sorted(rules, key=lambda r: (-r.priority, r.flow_id))


def _matches(rule: FlowRule, pkt: _Packet) -> bool:
    for name, c in rule.match.present().items():
        value = pkt.fields.get(name)
        if value is None:
            return False
        lo, hi = c.interval(DIMENSIONS[name][0])
        if not lo <= value <= hi:
            return False
    return True
