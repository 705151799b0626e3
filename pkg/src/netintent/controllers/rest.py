"""REST adapters for OpenDaylight (RESTCONF) and ONOS."""

from __future__ import annotations

import logging
import re
import subprocess
import time
from typing import Callable, Optional
from urllib.parse import quote

import requests

from netintent.errors import ControllerUnreachable, FlowModelError, InstallRejected, NoSuchDevice, NoSuchFlow
from netintent.flow_model.codec import flow_from_dict, flow_to_dict
from netintent.flow_model.devices import switch_number
from netintent.flow_model.types import ControllerDialect, FlowRule
from netintent.traffic import TrafficStats

ODL_STATS_KEY = "opendaylight-flow-statistics:flow-statistics"
ODL_TABLE_KEY = "flow-node-inventory:table"
ODL_FLOW_KEY = "flow-node-inventory:flow"

log = logging.getLogger(__name__)

_QUEUE_RE = re.compile(r"port\s+(\S+)\s+queue\s+(\d+):\s*bytes=(\d+)")


class OvsQueueStatsProvider:
    """Per-queue tx bytes from ``ovs-ofctl queue-stats``.

    ``runner`` takes an argv list and returns stdout; it defaults to
    ``subprocess.run``.  Bridges are named ``s<N>`` after the switch number,
    which is Mininet's convention.
    """

    def __init__(self, runner: Optional[Callable[[list], str]] = None,
                 bridge_for: Optional[Callable[[str], str]] = None):
        self.runner = runner or _run
        self.bridge_for = bridge_for or _default_bridge

    def __call__(self, device_id: str) -> dict:
        text = self.runner(["ovs-ofctl", "-O", "OpenFlow13", "queue-stats", self.bridge_for(device_id)])
        return parse_queue_stats(text)


def parse_queue_stats(text: str) -> dict:
    out: dict = {}
    for port, q, b in _QUEUE_RE.findall(text):
        if not port.isdigit():
            continue
        out.setdefault(int(port), {})[int(q)] = int(b)
    return out


def _run(argv: list) -> str:
    try:
        return subprocess.run(argv, capture_output=True, text=True, check=True, timeout=10).stdout
    except (OSError, subprocess.SubprocessError) as exc:
        raise ControllerUnreachable(f"{argv[0]} failed: {exc}") from exc


def _default_bridge(device_id: str) -> str:
    n = switch_number(device_id)
    if n is None:
        raise NoSuchDevice(f"cannot derive a bridge name from {device_id!r}")
    return f"s{n}"


class _RestBase:
    dialect: ControllerDialect

    def __init__(self, base_url: str, credentials: Optional[tuple] = ("admin", "admin"),
                 session: Optional[requests.Session] = None, timeout_s: float = 10.0,
                 queue_provider: Optional[Callable[[str], dict]] = None):
        self.base_url = base_url.rstrip("/")
        self.credentials = tuple(credentials) if credentials else None
        self.session = session or requests.Session()
        self.timeout_s = timeout_s
        self.queue_provider = queue_provider
        self.name = f"{self.dialect.value}@{self.base_url}"

    def _request(self, method: str, url: str, **kw) -> requests.Response:
        try:
            return self.session.request(method, url, auth=self.credentials, timeout=self.timeout_s, **kw)
        except requests.RequestException as exc:
            raise ControllerUnreachable(f"{method} {url}: {exc}") from exc

    def queue_stats(self, device_id: str) -> dict:
        return self.queue_provider(device_id) if self.queue_provider else {}

    def _queue_bytes_for(self, device_id: str, rule: Optional[FlowRule]) -> dict:
        if rule is None or self.queue_provider is None:
            return {}
        per_port = self.queue_stats(device_id)
        out: dict = {}
        for port in rule.actions.output_ports:
            for q, b in per_port.get(port, {}).items():
                out[q] = out.get(q, 0) + b
        return out


class OdlRestController(_RestBase):
    dialect = ControllerDialect.ODL

    def _node(self, datastore: str, device_id: str) -> str:
        return f"{self.base_url}/restconf/{datastore}/opendaylight-inventory:nodes/node/{device_id}"

    def table_url(self, datastore: str, device_id: str, table_id: int) -> str:
        return f"{self._node(datastore, device_id)}/flow-node-inventory:table/{table_id}"

    def flow_url(self, datastore: str, device_id: str, table_id: int, flow_id: str) -> str:
        return f"{self.table_url(datastore, device_id, table_id)}/flow/{quote(str(flow_id), safe='')}"

    def install_rule(self, rule: FlowRule) -> FlowRule:
        body = {ODL_FLOW_KEY: [flow_to_dict(self.dialect, rule)]}
        resp = self._request("PUT", self.flow_url("config", rule.device_id, rule.table_id, rule.flow_id), json=body)
        if resp.status_code == 404:
            raise NoSuchDevice(f"ODL has no node {rule.device_id!r}")
        if resp.status_code >= 300:
            raise InstallRejected(resp.status_code, resp.text)
        return rule

    def fetch_installed(self, device_id: str, table_id: Optional[int] = 0) -> list[FlowRule]:
        tables = [table_id] if table_id is not None else None
        if tables is None:
            resp = self._request("GET", self._node("operational", device_id))
            if resp.status_code == 404:
                raise NoSuchDevice(f"ODL has no node {device_id!r}")
            _check(resp)
            node = (resp.json().get("opendaylight-inventory:node") or [{}])[0]
            flows = [f for t in node.get(ODL_TABLE_KEY, []) for f in t.get("flow", [])]
            return _parse_all(lambda f: self._parse(device_id, f), flows)
        resp = self._request("GET", self.table_url("operational", device_id, table_id))
        if resp.status_code == 404:
            return []
        _check(resp)
        flows = [f for t in resp.json().get(ODL_TABLE_KEY, []) for f in t.get("flow", [])]
        return _parse_all(lambda f: self._parse(device_id, f), flows)

    def _get_flow(self, device_id: str, flow_id: str, table_id: int) -> Optional[dict]:
        resp = self._request("GET", self.flow_url("operational", device_id, table_id, flow_id))
        if resp.status_code == 404:
            return None
        _check(resp)
        flows = resp.json().get(ODL_FLOW_KEY) or []
        return flows[0] if flows else None

    def fetch_flow(self, device_id: str, flow_id: str, table_id: int = 0) -> Optional[FlowRule]:
        obj = self._get_flow(device_id, flow_id, table_id)
        return self._parse(device_id, obj) if obj is not None else None

    def fetch_stats(self, device_id: str, flow_id: str, table_id: int = 0) -> TrafficStats:
        obj = self._get_flow(device_id, flow_id, table_id)
        if obj is None:
            raise NoSuchFlow(f"flow {flow_id!r} not in ODL operational store for {device_id!r}")
        stats = obj.get(ODL_STATS_KEY) or {}
        rule = self._parse(device_id, obj)
        return TrafficStats(int(stats.get("packet-count", 0)), int(stats.get("byte-count", 0)),
                            self._queue_bytes_for(device_id, rule), time.time())

    def delete_rule(self, device_id: str, flow_id: str, table_id: int = 0) -> None:
        resp = self._request("DELETE", self.flow_url("config", device_id, table_id, flow_id))
        if resp.status_code == 404:
            raise NoSuchFlow(f"flow {flow_id!r} not in ODL config store for {device_id!r}")
        _check(resp)

    def _parse(self, device_id: str, obj: dict) -> FlowRule:
        clean = {k: v for k, v in obj.items() if k != ODL_STATS_KEY}
        return flow_from_dict(self.dialect, clean, device_id=device_id)


class OnosRestController(_RestBase):
    dialect = ControllerDialect.ONOS

    def flows_url(self, device_id: Optional[str] = None, flow_id: Optional[str] = None) -> str:
        url = f"{self.base_url}/onos/v1/flows"
        if device_id is not None:
            url += f"/{device_id}"
            if flow_id is not None:
                url += f"/{flow_id}"
        return url

    def install_rule(self, rule: FlowRule) -> FlowRule:
        body = flow_to_dict(self.dialect, rule)
        resp = self._request("POST", self.flows_url(rule.device_id), json=body)
        if resp.status_code == 404:
            raise NoSuchDevice(f"ONOS has no device {rule.device_id!r}")
        if resp.status_code >= 300:
            raise InstallRejected(resp.status_code, resp.text)
        location = resp.headers.get("Location") or resp.headers.get("location")
        if location:
            assigned = location.rstrip("/").rsplit("/", 1)[-1]
            if assigned and assigned != rule.flow_id:
                rule = rule.replace(flow_id=assigned)
        return rule

    def fetch_installed(self, device_id: str, table_id: Optional[int] = 0) -> list[FlowRule]:
        resp = self._request("GET", self.flows_url())
        _check(resp)
        mine = [f for f in resp.json().get("flows", []) if f.get("deviceId") == device_id]
        return [r for r in _parse_all(self._parse, mine) if table_id is None or r.table_id == table_id]

    def _get_flow(self, device_id: str, flow_id: str) -> Optional[dict]:
        resp = self._request("GET", self.flows_url(device_id, flow_id))
        if resp.status_code == 404:
            return None
        _check(resp)
        flows = resp.json().get("flows") or []
        return flows[0] if flows else None

    def fetch_flow(self, device_id: str, flow_id: str, table_id: int = 0) -> Optional[FlowRule]:
        obj = self._get_flow(device_id, flow_id)
        return self._parse(obj) if obj is not None else None

    def fetch_stats(self, device_id: str, flow_id: str, table_id: int = 0) -> TrafficStats:
        obj = self._get_flow(device_id, flow_id)
        if obj is None:
            raise NoSuchFlow(f"flow {flow_id!r} not in ONOS flow store for {device_id!r}")
        rule = self._parse(obj)
        return TrafficStats(int(obj.get("packets", 0)), int(obj.get("bytes", 0)),
                            self._queue_bytes_for(device_id, rule), time.time())

    def delete_rule(self, device_id: str, flow_id: str, table_id: int = 0) -> None:
        resp = self._request("DELETE", self.flows_url(device_id, flow_id))
        if resp.status_code == 404:
            raise NoSuchFlow(f"flow {flow_id!r} not in ONOS flow store for {device_id!r}")
        _check(resp)

    def _parse(self, obj: dict) -> FlowRule:
        keep = {k: v for k, v in obj.items()
                if k not in ("packets", "bytes", "life", "state", "lastSeen", "liveType")}
        return flow_from_dict(self.dialect, keep)


def _parse_all(parse, flows) -> list[FlowRule]:
    # controllers also hold their own rules (LLDP, ARP punts) that the flow model cannot express
    rules = []
    for f in flows:
        try:
            rules.append(parse(f))
        except FlowModelError as exc:
            log.debug("skipping unmodelled flow %s: %s", f.get("id"), exc)
    return rules


def _check(resp: requests.Response) -> None:
    if resp.status_code >= 400:
        raise ControllerUnreachable(f"controller answered {resp.status_code}: {resp.text[:200]}")
