"""Static topology description: switches, hosts, links and queue rates."""

from __future__ import annotations

import ipaddress
import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from netintent.errors import UnresolvableEndpoints
from netintent.flow_model.types import FieldConstraint

DEFAULT_HOST_LINK_BPS = 100_000_000


@dataclass(frozen=True)
class Host:
    name: str
    ip: int
    mac: int
    device: str
    port: int

    @property
    def ip_text(self) -> str:
        return str(ipaddress.IPv4Address(self.ip))


@dataclass(frozen=True)
class Peer:
    """Far end of a port: either a host or ``(device, port)``."""

    host: Optional[str] = None
    device: Optional[str] = None
    port: Optional[int] = None
    rate_bps: float = DEFAULT_HOST_LINK_BPS


@dataclass
class Topology:
    devices: dict            # name -> sorted port list
    queues: dict             # (name, port) -> {queue_id: rate_bps}
    hosts: dict              # name -> Host
    peers: dict              # (name, port) -> Peer
    name: str = "custom"
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_json(cls, doc: dict) -> "Topology":
        host_rate = doc.get("host_link_rate_bps", DEFAULT_HOST_LINK_BPS)
        devices, queues, hosts, peers = {}, {}, {}, {}
        for d in doc.get("devices", []):
            devices[d["id"]] = sorted(int(p) for p in d.get("ports", []))
            for port, qs in (d.get("queues") or {}).items():
                queues[(d["id"], int(port))] = {int(q): float(r) for q, r in qs.items()}
        for h in doc.get("hosts", []):
            dev, port = h["attach"]
            mac = int(h.get("mac", "0").replace(":", ""), 16)
            host = Host(h["name"], int(ipaddress.IPv4Address(h["ip"])), mac, dev, int(port))
            hosts[host.name] = host
            peers[(dev, int(port))] = Peer(host=host.name, rate_bps=host_rate)
        for link in doc.get("links", []):
            (da, pa), (db, pb) = link["a"], link["b"]
            rate = float(link.get("rate_bps", DEFAULT_HOST_LINK_BPS))
            peers[(da, int(pa))] = Peer(device=db, port=int(pb), rate_bps=rate)
            peers[(db, int(pb))] = Peer(device=da, port=int(pa), rate_bps=rate)
        for (dev, port) in peers:
            if dev not in devices:
                raise ValueError(f"topology references unknown device {dev!r}")
            if port not in devices[dev]:
                devices[dev] = sorted(set(devices[dev]) | {port})
        return cls(devices, queues, hosts, peers, doc.get("name", "custom"), doc)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Topology":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def diamond(cls) -> "Topology":
        text = (resources.files("netintent.controllers") / "data" / "diamond.json").read_text(encoding="utf-8")
        return cls.from_json(json.loads(text))

    # -- lookups --------------------------------------------------------------

    def host_by_ip(self, ip: int) -> Optional[Host]:
        for h in sorted(self.hosts.values(), key=lambda h: h.name):
            if h.ip == ip:
                return h
        return None

    def hosts_in(self, constraint: Optional[FieldConstraint]) -> list[Host]:
        """Hosts whose address falls inside ``constraint`` (all hosts when absent)."""
        hosts = sorted(self.hosts.values(), key=lambda h: h.name)
        if constraint is None:
            return hosts
        lo, hi = constraint.interval((0, 2**32 - 1))
        return [h for h in hosts if lo <= h.ip <= hi]

    def host(self, name: str) -> Host:
        try:
            return self.hosts[name]
        except KeyError:
            raise UnresolvableEndpoints(f"no host named {name!r} in topology") from None

    def link_rate(self, device: str, port: int) -> Optional[float]:
        peer = self.peers.get((device, port))
        return peer.rate_bps if peer else None

    def next_hop_port(self, device: str, host_name: str) -> Optional[int]:
        """Egress port on ``device`` along a shortest path to ``host_name``.

        Equal-length paths are ranked by bottleneck link rate (higher first),
        then by the device names along the path.
        """
        target = self.hosts[host_name]
        if target.device == device:
            return target.port
        best = None
        # BFS over devices, tracking (hops, -bottleneck, names, first port)
        start = (0, float("inf"), (device,), None)
        frontier = deque([start])
        seen = {device: (0, float("inf"))}
        while frontier:
            hops, bottleneck, names, first = frontier.popleft()
            here = names[-1]
            for port in self.devices[here]:
                peer = self.peers.get((here, port))
                if peer is None or peer.device is None:
                    continue
                nxt = peer.device
                if nxt in names:
                    continue
                nb = min(bottleneck, peer.rate_bps)
                fp = port if first is None else first
                path = (hops + 1, nb, names + (nxt,), fp)
                if nxt == target.device:
                    key = (path[0], -nb, path[2])
                    if best is None or key < best[0]:
                        best = (key, fp)
                    continue
                prev = seen.get(nxt)
                if prev is not None and (prev[0] < hops + 1 or (prev[0] == hops + 1 and prev[1] >= nb)):
                    continue
                seen[nxt] = (hops + 1, nb)
                frontier.append(path)
        return best[1] if best else None
