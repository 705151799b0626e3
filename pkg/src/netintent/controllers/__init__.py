"""Controller handles: simulated, OpenDaylight RESTCONF and ONOS REST."""

from __future__ import annotations

from typing import Optional

from netintent.controllers.base import Controller
from netintent.controllers.rest import (
    OdlRestController,
    OnosRestController,
    OvsQueueStatsProvider,
    parse_queue_stats,
)
from netintent.controllers.sim import (
    MSS,
    DeleteRule,
    FaultSpec,
    InjectionReport,
    QueueUnmapped,
    ShadowRule,
    SilentDrop,
    SimulatedController,
)
from netintent.controllers.topology import Host, Peer, Topology
from netintent.flow_model.types import ControllerDialect


def make_controller(kind: str, base_url: Optional[str] = None, credentials: Optional[tuple] = None,
                    dialect="odl", topology: Optional[Topology] = None, **kw) -> Controller:
    """``kind`` is ``sim``, ``odl`` or ``onos``; REST kinds need ``base_url``."""
    kind = kind.lower()
    if kind == "sim":
        return SimulatedController(topology, dialect=dialect, **kw)
    if base_url is None:
        raise ValueError(f"{kind} controller needs a base_url")
    creds = credentials or ("admin", "admin")
    if kind == "odl":
        return OdlRestController(base_url, creds, **kw)
    if kind == "onos":
        return OnosRestController(base_url, creds, **kw)
    raise ValueError(f"unknown controller kind {kind!r}")


__all__ = [
    "Controller", "ControllerDialect", "DeleteRule", "FaultSpec", "Host", "InjectionReport", "MSS",
    "OdlRestController", "OnosRestController", "OvsQueueStatsProvider", "Peer", "QueueUnmapped",
    "ShadowRule", "SilentDrop", "SimulatedController", "Topology", "make_controller", "parse_queue_stats",
]
