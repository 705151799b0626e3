"""Interface shared by the simulated controller and the REST adapters."""

from __future__ import annotations

from typing import Optional, Protocol, runtime_checkable

from netintent.flow_model.types import ControllerDialect, FlowRule
from netintent.traffic import TrafficStats


@runtime_checkable
class Controller(Protocol):
    dialect: ControllerDialect
    name: str

    def install_rule(self, rule: FlowRule) -> FlowRule:
        """Install ``rule`` and return it as stored (ONOS may assign the id)."""

    def fetch_installed(self, device_id: str, table_id: Optional[int] = 0) -> list[FlowRule]: ...

    def fetch_flow(self, device_id: str, flow_id: str, table_id: int = 0) -> Optional[FlowRule]: ...

    def fetch_stats(self, device_id: str, flow_id: str, table_id: int = 0) -> TrafficStats: ...

    def delete_rule(self, device_id: str, flow_id: str, table_id: int = 0) -> None: ...

    def queue_stats(self, device_id: str) -> dict:
        """``{port: {queue_id: tx_bytes}}`` for the device."""
