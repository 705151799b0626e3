"""Synthetic test-traffic profiles and counter snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class TrafficProtocol(str, Enum):
    ICMP = "icmp"
    TCP = "tcp"
    UDP = "udp"

    @property
    def ip_proto(self) -> int:
        return {"icmp": 1, "tcp": 6, "udp": 17}[self.value]


@dataclass(frozen=True)
class TestTrafficSpec:
    """Traffic sent to exercise one installed rule.

    ``expected_packets`` (P_t), ``expected_bytes`` (B_t, bytes) and
    ``expected_rate_bps`` (R_t, bits/s) are the targets verification checks.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    src_host: str
    dst_host: str
    protocol: TrafficProtocol
    expected_packets: int = 0
    expected_bytes: int = 0
    expected_rate_bps: float = 0.0
    duration_s: float = 1.0
    dst_port: Optional[int] = None
    src_port: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", TrafficProtocol(self.protocol))
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.expected_packets < 0 or self.expected_bytes < 0 or self.expected_rate_bps < 0:
            raise ValueError("traffic targets must be non-negative")
        if self.protocol is TrafficProtocol.ICMP and self.expected_packets <= 0:
            raise ValueError("an ICMP spec needs a positive packet count")

    def to_json(self) -> dict:
        return {"src_host": self.src_host, "dst_host": self.dst_host, "protocol": self.protocol.value,
                "expected_packets": self.expected_packets, "expected_bytes": self.expected_bytes,
                "expected_rate_bps": self.expected_rate_bps, "duration_s": self.duration_s,
                "dst_port": self.dst_port, "src_port": self.src_port}

    @classmethod
    def from_json(cls, obj: dict) -> "TestTrafficSpec":
        return cls(**obj)


@dataclass(frozen=True)
class TrafficStats:
    packet_count: int
    byte_count: int
    queue_tx_bytes: dict = field(default_factory=dict)
    captured_at: float = 0.0

    def to_json(self) -> dict:
        return {"packet_count": self.packet_count, "byte_count": self.byte_count,
                "queue_tx_bytes": {str(k): v for k, v in self.queue_tx_bytes.items()},
                "captured_at": self.captured_at}
