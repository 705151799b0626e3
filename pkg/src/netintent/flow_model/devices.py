"""Mapping between operator-facing switch numbers and controller device ids."""

from __future__ import annotations

import re
from typing import Mapping, Optional

from netintent.flow_model.types import ControllerDialect

_SWITCH_RE = re.compile(r"\b(?:switch|node|openflow\s+switch|device|s)\s*#?\s*(\d+)\b", re.IGNORECASE)


def native_device_id(dialect, number: int) -> str:
    dialect = ControllerDialect.parse(dialect)
    if dialect is ControllerDialect.ODL:
        return f"openflow:{number}"
    return f"of:{number:016x}"


def switch_number(device_id: str) -> Optional[int]:
    """Inverse of ``native_device_id``; also accepts ``s3``-style names."""
    if device_id.startswith("openflow:"):
        tail = device_id.split(":")[1]
        return int(tail) if tail.isdigit() else None
    if device_id.startswith("of:"):
        try:
            return int(device_id[3:], 16)
        except ValueError:
            return None
    m = re.fullmatch(r"[sS](\d+)", device_id)
    return int(m.group(1)) if m else None


class DeviceTable:
    """Resolves "switch 3" to the controller's native id.

    ``overrides`` maps switch numbers to ids for topologies whose datapath ids
    do not follow the default numbering.
    """

    def __init__(self, dialect, overrides: Optional[Mapping[int, str]] = None):
        self.dialect = ControllerDialect.parse(dialect)
        self.overrides = dict(overrides or {})

    def resolve(self, number: int) -> str:
        return self.overrides.get(number) or native_device_id(self.dialect, number)

    def from_intent(self, intent: str) -> Optional[str]:
        m = _SWITCH_RE.search(intent)
        return self.resolve(int(m.group(1))) if m else None
