"""Controller-neutral flow rule model.

Every match dimension is a set of integers.  A constraint on a dimension is
an inclusive interval inside that dimension's domain: a CIDR block is the
interval of its addresses, an exact value a one-point interval, a wildcard
the whole domain.  The conflict engine relies on that representation.
"""

from __future__ import annotations

import dataclasses
import ipaddress
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

from netintent.errors import FieldDomain


class ControllerDialect(str, Enum):
    ODL = "odl"
    ONOS = "onos"

    @classmethod
    def parse(cls, value: Union[str, "ControllerDialect"]) -> "ControllerDialect":
        if isinstance(value, ControllerDialect):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown controller dialect {value!r} (expected odl or onos)") from None


class FieldKind(str, Enum):
    IP_CIDR = "ip_cidr"
    PORT_SINGLE = "port_single"
    PORT_RANGE = "port_range"
    MAC_EXACT = "mac_exact"
    ENUM_EXACT = "enum_exact"
    INT_EXACT = "int_exact"
    WILDCARD = "wildcard"


PORT_MAX = 0xFFFF
MAC_MAX = (1 << 48) - 1
IPV4_MAX = (1 << 32) - 1

_MAC_RE = re.compile(r"^[0-9a-fA-F]{2}([:-][0-9a-fA-F]{2}){5}$")


@dataclass(frozen=True)
class FieldConstraint:
    """One match-field constraint.

    ``value`` holds the kind-specific payload: ``(network, prefix_len)`` for
    CIDR blocks, ``(lo, hi)`` for port ranges, an int for exact kinds and
    ``None`` for wildcards.  Use the classmethod constructors.
    """

    kind: FieldKind
    value: object = None

    def __post_init__(self):
        k, v = self.kind, self.value
        if k is FieldKind.WILDCARD:
            if v is not None:
                raise FieldDomain("wildcard constraint carries no payload")
        elif k is FieldKind.IP_CIDR:
            net, plen = v
            if not 0 <= plen <= 32:
                raise FieldDomain(f"CIDR prefix length {plen} outside 0..32")
            if not 0 <= net <= IPV4_MAX:
                raise FieldDomain(f"IPv4 address {net} out of range")
            mask = (IPV4_MAX << (32 - plen)) & IPV4_MAX
            object.__setattr__(self, "value", (net & mask, plen))
        elif k is FieldKind.PORT_RANGE:
            lo, hi = v
            if not (0 <= lo <= hi <= PORT_MAX):
                raise FieldDomain(f"port range {lo}..{hi} invalid (need 0 <= lo <= hi <= 65535)")
        elif k is FieldKind.PORT_SINGLE:
            if not 0 <= v <= PORT_MAX:
                raise FieldDomain(f"port {v} outside 0..65535")
        elif k is FieldKind.MAC_EXACT:
            if not 0 <= v <= MAC_MAX:
                raise FieldDomain(f"MAC value {v} outside 48 bits")
        else:
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise FieldDomain(f"{k.value} needs a non-negative integer, got {v!r}")

    @classmethod
    def cidr(cls, address: Union[str, int], prefix: Optional[int] = None) -> "FieldConstraint":
        if isinstance(address, str):
            text = address.strip()
            if prefix is None and "/" in text:
                text, _, plen = text.partition("/")
                if not plen.isdigit():
                    raise FieldDomain(f"bad CIDR prefix in {address!r}")
                prefix = int(plen)
            try:
                address = int(ipaddress.IPv4Address(text))
            except ipaddress.AddressValueError as exc:
                raise FieldDomain(f"bad IPv4 address {address!r}: {exc}") from None
        return cls(FieldKind.IP_CIDR, (address, 32 if prefix is None else prefix))

    @classmethod
    def port(cls, number: int) -> "FieldConstraint":
        return cls(FieldKind.PORT_SINGLE, number)

    @classmethod
    def port_range(cls, lo: int, hi: int) -> "FieldConstraint":
        if lo == hi:
            return cls.port(lo)
        return cls(FieldKind.PORT_RANGE, (lo, hi))

    @classmethod
    def mac(cls, address: Union[str, int]) -> "FieldConstraint":
        if isinstance(address, str):
            if not _MAC_RE.match(address):
                raise FieldDomain(f"bad MAC address {address!r}")
            address = int(address.replace(":", "").replace("-", ""), 16)
        return cls(FieldKind.MAC_EXACT, address)

    @classmethod
    def exact(cls, number: int) -> "FieldConstraint":
        return cls(FieldKind.INT_EXACT, number)

    @classmethod
    def enum(cls, number: int) -> "FieldConstraint":
        return cls(FieldKind.ENUM_EXACT, number)

    @classmethod
    def wildcard(cls) -> "FieldConstraint":
        return cls(FieldKind.WILDCARD)

    @property
    def is_wildcard(self) -> bool:
        return self.kind is FieldKind.WILDCARD

    @property
    def prefix_len(self) -> Optional[int]:
        return self.value[1] if self.kind is FieldKind.IP_CIDR else None

    def interval(self, domain: tuple[int, int]) -> tuple[int, int]:
        """Inclusive integer interval selected by this constraint."""
        k = self.kind
        if k is FieldKind.WILDCARD:
            return domain
        if k is FieldKind.IP_CIDR:
            net, plen = self.value
            return net, net + (1 << (32 - plen)) - 1
        if k is FieldKind.PORT_RANGE:
            return self.value
        return self.value, self.value

    def __str__(self) -> str:
        k, v = self.kind, self.value
        if k is FieldKind.WILDCARD:
            return "*"
        if k is FieldKind.IP_CIDR:
            return f"{ipaddress.IPv4Address(v[0])}/{v[1]}"
        if k is FieldKind.PORT_RANGE:
            return f"{v[0]}-{v[1]}"
        if k is FieldKind.MAC_EXACT:
            return format_mac(v)
        return str(v)


def format_mac(value: int) -> str:
    raw = f"{value:012x}"
    return ":".join(raw[i:i + 2] for i in range(0, 12, 2))


# dimension -> (domain, compatible kinds)
_IP = frozenset({FieldKind.IP_CIDR})
_PORT = frozenset({FieldKind.PORT_SINGLE, FieldKind.PORT_RANGE})
_MAC = frozenset({FieldKind.MAC_EXACT})
_INT = frozenset({FieldKind.INT_EXACT, FieldKind.ENUM_EXACT})

DIMENSIONS: dict[str, tuple[tuple[int, int], frozenset]] = {
    "eth_type": ((0, 0xFFFF), _INT),
    "src_mac": ((0, MAC_MAX), _MAC),
    "dst_mac": ((0, MAC_MAX), _MAC),
    "src_ip": ((0, IPV4_MAX), _IP),
    "dst_ip": ((0, IPV4_MAX), _IP),
    "ip_proto": ((0, 255), _INT),
    "src_port": ((0, PORT_MAX), _PORT),
    "dst_port": ((0, PORT_MAX), _PORT),
    "in_port": ((0, IPV4_MAX), _INT),
    "vlan_id": ((0, 4094), _INT),
}

IP_DIMENSIONS = ("src_ip", "dst_ip")


def kinds_compatible(a: FieldKind, b: FieldKind) -> bool:
    if FieldKind.WILDCARD in (a, b):
        return True
    return any(a in group and b in group for group in (_IP, _PORT, _MAC, _INT))


@dataclass(frozen=True)
class MatchSpace:
    """Packets selected by a rule.  ``None`` means the dimension is unconstrained."""

    eth_type: Optional[FieldConstraint] = None
    src_mac: Optional[FieldConstraint] = None
    dst_mac: Optional[FieldConstraint] = None
    src_ip: Optional[FieldConstraint] = None
    dst_ip: Optional[FieldConstraint] = None
    ip_proto: Optional[FieldConstraint] = None
    src_port: Optional[FieldConstraint] = None
    dst_port: Optional[FieldConstraint] = None
    in_port: Optional[FieldConstraint] = None
    vlan_id: Optional[FieldConstraint] = None

    def __post_init__(self):
        for name, (domain, kinds) in DIMENSIONS.items():
            c = getattr(self, name)
            if c is None:
                continue
            if not isinstance(c, FieldConstraint):
                raise TypeError(f"{name} must be a FieldConstraint, got {type(c).__name__}")
            if c.kind is not FieldKind.WILDCARD and c.kind not in kinds:
                raise FieldDomain(f"{name} cannot hold a {c.kind.value} constraint")
            lo, hi = c.interval(domain)
            if lo < domain[0] or hi > domain[1]:
                raise FieldDomain(f"{name} value {c} outside {domain[0]}..{domain[1]}")

    def get(self, name: str) -> Optional[FieldConstraint]:
        """Constraint on ``name``; explicit wildcards read as absent."""
        c = getattr(self, name)
        if c is None or c.is_wildcard:
            return None
        return c

    def present(self) -> dict[str, FieldConstraint]:
        return {n: c for n in DIMENSIONS if (c := self.get(n)) is not None}

    def __iter__(self) -> Iterator[tuple[str, Optional[FieldConstraint]]]:
        for name in DIMENSIONS:
            yield name, self.get(name)

    def describe(self) -> str:
        parts = [f"{n}={c}" for n, c in self.present().items()]
        return ", ".join(parts) if parts else "*"


# -- actions ------------------------------------------------------------------

@dataclass(frozen=True)
class Output:
    port: int

    def __str__(self):
        return f"output:{self.port}"


@dataclass(frozen=True)
class Drop:
    def __str__(self):
        return "drop"


@dataclass(frozen=True)
class SetQueue:
    queue_id: int

    def __str__(self):
        return f"set_queue:{self.queue_id}"


@dataclass(frozen=True)
class PushVlan:
    tag: int

    def __str__(self):
        return f"push_vlan:{self.tag}"


Action = Union[Output, Drop, SetQueue, PushVlan]


@dataclass(frozen=True)
class ActionSet:
    """Ordered action primitives.

    Construction accepts any combination so that malformed candidates can be
    represented and diagnosed; ``is_consistent`` reports the Drop/Output
    exclusion and serializers refuse inconsistent sets.
    """

    primitives: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))

    @classmethod
    def of(cls, *actions: Action) -> "ActionSet":
        return cls(tuple(actions))

    @property
    def drops(self) -> bool:
        return any(isinstance(a, Drop) for a in self.primitives)

    @property
    def output_ports(self) -> frozenset:
        return frozenset(a.port for a in self.primitives if isinstance(a, Output))

    @property
    def queue_ids(self) -> frozenset:
        return frozenset(a.queue_id for a in self.primitives if isinstance(a, SetQueue))

    @property
    def forwards(self) -> bool:
        return bool(self.output_ports)

    def is_consistent(self) -> bool:
        return not (self.drops and self.forwards)

    def __len__(self):
        return len(self.primitives)

    def __iter__(self):
        return iter(self.primitives)

    def __str__(self):
        return "[" + ", ".join(str(a) for a in self.primitives) + "]"


@dataclass(frozen=True)
class FlowRule:
    flow_id: str
    device_id: str
    priority: int
    match: MatchSpace
    actions: ActionSet
    table_id: int = 0
    name: Optional[str] = None
    timeout_s: int = 0
    permanent: Optional[bool] = None
    # Dialect-specific fields the codec does not model; kept for lossless
    # round trips.  Shape: {"dialect": str, "flow": {...}, "match": ...}.
    extras: dict = field(default_factory=dict, hash=False, repr=False)

    def __post_init__(self):
        if self.permanent is None:
            object.__setattr__(self, "permanent", self.timeout_s == 0)
        if self.priority < 0 or self.table_id < 0 or self.timeout_s < 0:
            raise FieldDomain("priority, table_id and timeout_s must be non-negative")
        if (self.timeout_s == 0) != bool(self.permanent):
            raise FieldDomain("timeout_s = 0 exactly when the rule is permanent")

    def replace(self, **changes) -> "FlowRule":
        if "timeout_s" in changes and "permanent" not in changes:
            changes["permanent"] = changes["timeout_s"] == 0
        return dataclasses.replace(self, **changes)

    def core(self) -> tuple:
        """Semantic identity, ignoring names and preserved extras."""
        return (self.flow_id, self.table_id, self.priority, self.match, self.actions)
