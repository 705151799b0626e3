"""ODL (openflowplugin RESTCONF) and ONOS REST flow JSON codecs.

Both envelopes follow the shapes the controllers accept on their northbound
APIs: ``{"flow-node-inventory:flow": [...]}`` for ODL and ``{"flows": [...]}``
for ONOS.  Keys the codec does not model are carried in ``FlowRule.extras``
and written back verbatim when serializing to the same dialect.

Port ranges have no native encoding in either controller; they are written
as ``"lo-hi"`` strings in the usual port slots.
"""

from __future__ import annotations

import copy
import json
import re
from typing import Any, Optional, Union

from netintent.errors import DialectUnrepresentable, FieldDomain, MalformedJson, UnknownShape
from netintent.flow_model.types import (
    ActionSet,
    ControllerDialect,
    Drop,
    FieldConstraint,
    FieldKind,
    FlowRule,
    MatchSpace,
    Output,
    PushVlan,
    SetQueue,
    format_mac,
)

ODL_ENVELOPE = "flow-node-inventory:flow"
ONOS_ENVELOPE = "flows"

ENVELOPES = {ControllerDialect.ODL: ODL_ENVELOPE, ControllerDialect.ONOS: ONOS_ENVELOPE}

TCP, UDP = 6, 17
VLAN_ETHERTYPE = 0x8100

_RANGE_RE = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*$")


def load_json(json_text: Union[str, bytes]) -> Any:
    try:
        return json.loads(json_text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJson(f"not valid JSON: {exc}") from None


def envelope_flows(dialect: ControllerDialect, doc: Any) -> list:
    key = ENVELOPES[ControllerDialect.parse(dialect)]
    if not isinstance(doc, dict) or key not in doc:
        raise UnknownShape(f"missing {key!r} envelope for {dialect.value}")
    flows = doc[key]
    if not isinstance(flows, list):
        raise UnknownShape(f"{key!r} must be an array")
    return flows


def parse_flows(dialect, json_text, device_id: Optional[str] = None) -> list[FlowRule]:
    """Parse every flow in a dialect envelope (text or already-decoded JSON)."""
    dialect = ControllerDialect.parse(dialect)
    doc = load_json(json_text) if isinstance(json_text, (str, bytes)) else json_text
    return [flow_from_dict(dialect, f, device_id=device_id) for f in envelope_flows(dialect, doc)]


def parse_flow(dialect, json_text, device_id: Optional[str] = None) -> FlowRule:
    """Parse the first flow of a dialect envelope.

    ODL flow bodies do not name their node, so ``device_id`` supplies it; for
    ONOS it is only a fallback when ``deviceId`` is missing.
    """
    dialect = ControllerDialect.parse(dialect)
    doc = load_json(json_text) if isinstance(json_text, (str, bytes)) else json_text
    flows = envelope_flows(dialect, doc)
    if not flows:
        raise UnknownShape(f"{ENVELOPES[dialect]!r} array is empty")
    return flow_from_dict(dialect, flows[0], device_id=device_id)


def flow_from_dict(dialect, obj: Any, device_id: Optional[str] = None) -> FlowRule:
    dialect = ControllerDialect.parse(dialect)
    if not isinstance(obj, dict):
        raise UnknownShape("flow entry must be a JSON object")
    if dialect is ControllerDialect.ODL:
        return _odl_from_dict(obj, device_id)
    return _onos_from_dict(obj, device_id)


def flow_to_dict(dialect, rule: FlowRule) -> dict:
    dialect = ControllerDialect.parse(dialect)
    if not rule.actions.is_consistent():
        raise DialectUnrepresentable(
            f"flow {rule.flow_id!r}: drop and output cannot share one action set")
    if dialect is ControllerDialect.ODL:
        return _odl_to_dict(rule)
    return _onos_to_dict(rule)


def serialize_flow(dialect, rule: FlowRule, indent: Optional[int] = None) -> str:
    dialect = ControllerDialect.parse(dialect)
    return json.dumps({ENVELOPES[dialect]: [flow_to_dict(dialect, rule)]}, indent=indent)


def envelope(dialect, rules: list[FlowRule]) -> dict:
    dialect = ControllerDialect.parse(dialect)
    return {ENVELOPES[dialect]: [flow_to_dict(dialect, r) for r in rules]}


# -- scalar helpers ------------------------------------------------------------

def _int(value: Any, what: str, *, hex_ok: bool = False) -> int:
    if isinstance(value, bool):
        raise FieldDomain(f"{what}: expected integer, got boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            if hex_ok and text.lower().startswith("0x"):
                return int(text, 16)
            return int(text)
        except ValueError:
            pass
    raise FieldDomain(f"{what}: expected integer, got {value!r}")


def _port_number(value: Any, what: str) -> int:
    """Port numbers, accepting ODL connector ids such as ``openflow:1:2``."""
    if isinstance(value, str) and ":" in value:
        value = value.rsplit(":", 1)[1]
    port = _int(value, what)
    if port < 0:
        raise FieldDomain(f"{what}: negative port {port}")
    return port


def _l4(value: Any, what: str) -> FieldConstraint:
    if isinstance(value, str) and (m := _RANGE_RE.match(value)):
        lo, hi = int(m.group(1)), int(m.group(2))
        return FieldConstraint.port_range(lo, hi)
    return FieldConstraint.port(_int(value, what))


def _l4_out(c: FieldConstraint) -> Union[int, str]:
    if c.kind is FieldKind.PORT_RANGE:
        return f"{c.value[0]}-{c.value[1]}"
    return c.value


def _cidr(value: Any, what: str) -> FieldConstraint:
    if not isinstance(value, str):
        raise FieldDomain(f"{what}: expected CIDR string, got {value!r}")
    return FieldConstraint.cidr(value)


def _bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() == "true"
    return bool(value)


def _split(obj: dict, modelled: set[str], defaults: dict[str, Any]) -> dict:
    """Unmodelled keys, plus modelled optional keys that carry their default."""
    extra = {k: copy.deepcopy(v) for k, v in obj.items() if k not in modelled}
    for key, default in defaults.items():
        if key in obj and obj[key] == default and not isinstance(obj[key], bool):
            extra[key] = copy.deepcopy(obj[key])
    return extra


def _extras_for(rule: FlowRule, dialect: ControllerDialect) -> dict:
    if rule.extras.get("dialect") != dialect.value:
        return {}
    return rule.extras


# -- ODL ----------------------------------------------------------------------

_ODL_FLOW_KEYS = {"id", "table_id", "priority", "match", "instructions", "flow-name", "hard-timeout"}
_ODL_MATCH_KEYS = {"ethernet-match", "ip-match", "ipv4-source", "ipv4-destination",
                   "tcp-source-port", "tcp-destination-port", "udp-source-port",
                   "udp-destination-port", "in-port", "vlan-match"}


def _odl_from_dict(obj: dict, device_id: Optional[str]) -> FlowRule:
    if "match" in obj and not isinstance(obj["match"], dict):
        raise UnknownShape("ODL 'match' must be an object")
    m = obj.get("match") or {}
    fields: dict[str, FieldConstraint] = {}

    eth = m.get("ethernet-match") or {}
    if "ethernet-type" in eth:
        fields["eth_type"] = FieldConstraint.exact(_int((eth["ethernet-type"] or {}).get("type"),
                                                        "ethernet-type", hex_ok=True))
    if "ethernet-source" in eth:
        fields["src_mac"] = FieldConstraint.mac((eth["ethernet-source"] or {}).get("address", ""))
    if "ethernet-destination" in eth:
        fields["dst_mac"] = FieldConstraint.mac((eth["ethernet-destination"] or {}).get("address", ""))
    ipm = m.get("ip-match") or {}
    if "ip-protocol" in ipm:
        fields["ip_proto"] = FieldConstraint.enum(_int(ipm["ip-protocol"], "ip-protocol"))
    if "ipv4-source" in m:
        fields["src_ip"] = _cidr(m["ipv4-source"], "ipv4-source")
    if "ipv4-destination" in m:
        fields["dst_ip"] = _cidr(m["ipv4-destination"], "ipv4-destination")
    for proto in ("tcp", "udp"):
        if f"{proto}-source-port" in m:
            fields["src_port"] = _l4(m[f"{proto}-source-port"], f"{proto}-source-port")
        if f"{proto}-destination-port" in m:
            fields["dst_port"] = _l4(m[f"{proto}-destination-port"], f"{proto}-destination-port")
    if "in-port" in m:
        fields["in_port"] = FieldConstraint.exact(_port_number(m["in-port"], "in-port"))
    vlan = m.get("vlan-match") or {}
    if "vlan-id" in vlan:
        fields["vlan_id"] = FieldConstraint.exact(_int((vlan["vlan-id"] or {}).get("vlan-id"), "vlan-id"))

    match = MatchSpace(**fields)
    actions = ActionSet(tuple(_odl_actions(obj.get("instructions"))))
    timeout = _int(obj.get("hard-timeout", 0), "hard-timeout")
    extras = {
        "dialect": "odl",
        "flow": _split(obj, _ODL_FLOW_KEYS, {"hard-timeout": 0}),
        "match": {k: copy.deepcopy(v) for k, v in m.items() if k not in _ODL_MATCH_KEYS},
    }
    return FlowRule(
        flow_id=str(obj.get("id", "")),
        device_id=device_id or "",
        table_id=_int(obj.get("table_id", 0), "table_id"),
        priority=_int(obj.get("priority", 0), "priority"),
        match=match,
        actions=actions,
        name=obj.get("flow-name"),
        timeout_s=timeout,
        extras=extras,
    )


def _odl_actions(instructions: Any) -> list:
    if instructions is None:
        return []
    if not isinstance(instructions, dict):
        raise UnknownShape("ODL 'instructions' must be an object")
    out = []
    entries = sorted(instructions.get("instruction") or [], key=lambda i: i.get("order", 0))
    for ins in entries:
        acts = ((ins.get("apply-actions") or {}).get("action")) or []
        for act in sorted(acts, key=lambda a: a.get("order", 0)):
            if "drop-action" in act:
                out.append(Drop())
            elif "output-action" in act:
                out.append(Output(_port_number(
                    (act["output-action"] or {}).get("output-node-connector"), "output-node-connector")))
            elif "set-queue-action" in act:
                out.append(SetQueue(_int((act["set-queue-action"] or {}).get("queue-id"), "queue-id")))
            elif "push-vlan-action" in act:
                out.append(PushVlan(_int((act["push-vlan-action"] or {}).get("vlan-id"), "vlan-id")))
            else:
                keys = sorted(k for k in act if k != "order")
                raise FieldDomain(f"unsupported ODL action {keys}")
    return out


def _odl_to_dict(rule: FlowRule) -> dict:
    extras = _extras_for(rule, ControllerDialect.ODL)
    out = copy.deepcopy(extras.get("flow", {}))
    out.update({"id": rule.flow_id, "priority": rule.priority, "table_id": rule.table_id})
    if rule.name is not None:
        out["flow-name"] = rule.name
    if rule.timeout_s:
        out["hard-timeout"] = rule.timeout_s

    actions = []
    for i, a in enumerate(rule.actions):
        if isinstance(a, Drop):
            body = {"drop-action": {}}
        elif isinstance(a, Output):
            body = {"output-action": {"output-node-connector": str(a.port)}}
        elif isinstance(a, SetQueue):
            body = {"set-queue-action": {"queue-id": a.queue_id}}
        else:
            body = {"push-vlan-action": {"ethernet-type": VLAN_ETHERTYPE, "vlan-id": a.tag}}
        actions.append({"order": i, **body})
    out["instructions"] = {"instruction": [{"order": 0, "apply-actions": {"action": actions}}]}

    m = rule.match
    match: dict[str, Any] = copy.deepcopy(extras.get("match", {}))
    eth: dict[str, Any] = {}
    if (c := m.get("eth_type")) is not None:
        eth["ethernet-type"] = {"type": c.value}
    if (c := m.get("src_mac")) is not None:
        eth["ethernet-source"] = {"address": format_mac(c.value)}
    if (c := m.get("dst_mac")) is not None:
        eth["ethernet-destination"] = {"address": format_mac(c.value)}
    if eth:
        match["ethernet-match"] = eth
    if (c := m.get("ip_proto")) is not None:
        match["ip-match"] = {"ip-protocol": c.value}
    if (c := m.get("src_ip")) is not None:
        match["ipv4-source"] = str(c)
    if (c := m.get("dst_ip")) is not None:
        match["ipv4-destination"] = str(c)
    proto = "udp" if (c := m.get("ip_proto")) is not None and c.value == UDP else "tcp"
    if (c := m.get("src_port")) is not None:
        match[f"{proto}-source-port"] = _l4_out(c)
    if (c := m.get("dst_port")) is not None:
        match[f"{proto}-destination-port"] = _l4_out(c)
    if (c := m.get("in_port")) is not None:
        match["in-port"] = str(c.value)
    if (c := m.get("vlan_id")) is not None:
        match["vlan-match"] = {"vlan-id": {"vlan-id": c.value, "vlan-id-present": True}}
    out["match"] = match
    return out


# -- ONOS ---------------------------------------------------------------------

_ONOS_FLOW_KEYS = {"id", "tableId", "priority", "timeout", "isPermanent", "deviceId",
                   "treatment", "selector"}
_ONOS_CRITERIA = {"ETH_TYPE", "ETH_SRC", "ETH_DST", "IPV4_SRC", "IPV4_DST", "IP_PROTO",
                  "TCP_SRC", "TCP_DST", "UDP_SRC", "UDP_DST", "IN_PORT", "VLAN_VID"}


def _onos_from_dict(obj: dict, device_id: Optional[str]) -> FlowRule:
    selector = obj.get("selector") or {}
    if not isinstance(selector, dict):
        raise UnknownShape("ONOS 'selector' must be an object")
    criteria = selector.get("criteria") or []
    if not isinstance(criteria, list):
        raise UnknownShape("ONOS 'selector.criteria' must be an array")
    fields: dict[str, FieldConstraint] = {}
    unknown = []
    for crit in criteria:
        ctype = str(crit.get("type", "")).upper() if isinstance(crit, dict) else ""
        if ctype not in _ONOS_CRITERIA:
            unknown.append(copy.deepcopy(crit))
            continue
        if ctype == "ETH_TYPE":
            fields["eth_type"] = FieldConstraint.exact(_int(crit.get("ethType"), "ethType", hex_ok=True))
        elif ctype == "ETH_SRC":
            fields["src_mac"] = FieldConstraint.mac(crit.get("mac", ""))
        elif ctype == "ETH_DST":
            fields["dst_mac"] = FieldConstraint.mac(crit.get("mac", ""))
        elif ctype == "IPV4_SRC":
            fields["src_ip"] = _cidr(crit.get("ip"), "IPV4_SRC.ip")
        elif ctype == "IPV4_DST":
            fields["dst_ip"] = _cidr(crit.get("ip"), "IPV4_DST.ip")
        elif ctype == "IP_PROTO":
            fields["ip_proto"] = FieldConstraint.enum(_int(crit.get("protocol"), "protocol"))
        elif ctype in ("TCP_SRC", "UDP_SRC"):
            key = "tcpPort" if ctype.startswith("TCP") else "udpPort"
            fields["src_port"] = _l4(crit.get(key), f"{ctype}.{key}")
        elif ctype in ("TCP_DST", "UDP_DST"):
            key = "tcpPort" if ctype.startswith("TCP") else "udpPort"
            fields["dst_port"] = _l4(crit.get(key), f"{ctype}.{key}")
        elif ctype == "IN_PORT":
            fields["in_port"] = FieldConstraint.exact(_port_number(crit.get("port"), "IN_PORT.port"))
        elif ctype == "VLAN_VID":
            fields["vlan_id"] = FieldConstraint.exact(_int(crit.get("vlanId"), "vlanId"))

    timeout = _int(obj.get("timeout", 0), "timeout")
    extras = {
        "dialect": "onos",
        "flow": _split(obj, _ONOS_FLOW_KEYS, {"id": "", "tableId": 0}),
        "match": unknown,
    }
    for key in ("isPermanent",):
        if isinstance(obj.get(key), bool):
            extras["bool_permanent"] = True
    return FlowRule(
        flow_id=str(obj.get("id", "")),
        device_id=str(obj.get("deviceId") or device_id or ""),
        table_id=_int(obj.get("tableId", 0), "tableId"),
        priority=_int(obj.get("priority", 0), "priority"),
        match=MatchSpace(**fields),
        actions=ActionSet(tuple(_onos_actions(obj))),
        timeout_s=timeout,
        permanent=(timeout == 0),
        extras=extras,
    )


def _onos_actions(obj: dict) -> list:
    treatment = obj.get("treatment")
    if treatment is None:
        return [Drop()]
    if not isinstance(treatment, dict):
        raise UnknownShape("ONOS 'treatment' must be an object")
    instructions = treatment.get("instructions") or []
    out = []
    for ins in instructions:
        itype = str(ins.get("type", "")).upper()
        if itype == "NOACTION":
            out.append(Drop())
        elif itype == "OUTPUT":
            out.append(Output(_port_number(ins.get("port"), "OUTPUT.port")))
        elif itype == "QUEUE":
            out.append(SetQueue(_int(ins.get("queueId"), "queueId")))
        elif itype == "L2MODIFICATION" and str(ins.get("subtype", "")).upper() == "VLAN_PUSH":
            continue
        elif itype == "L2MODIFICATION" and str(ins.get("subtype", "")).upper() == "VLAN_ID":
            out.append(PushVlan(_int(ins.get("vlanId"), "vlanId")))
        else:
            raise FieldDomain(f"unsupported ONOS instruction {ins!r}")
    return out or [Drop()]


def _onos_to_dict(rule: FlowRule) -> dict:
    extras = _extras_for(rule, ControllerDialect.ONOS)
    out = copy.deepcopy(extras.get("flow", {}))
    if rule.flow_id:
        out["id"] = rule.flow_id
    if rule.table_id:
        out["tableId"] = rule.table_id
    permanent: Any = rule.permanent if extras.get("bool_permanent") else ("true" if rule.permanent else "false")
    out.update({"priority": rule.priority, "timeout": rule.timeout_s,
                "isPermanent": permanent, "deviceId": rule.device_id})

    prims = list(rule.actions)
    if prims and not all(isinstance(a, Drop) for a in prims):
        instructions = []
        for a in prims:
            if isinstance(a, Output):
                instructions.append({"type": "OUTPUT", "port": str(a.port)})
            elif isinstance(a, SetQueue):
                instructions.append({"type": "QUEUE", "queueId": a.queue_id})
            elif isinstance(a, PushVlan):
                instructions.append({"type": "L2MODIFICATION", "subtype": "VLAN_PUSH"})
                instructions.append({"type": "L2MODIFICATION", "subtype": "VLAN_ID", "vlanId": a.tag})
        out["treatment"] = {"instructions": instructions}
    else:
        # Drop is expressed by leaving the treatment out.
        out.pop("treatment", None)

    m = rule.match
    criteria = []
    if (c := m.get("eth_type")) is not None:
        criteria.append({"type": "ETH_TYPE", "ethType": hex(c.value)})
    if (c := m.get("src_mac")) is not None:
        criteria.append({"type": "ETH_SRC", "mac": format_mac(c.value)})
    if (c := m.get("dst_mac")) is not None:
        criteria.append({"type": "ETH_DST", "mac": format_mac(c.value)})
    if (c := m.get("in_port")) is not None:
        criteria.append({"type": "IN_PORT", "port": c.value})
    if (c := m.get("vlan_id")) is not None:
        criteria.append({"type": "VLAN_VID", "vlanId": c.value})
    if (c := m.get("ip_proto")) is not None:
        criteria.append({"type": "IP_PROTO", "protocol": c.value})
    if (c := m.get("src_ip")) is not None:
        criteria.append({"type": "IPV4_SRC", "ip": str(c)})
    if (c := m.get("dst_ip")) is not None:
        criteria.append({"type": "IPV4_DST", "ip": str(c)})
    udp = (c := m.get("ip_proto")) is not None and c.value == UDP
    l4, key = ("UDP", "udpPort") if udp else ("TCP", "tcpPort")
    if (c := m.get("src_port")) is not None:
        criteria.append({"type": f"{l4}_SRC", key: _l4_out(c)})
    if (c := m.get("dst_port")) is not None:
        criteria.append({"type": f"{l4}_DST", key: _l4_out(c)})
    criteria.extend(copy.deepcopy(extras.get("match", [])))
    out["selector"] = {"criteria": criteria}
    return out
