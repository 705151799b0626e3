"""Canonical flow-rule model, dialect codecs and JSON equivalence."""

from netintent.flow_model.canon import (
    BOOKKEEPING_PATHS,
    DEFAULT_POLICY,
    FULL_SORT_POLICY,
    CanonPolicy,
    canonical_dumps,
    canonicalize_json,
    semantic_equal,
)
from netintent.flow_model.codec import (
    ODL_ENVELOPE,
    ONOS_ENVELOPE,
    envelope,
    flow_from_dict,
    flow_to_dict,
    load_json,
    parse_flow,
    parse_flows,
    serialize_flow,
)
from netintent.flow_model.devices import DeviceTable, native_device_id, switch_number
from netintent.flow_model.types import (
    DIMENSIONS,
    Action,
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
)

__all__ = [
    "BOOKKEEPING_PATHS", "DEFAULT_POLICY", "FULL_SORT_POLICY", "CanonPolicy", "canonical_dumps",
    "canonicalize_json", "semantic_equal", "ODL_ENVELOPE", "ONOS_ENVELOPE", "envelope",
    "flow_from_dict", "flow_to_dict", "load_json", "parse_flow", "parse_flows", "serialize_flow",
    "DeviceTable", "native_device_id", "switch_number", "DIMENSIONS", "Action", "ActionSet",
    "ControllerDialect", "Drop", "FieldConstraint", "FieldKind", "FlowRule", "MatchSpace",
    "Output", "PushVlan", "SetQueue",
]
