import copy
import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from netintent.errors import DialectUnrepresentable, FieldDomain, MalformedJson, UnknownShape
from netintent.flow_model import (
    DEFAULT_POLICY,
    FULL_SORT_POLICY,
    ActionSet,
    CanonPolicy,
    ControllerDialect,
    DeviceTable,
    Drop,
    FieldConstraint as F,
    FieldKind,
    FlowRule,
    MatchSpace,
    Output,
    PushVlan,
    SetQueue,
    canonicalize_json,
    native_device_id,
    parse_flow,
    semantic_equal,
    serialize_flow,
    switch_number,
)

FIX = Path(__file__).parent / "fixtures"
ODL_TEXT = (FIX / "sample_odl.json").read_text()
ONOS_TEXT = (FIX / "sample_onos.json").read_text()
ODL, ONOS = ControllerDialect.ODL, ControllerDialect.ONOS

EXPECTED_MATCH = MatchSpace(eth_type=F.exact(2048), ip_proto=F.enum(6),
                            dst_ip=F.cidr("10.0.0.3/32"), dst_port=F.port(80))
EXPECTED_ACTIONS = ActionSet.of(SetQueue(0), Output(2))


def _reorder(value):
    if isinstance(value, dict):
        return {k: _reorder(value[k]) for k in reversed(list(value))}
    if isinstance(value, list):
        return [_reorder(v) for v in value]
    return value


# -- constraints ---------------------------------------------------------------

def test_cidr_zeroes_host_bits():
    c = F.cidr("192.168.10.25/24")
    assert str(c) == "192.168.10.0/24"
    assert c == F.cidr("192.168.10.0/24")


@pytest.mark.parametrize("bad", [
    lambda: F.cidr("10.0.0.0", 33),
    lambda: F.port(65536),
    lambda: F.port_range(10, 5),
    lambda: F.mac("aa:bb"),
    lambda: F.cidr("300.1.1.1"),
    lambda: F(FieldKind.WILDCARD, 3),
])
def test_constraint_domain_errors(bad):
    with pytest.raises(FieldDomain):
        bad()


def test_match_dimension_kind_checked():
    with pytest.raises(FieldDomain):
        MatchSpace(src_ip=F.port(80))
    with pytest.raises(FieldDomain):
        MatchSpace(vlan_id=F.exact(5000))


def test_wildcard_reads_as_absent():
    m = MatchSpace(src_ip=F.wildcard())
    assert m.get("src_ip") is None
    assert m.present() == {}


def test_permanent_follows_timeout():
    r = FlowRule("1", "openflow:1", 1, MatchSpace(), ActionSet.of(Drop()))
    assert r.permanent
    t = r.replace(timeout_s=30)
    assert not t.permanent
    with pytest.raises(FieldDomain):
        FlowRule("1", "openflow:1", 1, MatchSpace(), ActionSet.of(Drop()), timeout_s=5, permanent=True)


# -- parse / serialize -----------------------------------------------------------

def test_parse_odl_listing():
    r = parse_flow(ODL, ODL_TEXT)
    assert r.priority == 200 and r.table_id == 0
    assert r.match == EXPECTED_MATCH
    assert r.actions == EXPECTED_ACTIONS


def test_parse_onos_listing():
    r = parse_flow(ONOS, ONOS_TEXT)
    assert r.device_id == "of:0000000000000001"
    assert r.match == EXPECTED_MATCH
    assert r.actions == EXPECTED_ACTIONS


def test_onos_missing_treatment_is_drop():
    doc = json.loads(ONOS_TEXT)
    del doc["flows"][0]["treatment"]
    assert parse_flow(ONOS, doc).actions == ActionSet.of(Drop())


def test_onos_noaction_is_drop():
    doc = json.loads(ONOS_TEXT)
    doc["flows"][0]["treatment"] = {"instructions": [{"type": "NOACTION"}]}
    assert parse_flow(ONOS, doc).actions == ActionSet.of(Drop())


def test_onos_drop_serializes_without_treatment():
    r = parse_flow(ONOS, ONOS_TEXT).replace(actions=ActionSet.of(Drop()))
    out = json.loads(serialize_flow(ONOS, r))
    assert "treatment" not in out["flows"][0]


@pytest.mark.parametrize("text,exc", [
    ("{]", MalformedJson),
    ('{"nothing": []}', UnknownShape),
    ('{"flows": []}', UnknownShape),
    ('[1, 2]', UnknownShape),
])
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_flow(ONOS, text)


def test_parse_rejects_out_of_domain_prefix():
    doc = json.loads(ODL_TEXT)
    doc["flow-node-inventory:flow"][0]["match"]["ipv4-destination"] = "10.0.0.3/40"
    with pytest.raises(FieldDomain):
        parse_flow(ODL, doc)


def test_drop_plus_output_unrepresentable():
    r = parse_flow(ODL, ODL_TEXT).replace(actions=ActionSet.of(Drop(), Output(1)))
    for d in (ODL, ONOS):
        with pytest.raises(DialectUnrepresentable):
            serialize_flow(d, r)


@pytest.mark.parametrize("dialect,text", [(ODL, ODL_TEXT), (ONOS, ONOS_TEXT)])
def test_round_trip_listing(dialect, text):
    r = parse_flow(dialect, text)
    out = serialize_flow(dialect, r)
    assert semantic_equal(json.loads(text), json.loads(out))
    assert parse_flow(dialect, out) == r


def test_cross_dialect_translation_preserves_semantics():
    odl = parse_flow(ODL, ODL_TEXT)
    onos = parse_flow(ONOS, serialize_flow(ONOS, odl.replace(device_id="of:0000000000000001")))
    assert onos.match == odl.match and onos.actions == odl.actions


def test_unknown_fields_survive_round_trip():
    doc = json.loads(ODL_TEXT)
    doc["flow-node-inventory:flow"][0]["cookie"] = 77
    doc["flow-node-inventory:flow"][0]["installHw"] = False
    out = json.loads(serialize_flow(ODL, parse_flow(ODL, doc)))
    assert out["flow-node-inventory:flow"][0]["cookie"] == 77
    assert out["flow-node-inventory:flow"][0]["installHw"] is False


def test_udp_and_vlan_and_range_round_trip():
    r = FlowRule("f", "openflow:2", 10,
                 MatchSpace(eth_type=F.exact(2048), ip_proto=F.enum(17), src_port=F.port_range(4000, 4010),
                            vlan_id=F.exact(10), in_port=F.exact(3)),
                 ActionSet.of(PushVlan(20), Output(4)))
    for d in (ODL, ONOS):
        assert parse_flow(d, serialize_flow(d, r)).core() == r.core()


# -- canonicalization -------------------------------------------------------------

def test_canon_examples():
    assert list(canonicalize_json({"b": 1, "a": 2})) == ["a", "b"]
    assert canonicalize_json({"p": "200"}) == {"p": 200}
    pol = CanonPolicy(order_insensitive_paths={"**.criteria"})
    a = canonicalize_json({"criteria": [{"type": "TCP_DST"}, {"type": "ETH_TYPE"}]}, pol)
    b = canonicalize_json({"criteria": [{"type": "ETH_TYPE"}, {"type": "TCP_DST"}]}, pol)
    assert a == b


def test_semantic_equal_examples():
    odl = json.loads(ODL_TEXT)
    assert semantic_equal(odl, _reorder(odl))
    mutated = copy.deepcopy(odl)
    action = mutated["flow-node-inventory:flow"][0]["instructions"]["instruction"][0]["apply-actions"]["action"]
    for a in action:
        if "set-queue-action" in a:
            a["set-queue-action"]["queue-id"] = 1
    assert not semantic_equal(odl, mutated)
    onos = json.loads(ONOS_TEXT)
    stringy = copy.deepcopy(onos)
    for c in stringy["flows"][0]["selector"]["criteria"]:
        if c["type"] == "TCP_DST":
            c["tcpPort"] = "80"
    assert semantic_equal(onos, stringy)
    assert not semantic_equal(onos, stringy, FULL_SORT_POLICY)


def test_action_order_is_significant_by_default():
    a = {"apply-actions": {"action": [{"order": 0, "x": 1}, {"order": 1, "y": 2}]}}
    b = {"apply-actions": {"action": [{"order": 1, "y": 2}, {"order": 0, "x": 1}]}}
    assert not semantic_equal(a, b)
    assert semantic_equal(a, b, FULL_SORT_POLICY)


def test_ignore_paths():
    pol = DEFAULT_POLICY.with_ignored({"**.cookie"})
    assert semantic_equal({"f": [{"cookie": 1, "id": "a"}]}, {"f": [{"id": "a"}]}, pol)


def test_bool_not_equal_to_int():
    assert not semantic_equal({"x": True}, {"x": 1})


def test_bad_pattern_rejected():
    with pytest.raises(ValueError):
        CanonPolicy(ignore_paths={"a..b"})


json_leaf = st.one_of(st.none(), st.booleans(), st.integers(-1000, 1000),
                      st.floats(allow_nan=False, allow_infinity=False, width=32),
                      st.text(max_size=6), st.sampled_from(["12", "0x1f", "3.0", "-7"]))
json_values = st.recursive(json_leaf, lambda inner: st.one_of(
    st.lists(inner, max_size=4), st.dictionaries(st.text(max_size=4), inner, max_size=4)), max_leaves=20)
policies = st.sampled_from([DEFAULT_POLICY, FULL_SORT_POLICY, CanonPolicy()])


@settings(max_examples=200, deadline=None)
@given(json_values, policies)
def test_canonicalize_idempotent(value, policy):
    once = canonicalize_json(value, policy)
    assert canonicalize_json(once, policy) == once


@settings(max_examples=200, deadline=None)
@given(json_values, json_values, json_values, policies)
def test_semantic_equal_is_equivalence(a, b, c, policy):
    assert semantic_equal(a, a, policy)
    assert semantic_equal(a, b, policy) == semantic_equal(b, a, policy)
    if semantic_equal(a, b, policy) and semantic_equal(b, c, policy):
        assert semantic_equal(a, c, policy)


@settings(max_examples=100, deadline=None)
@given(json_values, policies)
def test_semantic_equal_under_reordering(value, policy):
    assert semantic_equal({"v": value}, {"v": _reorder(value)}, policy)


@settings(max_examples=100, deadline=None)
@given(st.one_of(st.integers(33, 200), st.integers(-50, -1)))
def test_parse_rejects_illegal_prefix(plen):
    doc = json.loads(ODL_TEXT)
    doc["flow-node-inventory:flow"][0]["match"]["ipv4-destination"] = f"10.0.0.3/{plen}"
    with pytest.raises(FieldDomain):
        parse_flow(ODL, doc)


@settings(max_examples=100, deadline=None)
@given(st.one_of(st.integers(65536, 10**6), st.integers(-10**6, -1)))
def test_parse_rejects_illegal_port(port):
    doc = json.loads(ONOS_TEXT)
    doc["flows"][0]["selector"]["criteria"][3]["tcpPort"] = port
    with pytest.raises(FieldDomain):
        parse_flow(ONOS, doc)


ports = st.integers(0, 65535)
addresses = st.integers(0, 2**32 - 1)
opt = lambda s: st.one_of(st.none(), s)
match_spaces = st.builds(
    MatchSpace,
    eth_type=st.just(F.exact(2048)),
    ip_proto=opt(st.sampled_from([F.enum(6), F.enum(17)])),
    src_ip=opt(st.builds(F.cidr, addresses, st.integers(0, 32))),
    dst_ip=opt(st.builds(F.cidr, addresses, st.integers(0, 32))),
    dst_port=opt(st.builds(F.port, ports)),
    src_mac=opt(st.builds(F.mac, st.integers(0, 2**48 - 1))),
    in_port=opt(st.builds(F.exact, st.integers(1, 64))),
)
action_sets = st.one_of(
    st.just(ActionSet.of(Drop())),
    st.builds(lambda q, p: ActionSet.of(SetQueue(q), Output(p)), st.integers(0, 7), st.integers(1, 48)),
    st.builds(lambda p: ActionSet.of(Output(p)), st.integers(1, 48)),
)


@settings(max_examples=150, deadline=None)
@given(match_spaces, action_sets, st.integers(0, 65535), st.sampled_from([ODL, ONOS]))
def test_round_trip_property(match, actions, priority, dialect):
    device = native_device_id(dialect, 1)
    r = FlowRule("7", device, priority, match, actions)
    text = serialize_flow(dialect, r)
    back = parse_flow(dialect, text)
    assert back.match == r.match and back.actions == r.actions and back.priority == r.priority
    assert semantic_equal(json.loads(text), json.loads(serialize_flow(dialect, back)))


# -- devices -----------------------------------------------------------------------

def test_device_ids():
    assert native_device_id("odl", 3) == "openflow:3"
    assert native_device_id("onos", 3) == "of:0000000000000003"
    assert switch_number("of:000000000000000a") == 10
    assert switch_number("openflow:7") == 7
    assert switch_number("s4") == 4
    assert switch_number("bogus") is None


def test_device_table_from_intent():
    t = DeviceTable("onos", {2: "of:00000000000000aa"})
    assert t.from_intent("Block traffic on switch 3") == "of:0000000000000003"
    assert t.from_intent("queue on node 2 please") == "of:00000000000000aa"
    assert t.from_intent("no device mentioned") is None
