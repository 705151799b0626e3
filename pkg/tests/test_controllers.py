import json
from pathlib import Path

import pytest
import requests
from hypothesis import given, settings, strategies as st

from netintent.controllers import (
    MSS,
    Controller,
    DeleteRule,
    OdlRestController,
    OnosRestController,
    OvsQueueStatsProvider,
    QueueUnmapped,
    ShadowRule,
    SilentDrop,
    SimulatedController,
    Topology,
    make_controller,
    parse_queue_stats,
)
from netintent.errors import (
    ControllerUnreachable,
    InstallRejected,
    NoSuchDevice,
    NoSuchFlow,
    UnresolvableEndpoints,
)
from netintent.flow_model import parse_flow
from netintent.flow_model.types import ActionSet, Drop, FieldConstraint, FlowRule, MatchSpace, Output, SetQueue
from netintent.traffic import TestTrafficSpec

FIX = Path(__file__).parent / "fixtures"
SAMPLE = parse_flow("odl", (FIX / "sample_odl.json").read_text(), device_id="openflow:1")
BASE = "http://ctl:8181"


def tcp80(n=10, **kw):
    return TestTrafficSpec("h1", "h3", "tcp", expected_packets=n, dst_port=80, **kw)


def rule(fid, prio, actions, device="openflow:1", **match):
    m = {"eth_type": FieldConstraint.exact(2048), "ip_proto": FieldConstraint.enum(6),
         "dst_ip": FieldConstraint.cidr("10.0.0.3", 32), **match}
    return FlowRule(fid, device, prio, MatchSpace(**m), ActionSet.of(*actions))


# -- topology -------------------------------------------------------------------------

def test_diamond_shape():
    t = Topology.diamond()
    assert sorted(t.devices) == ["s1", "s2", "s3", "s4"]
    assert sorted(t.hosts) == ["h1", "h2", "h3", "h4"]
    assert t.queues[("s3", 2)] == {0: 6e6, 1: 4e6}
    assert t.link_rate("s1", 2) == 10e6 and t.link_rate("s1", 3) == 1e6


def test_table_miss_prefers_fast_branch():
    t = Topology.diamond()
    assert t.next_hop_port("s1", "h3") == 2
    assert t.next_hop_port("s3", "h3") == 2
    assert t.next_hop_port("s4", "h1") == 2
    assert t.next_hop_port("s4", "h3") == 1


def test_unknown_host():
    with pytest.raises(UnresolvableEndpoints):
        Topology.diamond().host("h9")


def test_topology_rejects_unknown_device():
    with pytest.raises(ValueError):
        Topology.from_json({"devices": [], "hosts": [{"name": "h", "ip": "10.0.0.1", "attach": ["s9", 1]}]})


# -- simulator --------------------------------------------------------------------------

def test_sim_satisfies_protocol():
    assert isinstance(SimulatedController(), Controller)
    assert isinstance(make_controller("sim"), SimulatedController)
    assert isinstance(make_controller("odl", BASE), OdlRestController)
    with pytest.raises(ValueError):
        make_controller("onos")


def test_install_then_fetch():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    assert sim.fetch_installed("openflow:1") == [SAMPLE]
    assert sim.fetch_flow("openflow:1", "1") == SAMPLE
    stats = sim.fetch_stats("openflow:1", "1")
    assert (stats.packet_count, stats.byte_count, stats.queue_tx_bytes) == (0, 0, {})


def test_device_aliases():
    sim = SimulatedController()
    sim.install_rule(SAMPLE.replace(device_id="s1"))
    assert sim.fetch_installed("openflow:1")[0].device_id == "openflow:1"
    onos = SimulatedController(dialect="onos")
    assert onos.device_ids[0] == "of:0000000000000001"
    with pytest.raises(NoSuchDevice):
        sim.fetch_installed("openflow:9")


def test_sample_rule_counts_tcp():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    rep = sim.inject_traffic(tcp80())
    stats = sim.fetch_stats("openflow:1", "1")
    assert stats.packet_count == 10 and stats.byte_count == 10 * MSS
    assert stats.queue_tx_bytes == {0: 10 * MSS}
    assert rep.delivered == 10 and sim.host_rx["h3"] == 10


def test_udp_does_not_match():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    rep = sim.inject_traffic(TestTrafficSpec("h1", "h3", "udp", expected_packets=10, dst_port=80))
    assert sim.fetch_stats("openflow:1", "1").packet_count == 0
    assert rep.delivered == 10


def test_higher_priority_drop_wins():
    sim = SimulatedController()
    sim.install_rule(rule("fwd", 200, [Output(2)]))
    sim.install_rule(rule("drop", 300, [Drop()]))
    rep = sim.inject_traffic(tcp80(7))
    assert sim.fetch_stats("openflow:1", "drop").packet_count == 7
    assert sim.fetch_stats("openflow:1", "fwd").packet_count == 0
    assert rep.dropped_by_rule == 7 and rep.delivered == 0


def test_tcp_bytes_exact_and_clock():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    sim.inject_traffic(TestTrafficSpec("h1", "h3", "tcp", expected_bytes=100_000, dst_port=80, duration_s=2))
    assert sim.fetch_stats("openflow:1", "1").byte_count == 100_000
    assert sim.clock == 2


def test_link_rate_caps_volume():
    sim = SimulatedController()
    # pin the path over the 1 Mbps branch: 10 Mbit offered for one second
    sim.install_rule(rule("slow", 200, [Output(3)]))
    rep = sim.inject_traffic(TestTrafficSpec("h1", "h3", "tcp", expected_bytes=1_250_000, dst_port=80))
    assert rep.bytes_delivered <= 1e6 / 8
    assert rep.dropped_by_link > 0


def test_queue_rate_caps_volume():
    sim = SimulatedController()
    sim.install_rule(rule("q1", 200, [SetQueue(1), Output(2)], device="openflow:3"))
    sim.inject_traffic(TestTrafficSpec("h1", "h3", "tcp", expected_bytes=1_250_000, dst_port=80))
    assert sim.fetch_stats("openflow:3", "q1").queue_tx_bytes[1] <= 4e6 / 8
    assert sim.queue_stats("openflow:3")[2][0] == 0


def test_table_miss_drop_mode():
    sim = SimulatedController(table_miss="drop")
    rep = sim.inject_traffic(tcp80(3))
    assert rep.dropped_no_route == 3


def test_only_table_zero_processes():
    sim = SimulatedController()
    sim.install_rule(rule("t1", 999, [Drop()]).replace(table_id=1))
    rep = sim.inject_traffic(tcp80(4))
    assert rep.delivered == 4
    assert [r.flow_id for r in sim.fetch_installed("openflow:1", None)] == ["t1"]


def test_fault_shadow_rule():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    sim.inject_fault(ShadowRule.over(SAMPLE))
    sim.inject_traffic(tcp80())
    assert sim.fetch_stats("openflow:1", "1").packet_count == 0
    assert sim.fetch_stats("openflow:1", "shadow-1").packet_count == 10


def test_fault_queue_unmapped():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    sim.inject_fault(QueueUnmapped("openflow:1", 2, 0))
    sim.inject_traffic(tcp80())
    stats = sim.fetch_stats("openflow:1", "1")
    assert stats.packet_count == 10 and stats.queue_tx_bytes.get(0, 0) == 0
    assert sim.remap_queue("openflow:1", 2, 0) and not sim.remap_queue("openflow:1", 2, 0)
    with pytest.raises(NoSuchDevice):
        sim.inject_fault(QueueUnmapped("openflow:1", 99, 0))


def test_fault_silent_drop():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    sim.inject_fault(SilentDrop("openflow:1", "1"))
    rep = sim.inject_traffic(tcp80())
    assert sim.fetch_stats("openflow:1", "1").packet_count == 10 and rep.delivered == 0


def test_fault_delete_rule():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    sim.inject_fault(DeleteRule("openflow:1", "1"))
    assert sim.fetch_flow("openflow:1", "1") is None
    with pytest.raises(NoSuchFlow):
        sim.inject_fault(DeleteRule("openflow:1", "1"))
    with pytest.raises(NoSuchFlow):
        sim.fetch_stats("openflow:1", "1")


def test_reject_inconsistent_actions():
    with pytest.raises(InstallRejected):
        SimulatedController().install_rule(rule("bad", 1, [Drop(), Output(2)]))


def test_unresolvable_endpoints():
    with pytest.raises(UnresolvableEndpoints):
        SimulatedController().inject_traffic(TestTrafficSpec("h1", "h7", "icmp", expected_packets=1))


def test_state_round_trip():
    sim = SimulatedController()
    sim.install_rule(SAMPLE)
    sim.inject_fault(QueueUnmapped("openflow:3", 2, 1))
    sim.inject_traffic(tcp80())
    state = json.loads(json.dumps(sim.to_state()))
    back = SimulatedController.from_state(state)
    assert back.to_state() == sim.to_state()
    assert back.fetch_stats("openflow:1", "1") == sim.fetch_stats("openflow:1", "1")


# -- simulator properties -----------------------------------------------------------------

actions = st.sampled_from([[Output(2)], [Output(3)], [Drop()], [SetQueue(0), Output(2)], [SetQueue(1), Output(2)]])
matches = st.fixed_dictionaries({}, optional={
    "dst_port": st.sampled_from([FieldConstraint.port(80), FieldConstraint.port_range(1, 1024),
                                 FieldConstraint.port(22)]),
    "src_ip": st.sampled_from([FieldConstraint.cidr("10.0.0.0", 8), FieldConstraint.cidr("10.0.0.1", 32),
                               FieldConstraint.cidr("10.0.0.2", 32)]),
})
rule_lists = st.lists(st.tuples(st.integers(0, 500), actions, matches), max_size=5)
traffic = st.tuples(st.sampled_from(["tcp", "udp", "icmp"]), st.integers(1, 20))


def _build(rules):
    sim = SimulatedController()
    for i, (prio, acts, m) in enumerate(rules):
        sim.install_rule(rule(f"r{i}", prio, acts, **m))
    return sim


@settings(max_examples=60, deadline=None)
@given(rule_lists, traffic)
def test_determinism(rules, tr):
    spec = TestTrafficSpec("h1", "h3", tr[0], expected_packets=tr[1], dst_port=80)
    a, b = _build(rules), _build(rules)
    a.inject_traffic(spec)
    b.inject_traffic(spec)
    assert a.to_state() == b.to_state()


@settings(max_examples=60, deadline=None)
@given(rule_lists, traffic)
def test_priority_correctness(rules, tr):
    sim = _build(rules)
    spec = TestTrafficSpec("h1", "h3", tr[0], expected_packets=tr[1], dst_port=80)
    sim.inject_traffic(spec)
    counted = [r for r in sim.fetch_installed("openflow:1") if sim.fetch_stats("openflow:1", r.flow_id).packet_count]
    # every packet enters s1 once, so at most one rule on s1 sees it
    assert len(counted) <= 1
    best = next((r for r in sim.fetch_installed("openflow:1") if _matches_probe(sim, r, spec)), None)
    assert counted == ([best] if best else [])
    if best:
        assert sim.fetch_stats("openflow:1", best.flow_id).packet_count == tr[1]


def _matches_probe(sim, r, spec):
    from netintent.controllers.sim import _matches
    return _matches(r, _packet_like(sim, spec))


def _packet_like(sim, spec):
    topo = sim.topology
    pkt = sim._packets(spec, topo.hosts[spec.src_host], topo.hosts[spec.dst_host])[0]
    pkt.fields["in_port"] = topo.hosts[spec.src_host].port
    return pkt


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.sampled_from(["tcp", "udp", "icmp"]))
def test_conservation_on_clean_path(n, proto):
    sim = SimulatedController()
    sim.install_rule(rule("p", 10, [Output(2)], ip_proto=FieldConstraint.enum({"tcp": 6, "udp": 17, "icmp": 1}[proto])))
    rep = sim.inject_traffic(TestTrafficSpec("h1", "h3", proto, expected_packets=n, dst_port=80))
    assert rep.delivered == sim.fetch_stats("openflow:1", "p").packet_count == n


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.text("abc", min_size=1, max_size=3)), max_size=8))
def test_table_order_invariant(entries):
    sim = SimulatedController()
    for prio, fid in entries:
        sim.install_rule(rule(fid, prio, [Output(2)]))
    order = [(r.priority, r.flow_id) for r in sim.fetch_installed("openflow:1")]
    assert order == sorted(order, key=lambda x: (-x[0], x[1]))


# -- REST adapters ----------------------------------------------------------------------------

class FakeResponse:
    def __init__(self, status=200, body=None, headers=None):
        self.status_code = status
        self._body = body
        self.text = json.dumps(body) if body is not None else ""
        self.headers = headers or {}

    def json(self):
        return self._body


class FakeSession:
    def __init__(self, *responses, exc=None):
        self.responses, self.exc, self.calls = list(responses), exc, []

    def request(self, method, url, auth=None, timeout=None, json=None):
        self.calls.append({"method": method, "url": url, "auth": auth, "json": json})
        if self.exc:
            raise self.exc
        return self.responses.pop(0) if self.responses else FakeResponse(200, {})


def test_odl_install_url_golden():
    s = FakeSession(FakeResponse(201))
    OdlRestController(BASE, ("admin", "admin"), session=s).install_rule(SAMPLE)
    call = s.calls[0]
    assert call["method"] == "PUT"
    assert call["url"] == ("http://ctl:8181/restconf/config/opendaylight-inventory:nodes/node/openflow:1"
                           "/flow-node-inventory:table/0/flow/1")
    assert call["auth"] == ("admin", "admin")
    assert call["json"]["flow-node-inventory:flow"][0]["priority"] == 200


def test_onos_install_url_golden():
    onos_rule = parse_flow("onos", (FIX / "sample_onos.json").read_text())
    s = FakeSession(FakeResponse(201, headers={"Location": f"{BASE}/onos/v1/flows/of:0000000000000001/4242"}))
    stored = OnosRestController(BASE, session=s).install_rule(onos_rule)
    assert s.calls[0]["method"] == "POST"
    assert s.calls[0]["url"] == "http://ctl:8181/onos/v1/flows/of:0000000000000001"
    assert stored.flow_id == "4242"
    assert s.calls[0]["json"]["deviceId"] == "of:0000000000000001"


def test_odl_operational_fixture_stats():
    body = json.loads((FIX / "odl_operational_flow.json").read_text())
    s = FakeSession(FakeResponse(200, body), FakeResponse(200, body))
    odl = OdlRestController(BASE, session=s)
    stats = odl.fetch_stats("openflow:1", "1")
    assert (stats.packet_count, stats.byte_count) == (857, 1_250_000)
    assert s.calls[0]["url"].startswith(f"{BASE}/restconf/operational/")
    assert odl.fetch_flow("openflow:1", "1").core() == SAMPLE.core()


def test_odl_table_listing_and_404():
    body = json.loads((FIX / "odl_operational_flow.json").read_text())
    table = {"flow-node-inventory:table": [{"id": 0, "flow": body["flow-node-inventory:flow"]}]}
    s = FakeSession(FakeResponse(200, table), FakeResponse(404, {"errors": {}}))
    odl = OdlRestController(BASE, session=s)
    assert [r.flow_id for r in odl.fetch_installed("openflow:1")] == ["1"]
    assert odl.fetch_installed("openflow:1") == []


def test_odl_delete_and_missing():
    s = FakeSession(FakeResponse(200), FakeResponse(404), FakeResponse(404))
    odl = OdlRestController(BASE, session=s)
    odl.delete_rule("openflow:1", "1")
    assert s.calls[0]["method"] == "DELETE" and "/restconf/config/" in s.calls[0]["url"]
    with pytest.raises(NoSuchFlow):
        odl.delete_rule("openflow:1", "1")
    with pytest.raises(NoSuchFlow):
        odl.fetch_stats("openflow:1", "1")


def test_onos_listing_filters_device_and_skips_unmodelled():
    body = json.loads((FIX / "onos_flows.json").read_text())
    s = FakeSession(FakeResponse(200, body), FakeResponse(200, body))
    onos = OnosRestController(BASE, session=s)
    rules = onos.fetch_installed("of:0000000000000001")
    assert [r.priority for r in rules] == [200]
    assert s.calls[0]["url"] == f"{BASE}/onos/v1/flows"
    assert onos.fetch_installed("of:0000000000000002") == []


def test_onos_stats():
    one = {"flows": [json.loads((FIX / "onos_flows.json").read_text())["flows"][0]]}
    s = FakeSession(FakeResponse(200, one))
    queues = OvsQueueStatsProvider(runner=lambda argv: "port 2 queue 0: bytes=5000, pkts=4\n")
    stats = OnosRestController(BASE, session=s, queue_provider=queues).fetch_stats(
        "of:0000000000000001", "49539595389370623")
    assert (stats.packet_count, stats.byte_count, stats.queue_tx_bytes) == (857, 1_250_000, {0: 5000})
    assert s.calls[0]["url"] == f"{BASE}/onos/v1/flows/of:0000000000000001/49539595389370623"


def test_rest_errors():
    with pytest.raises(ControllerUnreachable):
        OdlRestController(BASE, session=FakeSession(exc=requests.ConnectionError("refused"))).install_rule(SAMPLE)
    with pytest.raises(InstallRejected) as info:
        OdlRestController(BASE, session=FakeSession(FakeResponse(400, {"e": 1}))).install_rule(SAMPLE)
    assert info.value.status == 400
    with pytest.raises(NoSuchDevice):
        OdlRestController(BASE, session=FakeSession(FakeResponse(404))).install_rule(SAMPLE)
    with pytest.raises(ControllerUnreachable):
        OnosRestController(BASE, session=FakeSession(FakeResponse(500, {}))).fetch_installed("of:1")


def test_queue_stats_parser():
    text = """OFPST_QUEUE reply (OF1.3) (xid=0x2): 3 queues
  port 2 queue 0: bytes=1460, pkts=1, errors=0, duration=10.5s
  port 2 queue 1: bytes=0, pkts=0, errors=0, duration=10.5s
  port LOCAL queue 0: bytes=9, pkts=1, errors=0
"""
    assert parse_queue_stats(text) == {2: {0: 1460, 1: 0}}
    seen = []
    OvsQueueStatsProvider(runner=lambda argv: seen.append(argv) or "")("openflow:3")
    assert seen[0][-1] == "s3"
