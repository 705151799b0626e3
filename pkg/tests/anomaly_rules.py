"""Nine-rule anomaly set used across conflict, activation and benchmark tests.

R8 is the only pure L2 rule; every IP rule also pins eth_type 2048 so that
it is a legal OpenFlow match.
"""

from netintent.flow_model import ActionSet, Drop, FieldConstraint as F, FlowRule, MatchSpace, Output

DEVICE = "openflow:1"
FORWARD = ActionSet.of(Output(2))
DROP = ActionSet.of(Drop())


def _ip_rule(n, priority, src, dst, action, dport=None):
    return FlowRule(
        flow_id=f"R{n}", device_id=DEVICE, priority=priority,
        match=MatchSpace(
            eth_type=F.exact(2048), ip_proto=F.enum(6),
            src_ip=F.cidr(src) if src else None, dst_ip=F.cidr(dst) if dst else None,
            dst_port=dport,
        ),
        actions=action,
    )


RULES = {
    "R1": _ip_rule(1, 61, "192.168.10.0/24", "172.16.1.100", FORWARD),
    "R2": _ip_rule(2, 60, "192.168.10.25", "172.16.1.100", FORWARD, F.port(443)),
    "R3": _ip_rule(3, 62, "192.168.10.25", "172.16.1.0/24", FORWARD),
    "R4": _ip_rule(4, 63, "192.168.10.0/24", "172.16.1.100", DROP),
    "R5": _ip_rule(5, 64, "192.168.10.25", "172.16.1.100", DROP),
    "R6": _ip_rule(6, 61, "192.168.0.0/16", "172.16.1.100", DROP),
    "R7": _ip_rule(7, 65, "192.168.10.25", "172.16.1.0/24", DROP, F.port_range(4000, 4010)),
    "R8": FlowRule(
        flow_id="R8", device_id=DEVICE, priority=67,
        match=MatchSpace(src_mac=F.mac("aa:bb:cc:dd:ee:01"), dst_mac=F.mac("ff:ee:dd:cc:bb:aa")),
        actions=FORWARD,
    ),
    "R9": _ip_rule(9, 68, None, None, DROP, F.port(443)),
}

# The five labelled pairs whose printed values agree with their labels.
GOLDEN_PAIRS = [
    ("R2", "R1", "Redundancy"),
    ("R5", "R1", "Generalization"),
    ("R6", "R7", "Overlap"),
    ("R4", "R8", "Imbrication"),
    ("R4", "R1", "Shadowing"),
]
