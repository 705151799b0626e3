"""Acceptance checks, one per criterion.

Each check prints ``criterion N: PASS|FAIL ...`` and the test asserts it.
Run ``python3 tests/test_acceptance.py`` for just the summary lines.
"""

import json
import random
import sys
import tempfile
import time
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from anomaly_rules import GOLDEN_PAIRS, RULES  # noqa: E402
from test_conflict import random_pair  # noqa: E402

from netintent.activation import Decision, OracleEngine, activate, resolve_conflict  # noqa: E402
from netintent.assurance import (  # noqa: E402
    AssuranceConfig, DeltaStats, EventKind, SimTrafficDriver, assurance_loop, verify_intent,
)
from netintent.bench import (  # noqa: E402
    BenchConfig, ConfusionCounts, DatasetKind, echo_endpoint, load_bundled, run_benchmark,
)
from netintent.conflict import OverlapSemantics, brute_force_relation, classify_taxonomy, match_relation  # noqa: E402
from netintent.controllers import DeleteRule, ShadowRule, SimulatedController  # noqa: E402
from netintent.flow_model import (  # noqa: E402
    ActionSet, FieldConstraint, FlowRule, MatchSpace, Output, canonicalize_json, flow_to_dict, parse_flow,
    semantic_equal,
)
from netintent.llm import ContextExample, LlmEndpoint, MockBackend  # noqa: E402
from netintent.metadata import IntentType, RuleMetadata, infer_metadata  # noqa: E402
from netintent.store import IntentRecord, IntentStore, RecordStatus  # noqa: E402
from netintent.traffic import TestTrafficSpec  # noqa: E402
from netintent.translation import FailureReport, TranslationConfig, translate_intent  # noqa: E402

FIX = Path(__file__).parent / "fixtures"
ODL_TEXT = (FIX / "sample_odl.json").read_text()
ONOS_TEXT = (FIX / "sample_onos.json").read_text()


# collected for the pytest terminal summary (see conftest.py)
SUMMARY: list = []


def _say(text):
    SUMMARY.append(text)
    if __name__ == "__main__":
        print(text, flush=True)


def _line(n, ok, detail):
    _say(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


# -- 1: taxonomy of the anomaly rule pairs ------------------------------------

def check_1():
    start = time.perf_counter()
    got = [(a, b, classify_taxonomy(RULES[a], RULES[b])) for a, b, _ in GOLDEN_PAIRS]
    hits = sum(t is not None and t.value == want for (_, _, t), (_, _, want) in zip(got, GOLDEN_PAIRS))
    elapsed = time.perf_counter() - start
    ok = hits == len(GOLDEN_PAIRS) == 5 and elapsed < 1.0
    return _line(1, ok, f"{hits}/5 labels reproduced in {elapsed * 1e3:.1f} ms (limit 1 s)")


# -- 2: interval algebra vs brute force ---------------------------------------

def check_2():
    rng = random.Random(1000)
    start = time.perf_counter()
    disagreements = 0
    for _ in range(1000):
        a, b = random_pair(rng)
        if match_relation(a, b, OverlapSemantics.WILDCARD) is not brute_force_relation(a, b):
            disagreements += 1
    elapsed = time.perf_counter() - start
    ok = disagreements == 0 and elapsed < 60
    return _line(2, ok, f"{disagreements} disagreements over 1000 pairs in {elapsed:.2f} s (limit 60 s)")


# -- 3: confusion metrics ------------------------------------------------------

def check_3():
    rows = [((8, 3, 49, 2), {"accuracy": 0.92, "precision": 0.73, "recall": 0.80, "f1": 0.76, "fpr": 0.06}),
            ((10, 0, 52, 0), {"accuracy": 1.0, "precision": 1.0, "recall": 1.0, "f1": 1.0, "fpr": 0.0})]
    bad = [(counts, ConfusionCounts(*counts).rounded()) for counts, want in rows
           if ConfusionCounts(*counts).rounded() != want]
    return _line(3, not bad, "both reference rows exact at 2 decimals" if not bad else f"mismatch {bad}")


# -- 4: dialect round trip -----------------------------------------------------

def _reordered(value):
    if isinstance(value, dict):
        return {k: _reordered(value[k]) for k in reversed(list(value))}
    if isinstance(value, list):
        return [_reordered(v) for v in value]
    return value


def check_4():
    problems = []
    for dialect, text in (("odl", ODL_TEXT), ("onos", ONOS_TEXT)):
        rule = parse_flow(dialect, text, device_id="openflow:1" if dialect == "odl" else None)
        again = parse_flow(dialect, {("flow-node-inventory:flow" if dialect == "odl" else "flows"):
                                     [flow_to_dict(dialect, rule)]}, device_id=rule.device_id)
        if canonicalize_json(flow_to_dict(dialect, again)) != canonicalize_json(flow_to_dict(dialect, rule)) \
                or again.core() != rule.core():
            problems.append(f"{dialect} round trip")
    doc = json.loads(ODL_TEXT)
    if not semantic_equal(doc, _reordered(doc)):
        problems.append("reordered variant rejected")
    mutated = json.loads(ODL_TEXT)
    for action in mutated["flow-node-inventory:flow"][0]["instructions"]["instruction"][0]["apply-actions"]["action"]:
        if "set-queue-action" in action:
            action["set-queue-action"]["queue-id"] = 7
    if semantic_equal(doc, mutated):
        problems.append("queue-id mutation accepted")
    return _line(4, not problems, "round_trip=ok reorder_equal=True queue_mutation_equal=False"
                 if not problems else "; ".join(problems))


# -- 5: translation state machine ---------------------------------------------

INTENT = "Forward TCP traffic on port 80 destined for 10.0.0.3 via interface 2, queue 0."


def check_5():
    pool = [ContextExample(f"forward tcp port {80 + i} to host {i}", json.loads(ODL_TEXT)) for i in range(6)]
    ep = LlmEndpoint("m1", backend=MockBackend(["not json", '{"flow-node-inventory:flow": [{}]}', ODL_TEXT]))
    out = translate_intent(INTENT, TranslationConfig([ep], "odl", example_pool=pool))
    walk = [a.context_count for a in out.trace]
    ok_success = out.ok and len(out.trace) == 3 and walk == [0, 1, 3]
    roster = [LlmEndpoint(n, rank=r, backend=MockBackend(["nope"], repeat_last=True))
              for r, n in enumerate(("a", "b", "c"), 1)]
    sched = (0, 1, 3, 5)
    fail = translate_intent(INTENT, TranslationConfig(roster, "odl", context_schedule=sched, example_pool=pool))
    ok_fail = isinstance(fail.result, FailureReport) and len(fail.trace) == len(roster) * len(sched)
    return _line(5, ok_success and ok_fail,
                 f"success on attempt {len(out.trace)} with contexts {walk}; all-invalid gave "
                 f"{type(fail.result).__name__} after {len(fail.trace)} attempts (expected {len(roster) * len(sched)})")


# -- 6: resolution policy ------------------------------------------------------

BASE = parse_flow("odl", ODL_TEXT, device_id="openflow:1")
FLIP = {Decision.KEEP_NEW: Decision.KEEP_EXISTING, Decision.KEEP_EXISTING: Decision.KEEP_NEW,
        Decision.MANUAL: Decision.MANUAL}


def _pol(new, old, pn, po):
    return resolve_conflict((BASE.replace(priority=pn), RuleMetadata(IntentType(new[0]), new[1])),
                            (BASE.replace(priority=po), RuleMetadata(IntentType(old[0]), old[1]))).decision


def check_6():
    golden = [
        (("Security", 1.0), ("Qos", 5.0), 1, 500, Decision.KEEP_NEW),
        (("Forwarding", 5.0), ("Forwarding", 3.0), 1, 9, Decision.KEEP_NEW),
        (("Qos", 4.0), ("Qos", 4.0), 300, 200, Decision.KEEP_NEW),
        (("Qos", 4.0), ("Qos", 4.0), 200, 200, Decision.MANUAL),
    ]
    wrong = [g for g in golden if _pol(*g[:4]) is not g[4]]
    failures = []

    @settings(max_examples=300, database=None)
    @given(st.sampled_from(list(IntentType)), st.sampled_from(list(IntentType)),
           st.sampled_from([0.0, 1.0, 1.75, 3.0, 5.0]), st.sampled_from([0.0, 1.0, 1.75, 3.0, 5.0]),
           st.integers(0, 3), st.integers(0, 3))
    def prop(ta, tb, sa, sb, pa, pb):
        d1 = _pol((ta, sa), (tb, sb), pa, pb)
        d2 = _pol((tb, sb), (ta, sa), pb, pa)
        assert isinstance(d1, Decision) and d2 is FLIP[d1]

    try:
        prop()
    except AssertionError as exc:
        failures.append(str(exc))
    ok = not wrong and not failures
    return _line(6, ok, "4 golden decisions; totality and antisymmetry over 300 generated pairs"
                 if ok else f"golden mismatches {wrong}; property {failures[:1]}")


# -- 7: assurance arithmetic ---------------------------------------------------

def _qos_record():
    meta = infer_metadata(BASE)
    return IntentRecord("qos", meta.intent_type, {}, BASE, "odl", RecordStatus.INSTALLED, meta.specificity)


def check_7():
    spec = TestTrafficSpec("h1", "h3", "tcp", expected_bytes=1_250_000, expected_rate_bps=1e6, duration_s=10,
                           dst_port=80)
    cfg = AssuranceConfig(alpha=0.98, rate_tolerance=1e5)
    rec = _qos_record()
    threshold = 0.98 * 1_250_000           # 1,225,000 bytes

    def ok(q, window):
        return verify_intent(rec, DeltaStats(0, 0, q, 0.0, window), spec, cfg).verified

    cases = [
        ("worked example", ok(1_240_000, 10.0), True),
        ("volume at alpha*B_t", ok(int(threshold), 1_225_000 * 8 / 1e6), True),
        ("volume at alpha*B_t - 1", ok(int(threshold) - 1, 1_225_000 * 8 / 1e6), False),
        ("volume at alpha*B_t + 1", ok(int(threshold) + 1, (threshold + 1) * 8 / 1e6), True),
        ("rate at R_t + eps", ok(1_375_000, 10.0), True),
        ("rate above R_t + eps", ok(1_375_001, 10.0), False),
        ("rate at R_t - eps", ok(1_250_000, 1_250_000 * 8 / 9e5), True),
        ("rate below R_t - eps", ok(1_250_000, 1_250_000 * 8 / 9e5 + 1e-6), False),
    ]
    measured = verify_intent(rec, DeltaStats(0, 0, 1_240_000, 0.0, 10.0), spec, cfg).metrics["rate_measured_bps"]
    wrong = [name for name, got, want in cases if got is not want]
    good = not wrong and measured == 992_000
    return _line(7, good, f"{len(cases) - len(wrong)}/{len(cases)} boundary cases; worked example R_measured "
                 f"= {measured:,.0f} bit/s" + (f"; wrong: {wrong}" if wrong else ""))


# -- 8: closed loop on the simulator ------------------------------------------

FWD = FlowRule("f1", "openflow:1", 100,
               MatchSpace(eth_type=FieldConstraint.exact(2048), dst_ip=FieldConstraint.cidr("10.0.0.3", 32)),
               ActionSet.of(Output(2)))


def _scenario(tmp, name, fault=None, script=(), **cfg):
    sim, store = SimulatedController(), IntentStore(Path(tmp) / f"{name}.jsonl")
    assert activate(FWD, "reach h3", sim, OracleEngine(), store).installed
    if fault is not None:
        sim.inject_fault(fault(sim))
    ep = LlmEndpoint("m", backend=MockBackend(list(script))) if script else None
    events = list(assurance_loop(store, sim, SimTrafficDriver(sim), AssuranceConfig(**cfg), ep))
    return [(e.kind, e.attempt) for e in events], store


def check_8():
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        a, _ = _scenario(tmp, "a")
        b, _ = _scenario(tmp, "b", lambda s: ShadowRule.over(FWD),
                         ['[{"action": "increase_priority", "argument": {"delta": 10}}]'])
        c, _ = _scenario(tmp, "c", lambda s: DeleteRule("openflow:1", "f1"))
        d, store = _scenario(tmp, "d", lambda s: ShadowRule.over(FWD), ['[{"action": "reboot"}]'] * 2,
                             max_attempts=2)
        d_status = store.get("openflow:1", "f1").status
    elapsed = time.perf_counter() - start
    V, F, R, RI, N, E = (EventKind.VERIFIED, EventKind.FAILED, EventKind.REMEDIATED, EventKind.REINSTALLED,
                         EventKind.NO_ACTION, EventKind.ESCALATED)
    results = {
        "a": a == [(V, 1)],
        "b": b == [(F, 1), (R, 1), (V, 2)],
        "c": [k for k, _ in c] == [RI, V],
        "d": [k for k, _ in d] == [F, N, F, E] and d_status is RecordStatus.ESCALATED,
    }
    ok = all(results.values()) and elapsed < 30
    return _line(8, ok, f"scenarios {''.join(k for k, v in results.items() if v) or '-'} of abcd behave; "
                 f"{elapsed:.2f} s (limit 30 s)")


# -- 9: benchmark fixed point --------------------------------------------------

def check_9():
    scores = {}
    for kind in (DatasetKind.INTENT2FLOW_ODL, DatasetKind.INTENT2FLOW_ONOS, DatasetKind.FORMAL_SPEC,
                 DatasetKind.NFV_CONFIG):
        cases = load_bundled(kind)
        report = run_benchmark(BenchConfig("translate", cases, [echo_endpoint(cases)], contexts=(0, 1, 3)))
        scores[kind.value] = min(r.value for r in report.rows)
    conflict = {}
    for kind in (DatasetKind.FLOWCONFLICT_ODL, DatasetKind.FLOWCONFLICT_ONOS):
        rep = run_benchmark(BenchConfig("conflict", load_bundled(kind), engine="oracle"))
        conflict[kind.value] = rep.metric("oracle", 0, "accuracy")
    ok = set(scores.values()) == {1.0} and set(conflict.values()) == {1.0}
    detail = ", ".join(f"{k} {v:.2f}" for k, v in {**scores, **conflict}.items())
    return _line(9, ok, detail)


def note_10():
    _say("criterion 10: NOTE  real-model accuracy and latency tables need GPU-hosted model weights and are "
         "not reproduced here; criteria 1-9 stand in for them.")
    return True


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9]


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_criterion(check):
    assert check()


def test_criterion_10_note():
    assert note_10()


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    note_10()
    sys.exit(0 if all(results) else 1)
