"""Pairwise match-space algebra, conflict detection and taxonomy classification."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from netintent.errors import DomainMismatch
from netintent.flow_model.types import (
    DIMENSIONS,
    ActionSet,
    FieldConstraint,
    FieldKind,
    FlowRule,
    MatchSpace,
    kinds_compatible,
)


class OverlapRelation(str, Enum):
    DISJOINT = "Disjoint"
    EQUAL = "Equal"
    FIRST_INSIDE_SECOND = "FirstInsideSecond"
    SECOND_INSIDE_FIRST = "SecondInsideFirst"
    CORRELATED = "Correlated"

    def swapped(self) -> "OverlapRelation":
        if self is OverlapRelation.FIRST_INSIDE_SECOND:
            return OverlapRelation.SECOND_INSIDE_FIRST
        if self is OverlapRelation.SECOND_INSIDE_FIRST:
            return OverlapRelation.FIRST_INSIDE_SECOND
        return self


class OverlapSemantics(str, Enum):
    WILDCARD = "wildcard"   # a missing field matches everything
    STRICT = "strict"       # a field missing on one side only means no overlap


class ConflictTaxonomy(str, Enum):
    REDUNDANCY = "Redundancy"
    SHADOWING = "Shadowing"
    GENERALIZATION = "Generalization"
    CORRELATION = "Correlation"
    OVERLAP = "Overlap"
    IMBRICATION = "Imbrication"


@dataclass(frozen=True)
class ConflictVerdict:
    conflict_status: bool
    conflict_explanation: str
    relation: OverlapRelation
    taxonomy: Optional[ConflictTaxonomy] = None

    def __post_init__(self):
        if not self.conflict_status and (self.taxonomy is not None or self.conflict_explanation):
            raise ValueError("a non-conflict verdict carries no taxonomy and an empty explanation")

    def to_json(self) -> dict:
        return {
            "conflict_status": int(self.conflict_status),
            "conflict_explanation": self.conflict_explanation,
            "taxonomy": self.taxonomy.value if self.taxonomy else None,
            "relation": self.relation.value,
        }


def _default_domain(kind: FieldKind) -> tuple[int, int]:
    if kind is FieldKind.IP_CIDR:
        return DIMENSIONS["src_ip"][0]
    if kind in (FieldKind.PORT_SINGLE, FieldKind.PORT_RANGE):
        return DIMENSIONS["src_port"][0]
    if kind is FieldKind.MAC_EXACT:
        return DIMENSIONS["src_mac"][0]
    return 0, (1 << 32) - 1


def _interval_relation(a: tuple[int, int], b: tuple[int, int]) -> OverlapRelation:
    (alo, ahi), (blo, bhi) = a, b
    if ahi < blo or bhi < alo:
        return OverlapRelation.DISJOINT
    if a == b:
        return OverlapRelation.EQUAL
    if blo <= alo and ahi <= bhi:
        return OverlapRelation.FIRST_INSIDE_SECOND
    if alo <= blo and bhi <= ahi:
        return OverlapRelation.SECOND_INSIDE_FIRST
    return OverlapRelation.CORRELATED


def field_overlap(a: Optional[FieldConstraint], b: Optional[FieldConstraint],
                  semantics: OverlapSemantics = OverlapSemantics.WILDCARD,
                  dimension: Optional[str] = None) -> OverlapRelation:
    """Set relation between two constraints on one match dimension."""
    if a is not None and a.is_wildcard:
        a = None
    if b is not None and b.is_wildcard:
        b = None
    if a is not None and b is not None and not kinds_compatible(a.kind, b.kind):
        raise DomainMismatch(f"cannot compare {a.kind.value} with {b.kind.value}")
    if a is None and b is None:
        return OverlapRelation.EQUAL
    if semantics is OverlapSemantics.STRICT and (a is None or b is None):
        return OverlapRelation.DISJOINT
    present = a if a is not None else b
    domain = DIMENSIONS[dimension][0] if dimension else _default_domain(present.kind)
    ia = a.interval(domain) if a is not None else domain
    ib = b.interval(domain) if b is not None else domain
    return _interval_relation(ia, ib)


def combine_relations(relations) -> OverlapRelation:
    rels = set(relations)
    if OverlapRelation.DISJOINT in rels:
        return OverlapRelation.DISJOINT
    rels.discard(OverlapRelation.EQUAL)
    if not rels:
        return OverlapRelation.EQUAL
    if len(rels) == 1:
        (only,) = rels
        return only
    return OverlapRelation.CORRELATED


def field_relations(a: MatchSpace, b: MatchSpace,
                    semantics: OverlapSemantics = OverlapSemantics.WILDCARD) -> dict[str, OverlapRelation]:
    return {name: field_overlap(a.get(name), b.get(name), semantics, name) for name in DIMENSIONS}


def match_relation(a: MatchSpace, b: MatchSpace,
                   semantics: OverlapSemantics = OverlapSemantics.WILDCARD) -> OverlapRelation:
    return combine_relations(field_relations(a, b, semantics).values())


def actions_contradict(a: ActionSet, b: ActionSet) -> bool:
    if (a.drops and b.forwards) or (b.drops and a.forwards):
        return True
    if a.forwards and b.forwards and a.output_ports != b.output_ports:
        return True
    if a.queue_ids and b.queue_ids and a.queue_ids != b.queue_ids:
        return True
    return False


def same_action(a: ActionSet, b: ActionSet) -> bool:
    return a.primitives == b.primitives


# Cross-layer classification.  eth_type sits with the MAC fields.
L2_FIELDS = frozenset({"src_mac", "dst_mac", "eth_type"})
L3_FIELDS = frozenset({"src_ip", "dst_ip", "ip_proto", "src_port", "dst_port"})
LAYERS = (L2_FIELDS, L3_FIELDS)


def _crosses_layers(a: MatchSpace, b: MatchSpace) -> bool:
    """Each rule constrains a protocol layer on fields the other leaves open."""
    only_a = set(a.present()) - set(b.present())
    only_b = set(b.present()) - set(a.present())
    for la in LAYERS:
        for lb in LAYERS:
            if la is not lb and only_a & la and only_b & lb:
                return True
    return False


def classify_taxonomy(r1: FlowRule, r2: FlowRule) -> Optional[ConflictTaxonomy]:
    """Six-class anomaly label for a rule pair, or ``None`` when disjoint.

    Checks run in a fixed order so every pair gets exactly one label.  The
    cross-layer test precedes Correlation because cross-layer pairs are
    always correlated.  Containment between equal-priority rules with
    different actions counts as Shadowing: which rule wins is undefined.
    """
    rel = match_relation(r1.match, r2.match, OverlapSemantics.WILDCARD)
    if rel is OverlapRelation.DISJOINT:
        return None
    same = same_action(r1.actions, r2.actions)
    contained = rel in (OverlapRelation.EQUAL, OverlapRelation.FIRST_INSIDE_SECOND,
                        OverlapRelation.SECOND_INSIDE_FIRST)
    if same and contained:
        return ConflictTaxonomy.REDUNDANCY
    if not same and contained:
        if r1.priority == r2.priority:
            return ConflictTaxonomy.SHADOWING
        hi, lo = (r1, r2) if r1.priority > r2.priority else (r2, r1)
        hi_rel = rel if hi is r1 else rel.swapped()
        if hi_rel in (OverlapRelation.EQUAL, OverlapRelation.SECOND_INSIDE_FIRST):
            return ConflictTaxonomy.SHADOWING
        return ConflictTaxonomy.GENERALIZATION
    if not same and _crosses_layers(r1.match, r2.match):
        return ConflictTaxonomy.IMBRICATION
    if not same:
        return ConflictTaxonomy.CORRELATION
    return ConflictTaxonomy.OVERLAP


def _explain(r1: FlowRule, r2: FlowRule, rel: OverlapRelation,
             fields: dict[str, OverlapRelation]) -> str:
    overlapping = [n for n, r in fields.items()
                   if r is not OverlapRelation.DISJOINT
                   and (r1.match.get(n) is not None or r2.match.get(n) is not None)]
    reasons = []
    a, b = r1.actions, r2.actions
    if (a.drops and b.forwards) or (b.drops and a.forwards):
        reasons.append("drop versus forward")
    if a.forwards and b.forwards and a.output_ports != b.output_ports:
        reasons.append(f"output ports {sorted(a.output_ports)} versus {sorted(b.output_ports)}")
    if a.queue_ids and b.queue_ids and a.queue_ids != b.queue_ids:
        reasons.append(f"queues {sorted(a.queue_ids)} versus {sorted(b.queue_ids)}")
    return (f"match criteria overlap ({rel.value}) on {', '.join(overlapping) or 'all fields'}; "
            f"contradictory actions: {'; '.join(reasons)} ({a} vs {b})")


def detect_conflict(r1: FlowRule, r2: FlowRule,
                    semantics: OverlapSemantics = OverlapSemantics.STRICT) -> ConflictVerdict:
    """Conflict iff matches overlap and actions contradict.  Priority is never consulted."""
    fields = field_relations(r1.match, r2.match, semantics)
    rel = combine_relations(fields.values())
    if rel is OverlapRelation.DISJOINT or not actions_contradict(r1.actions, r2.actions):
        return ConflictVerdict(False, "", rel)
    return ConflictVerdict(True, _explain(r1, r2, rel, fields), rel, classify_taxonomy(r1, r2))
