"""Intent categories and the specificity measure used for conflict resolution."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from netintent.errors import Unclassifiable
from netintent.flow_model.types import IP_DIMENSIONS, FlowRule


class IntentType(str, Enum):
    FORWARDING = "Forwarding"
    SECURITY = "Security"
    QOS = "Qos"

    @classmethod
    def parse(cls, value) -> "IntentType":
        if isinstance(value, IntentType):
            return value
        text = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == text:
                return member
        raise ValueError(f"unknown intent type {value!r}")


@dataclass(frozen=True)
class RuleMetadata:
    intent_type: IntentType
    specificity: float

    def __post_init__(self):
        if self.specificity < 0:
            raise ValueError("specificity must be non-negative")


def classify_actions(rule: FlowRule) -> IntentType:
    acts = rule.actions
    if acts.drops:
        return IntentType.SECURITY
    if acts.queue_ids:
        return IntentType.QOS
    if acts.forwards:
        return IntentType.FORWARDING
    raise Unclassifiable(f"flow {rule.flow_id!r} has no drop, queue or output action")


def specificity(rule: FlowRule) -> float:
    """Present match fields, plus each IP prefix length as a fraction of 32."""
    present = rule.match.present()
    score = float(len(present))
    for name in IP_DIMENSIONS:
        if name in present:
            score += present[name].prefix_len / 32
    return score


def infer_metadata(rule: FlowRule) -> RuleMetadata:
    return RuleMetadata(classify_actions(rule), specificity(rule))
