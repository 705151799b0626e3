from netintent.conflict.engine import (
    L2_FIELDS,
    L3_FIELDS,
    ConflictTaxonomy,
    ConflictVerdict,
    OverlapRelation,
    OverlapSemantics,
    actions_contradict,
    classify_taxonomy,
    combine_relations,
    detect_conflict,
    field_overlap,
    field_relations,
    match_relation,
    same_action,
)
from netintent.conflict.oracle import UniverseSpec, brute_force_relation, universe_for

__all__ = [
    "L2_FIELDS", "L3_FIELDS", "ConflictTaxonomy", "ConflictVerdict", "OverlapRelation",
    "OverlapSemantics", "actions_contradict", "classify_taxonomy", "combine_relations",
    "detect_conflict", "field_overlap", "field_relations", "match_relation", "same_action",
    "UniverseSpec", "brute_force_relation", "universe_for",
]
