"""Brute-force reference for match-space relations.

Evaluates both matches on a finite grid of sample packets and reads the
relation off set differences.  For each dimension the grid holds the domain
bounds plus every constraint edge and its two neighbours, which is enough to
witness any difference between two intervals.  Membership is computed from
the raw constraint payloads rather than from ``FieldConstraint.interval`` so
the oracle shares no arithmetic with the engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from netintent.conflict.engine import OverlapRelation, OverlapSemantics
from netintent.errors import UniverseTooLarge
from netintent.flow_model.types import DIMENSIONS, FieldConstraint, FieldKind, MatchSpace

MAX_CELLS = 10_000_000
MAX_SAMPLES_PER_DIM = 64


@dataclass(frozen=True)
class UniverseSpec:
    samples: dict  # dimension -> sorted np.ndarray of uint64 sample values

    @property
    def cells(self) -> int:
        n = 1
        for arr in self.samples.values():
            n *= len(arr)
        return n


def _edges(c: FieldConstraint) -> list[int]:
    k, v = c.kind, c.value
    if k is FieldKind.IP_CIDR:
        net, plen = v
        lo, hi = net, net | ((1 << (32 - plen)) - 1)
    elif k is FieldKind.PORT_RANGE:
        lo, hi = v
    else:
        lo = hi = v
    return [lo, hi, lo - 1, hi + 1]


def universe_for(a: MatchSpace, b: MatchSpace, max_cells: int = MAX_CELLS) -> UniverseSpec:
    samples = {}
    for name, (domain, _) in DIMENSIONS.items():
        ca, cb = a.get(name), b.get(name)
        if ca is None and cb is None:
            samples[name] = np.array([domain[0]], dtype=np.uint64)
            continue
        vals = {domain[0], domain[1]}
        for c in (ca, cb):
            if c is not None:
                vals.update(_edges(c))
        vals = sorted(x for x in vals if domain[0] <= x <= domain[1])
        if len(vals) > MAX_SAMPLES_PER_DIM:
            raise UniverseTooLarge(f"{name} needs {len(vals)} samples (limit {MAX_SAMPLES_PER_DIM})")
        samples[name] = np.array(vals, dtype=np.uint64)
    spec = UniverseSpec(samples)
    if spec.cells > max_cells:
        raise UniverseTooLarge(f"grid of {spec.cells} cells exceeds {max_cells}")
    return spec


def _member(c, values: np.ndarray) -> np.ndarray:
    if c is None:
        return np.ones(values.shape, dtype=bool)
    k, v = c.kind, c.value
    if k is FieldKind.IP_CIDR:
        net, plen = v
        shift = np.uint64(32 - plen)
        return (values >> shift) == (np.uint64(net) >> shift)
    if k is FieldKind.PORT_RANGE:
        return (values >= np.uint64(v[0])) & (values <= np.uint64(v[1]))
    return values == np.uint64(v)


def _grid(match: MatchSpace, spec: UniverseSpec) -> np.ndarray:
    names = list(DIMENSIONS)
    out = np.ones((1,) * len(names), dtype=bool)
    for axis, name in enumerate(names):
        shape = [1] * len(names)
        shape[axis] = -1
        out = out & _member(match.get(name), spec.samples[name]).reshape(shape)
    return out


def brute_force_relation(a: MatchSpace, b: MatchSpace,
                         semantics: OverlapSemantics = OverlapSemantics.WILDCARD,
                         max_cells: int = MAX_CELLS) -> OverlapRelation:
    if semantics is OverlapSemantics.STRICT:
        for name in DIMENSIONS:
            if (a.get(name) is None) != (b.get(name) is None):
                return OverlapRelation.DISJOINT
    spec = universe_for(a, b, max_cells)
    ga, gb = _grid(a, spec), _grid(b, spec)
    if not np.any(ga & gb):
        return OverlapRelation.DISJOINT
    a_extra = bool(np.any(ga & ~gb))
    b_extra = bool(np.any(gb & ~ga))
    if not a_extra and not b_extra:
        return OverlapRelation.EQUAL
    if not a_extra:
        return OverlapRelation.FIRST_INSIDE_SECOND
    if not b_extra:
        return OverlapRelation.SECOND_INSIDE_FIRST
    return OverlapRelation.CORRELATED
