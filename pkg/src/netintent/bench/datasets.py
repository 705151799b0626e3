"""Benchmark case files: loading, validation and the stable pool/test split."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from netintent.conflict import ConflictTaxonomy
from netintent.errors import SchemaError
from netintent.flow_model import ControllerDialect


class CaseFormat(str, Enum):
    ODL = "Odl"
    ONOS = "Onos"
    FORMAL_SPEC = "FormalSpec"
    NFV_CONFIG = "NfvConfig"

    @property
    def dialect(self) -> Optional[ControllerDialect]:
        return {CaseFormat.ODL: ControllerDialect.ODL, CaseFormat.ONOS: ControllerDialect.ONOS}.get(self)


class DatasetKind(str, Enum):
    INTENT2FLOW_ODL = "intent2flow-odl"
    INTENT2FLOW_ONOS = "intent2flow-onos"
    FORMAL_SPEC = "formal-spec"
    NFV_CONFIG = "nfv-config"
    FLOWCONFLICT_ODL = "flowconflict-odl"
    FLOWCONFLICT_ONOS = "flowconflict-onos"

    @property
    def is_conflict(self) -> bool:
        return self.value.startswith("flowconflict")

    @property
    def case_format(self) -> CaseFormat:
        return _FORMATS[self]

    @property
    def bundled_name(self) -> str:
        return self.value.replace("-", "_") + ".json"


_FORMATS = {
    DatasetKind.INTENT2FLOW_ODL: CaseFormat.ODL,
    DatasetKind.INTENT2FLOW_ONOS: CaseFormat.ONOS,
    DatasetKind.FORMAL_SPEC: CaseFormat.FORMAL_SPEC,
    DatasetKind.NFV_CONFIG: CaseFormat.NFV_CONFIG,
    DatasetKind.FLOWCONFLICT_ODL: CaseFormat.ODL,
    DatasetKind.FLOWCONFLICT_ONOS: CaseFormat.ONOS,
}


@dataclass(frozen=True)
class TranslationCase:
    id: str
    intent: str
    expected: Any
    fmt: CaseFormat


@dataclass(frozen=True)
class ConflictCase:
    """A labelled rule pair.

    ``taxonomy`` annotates how the matches relate and may be present on a
    negative pair (a redundant rule pair overlaps without contradicting).
    """

    id: str
    flow1: Any
    flow2: Any
    label: bool
    taxonomy: Optional[ConflictTaxonomy]
    dialect: ControllerDialect
    device_id: Optional[str] = None


# Published datasets disagree on key names; first hit wins.
_ID_KEYS = ("id", "case_id", "uid")
_INTENT_KEYS = ("intent", "input", "nl_intent", "instruction", "query")
_EXPECTED_KEYS = ("expected", "output", "flow", "json", "config", "answer")
_FLOW1_KEYS = ("flow1", "rule1", "flow_1", "first")
_FLOW2_KEYS = ("flow2", "rule2", "flow_2", "second")
_LABEL_KEYS = ("label", "conflict", "conflict_status", "is_conflict")
_TAXONOMY_KEYS = ("taxonomy", "conflict_type", "type")


def _pick(obj: dict, keys: Sequence[str], case_id: str, what: str, required: bool = True) -> Any:
    for k in keys:
        if k in obj:
            return obj[k]
    if required:
        raise SchemaError(case_id, f"missing {what} (tried {', '.join(keys)})")
    return None


def _json_value(value: Any, case_id: str, what: str) -> Any:
    if isinstance(value, str):
        try:
            return json.loads(value)
        except json.JSONDecodeError as exc:
            raise SchemaError(case_id, f"{what} is not valid JSON: {exc.msg}") from exc
    return value


def _label(raw: Any, case_id: str) -> bool:
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, int) and raw in (0, 1):
        return bool(raw)
    if isinstance(raw, str) and raw.strip().lower() in ("0", "1", "true", "false", "yes", "no"):
        return raw.strip().lower() in ("1", "true", "yes")
    raise SchemaError(case_id, f"label {raw!r} is not boolean")


def _taxonomy(raw: Any, case_id: str) -> Optional[ConflictTaxonomy]:
    if raw in (None, "", "none", "None"):
        return None
    for t in ConflictTaxonomy:
        if str(raw).strip().lower() == t.value.lower():
            return t
    raise SchemaError(case_id, f"unknown taxonomy {raw!r}")


def _translation_case(obj: dict, idx: int, fmt: CaseFormat) -> TranslationCase:
    cid = str(_pick(obj, _ID_KEYS, f"#{idx}", "id"))
    intent = _pick(obj, _INTENT_KEYS, cid, "intent")
    if not isinstance(intent, str) or not intent.strip():
        raise SchemaError(cid, "intent must be a non-empty string")
    expected = _json_value(_pick(obj, _EXPECTED_KEYS, cid, "expected output"), cid, "expected")
    return TranslationCase(cid, intent, expected, fmt)


def _conflict_case(obj: dict, idx: int, dialect: ControllerDialect) -> ConflictCase:
    cid = str(_pick(obj, _ID_KEYS, f"#{idx}", "id"))
    f1 = _json_value(_pick(obj, _FLOW1_KEYS, cid, "flow1"), cid, "flow1")
    f2 = _json_value(_pick(obj, _FLOW2_KEYS, cid, "flow2"), cid, "flow2")
    for name, f in (("flow1", f1), ("flow2", f2)):
        if not isinstance(f, dict):
            raise SchemaError(cid, f"{name} must be a JSON object")
    return ConflictCase(
        cid, f1, f2, _label(_pick(obj, _LABEL_KEYS, cid, "label"), cid),
        _taxonomy(_pick(obj, _TAXONOMY_KEYS, cid, "taxonomy", required=False), cid),
        dialect, obj.get("device_id"),
    )


def load_dataset(kind: Union[DatasetKind, str], path: Union[str, Path]) -> list:
    """Parse a JSON array of case objects; raises ``OSError`` or ``SchemaError``."""
    kind = DatasetKind(kind)
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(None, f"{path}: not JSON ({exc.msg})") from exc
    if not isinstance(doc, list):
        raise SchemaError(None, f"{path}: expected a JSON array of cases")
    cases = []
    seen = set()
    for idx, obj in enumerate(doc):
        if not isinstance(obj, dict):
            raise SchemaError(f"#{idx}", "case is not an object")
        if kind.is_conflict:
            case = _conflict_case(obj, idx, kind.case_format.dialect)
        else:
            case = _translation_case(obj, idx, kind.case_format)
        if case.id in seen:
            raise SchemaError(case.id, "duplicate id")
        seen.add(case.id)
        cases.append(case)
    return cases


def _stable_key(case_id: str) -> str:
    return hashlib.sha256(case_id.encode("utf-8")).hexdigest()


def split_cases(cases: Sequence, pool_fraction: float = 0.5) -> tuple[list, list]:
    """Deterministic ``(example_pool, test)`` partition ordered by a hash of each id."""
    if not 0 <= pool_fraction <= 1:
        raise ValueError("pool_fraction must lie in [0, 1]")
    ordered = sorted(cases, key=lambda c: _stable_key(c.id))
    cut = math.ceil(len(ordered) * pool_fraction)
    return ordered[:cut], ordered[cut:]


def bundled_path(kind: Union[DatasetKind, str]) -> Path:
    kind = DatasetKind(kind)
    return Path(str(resources.files("netintent.bench") / "data" / kind.bundled_name))


def load_bundled(kind: Union[DatasetKind, str]) -> list:
    return load_dataset(kind, bundled_path(kind))


def dataset_hash(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
