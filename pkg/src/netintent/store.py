"""Append-only JSON Lines journal of activated intents."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from netintent.errors import CorruptRecord, InvalidTransition, StoreError
from netintent.flow_model.codec import flow_from_dict, flow_to_dict
from netintent.flow_model.types import ControllerDialect, FlowRule
from netintent.metadata import IntentType
from netintent.traffic import TestTrafficSpec

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_STORE_PATH = "intent_store.jsonl"


class RecordStatus(str, Enum):
    INSTALLED = "Installed"
    REJECTED = "Rejected"
    SUPERSEDED = "Superseded"
    ESCALATED = "Escalated"


_ALLOWED = {
    RecordStatus.INSTALLED: {RecordStatus.INSTALLED, RecordStatus.SUPERSEDED, RecordStatus.ESCALATED},
    RecordStatus.REJECTED: set(),
    RecordStatus.SUPERSEDED: set(),
    RecordStatus.ESCALATED: set(),
}


@dataclass(frozen=True)
class IntentRecord:
    """One activated intent.

    ``record_id`` identifies a lineage: status changes to the same record
    must follow the transition table, while a new record for the same
    ``(device_id, flow_id)`` simply replaces the old one on replay.
    """

    intent_text: str
    intent_type: IntentType
    flow_json: dict
    rule: FlowRule
    dialect: ControllerDialect
    status: RecordStatus
    specificity: float
    traffic_spec: Optional[TestTrafficSpec] = None
    created_at: float = field(default_factory=time.time)
    updated_at: Optional[float] = None
    record_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "intent_type", IntentType.parse(self.intent_type))
        object.__setattr__(self, "status", RecordStatus(self.status))
        object.__setattr__(self, "dialect", ControllerDialect.parse(self.dialect))
        if self.updated_at is None:
            object.__setattr__(self, "updated_at", self.created_at)

    @property
    def device_id(self) -> str:
        return self.rule.device_id

    @property
    def flow_id(self) -> str:
        return self.rule.flow_id

    @property
    def key(self) -> tuple:
        return (self.device_id, self.flow_id)

    def with_status(self, status: RecordStatus, note: str = "", **changes) -> "IntentRecord":
        status = RecordStatus(status)
        if status not in _ALLOWED[self.status]:
            raise InvalidTransition(f"{self.status.value} -> {status.value} is not allowed")
        return replace(self, status=status, note=note or self.note, updated_at=time.time(), **changes)

    def to_json(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "record_id": self.record_id,
            "intent_text": self.intent_text,
            "intent_type": self.intent_type.value,
            "dialect": self.dialect.value,
            "device_id": self.device_id,
            "flow_id": self.flow_id,
            "specificity": self.specificity,
            "status": self.status.value,
            "flow_json": self.flow_json,
            "rule": flow_to_dict(self.dialect, self.rule),
            "traffic_spec": self.traffic_spec.to_json() if self.traffic_spec else None,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "note": self.note,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IntentRecord":
        if obj.get("v") != SCHEMA_VERSION:
            raise ValueError(f"unsupported record version {obj.get('v')!r}")
        dialect = ControllerDialect.parse(obj["dialect"])
        rule = flow_from_dict(dialect, obj["rule"], device_id=obj["device_id"])
        spec = obj.get("traffic_spec")
        return cls(
            intent_text=obj["intent_text"], intent_type=obj["intent_type"], flow_json=obj["flow_json"],
            rule=rule, dialect=dialect, status=obj["status"], specificity=float(obj["specificity"]),
            traffic_spec=TestTrafficSpec.from_json(spec) if spec else None,
            created_at=obj["created_at"], updated_at=obj["updated_at"], record_id=obj["record_id"],
            note=obj.get("note", ""),
        )


class IntentStore:
    """Journal with single-writer appends and last-write-wins replay.

    A malformed final line (a torn write) is moved to ``<path>.quarantine``
    and the journal is truncated to the last good record; a malformed line
    anywhere else raises ``CorruptRecord``.
    """

    def __init__(self, path: Union[str, Path] = DEFAULT_STORE_PATH):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.warnings: list[str] = []

    @property
    def quarantine_path(self) -> Path:
        return self.path.with_name(self.path.name + ".quarantine")

    def append(self, record: IntentRecord) -> None:
        with self._lock:
            current = self._replay().get(record.key)
            if current is not None and current.record_id == record.record_id \
                    and record.status not in _ALLOWED[current.status]:
                raise InvalidTransition(
                    f"{record.key}: {current.status.value} -> {record.status.value} is not allowed")
            line = json.dumps(record.to_json(), sort_keys=True, separators=(",", ":"))
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StoreError(f"cannot append to {self.path}: {exc}") from exc

    def load(self) -> list[IntentRecord]:
        with self._lock:
            return list(self._replay().values())

    def get(self, device_id: str, flow_id: str) -> Optional[IntentRecord]:
        with self._lock:
            return self._replay().get((device_id, flow_id))

    def installed(self) -> list[IntentRecord]:
        return [r for r in self.load() if r.status is RecordStatus.INSTALLED]

    def _replay(self) -> dict:
        if not self.path.exists():
            return {}
        try:
            raw = self.path.read_bytes()
        except OSError as exc:
            raise StoreError(f"cannot read {self.path}: {exc}") from exc
        lines = raw.split(b"\n")
        last = max((i for i, c in enumerate(lines) if c.strip()), default=-1)
        state: dict = {}
        offset = 0
        for idx, chunk in enumerate(lines):
            if chunk.strip():
                try:
                    rec = IntentRecord.from_json(json.loads(chunk.decode("utf-8")))
                except Exception as exc:  # any decode or flow-model failure
                    if idx == last:
                        self._quarantine(chunk, offset, idx + 1, str(exc))
                        break
                    raise CorruptRecord(idx + 1, str(exc)) from exc
                state[rec.key] = rec
            offset += len(chunk) + 1
        return state

    def _quarantine(self, chunk: bytes, offset: int, line_no: int, reason: str) -> None:
        msg = f"{self.path}:{line_no}: corrupt trailing record quarantined ({reason})"
        log.warning(msg)
        self.warnings.append(msg)
        try:
            with self.quarantine_path.open("ab") as fh:
                fh.write(chunk + b"\n")
            with self.path.open("r+b") as fh:
                fh.truncate(offset)
        except OSError as exc:
            raise StoreError(f"cannot quarantine {self.path}: {exc}") from exc


def record_intent(store: IntentStore, record: IntentRecord) -> None:
    store.append(record)


def load_intents(store: IntentStore) -> list[IntentRecord]:
    return store.load()
