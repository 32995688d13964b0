"""Domain entities for energy evaluations and their invariant checks.

Entities are immutable value objects; anything mutable lives in the document
store. Serialization uses the wire field names (``collecting_period``,
``cooling_threshold``) which differ from the unit-suffixed attribute names
used in code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Optional, Sequence, Tuple

from .errors import IllegalTransition, InvalidTrace

__all__ = [
    "Status",
    "Evaluation",
    "Investigation",
    "ContainerizedApplication",
    "Dataset",
    "Device",
    "NnResult",
    "DvResult",
    "PowerTrace",
    "AppType",
    "Violation",
    "Verdict",
    "ValidationContext",
    "validate_entity",
    "transition_status",
    "entity_from_doc",
]


class Status(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    FINISHED = "finished"


class AppType(str, Enum):
    NETWORK = "network"
    COLLECTOR = "collector"
    JOB = "job"


# The only legal moves; everything else (including self-transitions) is rejected.
_TRANSITIONS = {
    (Status.PENDING, Status.RUNNING),
    (Status.RUNNING, Status.FINISHED),
}


def transition_status(current: Status | str, requested: Status | str) -> Status:
    """Advance a lifecycle status, enforcing pending -> running -> finished.

    Raises IllegalTransition for any pair outside the two defined moves,
    self-transitions included.
    """
    cur = Status(current)
    req = Status(requested)
    if (cur, req) not in _TRANSITIONS:
        raise IllegalTransition(f"cannot transition {cur.value} -> {req.value}")
    return req


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str


@dataclass(frozen=True)
class Verdict:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ValidationContext:
    """Cross-entity lookups needed by referential invariants.

    app_types maps application id -> type string; evaluation_ids is the set of
    known evaluation ids. When a lookup is None the corresponding referential
    rule is skipped (structural checks still run).
    """

    app_types: Optional[Mapping[str, str]] = None
    evaluation_ids: Optional[frozenset] = None


def _is_status(value) -> bool:
    try:
        Status(value)
        return True
    except ValueError:
        return False


def _nonempty_str(value) -> bool:
    return isinstance(value, str) and len(value) > 0


@dataclass(frozen=True)
class Evaluation:
    """Top-level unit of study: a coordinated set of investigations and apps."""

    id: str
    description: str = ""
    status: Status = Status.PENDING
    url_backend: str = ""
    app_ids: Tuple[str, ...] = ()
    investigation_ids: Tuple[str, ...] = ()
    total_energy_joules: Optional[float] = None

    def validate(self, context: Optional[ValidationContext] = None) -> Verdict:
        out = []
        if not _nonempty_str(self.id):
            out.append(Violation("id", "id nonempty"))
        if not _is_status(self.status):
            out.append(Violation("status", "status in {pending, running, finished}"))
        if self.total_energy_joules is not None:
            v = self.total_energy_joules
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                out.append(Violation("total_energy_joules", "total_energy_joules >= 0 and finite"))
        if context is not None and context.app_types is not None:
            types = {context.app_types.get(a) for a in self.app_ids}
            if AppType.NETWORK.value not in types:
                out.append(Violation("app_ids", "at least one application of type network"))
            if AppType.COLLECTOR.value not in types:
                out.append(Violation("app_ids", "at least one application of type collector"))
        return Verdict(tuple(out))

    def to_doc(self) -> dict:
        doc = {
            "id": self.id,
            "description": self.description,
            "status": Status(self.status).value,
            "url_backend": self.url_backend,
            "app_ids": list(self.app_ids),
            "investigation_ids": list(self.investigation_ids),
        }
        if self.total_energy_joules is not None:
            doc["total_energy_joules"] = self.total_energy_joules
        return doc

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "Evaluation":
        return cls(
            id=doc.get("id", ""),
            description=doc.get("description", ""),
            status=Status(doc["status"]) if _is_status(doc.get("status")) else doc.get("status"),
            url_backend=doc.get("url_backend", ""),
            app_ids=tuple(doc.get("app_ids", ())),
            investigation_ids=tuple(doc.get("investigation_ids", ())),
            total_energy_joules=doc.get("total_energy_joules"),
        )

    def with_status(self, status: Status) -> "Evaluation":
        return replace(self, status=status)


@dataclass(frozen=True)
class Investigation:
    """One configured run within an evaluation: a network on a dataset on devices."""

    id: str
    evaluation_id: str
    status: Status = Status.PENDING
    num_rc_copies: int = 1
    collecting_period_ms: int = 1000
    dataset_id: str = ""
    device_ids: Tuple[str, ...] = ()

    def validate(self, context: Optional[ValidationContext] = None) -> Verdict:
        out = []
        if not _nonempty_str(self.id):
            out.append(Violation("id", "id nonempty"))
        if not _is_status(self.status):
            out.append(Violation("status", "status in {pending, running, finished}"))
        if not isinstance(self.num_rc_copies, int) or self.num_rc_copies < 1:
            out.append(Violation("num_rc_copies", "num_rc_copies >= 1"))
        if not isinstance(self.collecting_period_ms, int) or self.collecting_period_ms < 1:
            out.append(Violation("collecting_period", "collecting_period >= 1"))
        if context is not None and context.evaluation_ids is not None:
            if self.evaluation_id not in context.evaluation_ids:
                out.append(Violation("evaluation_id", "evaluation_id resolves to an existing evaluation"))
        return Verdict(tuple(out))

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "evaluation_id": self.evaluation_id,
            "status": Status(self.status).value,
            "num_rc_copies": self.num_rc_copies,
            "collecting_period": self.collecting_period_ms,
            "dataset_id": self.dataset_id,
            "device_ids": list(self.device_ids),
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "Investigation":
        return cls(
            id=doc.get("id", ""),
            evaluation_id=doc.get("evaluation_id", ""),
            status=Status(doc["status"]) if _is_status(doc.get("status")) else doc.get("status"),
            num_rc_copies=doc.get("num_rc_copies", 0),
            collecting_period_ms=doc.get("collecting_period", 0),
            dataset_id=doc.get("dataset_id", ""),
            device_ids=tuple(doc.get("device_ids", ())),
        )


@dataclass(frozen=True)
class ContainerizedApplication:
    """A deployed application: the network itself, a counter collector, or a job."""

    id: str
    config: Mapping[str, Any] = field(default_factory=dict)
    output_endpoint: str = ""
    type: str = AppType.JOB.value

    def validate(self, context: Optional[ValidationContext] = None) -> Verdict:
        out = []
        if not _nonempty_str(self.id):
            out.append(Violation("id", "id nonempty"))
        try:
            AppType(self.type)
        except ValueError:
            out.append(Violation("type", "type in {network, collector, job}"))
        return Verdict(tuple(out))

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "config": dict(self.config),
            "output_endpoint": self.output_endpoint,
            "type": self.type,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "ContainerizedApplication":
        return cls(
            id=doc.get("id", ""),
            config=dict(doc.get("config", {})),
            output_endpoint=doc.get("output_endpoint", ""),
            type=doc.get("type", ""),
        )


@dataclass(frozen=True)
class Dataset:
    """A deployed dataset; per-artifact metadata lives in its own database."""

    id: str
    type: str = "Image"
    path: str = ""
    metadata_db: str = ""

    def validate(self, context: Optional[ValidationContext] = None) -> Verdict:
        out = []
        if not _nonempty_str(self.id):
            out.append(Violation("id", "id nonempty"))
        if not _nonempty_str(self.path):
            out.append(Violation("path", "path nonempty"))
        return Verdict(tuple(out))

    def database_name(self) -> str:
        return self.metadata_db or f"DatasetDB_{self.id}"

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "type": self.type,
            "path": self.path,
            "metadata_db": self.database_name(),
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "Dataset":
        return cls(
            id=doc.get("id", ""),
            type=doc.get("type", ""),
            path=doc.get("path", ""),
            metadata_db=doc.get("metadata_db", ""),
        )


@dataclass(frozen=True)
class Device:
    """A monitored device and the power counter sampled on it."""

    id: str
    counter: str = "power.draw"
    cooling_threshold_watts: float = 0.0
    type: str = "GPU"
    properties: Mapping[str, Any] = field(default_factory=dict)

    def validate(self, context: Optional[ValidationContext] = None) -> Verdict:
        out = []
        if not _nonempty_str(self.id):
            out.append(Violation("id", "id nonempty"))
        v = self.cooling_threshold_watts
        if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
            out.append(Violation("cooling_threshold", "cooling_threshold >= 0"))
        return Verdict(tuple(out))

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "counter": self.counter,
            "cooling_threshold": self.cooling_threshold_watts,
            "type": self.type,
            "properties": dict(self.properties),
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "Device":
        return cls(
            id=doc.get("id", ""),
            counter=doc.get("counter", "power.draw"),
            cooling_threshold_watts=doc.get("cooling_threshold", 0.0),
            type=doc.get("type", ""),
            properties=dict(doc.get("properties", {})),
        )


def _valid_timestamp(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value > 0


@dataclass(frozen=True)
class NnResult:
    """One attribute reported by a network run (prediction, copy index, ...)."""

    nn_id: str
    nn_att: str
    nn_att_value: str
    timestamp: int

    def validate(self, context: Optional[ValidationContext] = None) -> Verdict:
        out = []
        if not _nonempty_str(self.nn_id):
            out.append(Violation("nn_id", "nn_id nonempty"))
        if not _nonempty_str(self.nn_att):
            out.append(Violation("nn_att", "nn_att nonempty"))
        if not _valid_timestamp(self.timestamp):
            out.append(Violation("timestamp", "timestamp > 0"))
        return Verdict(tuple(out))

    def to_doc(self) -> dict:
        return {
            "nn_id": self.nn_id,
            "nn_att": self.nn_att,
            "nn_att_value": self.nn_att_value,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "NnResult":
        return cls(
            nn_id=doc.get("nn_id", ""),
            nn_att=doc.get("nn_att", ""),
            nn_att_value=str(doc.get("nn_att_value", "")),
            timestamp=doc.get("timestamp", 0),
        )


@dataclass(frozen=True)
class DvResult:
    """One device counter reading. Counter values ride as strings and are
    parsed only when a trace is built."""

    dv_id: str
    dv_counter: str
    dv_counter_value: str
    timestamp: int

    def validate(self, context: Optional[ValidationContext] = None) -> Verdict:
        out = []
        if not _nonempty_str(self.dv_id):
            out.append(Violation("dv_id", "dv_id nonempty"))
        if not _nonempty_str(self.dv_counter):
            out.append(Violation("dv_counter", "dv_counter nonempty"))
        if not _valid_timestamp(self.timestamp):
            out.append(Violation("timestamp", "timestamp > 0"))
        return Verdict(tuple(out))

    def to_doc(self) -> dict:
        return {
            "dv_id": self.dv_id,
            "dv_counter": self.dv_counter,
            "dv_counter_value": self.dv_counter_value,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "DvResult":
        return cls(
            dv_id=doc.get("dv_id", ""),
            dv_counter=doc.get("dv_counter", ""),
            dv_counter_value=str(doc.get("dv_counter_value", "")),
            timestamp=doc.get("timestamp", 0),
        )


@dataclass(frozen=True)
class PowerTrace:
    """Ordered (timestamp_ms, watts) samples for one device.

    Construction is strict: timestamps must strictly increase (duplicates keep
    integration intervals positive, so they are rejected outright) and every
    power value must parse to a finite nonnegative real.
    """

    device_id: str
    samples: Tuple[Tuple[int, float], ...]

    def __post_init__(self):
        prev = None
        for t, p in self.samples:
            if not _valid_timestamp(t):
                raise InvalidTrace(f"timestamp {t!r} must be a positive integer")
            if prev is not None and t <= prev:
                raise InvalidTrace(f"timestamps must strictly increase ({prev} then {t})")
            if not isinstance(p, (int, float)) or not math.isfinite(p) or p < 0:
                raise InvalidTrace(f"power {p!r} at t={t} must be finite and >= 0")
            prev = t

    def __len__(self) -> int:
        return len(self.samples)

    @classmethod
    def from_dv_results(cls, device_id: str, records: Sequence[DvResult | Mapping[str, Any]]) -> "PowerTrace":
        """Build a trace from dv_result records sorted by timestamp.

        Values that do not parse as numbers are rejected here, not at
        ingestion time.
        """
        samples = []
        for rec in records:
            doc = rec.to_doc() if isinstance(rec, DvResult) else rec
            raw = doc.get("dv_counter_value")
            try:
                watts = float(raw)
            except (TypeError, ValueError):
                raise InvalidTrace(f"counter value {raw!r} is not numeric")
            samples.append((doc.get("timestamp"), watts))
        samples.sort(key=lambda s: s[0])
        return cls(device_id=device_id, samples=tuple(samples))


_ENTITY_TYPES = (
    Evaluation,
    Investigation,
    ContainerizedApplication,
    Dataset,
    Device,
    NnResult,
    DvResult,
)

# ConfigDB collection name -> entity class, used by the store's put gate.
ENTITY_BY_COLLECTION = {
    "evaluation": Evaluation,
    "investigation": Investigation,
    "containerized_application": ContainerizedApplication,
    "dataset": Dataset,
    "device": Device,
}


def validate_entity(entity, context: Optional[ValidationContext] = None) -> Verdict:
    """Check every invariant of a domain entity.

    Violations are data, not faults: the verdict lists each broken rule with
    the field it concerns.
    """
    if not isinstance(entity, _ENTITY_TYPES):
        raise TypeError(f"not a domain entity: {type(entity).__name__}")
    return entity.validate(context)


def entity_from_doc(collection: str, doc: Mapping[str, Any]):
    """Rehydrate a ConfigDB document into its entity type."""
    cls = ENTITY_BY_COLLECTION[collection]
    return cls.from_doc(doc)
