"""Embedded document store backing the configuration, dataset and result databases.

Three database families exist:

* ``ConfigDB`` with the five fixed entity collections,
* ``DatasetDB_<name>_<version>`` holding per-artifact metadata documents,
* ``ResultDB_<evaluation_id>`` holding one ``investigation_<id>`` collection
  per investigation, append-only.

The engine keeps everything in memory and, when opened with a root directory,
journals every mutation as one NDJSON line per operation so a restart replays
to the same state. The public methods of :class:`DocumentStore` are the seam
where a server-based document database could be substituted.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping, Optional

from . import model
from .errors import InvalidName, StorageUnavailable, UnknownCollection, ValidationFailed

__all__ = [
    "DbFamily",
    "DatabaseRef",
    "CollectionRef",
    "DocumentStore",
    "CONFIG_COLLECTIONS",
]

CONFIG_DB_NAME = "ConfigDB"
CONFIG_COLLECTIONS = ("evaluation", "investigation", "dataset", "containerized_application", "device")

_DATASET_DB_RE = re.compile(r"^DatasetDB_.+_.+$")
_RESULT_DB_RE = re.compile(r"^ResultDB_.+$")
_RESULT_COLL_RE = re.compile(r"^investigation_.+$")
_DATASET_COLL_RE = re.compile(r"^dataset_.+$")


class DbFamily(str, Enum):
    CONFIG = "config"
    DATASET = "dataset"
    RESULT = "result"


@dataclass(frozen=True)
class DatabaseRef:
    family: DbFamily
    name: str

    def __post_init__(self):
        if self.family == DbFamily.CONFIG and self.name != CONFIG_DB_NAME:
            raise InvalidName(f"config database must be named {CONFIG_DB_NAME!r}, got {self.name!r}")
        if self.family == DbFamily.DATASET and not _DATASET_DB_RE.match(self.name):
            raise InvalidName(f"dataset database name {self.name!r} must match DatasetDB_<name>_<version>")
        if self.family == DbFamily.RESULT and not _RESULT_DB_RE.match(self.name):
            raise InvalidName(f"result database name {self.name!r} must match ResultDB_<evaluation_id>")

    @classmethod
    def config(cls) -> "DatabaseRef":
        return cls(DbFamily.CONFIG, CONFIG_DB_NAME)

    @classmethod
    def dataset(cls, db_name: str) -> "DatabaseRef":
        return cls(DbFamily.DATASET, db_name)

    @classmethod
    def result(cls, evaluation_id: str) -> "DatabaseRef":
        return cls(DbFamily.RESULT, f"ResultDB_{evaluation_id}")

    @classmethod
    def from_name(cls, name: str) -> "DatabaseRef":
        if name == CONFIG_DB_NAME:
            return cls.config()
        if name.startswith("DatasetDB_"):
            return cls(DbFamily.DATASET, name)
        if name.startswith("ResultDB_"):
            return cls(DbFamily.RESULT, name)
        raise InvalidName(f"database name {name!r} matches no known family")


@dataclass(frozen=True)
class CollectionRef:
    db: DatabaseRef
    name: str

    def __post_init__(self):
        if self.db.family == DbFamily.CONFIG and self.name not in CONFIG_COLLECTIONS:
            raise InvalidName(f"ConfigDB has no collection {self.name!r}")
        if self.db.family == DbFamily.RESULT and not _RESULT_COLL_RE.match(self.name):
            raise InvalidName(f"result collection {self.name!r} must match investigation_<id>")
        if self.db.family == DbFamily.DATASET and not _DATASET_COLL_RE.match(self.name):
            raise InvalidName(f"dataset collection {self.name!r} must match dataset_<format>")

    @classmethod
    def config(cls, name: str) -> "CollectionRef":
        return cls(DatabaseRef.config(), name)

    @classmethod
    def investigation(cls, evaluation_id: str, investigation_id: str) -> "CollectionRef":
        return cls(DatabaseRef.result(evaluation_id), f"investigation_{investigation_id}")


class _Collection:
    __slots__ = ("docs", "records", "seq")

    def __init__(self):
        self.docs: dict[str, dict] = {}
        self.records: list[dict] = []
        self.seq = 0


def _normalize(doc: Mapping[str, Any]) -> dict:
    """Round-trip through JSON so stored documents are plain JSON values."""
    return json.loads(json.dumps(doc, sort_keys=True))


def dump_line(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class DocumentStore:
    """In-memory document store with an optional NDJSON journal on disk.

    One re-entrant lock serializes every mutation, so concurrent appends to the
    same result collection cannot lose records; reads take snapshots under the
    same lock and therefore observe a consistent prefix.
    """

    def __init__(self, root: Optional[str | Path] = None):
        self._lock = threading.RLock()
        self._dbs: dict[str, dict[str, _Collection]] = {}
        self._root = Path(root) if root is not None else None
        if self._root is not None:
            self._replay()

    # -- provisioning ------------------------------------------------------

    def ensure_database(self, ref: DatabaseRef) -> DatabaseRef:
        """Create the database if needed (idempotent) and hand back its ref."""
        with self._lock:
            if ref.name not in self._dbs:
                self._dbs[ref.name] = {}
                if self._root is not None:
                    try:
                        (self._root / ref.name).mkdir(parents=True, exist_ok=True)
                    except OSError as exc:
                        raise StorageUnavailable(str(exc)) from exc
            return ref

    def ensure_collection(self, coll: CollectionRef) -> CollectionRef:
        with self._lock:
            self.ensure_database(coll.db)
            db = self._dbs[coll.db.name]
            if coll.name not in db:
                db[coll.name] = _Collection()
                self._touch_journal(coll)
            return coll

    def has_collection(self, coll: CollectionRef) -> bool:
        with self._lock:
            return coll.name in self._dbs.get(coll.db.name, {})

    def databases(self) -> list[str]:
        with self._lock:
            return sorted(self._dbs)

    def collections(self, ref: DatabaseRef) -> list[str]:
        with self._lock:
            return sorted(self._dbs.get(ref.name, {}))

    # -- configuration / dataset documents ---------------------------------

    def put_document(self, coll: CollectionRef, doc: Mapping[str, Any]) -> str:
        """Store a keyed document; a second put with the same id replaces it whole.

        ConfigDB collections gate on the entity invariants, including the
        referential ones (app types, evaluation ids) resolved from this store.
        """
        doc = _normalize(doc)
        doc_id = doc.get("id")
        if not doc_id:
            raise ValidationFailed([model.Violation("id", "id nonempty")])
        with self._lock:
            if coll.db.family == DbFamily.CONFIG:
                entity = model.entity_from_doc(coll.name, doc)
                verdict = entity.validate(self._validation_context())
                if not verdict.ok:
                    raise ValidationFailed(verdict.violations)
            self.ensure_collection(coll)
            self._dbs[coll.db.name][coll.name].docs[doc_id] = doc
            self._journal(coll, {"op": "put", "doc": doc})
            return doc_id

    def get_document(self, coll: CollectionRef, doc_id: str) -> Optional[dict]:
        with self._lock:
            db = self._dbs.get(coll.db.name, {})
            collection = db.get(coll.name)
            if collection is None:
                return None
            return collection.docs.get(doc_id)

    def update_document(self, coll: CollectionRef, doc_id: str, mutate: Callable[[dict], dict]) -> dict:
        """Atomically replace a document with ``mutate(current)``.

        The callable runs under the store lock, which is what makes the
        orchestrator's claim-by-status-transition race-free.
        """
        with self._lock:
            current = self.get_document(coll, doc_id)
            if current is None:
                raise UnknownCollection(f"{coll.name}/{doc_id}")
            updated = _normalize(mutate(dict(current)))
            if coll.db.family == DbFamily.CONFIG:
                entity = model.entity_from_doc(coll.name, updated)
                verdict = entity.validate(self._validation_context())
                if not verdict.ok:
                    raise ValidationFailed(verdict.violations)
            self._dbs[coll.db.name][coll.name].docs[doc_id] = updated
            self._journal(coll, {"op": "put", "doc": updated})
            return updated

    def scan(self, coll: CollectionRef) -> list[dict]:
        """All keyed documents of a collection, sorted by id."""
        with self._lock:
            db = self._dbs.get(coll.db.name, {})
            collection = db.get(coll.name)
            if collection is None:
                return []
            return [collection.docs[k] for k in sorted(collection.docs)]

    # -- result records -----------------------------------------------------

    def append_result(self, coll: CollectionRef, record: Mapping[str, Any]) -> str:
        """Append a record to an investigation collection. Append-only: there
        is no overwrite path for results."""
        record = record.to_doc() if hasattr(record, "to_doc") else record
        record = _normalize(record)
        with self._lock:
            collection = self._result_collection(coll)
            collection.seq += 1
            stored_id = f"{collection.seq:08d}"
            collection.records.append(record)
            self._journal(coll, {"op": "append", "doc": record})
            return stored_id

    def record_count(self, coll: CollectionRef) -> int:
        with self._lock:
            return len(self._result_collection(coll).records)

    def query_results(
        self,
        coll: CollectionRef,
        device_id: Optional[str] = None,
        counter: Optional[str] = None,
        t_min: Optional[int] = None,
        t_max: Optional[int] = None,
    ) -> list[dict]:
        """Timestamped records matching the filter, sorted by timestamp ascending.

        The interval is closed on both ends so boundary samples contribute to
        the energy sum. Untimestamped records (preparation notes) never match.
        """
        if t_min is not None and t_max is not None and t_min > t_max:
            raise ValueError(f"t_min {t_min} > t_max {t_max}")
        with self._lock:
            records = list(self._result_collection(coll).records)
        out = []
        for rec in records:
            ts = rec.get("timestamp")
            if not isinstance(ts, int):
                continue
            if device_id is not None and rec.get("dv_id") != device_id:
                continue
            if counter is not None and rec.get("dv_counter") != counter:
                continue
            if t_min is not None and ts < t_min:
                continue
            if t_max is not None and ts > t_max:
                continue
            out.append(rec)
        out.sort(key=lambda r: r["timestamp"])
        return out

    def preparation_records(self, coll: CollectionRef) -> list[dict]:
        """Appended records that are not dv/nn results, in append order."""
        with self._lock:
            records = list(self._result_collection(coll).records)
        return [r for r in records if "dv_id" not in r and "nn_id" not in r]

    def _result_collection(self, coll: CollectionRef) -> _Collection:
        db = self._dbs.get(coll.db.name, {})
        collection = db.get(coll.name)
        if collection is None:
            raise UnknownCollection(f"{coll.db.name}/{coll.name}")
        return collection

    # -- export -------------------------------------------------------------

    def export_lines(self, coll: CollectionRef) -> Iterator[str]:
        """Every document of a collection as newline-delimited JSON.

        Keyed documents come out sorted by id, appended records in append
        order; key order inside each line is sorted. Two stores with the same
        history therefore export byte-identical text.
        """
        with self._lock:
            db = self._dbs.get(coll.db.name, {})
            collection = db.get(coll.name)
            if collection is None:
                raise UnknownCollection(f"{coll.db.name}/{coll.name}")
            docs = [collection.docs[k] for k in sorted(collection.docs)]
            records = list(collection.records)
        for doc in docs:
            yield dump_line(doc)
        for rec in records:
            yield dump_line(rec)

    def export_text(self, coll: CollectionRef) -> str:
        lines = list(self.export_lines(coll))
        return "\n".join(lines) + ("\n" if lines else "")

    # -- internals ----------------------------------------------------------

    def _validation_context(self) -> model.ValidationContext:
        config = self._dbs.get(CONFIG_DB_NAME, {})
        apps = config.get("containerized_application")
        evaluations = config.get("evaluation")
        return model.ValidationContext(
            app_types={k: d.get("type") for k, d in apps.docs.items()} if apps else {},
            evaluation_ids=frozenset(evaluations.docs) if evaluations else frozenset(),
        )

    def _journal_path(self, coll: CollectionRef) -> Path:
        return self._root / coll.db.name / f"{coll.name}.ndjson"

    def _touch_journal(self, coll: CollectionRef) -> None:
        if self._root is None:
            return
        try:
            path = self._journal_path(coll)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.touch()
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc

    def _journal(self, coll: CollectionRef, entry: dict) -> None:
        if self._root is None:
            return
        try:
            with self._journal_path(coll).open("a", encoding="utf-8") as fh:
                fh.write(dump_line(entry) + "\n")
        except OSError as exc:
            raise StorageUnavailable(str(exc)) from exc

    def _replay(self) -> None:
        if not self._root.exists():
            try:
                self._root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise StorageUnavailable(str(exc)) from exc
            return
        for db_dir in sorted(p for p in self._root.iterdir() if p.is_dir()):
            db_ref = DatabaseRef.from_name(db_dir.name)
            self._dbs[db_ref.name] = {}
            for journal in sorted(db_dir.glob("*.ndjson")):
                coll = CollectionRef(db_ref, journal.stem)
                collection = self._dbs[db_ref.name].setdefault(coll.name, _Collection())
                with journal.open(encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        entry = json.loads(line)
                        if entry["op"] == "put":
                            collection.docs[entry["doc"]["id"]] = entry["doc"]
                        else:
                            collection.seq += 1
                            collection.records.append(entry["doc"])
