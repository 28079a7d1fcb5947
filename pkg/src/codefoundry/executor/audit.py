#!/usr/bin/env python3
"""
CodeFoundry - Audit Trail Module
Append-only decision records ordered by a per-instance logical clock.
AuditLog keeps events in memory (JSONL import/export); AuditStore persists
them to SQLite.
"""

import json
import logging
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from queue import Empty, Full, Queue
from typing import Any, Dict, Iterator, List, Mapping, Optional, Union

from ..digests import canonical_json, digest_of
from ..errors import MalformedDocument, SequenceGap
from ..storage import atomic_write_lines

LOG = logging.getLogger("CodeFoundry.audit")


class AuditEventKind(str, Enum):
    GATE_FINDING = "gate_finding"
    INVOCATION_ATTEMPT = "invocation_attempt"
    VALIDATION_RESULT = "validation_result"
    DECISION = "decision"
    ESCALATION = "escalation"


@dataclass(frozen=True)
class AuditEvent:
    instance_id: str
    sequence: int
    kind: AuditEventKind
    payload: Mapping[str, Any] = field(default_factory=dict)
    step: Optional[str] = None
    # informational only, excluded from digests
    wall_clock: Optional[str] = None

    def to_dict(self, include_wall_clock: bool = True) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "instance_id": self.instance_id,
            "sequence": self.sequence,
            "kind": self.kind.value,
            "step": self.step,
            "payload": dict(self.payload),
        }
        if include_wall_clock:
            data["wall_clock"] = self.wall_clock
        return data

    def digest(self) -> str:
        return digest_of(self.to_dict(include_wall_clock=False))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AuditEvent":
        return cls(
            instance_id=str(data["instance_id"]),
            sequence=int(data["sequence"]),
            kind=AuditEventKind(data["kind"]),
            payload=dict(data.get("payload") or {}),
            step=data.get("step"),
            wall_clock=data.get("wall_clock"),
        )


def wall_clock_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class AuditLog:
    """
    Thread-safe append-only event log.

    Appends for one instance must carry consecutive sequence numbers
    starting at 1; instances interleave freely.
    """

    def __init__(self, store: Optional["AuditStore"] = None):
        self._lock = threading.Lock()
        self._events: List[AuditEvent] = []
        self._clocks: Dict[str, int] = {}
        self.store = store

    def __len__(self) -> int:
        return len(self._events)

    def clock(self, instance_id: str) -> int:
        with self._lock:
            return self._clocks.get(instance_id, 0)

    def append(self, event: AuditEvent) -> None:
        """
        Raises:
            SequenceGap: sequence is not the instance clock + 1
        """
        with self._lock:
            expected = self._clocks.get(event.instance_id, 0) + 1
            if event.sequence != expected:
                raise SequenceGap(
                    f"instance {event.instance_id}: expected sequence {expected}, "
                    f"got {event.sequence}",
                    instance_id=event.instance_id,
                    expected=expected,
                    got=event.sequence,
                )
            if self.store is not None:
                self.store.write(event)
            self._events.append(event)
            self._clocks[event.instance_id] = event.sequence

    def events(self, instance_id: Optional[str] = None) -> List[AuditEvent]:
        with self._lock:
            if instance_id is None:
                return list(self._events)
            return [e for e in self._events if e.instance_id == instance_id]

    def instances(self) -> List[str]:
        with self._lock:
            return list(dict.fromkeys(e.instance_id for e in self._events))

    def to_jsonl(self) -> List[str]:
        return [canonical_json(event.to_dict()) for event in self.events()]

    def export(self, path: Union[str, Path]) -> Path:
        return atomic_write_lines(path, self.to_jsonl())

    @classmethod
    def from_lines(cls, lines: List[str], source: str = "<audit>") -> "AuditLog":
        log = cls()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                event = AuditEvent.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as e:
                raise MalformedDocument(f"{source}: bad audit record: {e}", line=number) from None
            log.append(event)
        return log

    @classmethod
    def load(cls, path: Union[str, Path]) -> "AuditLog":
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_lines(text.splitlines(), source=str(path))


class AuditStore:
    """SQLite persistence for audit events with pooled connections"""

    SCHEMA_VERSION = 1
    POOL_SIZE = 10

    def __init__(self, db_path: Union[str, Path]):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._connection_pool: "Queue[sqlite3.Connection]" = Queue(maxsize=self.POOL_SIZE)
        self._write_lock = threading.Lock()

        LOG.info(f"Initializing audit store at: {self.db_path}")
        self._init_database()

    def _init_database(self) -> None:
        with self._get_connection() as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS audit_events (
                    instance_id TEXT NOT NULL,
                    sequence INTEGER NOT NULL,
                    kind TEXT NOT NULL,
                    step TEXT,
                    payload TEXT NOT NULL,
                    event_digest TEXT NOT NULL,
                    wall_clock TEXT,
                    PRIMARY KEY (instance_id, sequence)
                )
            """
            )
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS schema_version (
                    version INTEGER PRIMARY KEY,
                    applied_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
                    description TEXT
                )
            """
            )
            if self._get_schema_version(conn) < self.SCHEMA_VERSION:
                conn.execute(
                    "INSERT OR REPLACE INTO schema_version (version, description) VALUES (?, ?)",
                    (self.SCHEMA_VERSION, "Append-only audit events keyed by logical clock"),
                )
                LOG.info(f"Audit store schema at v{self.SCHEMA_VERSION}")
            conn.commit()

    def _get_schema_version(self, conn: sqlite3.Connection) -> int:
        try:
            result = conn.execute("SELECT MAX(version) FROM schema_version").fetchone()
            return result[0] if result and result[0] else 0
        except sqlite3.OperationalError:
            return 0

    @contextmanager
    def _get_connection(self) -> Iterator[sqlite3.Connection]:
        """Reuse pooled connections; excess connections are closed"""
        try:
            conn = self._connection_pool.get_nowait()
        except Empty:
            conn = sqlite3.connect(str(self.db_path), timeout=30.0, check_same_thread=False)
            conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            try:
                conn.rollback()
                self._connection_pool.put_nowait(conn)
            except (Full, sqlite3.Error):
                conn.close()

    def write(self, event: AuditEvent) -> None:
        """
        Raises:
            SequenceGap: the (instance, sequence) slot is already taken
        """
        with self._write_lock, self._get_connection() as conn:
            try:
                conn.execute(
                    "INSERT INTO audit_events "
                    "(instance_id, sequence, kind, step, payload, event_digest, wall_clock) "
                    "VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (
                        event.instance_id,
                        event.sequence,
                        event.kind.value,
                        event.step,
                        canonical_json(dict(event.payload)),
                        event.digest(),
                        event.wall_clock,
                    ),
                )
                conn.commit()
            except sqlite3.IntegrityError:
                raise SequenceGap(
                    f"instance {event.instance_id}: sequence {event.sequence} already stored",
                    instance_id=event.instance_id,
                ) from None

    def events(self, instance_id: str) -> List[AuditEvent]:
        with self._get_connection() as conn:
            rows = conn.execute(
                "SELECT * FROM audit_events WHERE instance_id = ? ORDER BY sequence",
                (instance_id,),
            ).fetchall()
        return [
            AuditEvent(
                instance_id=row["instance_id"],
                sequence=row["sequence"],
                kind=AuditEventKind(row["kind"]),
                step=row["step"],
                payload=json.loads(row["payload"]),
                wall_clock=row["wall_clock"],
            )
            for row in rows
        ]

    def instances(self) -> List[str]:
        with self._get_connection() as conn:
            rows = conn.execute(
                "SELECT instance_id FROM audit_events GROUP BY instance_id ORDER BY MIN(rowid)"
            ).fetchall()
        return [row["instance_id"] for row in rows]

    def close(self) -> None:
        while True:
            try:
                self._connection_pool.get_nowait().close()
            except Empty:
                break
