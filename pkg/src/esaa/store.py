"""Append-only event log backed by a line-delimited file.

One canonical JSON object per line, LF-terminated, UTF-8, no blank lines.
The file is the source of truth: appends are flushed to stable storage
before returning, nothing is ever rewritten, and reads classify any
deviation (torn line, sequence gap, duplicate, unknown action) as a
corruption finding instead of skipping it.

Writers serialize through an advisory file lock (the append permit); readers
never block and only ever see complete lines.
"""

from __future__ import annotations

import fcntl
import json
import os
import re
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterator

from .canonical import canonicalize
from .errors import IoFailure, StorageFailure, VocabularyViolation
from .profiles import ProtocolProfile, profile_for_initial_action

ORCHESTRATOR_ACTOR = "orchestrator"
AGENT_ACTOR_RE = re.compile(r"^agent-.*")

# RFC 3339 with seconds precision; the offset is optional on ingestion
# because foreign logs ship local-time stamps without one.
_TS_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(Z|[+-]\d{2}:\d{2})?$"
)

_RECORD_KEYS = frozenset(
    {
        "event_seq",
        "ts",
        "action",
        "actor",
        "agent_id",
        "task_id",
        "correlation_id",
        "attempt_id",
        "idempotency_key",
        "payload",
        "acceptance_results",
    }
)


def validate_ts(ts: str, *, require_offset: bool = False) -> None:
    m = _TS_RE.match(ts)
    if not m:
        raise ValueError(f"timestamp {ts!r} is not RFC 3339 with seconds precision")
    if require_offset and m.group(1) is None:
        raise ValueError(f"timestamp {ts!r} lacks a UTC offset")


def parse_ts(ts: str) -> datetime:
    validate_ts(ts)
    return datetime.fromisoformat(ts.replace("Z", "+00:00"))


@dataclass(frozen=True)
class EventRecord:
    """One immutable fact in the log."""

    event_seq: int
    ts: str
    action: str
    actor: str = ORCHESTRATOR_ACTOR
    task_id: str | None = None
    correlation_id: str | None = None
    attempt_id: str | None = None
    idempotency_key: str | None = None
    payload: dict[str, Any] = field(default_factory=dict)
    acceptance_results: dict[str, bool] | None = None

    def to_doc(self, profile: ProtocolProfile) -> dict[str, Any]:
        """Wire form of the record under the given profile's conventions."""
        doc: dict[str, Any] = {
            "event_seq": self.event_seq,
            "ts": self.ts,
            "action": self.action,
        }
        if profile.name == "simplified":
            if self.actor != ORCHESTRATOR_ACTOR:
                doc["agent_id"] = self.actor
        else:
            doc["actor"] = self.actor
        for key in ("task_id", "correlation_id", "attempt_id", "idempotency_key"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        if self.payload:
            doc["payload"] = self.payload
        if self.acceptance_results is not None:
            doc["acceptance_results"] = self.acceptance_results
        return doc


@dataclass(frozen=True)
class CorruptionReport:
    """First integrity finding in a log file."""

    line_number: int
    kind: str  # malformed-line | sequence-gap | duplicate-seq | vocabulary-violation
    detail: str

    def to_doc(self) -> dict[str, Any]:
        return {
            "line_number": self.line_number,
            "kind": self.kind,
            "detail": self.detail,
        }


def _record_from_doc(doc: Any, line_number: int, derived_seq: int) -> EventRecord | str:
    """Build a record from a parsed line; returns an error string on bad shape."""
    if not isinstance(doc, dict):
        return "line is not a JSON object"
    unknown = set(doc) - _RECORD_KEYS
    if unknown:
        return f"unknown fields {sorted(unknown)}"
    action = doc.get("action")
    if not isinstance(action, str) or not action:
        return "missing or invalid 'action'"
    ts = doc.get("ts")
    if not isinstance(ts, str):
        return "missing or invalid 'ts'"
    try:
        validate_ts(ts)
    except ValueError as exc:
        return str(exc)

    seq = doc.get("event_seq", derived_seq)
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        return "invalid 'event_seq'"

    actor = doc.get("actor")
    agent_id = doc.get("agent_id")
    if actor is not None and not isinstance(actor, str):
        return "invalid 'actor'"
    if agent_id is not None and not isinstance(agent_id, str):
        return "invalid 'agent_id'"
    identity = actor or agent_id or ORCHESTRATOR_ACTOR

    payload = doc.get("payload", {})
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        return "invalid 'payload'"

    acceptance = doc.get("acceptance_results")
    if acceptance is not None:
        if not isinstance(acceptance, dict) or not all(
            isinstance(k, str) and isinstance(v, bool) for k, v in acceptance.items()
        ):
            return "invalid 'acceptance_results'"

    for key in ("task_id", "correlation_id", "attempt_id", "idempotency_key"):
        value = doc.get(key)
        if value is not None and not isinstance(value, str):
            return f"invalid {key!r}"

    return EventRecord(
        event_seq=seq,
        ts=ts,
        action=action,
        actor=identity,
        task_id=doc.get("task_id"),
        correlation_id=doc.get("correlation_id"),
        attempt_id=doc.get("attempt_id"),
        idempotency_key=doc.get("idempotency_key"),
        payload=payload,
        acceptance_results=acceptance,
    )


def read_all(
    path: str | Path, profile: ProtocolProfile | None = None
) -> list[EventRecord] | CorruptionReport:
    """Read the whole log; the first integrity finding wins.

    When ``profile`` is None it is inferred from the first event. Lines
    without an explicit ``event_seq`` (foreign fixtures) take their position;
    explicit values are checked for gaps and duplicates.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    records: list[EventRecord] = []
    if not data:
        return records

    lines = data.split(b"\n")
    torn = lines[-1] != b""
    body = lines[:-1] if not torn else lines
    for idx, raw in enumerate(body):
        line_number = idx + 1
        if torn and idx == len(body) - 1:
            return CorruptionReport(line_number, "malformed-line", "truncated final line (no LF)")
        if raw == b"":
            return CorruptionReport(line_number, "malformed-line", "blank line")
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return CorruptionReport(line_number, "malformed-line", f"unparseable line: {exc}")

        built = _record_from_doc(doc, line_number, derived_seq=idx)
        if isinstance(built, str):
            return CorruptionReport(line_number, "malformed-line", built)

        if profile is None:
            try:
                profile = profile_for_initial_action(built.action)
            except ValueError as exc:
                return CorruptionReport(line_number, "vocabulary-violation", str(exc))
        if not profile.allows(built.action):
            return CorruptionReport(
                line_number,
                "vocabulary-violation",
                f"action {built.action!r} not in {profile.name} vocabulary",
            )

        expected = idx
        if built.event_seq != expected:
            kind = "duplicate-seq" if built.event_seq < expected else "sequence-gap"
            return CorruptionReport(
                line_number,
                kind,
                f"event_seq {built.event_seq}, expected {expected}",
            )
        records.append(built)
    return records


def tail_verify_counts(records: list[EventRecord]) -> dict[str, int]:
    """Exact per-action event counts."""
    return dict(Counter(r.action for r in records))


class EventStore:
    """Single-writer, multi-reader log of :class:`EventRecord` lines."""

    def __init__(self, path: str | Path, profile: ProtocolProfile):
        self.path = Path(path)
        self.profile = profile
        self._lock_path = self.path.with_name(self.path.name + ".lock")

    @contextmanager
    def permit(self) -> Iterator["Appender"]:
        """Acquire the exclusive append permit for this log file."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._lock_path, "a+b") as lock_fh:
            fcntl.flock(lock_fh.fileno(), fcntl.LOCK_EX)
            try:
                yield Appender(self)
            finally:
                fcntl.flock(lock_fh.fileno(), fcntl.LOCK_UN)

    def append(self, **fields: Any) -> EventRecord:
        """Append a single record under a fresh permit."""
        with self.permit() as appender:
            return appender.append(**fields)

    def read_all(self) -> list[EventRecord] | CorruptionReport:
        return read_all(self.path, self.profile)

    def records(self) -> list[EventRecord]:
        """Read and require an intact log."""
        result = self.read_all()
        if isinstance(result, CorruptionReport):
            raise StorageFailure(
                f"log corrupted at line {result.line_number}: {result.kind} ({result.detail})"
            )
        return result


class Appender:
    """Append handle valid while the permit is held."""

    def __init__(self, store: EventStore):
        self._store = store
        self._next_seq = self._scan_next_seq()

    def _scan_next_seq(self) -> int:
        path = self._store.path
        if not path.exists():
            return 0
        data = path.read_bytes()
        if not data:
            return 0
        if not data.endswith(b"\n"):
            raise StorageFailure(f"{path} ends in a torn line; refusing to append")
        return data.count(b"\n")

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def append(
        self,
        *,
        action: str,
        ts: str,
        actor: str = ORCHESTRATOR_ACTOR,
        task_id: str | None = None,
        correlation_id: str | None = None,
        attempt_id: str | None = None,
        idempotency_key: str | None = None,
        payload: dict[str, Any] | None = None,
        acceptance_results: dict[str, bool] | None = None,
    ) -> EventRecord:
        profile = self._store.profile
        if not profile.allows(action):
            raise VocabularyViolation(
                f"action {action!r} not in {profile.name} vocabulary"
            )
        # The writer always emits offset-bearing stamps; only ingestion of
        # foreign logs tolerates offset-less local time.
        validate_ts(ts, require_offset=True)
        record = EventRecord(
            event_seq=self._next_seq,
            ts=ts,
            action=action,
            actor=actor,
            task_id=task_id,
            correlation_id=correlation_id,
            attempt_id=attempt_id,
            idempotency_key=idempotency_key,
            payload=payload or {},
            acceptance_results=acceptance_results,
        )
        line = canonicalize(record.to_doc(profile))
        try:
            with open(self._store.path, "ab") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"append to {self._store.path} failed: {exc}") from exc
        self._next_seq += 1
        return record
