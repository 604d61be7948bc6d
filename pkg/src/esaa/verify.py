"""Replay audit: recompute the read-model from the log and compare digests.

The stored roadmap.json commits to a projection hash. Verification replays
every event from zero, recomputes that hash, and classifies the outcome:
ok (digests equal), mismatch (clean log, diverging read-model), or
corrupted (the log itself fails integrity checks or no longer replays).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .canonical import compute_projection_hash
from .errors import (
    IoFailure,
    NonCanonicalizableValue,
    ProjectionError,
    SeqOutOfRange,
    StorageFailure,
)
from .profiles import FULL
from .projection import Roadmap, diff_projections, project, roadmap_from_doc
from .store import CorruptionReport, EventStore, read_all

EXIT_CODES = {"ok": 0, "mismatch": 2, "corrupted": 3}


@dataclass(frozen=True)
class VerifyReport:
    verify_status: str  # ok | mismatch | corrupted
    computed_hash: str | None = None
    stored_hash: str | None = None
    corruption: CorruptionReport | None = None
    first_divergence: dict[str, Any] | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verify_status]

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"verify_status": self.verify_status}
        if self.computed_hash is not None:
            doc["computed_hash"] = self.computed_hash
        if self.stored_hash is not None:
            doc["stored_hash"] = self.stored_hash
        if self.corruption is not None:
            doc["corruption"] = self.corruption.to_doc()
        if self.first_divergence is not None:
            doc["first_divergence"] = self.first_divergence
        return doc


def _first_divergent_task(diff: dict[str, Any]) -> dict[str, Any] | None:
    tasks = diff.get("tasks")
    if not tasks:
        return None
    first = sorted(tasks)[0]
    return {"task_id": first, "fields": tasks[first]}


def esaa_verify(
    log_path: str | Path, roadmap_path: str | Path, now: str | None = None
) -> VerifyReport:
    """Audit one project; pass `now` to let a full-profile run record the audit.

    With `now` set and a full-profile log, verify.start and verify.ok/fail
    are appended; on ok the read-model is rewritten so its verify_status
    reflects the audit. Those events only touch the run block, which the
    hash excludes, so verification is stable under repetition. Mismatching
    or corrupted stores are never rewritten.
    """
    log_path = Path(log_path)
    roadmap_path = Path(roadmap_path)

    result = read_all(log_path)
    if isinstance(result, CorruptionReport):
        return VerifyReport(verify_status="corrupted", corruption=result)
    records = result
    try:
        projected = project(records)
    except ProjectionError as exc:
        report = CorruptionReport(
            line_number=(exc.event_seq or 0) + 1,
            kind="malformed-line",
            detail=f"log does not replay: {exc}",
        )
        return VerifyReport(verify_status="corrupted", corruption=report)

    computed = compute_projection_hash(projected.to_doc())

    try:
        stored_doc = json.loads(roadmap_path.read_text("utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {roadmap_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        return VerifyReport(verify_status="mismatch", computed_hash=computed,
                            first_divergence={"error": f"stored roadmap unparseable: {exc}"})

    stored_hash = None
    body_hash = None
    if isinstance(stored_doc, dict):
        stored_hash = (stored_doc.get("run") or {}).get("projection_hash_sha256")
        try:
            body_hash = compute_projection_hash(stored_doc)
        except (KeyError, TypeError, NonCanonicalizableValue):
            body_hash = None

    # ok needs both: the replayed digest matches the stored commitment, and
    # the stored document body still hashes to that same commitment (a body
    # edit that leaves the hash field alone must not pass).
    if stored_hash == computed and body_hash == computed:
        report = VerifyReport(verify_status="ok", computed_hash=computed, stored_hash=stored_hash)
    else:
        divergence = None
        if isinstance(stored_doc, dict):
            try:
                stored_state = roadmap_from_doc(stored_doc, projected.profile)
                divergence = _first_divergent_task(diff_projections(projected, stored_state))
            except ProjectionError as exc:
                divergence = {"error": str(exc)}
        report = VerifyReport(
            verify_status="mismatch",
            computed_hash=computed,
            stored_hash=stored_hash,
            first_divergence=divergence,
        )

    if now is not None and projected.profile.name == FULL.name:
        _record_audit(log_path, roadmap_path, report, now)
    return report


def _record_audit(log_path: Path, roadmap_path: Path, report: VerifyReport, now: str) -> None:
    store = EventStore(log_path, FULL)
    with store.permit() as appender:
        appender.append(action="verify.start", ts=now)
        if report.verify_status == "ok":
            appender.append(
                action="verify.ok",
                ts=now,
                payload={"projection_hash": report.computed_hash},
            )
            state = project(store.records())
            roadmap_path.write_bytes(state.serialize())
        else:
            appender.append(
                action="verify.fail",
                ts=now,
                payload={"computed": report.computed_hash, "stored": report.stored_hash},
            )


def replay_to(log_path: str | Path, seq: int) -> Roadmap:
    """Project the log prefix through event `seq` inclusive."""
    result = read_all(Path(log_path))
    if isinstance(result, CorruptionReport):
        raise StorageFailure(
            f"log corrupted at line {result.line_number}: {result.kind} ({result.detail})"
        )
    if not result:
        raise SeqOutOfRange("log is empty")
    max_seq = result[-1].event_seq
    if seq < 0 or seq > max_seq:
        raise SeqOutOfRange(f"seq {seq} outside 0..{max_seq}")
    return project(result[: seq + 1])
