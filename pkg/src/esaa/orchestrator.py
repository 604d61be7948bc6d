"""The transactional pipeline between agent output and the event log.

Agents only ever hand the orchestrator an envelope. The pipeline validates
it in a fixed stage order (schema, authority, attempt freshness, boundary,
idempotency, conflict), appends the intention event before touching any
file (trace-first), applies patch effects, appends the effect and state
events, and reprojects the read-model. A rejection appends exactly one
output.rejected event and leaves the workspace untouched.

All mutating entry points serialize on the store's append permit, so
concurrent submissions interleave safely: validation may race, but the
validate-commit sequence is atomic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import timedelta, timezone
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .contracts import (
    AgentOutputEnvelope,
    BoundaryContract,
    Violation,
    check_idempotency,
    enforce_boundary,
    validate_envelope,
)
from .errors import (
    AlreadyDone,
    AlreadyInitialized,
    AttemptConflict,
    ContractConfigError,
    DependencyUnsatisfied,
    HunkMismatch,
    NotInitialized,
    UnknownTask,
)
from .patching import apply_patch
from .profiles import FULL, ProtocolProfile, profile_for_initial_action
from .projection import Roadmap, apply_event, project
from .store import Appender, EventRecord, EventStore, parse_ts

ROADMAP_DIR = ".roadmap"
ACTIVITY_FILE = "activity.jsonl"
ROADMAP_FILE = "roadmap.json"

# Log and read-model files are not workspace content; everything else is.
_NON_WORKSPACE = {ACTIVITY_FILE, ACTIVITY_FILE + ".lock", ROADMAP_FILE}


@dataclass(frozen=True)
class Attempt:
    attempt_id: str
    task_id: str
    agent: str
    opened_at: str
    ttl: int
    status: str  # open | completed | timed_out

    def closed(self, status: str) -> "Attempt":
        return Attempt(self.attempt_id, self.task_id, self.agent, self.opened_at, self.ttl, status)


@dataclass(frozen=True)
class EffectReceipt:
    path: str
    bytes_written: int
    content_hash: str

    def to_doc(self) -> dict[str, Any]:
        return {
            "path": self.path,
            "bytes_written": self.bytes_written,
            "content_hash": self.content_hash,
        }


@dataclass(frozen=True)
class PipelineOutcome:
    kind: str  # accepted | rejected
    events_appended: list[int] = field(default_factory=list)
    receipts: list[EffectReceipt] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    effect_failures: list[str] = field(default_factory=list)

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "kind": self.kind,
            "events_appended": self.events_appended,
            "receipts": [r.to_doc() for r in self.receipts],
            "violations": [v.to_doc() for v in self.violations],
        }
        if self.effect_failures:
            doc["effect_failures"] = self.effect_failures
        return doc


@dataclass(frozen=True)
class OrchestratorConfig:
    ttl_seconds: int = 3600
    emit_view_mutate: bool = False

    @classmethod
    def load(cls, path: Path) -> "OrchestratorConfig":
        if not path.exists():
            return cls()
        try:
            doc = yaml.safe_load(path.read_text("utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ContractConfigError(f"orchestrator contract is not valid YAML: {exc}") from exc
        ttl = doc.get("ttl_seconds", 3600)
        if not isinstance(ttl, int) or isinstance(ttl, bool) or ttl < 1:
            raise ContractConfigError("ttl_seconds must be a positive integer")
        emit = doc.get("emit_view_mutate", False)
        if not isinstance(emit, bool):
            raise ContractConfigError("emit_view_mutate must be a boolean")
        return cls(ttl_seconds=ttl, emit_view_mutate=emit)


def derive_attempts(records: list[EventRecord], default_ttl: int = 3600) -> dict[str, Attempt]:
    """Rebuild attempt lifecycles from the log; the log is the only state."""
    attempts: dict[str, Attempt] = {}
    for rec in records:
        if rec.action == "attempt.create" and rec.attempt_id:
            attempts[rec.attempt_id] = Attempt(
                attempt_id=rec.attempt_id,
                task_id=rec.task_id or "",
                agent=rec.payload.get("agent", ""),
                opened_at=rec.ts,
                ttl=rec.payload.get("ttl_seconds", default_ttl),
                status="open",
            )
        elif rec.action == "attempt.timeout" and rec.attempt_id in attempts:
            attempts[rec.attempt_id] = attempts[rec.attempt_id].closed("timed_out")
        elif rec.action == "agent.result" and rec.attempt_id in attempts:
            attempts[rec.attempt_id] = attempts[rec.attempt_id].closed("completed")
    return attempts


def _as_utc(ts: str):
    parsed = parse_ts(ts)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed


def attempt_expired(attempt: Attempt, now: str) -> bool:
    """Strict expiry: an attempt at exactly opened_at + ttl is still open."""
    return _as_utc(attempt.opened_at) + timedelta(seconds=attempt.ttl) < _as_utc(now)


def workspace_tree_hash(root: str | Path) -> str:
    """Digest over every workspace file path and its octets.

    The event log, its lock file, and the read-model are excluded: they are
    bookkeeping, not workspace. Used as the no-write-on-reject oracle.
    """
    root = Path(root)
    hasher = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if not p.is_file() or p.name in _NON_WORKSPACE:
            continue
        rel = p.relative_to(root).as_posix()
        hasher.update(rel.encode("utf-8") + b"\0")
        hasher.update(p.read_bytes() + b"\0")
    return hasher.hexdigest()


def replay_effects(records: list[EventRecord]) -> dict[str, str]:
    """Re-derive final workspace file contents from accepted proposals.

    Folds every agent.result's patches in log order; the orchestrator's
    EffectReceipt hashes must match these contents exactly.
    """
    contents: dict[str, str] = {}
    for rec in records:
        if rec.action != "agent.result":
            continue
        for proposal in rec.payload.get("proposals", []):
            path = proposal["path"]
            try:
                contents[path] = apply_patch(contents.get(path, ""), proposal["patch"])
            except HunkMismatch:
                # Recorded intention whose effect failed; the log keeps the
                # file.write failure marker, the file itself never changed.
                continue
    return contents


def init_project(
    root: str | Path,
    profile: ProtocolProfile,
    project_name: str,
    now: str,
    catalog: list[dict[str, Any]] | None = None,
    run_id: str | None = None,
    audit_scope: str = ".roadmap/ src/",
) -> Roadmap:
    """Create the project tree with exactly one initialization event."""
    root = Path(root)
    roadmap_dir = root / ROADMAP_DIR
    if roadmap_dir.exists():
        raise AlreadyInitialized(f"{roadmap_dir} already exists")
    roadmap_dir.mkdir(parents=True)
    (roadmap_dir / "specs").mkdir()
    (roadmap_dir / "qa").mkdir()
    (root / "src").mkdir(exist_ok=True)
    schemas_dir = root / "schemas"
    schemas_dir.mkdir(exist_ok=True)
    for name in ("agent_output.schema.json", "roadmap.schema.json"):
        text = resources.files("esaa.schemas").joinpath(name).read_text("utf-8")
        (schemas_dir / name).write_text(text, "utf-8")
    for name in ("AGENT_CONTRACT.yaml", "ORCHESTRATOR_CONTRACT.yaml"):
        target = root / name
        if not target.exists():
            text = resources.files("esaa.defaults").joinpath(name).read_text("utf-8")
            target.write_text(text, "utf-8")

    payload: dict[str, Any] = {
        "run_id": run_id or f"{project_name}-run",
        "project": {
            "name": project_name,
            "created_at": now,
            "audit_scope": audit_scope,
        },
    }
    if profile.name == FULL.name:
        if catalog:
            payload["tasks"] = catalog
    else:
        payload["catalog"] = catalog or []

    store = EventStore(roadmap_dir / ACTIVITY_FILE, profile)
    store.append(action=profile.initial_event, ts=now, payload=payload)
    return Orchestrator(root, profile).reproject()


class Orchestrator:
    """Drives one project rooted at `root`."""

    def __init__(self, root: str | Path, profile: ProtocolProfile | None = None):
        self.root = Path(root)
        self.log_path = self.root / ROADMAP_DIR / ACTIVITY_FILE
        self.roadmap_path = self.root / ROADMAP_DIR / ROADMAP_FILE
        if not self.log_path.exists():
            raise NotInitialized(f"no {ROADMAP_DIR}/{ACTIVITY_FILE} under {self.root}")
        self.profile = profile if profile is not None else self._sniff_profile()
        self.store = EventStore(self.log_path, self.profile)
        contract_path = self.root / "AGENT_CONTRACT.yaml"
        self.contract = (
            BoundaryContract.load(contract_path)
            if contract_path.exists()
            else BoundaryContract.default()
        )
        self.config = OrchestratorConfig.load(self.root / "ORCHESTRATOR_CONTRACT.yaml")

    def _sniff_profile(self) -> ProtocolProfile:
        with open(self.log_path, "rb") as fh:
            first = fh.readline()
        if not first.strip():
            raise NotInitialized(f"{self.log_path} is empty")
        try:
            action = json.loads(first).get("action", "")
        except (json.JSONDecodeError, UnicodeDecodeError, AttributeError):
            action = ""
        try:
            return profile_for_initial_action(action)
        except ValueError:
            return FULL

    # -- read side -------------------------------------------------------

    def records(self) -> list[EventRecord]:
        return self.store.records()

    def roadmap(self) -> Roadmap:
        return project(self.records())

    def reproject(self) -> Roadmap:
        """Rebuild roadmap.json from the log and write it canonically."""
        state = self.roadmap()
        self.roadmap_path.write_bytes(state.serialize())
        return state

    def attempts(self) -> dict[str, Attempt]:
        return derive_attempts(self.records(), self.config.ttl_seconds)

    def _emit_view_mutate(self, appender: Appender, state: Roadmap, now: str, seqs: list[int]) -> None:
        if self.config.emit_view_mutate:
            rec = appender.append(
                action="orchestrator.view.mutate",
                ts=now,
                payload={"projection_hash": state.run.projection_hash_sha256},
            )
            seqs.append(rec.event_seq)

    # -- dispatch --------------------------------------------------------

    def dispatch(self, task_id: str, agent: str, now: str, ttl: int | None = None) -> Attempt:
        """Open an attempt and trigger the agent; appends two events."""
        ttl = ttl if ttl is not None else self.config.ttl_seconds
        with self.store.permit() as appender:
            records = self.records()
            state = project(records)
            task = state.task(task_id)
            if task.state == "done":
                raise AlreadyDone(f"task {task_id!r} is done")
            undone = [d for d in task.depends_on if state.tasks[d].state != "done"]
            if undone:
                raise DependencyUnsatisfied(
                    f"task {task_id!r} has unfinished dependencies {undone}"
                )
            attempts = derive_attempts(records, self.config.ttl_seconds)
            for attempt in attempts.values():
                if attempt.status == "open" and attempt.task_id == task_id:
                    raise AttemptConflict(
                        f"task {task_id!r} already has open attempt {attempt.attempt_id!r}"
                    )
            n_prior = sum(1 for a in attempts.values() if a.task_id == task_id)
            attempt_id = f"att-{task_id}-{n_prior + 1:04d}"
            correlation_id = f"corr-{attempt_id}"
            seqs: list[int] = []
            rec = appender.append(
                action="attempt.create",
                ts=now,
                task_id=task_id,
                attempt_id=attempt_id,
                correlation_id=correlation_id,
                payload={"agent": agent, "ttl_seconds": ttl},
            )
            seqs.append(rec.event_seq)
            rec = appender.append(
                action="orchestrator.dispatch",
                ts=now,
                task_id=task_id,
                attempt_id=attempt_id,
                correlation_id=correlation_id,
                payload={"agent": agent},
            )
            seqs.append(rec.event_seq)
            state = self.reproject()
            self._emit_view_mutate(appender, state, now, seqs)
            if self.config.emit_view_mutate:
                self.reproject()
        return Attempt(attempt_id, task_id, agent, now, ttl, "open")

    # -- submission pipeline ---------------------------------------------

    def handle_agent_output(self, raw: bytes | str | dict[str, Any], now: str) -> PipelineOutcome:
        """Run one envelope through the full validation and effect pipeline."""
        with self.store.permit() as appender:
            records = self.records()
            state = project(records)

            # Stages 1+2: schema, authority.
            validated = validate_envelope(raw)
            if isinstance(validated, list):
                return self._reject(appender, raw, None, validated, now)
            env = validated

            attempts = derive_attempts(records, self.config.ttl_seconds)

            # Stage 3: attempt freshness. Issue reports are not tied to an
            # open attempt: they may target done tasks by design.
            if env.action == "agent.result":
                freshness = self._check_freshness(env, attempts, now)
                if freshness:
                    return self._reject(appender, raw, env, freshness, now)

            # Stage 4: boundary.
            if env.task_id not in state.tasks:
                return self._reject(
                    appender,
                    raw,
                    env,
                    [Violation("boundary-kind", "/task_id", f"unknown task {env.task_id!r}")],
                    now,
                )
            task = state.task(env.task_id)
            boundary = enforce_boundary(env, task, self.contract)
            if env.action == "issue.report":
                # Path prefixes bind file proposals; an issue carries none.
                boundary = [v for v in boundary if v.code != "boundary-path"]
            if boundary:
                return self._reject(appender, raw, env, boundary, now)

            # Stage 5: idempotency.
            replay_of = check_idempotency(env.idempotency_key, records)
            if replay_of is not None:
                return self._reject(
                    appender,
                    raw,
                    env,
                    [
                        Violation(
                            "idempotency-replay",
                            "/idempotency_key",
                            f"key already accepted at event_seq {replay_of}",
                        )
                    ],
                    now,
                )

            # Stage 6: conflict. Every open attempt leases its task's
            # declared files; proposals may not touch another lease.
            if env.action == "agent.result":
                conflicts = self._check_conflicts(env, attempts, state)
                if conflicts:
                    return self._reject(appender, raw, env, conflicts, now)

            if env.action == "issue.report":
                return self._accept_issue(appender, env, state, now)
            return self._accept_result(appender, env, state, now)

    def _check_freshness(
        self, env: AgentOutputEnvelope, attempts: dict[str, Attempt], now: str
    ) -> list[Violation]:
        attempt = attempts.get(env.attempt_id)
        if attempt is None:
            return [
                Violation("stale-attempt", "/attempt_id", f"unknown attempt {env.attempt_id!r}")
            ]
        if attempt.status != "open":
            return [
                Violation(
                    "stale-attempt",
                    "/attempt_id",
                    f"attempt {env.attempt_id!r} is {attempt.status}",
                )
            ]
        if attempt.agent != env.actor:
            return [
                Violation(
                    "stale-attempt",
                    "/actor",
                    f"attempt {env.attempt_id!r} belongs to {attempt.agent!r}",
                )
            ]
        if attempt.task_id != env.task_id:
            return [
                Violation(
                    "stale-attempt",
                    "/task_id",
                    f"attempt {env.attempt_id!r} targets {attempt.task_id!r}",
                )
            ]
        if attempt_expired(attempt, now):
            return [
                Violation(
                    "stale-attempt",
                    "/attempt_id",
                    f"attempt {env.attempt_id!r} exceeded its {attempt.ttl}s ttl",
                )
            ]
        return []

    def _check_conflicts(
        self, env: AgentOutputEnvelope, attempts: dict[str, Attempt], state: Roadmap
    ) -> list[Violation]:
        leased: dict[str, str] = {}
        for attempt in attempts.values():
            if attempt.status != "open" or attempt.attempt_id == env.attempt_id:
                continue
            if attempt.task_id in state.tasks:
                for path in state.tasks[attempt.task_id].files:
                    leased[path] = attempt.attempt_id
        out = []
        for i, proposal in enumerate(env.proposals):
            holder = leased.get(proposal.path)
            if holder is not None:
                out.append(
                    Violation(
                        "conflict",
                        f"/payload/proposals/{i}/path",
                        f"path {proposal.path!r} leased by open attempt {holder!r}",
                    )
                )
        return out

    def _reject(
        self,
        appender: Appender,
        raw: bytes | str | dict[str, Any],
        env: AgentOutputEnvelope | None,
        violations: list[Violation],
        now: str,
    ) -> PipelineOutcome:
        doc = raw if isinstance(raw, dict) else None
        if doc is None:
            try:
                parsed = json.loads(raw)
                doc = parsed if isinstance(parsed, dict) else None
            except (json.JSONDecodeError, UnicodeDecodeError, TypeError):
                doc = None

        def _field(name: str) -> str | None:
            if env is not None:
                return getattr(env, name)
            if doc is not None and isinstance(doc.get(name), str):
                return doc[name]
            return None

        rec = appender.append(
            action="output.rejected",
            ts=now,
            task_id=_field("task_id"),
            correlation_id=_field("correlation_id"),
            attempt_id=_field("attempt_id"),
            idempotency_key=_field("idempotency_key"),
            payload={
                "violations": [v.to_doc() for v in violations],
                "actor": _field("actor") or "unknown",
            },
        )
        self.reproject()
        return PipelineOutcome(
            kind="rejected", events_appended=[rec.event_seq], violations=list(violations)
        )

    def _accept_result(
        self, appender: Appender, env: AgentOutputEnvelope, state: Roadmap, now: str
    ) -> PipelineOutcome:
        seqs: list[int] = []
        payload: dict[str, Any] = {}
        if env.summary is not None:
            payload["summary"] = env.summary
        if env.proposals:
            payload["proposals"] = [
                {"type": p.type, "path": p.path, "patch": p.patch} for p in env.proposals
            ]
        # Trace-first: the intention is durable before any effect applies.
        rec = appender.append(
            action="agent.result",
            ts=now,
            actor=env.actor,
            task_id=env.task_id,
            correlation_id=env.correlation_id,
            attempt_id=env.attempt_id,
            idempotency_key=env.idempotency_key,
            payload=payload,
        )
        seqs.append(rec.event_seq)

        receipts: list[EffectReceipt] = []
        failures: list[str] = []
        for proposal in env.proposals:
            target = self.root / proposal.path
            try:
                base = target.read_text("utf-8") if target.exists() else ""
                content = apply_patch(base, proposal.patch)
                target.parent.mkdir(parents=True, exist_ok=True)
                data = content.encode("utf-8")
                target.write_bytes(data)
                receipt = EffectReceipt(
                    path=proposal.path,
                    bytes_written=len(data),
                    content_hash=hashlib.sha256(data).hexdigest(),
                )
                receipts.append(receipt)
                rec = appender.append(
                    action="orchestrator.file.write",
                    ts=now,
                    task_id=env.task_id,
                    correlation_id=env.correlation_id,
                    attempt_id=env.attempt_id,
                    payload=receipt.to_doc(),
                )
                seqs.append(rec.event_seq)
            except (HunkMismatch, OSError, UnicodeDecodeError) as exc:
                failures.append(f"{proposal.path}: {exc}")
                rec = appender.append(
                    action="orchestrator.file.write",
                    ts=now,
                    task_id=env.task_id,
                    correlation_id=env.correlation_id,
                    attempt_id=env.attempt_id,
                    payload={"path": proposal.path, "failed": True, "error": str(exc)},
                )
                seqs.append(rec.event_seq)

        rec = appender.append(
            action="task.update",
            ts=now,
            task_id=env.task_id,
            correlation_id=env.correlation_id,
            attempt_id=env.attempt_id,
            payload={"state": "done"},
        )
        seqs.append(rec.event_seq)
        state = self.reproject()
        self._emit_view_mutate(appender, state, now, seqs)
        if self.config.emit_view_mutate:
            self.reproject()
        return PipelineOutcome(
            kind="accepted", events_appended=seqs, receipts=receipts, effect_failures=failures
        )

    def _accept_issue(
        self, appender: Appender, env: AgentOutputEnvelope, state: Roadmap, now: str
    ) -> PipelineOutcome:
        reported = state.task(env.task_id)
        seqs: list[int] = []
        payload: dict[str, Any] = {
            "issue": {
                "title": env.issue.title,
                "details": env.issue.details,
                "severity": env.issue.severity,
            }
        }
        if env.summary is not None:
            payload["summary"] = env.summary
        rec = appender.append(
            action="issue.report",
            ts=now,
            actor=env.actor,
            task_id=env.task_id,
            correlation_id=env.correlation_id,
            attempt_id=env.attempt_id,
            idempotency_key=env.idempotency_key,
            payload=payload,
        )
        seqs.append(rec.event_seq)

        n = 1 + sum(1 for tid in state.tasks if tid.startswith(f"{env.task_id}-hotfix-"))
        hotfix_id = f"{env.task_id}-hotfix-{n}"
        rec = appender.append(
            action="task.create",
            ts=now,
            task_id=hotfix_id,
            correlation_id=env.correlation_id,
            payload={
                "task": {
                    "task_id": hotfix_id,
                    "kind": "emergency_patch",
                    "title": f"Hotfix: {env.issue.title}",
                    "depends_on": [env.task_id],
                    "files": list(reported.files),
                }
            },
        )
        seqs.append(rec.event_seq)
        state = self.reproject()
        self._emit_view_mutate(appender, state, now, seqs)
        if self.config.emit_view_mutate:
            self.reproject()
        return PipelineOutcome(kind="accepted", events_appended=seqs)

    def report_issue(self, env: AgentOutputEnvelope, now: str) -> PipelineOutcome:
        """Issue intake for an already validated envelope."""
        state = self.roadmap()
        if env.task_id not in state.tasks:
            raise UnknownTask(f"unknown task {env.task_id!r}")
        with self.store.permit() as appender:
            return self._accept_issue(appender, env, self.roadmap(), now)

    # -- simplified-profile kernel operations ------------------------------

    def _fold(self, records: list[EventRecord]) -> Roadmap | None:
        state: Roadmap | None = None
        for rec in records:
            state = apply_event(state, rec)
        return state

    def _checked_append(
        self,
        appender: Appender,
        *,
        action: str,
        ts: str,
        actor: str = "orchestrator",
        task_id: str | None = None,
        payload: dict[str, Any] | None = None,
        acceptance_results: dict[str, bool] | None = None,
    ) -> EventRecord:
        """Fold-preview then append: nothing is written unless the event folds."""
        state = self._fold(self.records())
        candidate = EventRecord(
            event_seq=appender.next_seq,
            ts=ts,
            action=action,
            actor=actor,
            task_id=task_id,
            payload=payload or {},
            acceptance_results=acceptance_results,
        )
        apply_event(state, candidate)
        return appender.append(
            action=action,
            ts=ts,
            actor=actor,
            task_id=task_id,
            payload=payload,
            acceptance_results=acceptance_results,
        )

    def claim_task(self, task_id: str, agent: str, now: str) -> EventRecord:
        with self.store.permit() as appender:
            rec = self._checked_append(
                appender, action="claim", ts=now, actor=agent, task_id=task_id
            )
            self.reproject()
        return rec

    def complete_task(
        self, task_id: str, agent: str, now: str, acceptance: dict[str, bool] | None = None
    ) -> EventRecord:
        with self.store.permit() as appender:
            rec = self._checked_append(
                appender,
                action="complete",
                ts=now,
                actor=agent,
                task_id=task_id,
                acceptance_results=acceptance,
            )
            self.reproject()
        return rec

    def promote_task(self, task_id: str, now: str) -> EventRecord:
        with self.store.permit() as appender:
            rec = self._checked_append(appender, action="promote", ts=now, task_id=task_id)
            self.reproject()
        return rec

    def announce_phase(self, phase_id: str, now: str) -> EventRecord:
        with self.store.permit() as appender:
            rec = self._checked_append(
                appender, action="phase.complete", ts=now, payload={"phase_id": phase_id}
            )
            self.reproject()
        return rec

    # -- attempt expiry and run closure -----------------------------------

    def expire_attempts(self, now: str) -> list[EventRecord]:
        """Time out every open attempt past its ttl; tasks return to todo."""
        out: list[EventRecord] = []
        with self.store.permit() as appender:
            records = self.records()
            for attempt in derive_attempts(records, self.config.ttl_seconds).values():
                if attempt.status == "open" and attempt_expired(attempt, now):
                    rec = appender.append(
                        action="attempt.timeout",
                        ts=now,
                        task_id=attempt.task_id,
                        attempt_id=attempt.attempt_id,
                        payload={"agent": attempt.agent, "ttl_seconds": attempt.ttl},
                    )
                    out.append(rec)
            if out:
                self.reproject()
        return out

    def end_run(self, now: str) -> EventRecord:
        """Close the run: success iff every task is done and the audit passed."""
        with self.store.permit() as appender:
            state = project(self.records())
            status = "success" if state.all_done() and state.run.verify_status == "ok" else "failed"
            rec = appender.append(action="run.end", ts=now, payload={"status": status})
            self.reproject()
        return rec
