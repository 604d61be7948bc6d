"""Pure fold of the event log into the roadmap read-model.

The read-model is never edited in place: every event application returns a
new state, and the serialized document is a function of the event sequence
alone. Task state machines, dependency gating, immutability of done tasks,
and phase completion are all enforced here, so a log that replays cleanly
is a proof that every recorded transition was legal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable

from .canonical import canonicalize, compute_projection_hash
from .errors import (
    DependencyUnsatisfied,
    DoneRegression,
    IllegalTransition,
    ProjectionError,
    UnknownTask,
)
from .profiles import TASK_KINDS, ProtocolProfile, profile_for_initial_action
from .store import EventRecord

SCHEMA_VERSION = "0.3.0"

# Full-profile actions that may not follow run.end.
_TASK_MUTATING = frozenset(
    {"attempt.create", "attempt.timeout", "orchestrator.dispatch", "task.create", "task.update"}
)


@dataclass(frozen=True)
class TaskEntry:
    """One task row of the read-model."""

    task_id: str
    kind: str
    title: str
    state: str
    depends_on: tuple[str, ...] = ()
    files: tuple[str, ...] = ()
    phase_id: str | None = None
    acceptance_results: dict[str, bool] | None = None
    claimed_by: str | None = None

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "task_id": self.task_id,
            "kind": self.kind,
            "title": self.title,
            "state": self.state,
            "depends_on": list(self.depends_on),
            "files": list(self.files),
        }
        if self.phase_id is not None:
            doc["phase_id"] = self.phase_id
        if self.acceptance_results is not None:
            doc["acceptance_results"] = self.acceptance_results
        if self.claimed_by is not None:
            doc["claimed_by"] = self.claimed_by
        return doc


@dataclass(frozen=True)
class RunMeta:
    run_id: str
    status: str  # initialized | running | success | failed
    last_event_seq: int
    last_event_ts: str
    verify_status: str = "ok"
    projection_hash_sha256: str | None = None

    def to_doc(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "run_id": self.run_id,
            "status": self.status,
            "last_event_seq": self.last_event_seq,
            "last_event_ts": self.last_event_ts,
            "verify_status": self.verify_status,
        }
        if self.projection_hash_sha256 is not None:
            doc["projection_hash_sha256"] = self.projection_hash_sha256
        return doc


@dataclass(frozen=True)
class Roadmap:
    """Projected state; serialization is canonical and fully derived."""

    profile: ProtocolProfile
    project: dict[str, str]
    run: RunMeta
    tasks: dict[str, TaskEntry] = field(default_factory=dict)
    ended: bool = False  # run.end seen (full profile); not serialized

    def task(self, task_id: str) -> TaskEntry:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise UnknownTask(f"unknown task {task_id!r}") from None

    def phases(self) -> dict[str, list[str]]:
        """phase_id -> sorted member task ids, for tasks that declare one."""
        out: dict[str, list[str]] = {}
        for task in self.tasks.values():
            if task.phase_id is not None:
                out.setdefault(task.phase_id, []).append(task.task_id)
        return {pid: sorted(ids) for pid, ids in sorted(out.items())}

    def indexes(self) -> dict[str, Any]:
        if not self.tasks:
            return {}
        by_state: dict[str, list[str]] = {s: [] for s in self.profile.task_states}
        for task in self.tasks.values():
            by_state.setdefault(task.state, []).append(task.task_id)
        by_phase = {
            pid: {
                "task_ids": ids,
                "complete": all(self.tasks[t].state == "done" for t in ids),
            }
            for pid, ids in self.phases().items()
        }
        by_agent: dict[str, list[str]] = {}
        for task in self.tasks.values():
            if task.claimed_by is not None:
                by_agent.setdefault(task.claimed_by, []).append(task.task_id)
        return {
            "by_state": {s: sorted(ids) for s, ids in by_state.items()},
            "by_phase": by_phase,
            "by_agent": {a: sorted(ids) for a, ids in sorted(by_agent.items())},
        }

    def state_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in self.profile.task_states}
        for task in self.tasks.values():
            counts[task.state] = counts.get(task.state, 0) + 1
        return counts

    def all_done(self) -> bool:
        return bool(self.tasks) and all(t.state == "done" for t in self.tasks.values())

    def to_doc(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "project": dict(self.project),
            "run": self.run.to_doc(),
            "tasks": [self.tasks[tid].to_doc() for tid in sorted(self.tasks)],
            "indexes": self.indexes(),
        }

    def serialize(self) -> bytes:
        return canonicalize(self.to_doc())

    def with_hash(self) -> "Roadmap":
        """Stamp run.projection_hash_sha256 from the current hashed content."""
        digest = compute_projection_hash(self.to_doc())
        return replace(self, run=replace(self.run, projection_hash_sha256=digest))


def _catalog_entry(raw: Any, profile: ProtocolProfile) -> TaskEntry:
    if not isinstance(raw, dict):
        raise ProjectionError("catalog entry is not an object")
    try:
        task_id = raw["task_id"]
        kind = raw["kind"]
        title = raw["title"]
    except KeyError as exc:
        raise ProjectionError(f"catalog entry missing {exc.args[0]!r}") from None
    if kind not in TASK_KINDS:
        raise ProjectionError(f"task {task_id!r} has unknown kind {kind!r}")
    state = raw.get("state", profile.initial_task_state)
    if state not in profile.task_states:
        raise ProjectionError(f"task {task_id!r} has state {state!r} outside {profile.name} profile")
    return TaskEntry(
        task_id=task_id,
        kind=kind,
        title=title,
        state=state,
        depends_on=tuple(raw.get("depends_on", ())),
        files=tuple(raw.get("files", ())),
        phase_id=raw.get("phase_id"),
    )


def _load_catalog(raw_list: Any, profile: ProtocolProfile) -> dict[str, TaskEntry]:
    tasks: dict[str, TaskEntry] = {}
    for raw in raw_list or []:
        entry = _catalog_entry(raw, profile)
        if entry.task_id in tasks:
            raise ProjectionError(f"duplicate task id {entry.task_id!r} in catalog")
        tasks[entry.task_id] = entry
    for task in tasks.values():
        for dep in task.depends_on:
            if dep not in tasks:
                raise ProjectionError(f"task {task.task_id!r} depends on unknown {dep!r}")
    _check_acyclic(tasks)
    return tasks


def _check_acyclic(tasks: dict[str, TaskEntry]) -> None:
    seen: dict[str, int] = {}  # 1 = on stack, 2 = finished

    def visit(tid: str, stack: list[str]) -> None:
        mark = seen.get(tid)
        if mark == 2:
            return
        if mark == 1:
            raise ProjectionError(f"dependency cycle through {tid!r}")
        seen[tid] = 1
        for dep in tasks[tid].depends_on:
            visit(dep, stack)
        seen[tid] = 2

    for tid in tasks:
        visit(tid, [])


def _initial_state(ev: EventRecord) -> Roadmap:
    profile = profile_for_initial_action(ev.action)
    payload = ev.payload
    project_raw = payload.get("project") or {}
    project = {
        "name": project_raw.get("name", "unnamed"),
        "created_at": project_raw.get("created_at", ev.ts),
        "audit_scope": project_raw.get("audit_scope", ".roadmap/ src/"),
    }
    catalog_key = "tasks" if profile.name == "full-0.3.0" else "catalog"
    tasks = _load_catalog(payload.get(catalog_key), profile)
    run = RunMeta(
        run_id=payload.get("run_id", "run-0"),
        status="initialized",
        last_event_seq=ev.event_seq,
        last_event_ts=ev.ts,
    )
    return Roadmap(profile=profile, project=project, run=run, tasks=tasks)


def _deps_done(state: Roadmap, task: TaskEntry) -> None:
    undone = [d for d in task.depends_on if state.tasks[d].state != "done"]
    if undone:
        raise DependencyUnsatisfied(
            f"task {task.task_id!r} has unfinished dependencies {undone}"
        )


def _set_task(state: Roadmap, task: TaskEntry) -> Roadmap:
    tasks = dict(state.tasks)
    tasks[task.task_id] = task
    return replace(state, tasks=tasks)


def _apply_full(state: Roadmap, ev: EventRecord) -> Roadmap:
    action = ev.action
    if action == "run.init":
        raise IllegalTransition("run.init after event zero")
    if state.ended and action in _TASK_MUTATING:
        raise IllegalTransition(f"{action} after run.end")

    if action == "attempt.create":
        task = state.task(_require_task_id(ev))
        if task.state == "done":
            raise DoneRegression(f"attempt on done task {task.task_id!r}")
        if task.state == "in_progress":
            raise IllegalTransition(f"task {task.task_id!r} already has an open attempt")
        _deps_done(state, task)
        agent = ev.payload.get("agent")
        return _set_task(state, replace(task, state="in_progress", claimed_by=agent))

    if action == "orchestrator.dispatch":
        task = state.task(_require_task_id(ev))
        if task.state == "done":
            raise DoneRegression(f"dispatch on done task {task.task_id!r}")
        _deps_done(state, task)
        if task.state != "in_progress":
            state = _set_task(state, replace(task, state="in_progress"))
        return state

    if action == "attempt.timeout":
        task = state.task(_require_task_id(ev))
        if task.state == "done":
            raise DoneRegression(f"timeout on done task {task.task_id!r}")
        return _set_task(state, replace(task, state="todo", claimed_by=None))

    if action == "task.create":
        raw = ev.payload.get("task")
        entry = _catalog_entry(raw, state.profile)
        if entry.task_id in state.tasks:
            raise IllegalTransition(f"task id {entry.task_id!r} already exists")
        for dep in entry.depends_on:
            if dep not in state.tasks:
                raise UnknownTask(f"task {entry.task_id!r} depends on unknown {dep!r}")
        return _set_task(state, entry)

    if action == "task.update":
        task = state.task(_require_task_id(ev))
        target = ev.payload.get("state")
        if target not in state.profile.task_states:
            raise IllegalTransition(f"task.update target {target!r} invalid")
        if task.state == "done":
            raise DoneRegression(f"task {task.task_id!r} is done and immutable")
        updated = replace(task, state=target)
        if ev.acceptance_results is not None:
            updated = replace(updated, acceptance_results=ev.acceptance_results)
        return _set_task(state, updated)

    if action == "verify.ok":
        return replace(state, run=replace(state.run, verify_status="ok"))
    if action == "verify.fail":
        status = ev.payload.get("verify_status", "mismatch")
        if status not in ("mismatch", "corrupted"):
            status = "mismatch"
        return replace(state, run=replace(state.run, verify_status=status))
    if action == "run.end":
        if state.ended:
            raise IllegalTransition("run already ended")
        status = ev.payload.get("status")
        if status not in ("success", "failed"):
            raise IllegalTransition(f"run.end status {status!r} invalid")
        return replace(state, run=replace(state.run, status=status), ended=True)

    if action == "orchestrator.file.write" and ev.payload.get("failed") is True:
        return replace(state, run=replace(state.run, status="failed"))

    # agent.result, issue.report, output.rejected, orchestrator.file.write,
    # orchestrator.view.mutate, verify.start: trace events, no state change.
    return state


def _apply_simplified(state: Roadmap, ev: EventRecord) -> Roadmap:
    action = ev.action
    if action == "roadmap.version":
        raise IllegalTransition("roadmap.version after event zero")

    if action == "promote":
        task = state.task(_require_task_id(ev))
        if task.state == "done":
            raise DoneRegression(f"promote on done task {task.task_id!r}")
        if task.state != "backlog":
            raise IllegalTransition(f"promote on {task.state} task {task.task_id!r}")
        _deps_done(state, task)
        return _set_task(state, replace(task, state="ready"))

    if action == "claim":
        task = state.task(_require_task_id(ev))
        if task.state == "done":
            raise DoneRegression(f"claim on done task {task.task_id!r}")
        if task.state != "ready":
            raise IllegalTransition(f"claim on {task.state} task {task.task_id!r}")
        return _set_task(state, replace(task, claimed_by=ev.actor))

    if action == "complete":
        task = state.task(_require_task_id(ev))
        if task.state == "done":
            raise DoneRegression(f"complete on done task {task.task_id!r}")
        if task.state != "ready":
            raise IllegalTransition(f"complete on {task.state} task {task.task_id!r}")
        updated = replace(task, state="done", acceptance_results=ev.acceptance_results)
        state = _set_task(state, updated)
        if state.all_done():
            state = replace(state, run=replace(state.run, status="success"))
        return state

    if action == "phase.complete":
        phase_id = ev.payload.get("phase_id") or ev.task_id
        members = [t for t in state.tasks.values() if t.phase_id == phase_id]
        if not members:
            raise UnknownTask(f"phase {phase_id!r} has no tasks")
        undone = sorted(t.task_id for t in members if t.state != "done")
        if undone:
            raise IllegalTransition(f"phase {phase_id!r} incomplete: {undone}")
        return state

    raise IllegalTransition(f"action {action!r} not part of the simplified fold")


def _require_task_id(ev: EventRecord) -> str:
    if not ev.task_id:
        raise ProjectionError(f"{ev.action} event lacks task_id")
    return ev.task_id


def apply_event(state: Roadmap | None, ev: EventRecord) -> Roadmap:
    """Fold one event; raises a ProjectionError subtype on an illegal one."""
    try:
        if state is None:
            if ev.event_seq != 0:
                raise ProjectionError(f"first event has seq {ev.event_seq}, expected 0")
            return _initial_state(ev)
        if ev.event_seq != state.run.last_event_seq + 1:
            raise ProjectionError(
                f"event seq {ev.event_seq} does not follow {state.run.last_event_seq}"
            )
        if not state.profile.allows(ev.action):
            raise IllegalTransition(
                f"action {ev.action!r} not in {state.profile.name} vocabulary"
            )
        if state.profile.name == "full-0.3.0":
            out = _apply_full(state, ev)
        else:
            out = _apply_simplified(state, ev)
        run = replace(out.run, last_event_seq=ev.event_seq, last_event_ts=ev.ts)
        if run.status == "initialized":
            run = replace(run, status="running")
        return replace(out, run=run)
    except ProjectionError as exc:
        raise exc.at(ev.event_seq)


def project(events: Iterable[EventRecord]) -> Roadmap:
    """Left fold from event zero; stamps the projection hash at the end."""
    state: Roadmap | None = None
    for ev in events:
        state = apply_event(state, ev)
    if state is None:
        raise ProjectionError("empty log: no initial event")
    return state.with_hash()


def roadmap_from_doc(doc: dict[str, Any], profile: ProtocolProfile) -> Roadmap:
    """Rebuild a Roadmap from its serialized document (for diffing)."""
    try:
        run_doc = doc["run"]
        run = RunMeta(
            run_id=run_doc["run_id"],
            status=run_doc["status"],
            last_event_seq=run_doc["last_event_seq"],
            last_event_ts=run_doc["last_event_ts"],
            verify_status=run_doc["verify_status"],
            projection_hash_sha256=run_doc.get("projection_hash_sha256"),
        )
        tasks = {}
        for t in doc["tasks"]:
            tasks[t["task_id"]] = TaskEntry(
                task_id=t["task_id"],
                kind=t["kind"],
                title=t["title"],
                state=t["state"],
                depends_on=tuple(t.get("depends_on", ())),
                files=tuple(t.get("files", ())),
                phase_id=t.get("phase_id"),
                acceptance_results=t.get("acceptance_results"),
                claimed_by=t.get("claimed_by"),
            )
        return Roadmap(
            profile=profile, project=dict(doc["project"]), run=run, tasks=tasks
        )
    except (KeyError, TypeError) as exc:
        raise ProjectionError(f"stored roadmap document is malformed: {exc}") from exc


def diff_projections(a: Roadmap, b: Roadmap) -> dict[str, Any]:
    """Structural diff with sections project / tasks / run.

    The project and tasks sections cover exactly the hashed content (indexes
    are derived from tasks), so the diff has no such entries iff the two
    digests match. Run differences are reported separately: they are real but
    excluded from the hash by construction.
    """
    diff: dict[str, Any] = {}
    project_diff = {
        key: {"a": a.project.get(key), "b": b.project.get(key)}
        for key in sorted(set(a.project) | set(b.project))
        if a.project.get(key) != b.project.get(key)
    }
    if project_diff:
        diff["project"] = project_diff

    tasks_diff: dict[str, Any] = {}
    for tid in sorted(set(a.tasks) | set(b.tasks)):
        ta, tb = a.tasks.get(tid), b.tasks.get(tid)
        if ta == tb:
            continue
        if ta is None or tb is None:
            tasks_diff[tid] = {"a": ta.to_doc() if ta else None, "b": tb.to_doc() if tb else None}
            continue
        da, db = ta.to_doc(), tb.to_doc()
        fields = {
            key: {"a": da.get(key), "b": db.get(key)}
            for key in sorted(set(da) | set(db))
            if da.get(key) != db.get(key)
        }
        tasks_diff[tid] = fields
    if tasks_diff:
        diff["tasks"] = tasks_diff

    ra, rb = a.run.to_doc(), b.run.to_doc()
    run_diff = {
        key: {"a": ra.get(key), "b": rb.get(key)}
        for key in sorted(set(ra) | set(rb))
        if ra.get(key) != rb.get(key)
    }
    if run_diff:
        diff["run"] = run_diff
    return diff


def hashed_sections_differ(diff: dict[str, Any]) -> bool:
    """True iff the diff implies different projection digests."""
    return bool(diff.get("project")) or bool(diff.get("tasks"))
