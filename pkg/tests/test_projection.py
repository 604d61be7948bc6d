"""Projection fold: state machines, done-immutability, indexes, diffs.

The two-task oracle below is an independent hand model of the simplified
lifecycle; every op sequence up to length four is folded through both routes
and the outcomes must agree exactly.
"""

from __future__ import annotations

import itertools
import json

import pytest

from esaa.canonical import compute_projection_hash
from esaa.errors import (
    DependencyUnsatisfied,
    DoneRegression,
    IllegalTransition,
    ProjectionError,
)
from esaa.projection import (
    Roadmap,
    apply_event,
    diff_projections,
    project,
    roadmap_from_doc,
)
from esaa.store import EventRecord, read_all
from tests.conftest import FIXTURES

TS = "2026-04-01T09:00:00+00:00"


def rec(seq: int, action: str, **kwargs) -> EventRecord:
    kwargs.setdefault("actor", "orchestrator")
    return EventRecord(event_seq=seq, ts=TS, action=action, **kwargs)


def chain_init(seq: int = 0) -> EventRecord:
    return rec(
        seq,
        "roadmap.version",
        payload={
            "run_id": "r-chain",
            "project": {"name": "chain", "created_at": TS, "audit_scope": ".roadmap/ src/"},
            "catalog": [
                {"task_id": "T-A", "kind": "impl", "title": "A", "depends_on": [], "files": []},
                {"task_id": "T-B", "kind": "impl", "title": "B", "depends_on": ["T-A"], "files": []},
            ],
        },
    )


def simplified_events(*ops: tuple[str, str]) -> list[EventRecord]:
    events = [chain_init()]
    for i, (op, tid) in enumerate(ops, start=1):
        if op == "complete":
            events.append(rec(i, op, actor="agent-x", task_id=tid, acceptance_results={"ok": True}))
        elif op == "claim":
            events.append(rec(i, op, actor="agent-x", task_id=tid, acceptance_results=None))
        else:
            events.append(rec(i, op, task_id=tid))
    return events


# -- independent oracle -----------------------------------------------------

DEPS = {"T-A": (), "T-B": ("T-A",)}


def oracle_fold(ops: tuple[tuple[str, str], ...]) -> str:
    """Hand model: returns ok | done-regression | dependency | illegal."""
    state = {"T-A": "backlog", "T-B": "backlog"}
    for op, tid in ops:
        current = state[tid]
        if current == "done":
            return "done-regression"
        if op == "promote":
            if current != "backlog":
                return "illegal"
            if any(state[d] != "done" for d in DEPS[tid]):
                return "dependency"
            state[tid] = "ready"
        elif op == "claim":
            if current != "ready":
                return "illegal"
        elif op == "complete":
            if current != "ready":
                return "illegal"
            state[tid] = "done"
    return "ok"


def implementation_fold(ops: tuple[tuple[str, str], ...]) -> str:
    try:
        project(simplified_events(*ops))
    except DoneRegression:
        return "done-regression"
    except DependencyUnsatisfied:
        return "dependency"
    except IllegalTransition:
        return "illegal"
    return "ok"


ALPHABET = [
    (op, tid) for op in ("promote", "claim", "complete") for tid in ("T-A", "T-B")
]


def test_two_task_chain_exhaustive_against_oracle() -> None:
    checked = 0
    for length in range(1, 5):
        for ops in itertools.product(ALPHABET, repeat=length):
            assert implementation_fold(ops) == oracle_fold(ops), f"diverged on {ops}"
            checked += 1
    assert checked == 6 + 36 + 216 + 1296


# -- simplified profile pins -------------------------------------------------

class TestSimplifiedFold:
    def test_claim_then_complete_records_acceptance(self) -> None:
        events = [chain_init()]
        events.append(rec(1, "promote", task_id="T-A"))
        events.append(rec(2, "claim", actor="claude-opus-4-6", task_id="T-A"))
        events.append(
            rec(
                3,
                "complete",
                actor="claude-opus-4-6",
                task_id="T-A",
                acceptance_results={"Rules documented": True},
            )
        )
        state = project(events)
        task = state.tasks["T-A"]
        assert task.state == "done"
        assert task.claimed_by == "claude-opus-4-6"
        assert task.acceptance_results == {"Rules documented": True}

    def test_claim_does_not_change_state(self) -> None:
        events = [chain_init(), rec(1, "promote", task_id="T-A"),
                  rec(2, "claim", actor="agent-x", task_id="T-A")]
        state = project(events)
        assert state.tasks["T-A"].state == "ready"
        assert state.tasks["T-A"].claimed_by == "agent-x"

    def test_promote_with_backlog_dependency(self) -> None:
        with pytest.raises(DependencyUnsatisfied):
            project(simplified_events(("promote", "T-B")))

    def test_unknown_task(self) -> None:
        events = [chain_init(), rec(1, "promote", task_id="T-Z")]
        with pytest.raises(ProjectionError):
            project(events)

    def test_phase_complete_requires_all_members_done(self) -> None:
        init = chain_init()
        catalog = init.payload["catalog"]
        for entry in catalog:
            entry["phase_id"] = "PH-1"
        early = [init, rec(1, "phase.complete", payload={"phase_id": "PH-1"})]
        with pytest.raises(IllegalTransition):
            project(early)
        done_first = [
            init,
            rec(1, "promote", task_id="T-A"),
            rec(2, "complete", actor="agent-x", task_id="T-A", acceptance_results={"ok": True}),
            rec(3, "promote", task_id="T-B"),
            rec(4, "complete", actor="agent-x", task_id="T-B", acceptance_results={"ok": True}),
            rec(5, "phase.complete", payload={"phase_id": "PH-1"}),
        ]
        state = project(done_first)
        assert state.indexes()["by_phase"]["PH-1"]["complete"] is True
        assert state.run.status == "success"

    def test_run_status_running_while_incomplete(self) -> None:
        events = simplified_events(("promote", "T-A"))
        assert project(events).run.status == "running"


# -- full profile pins --------------------------------------------------------

def full_init(tasks: list[dict] | None = None) -> EventRecord:
    return rec(
        0,
        "run.init",
        payload={
            "run_id": "r-full",
            "project": {"name": "full", "created_at": TS, "audit_scope": ".roadmap/ src/"},
            "tasks": tasks
            if tasks is not None
            else [
                {"task_id": "T-A", "kind": "impl", "title": "A", "depends_on": [], "files": []},
                {"task_id": "T-B", "kind": "impl", "title": "B", "depends_on": ["T-A"], "files": []},
            ],
        },
    )


class TestFullFold:
    def test_attempt_then_done(self) -> None:
        events = [
            full_init(),
            rec(1, "attempt.create", task_id="T-A", payload={"agent": "agent-x", "ttl_seconds": 60}),
            rec(2, "orchestrator.dispatch", task_id="T-A", payload={"agent": "agent-x"}),
            rec(3, "task.update", task_id="T-A", payload={"state": "done"}),
        ]
        state = project(events)
        assert state.tasks["T-A"].state == "done"
        assert state.tasks["T-A"].claimed_by == "agent-x"

    def test_task_update_out_of_done_is_regression(self) -> None:
        events = [
            full_init(),
            rec(1, "task.update", task_id="T-A", payload={"state": "done"}),
            rec(2, "task.update", task_id="T-A", payload={"state": "in_progress"}),
        ]
        with pytest.raises(DoneRegression):
            project(events)

    def test_attempt_on_done_is_regression(self) -> None:
        events = [
            full_init(),
            rec(1, "task.update", task_id="T-A", payload={"state": "done"}),
            rec(2, "attempt.create", task_id="T-A", payload={"agent": "agent-x"}),
        ]
        with pytest.raises(DoneRegression):
            project(events)

    def test_dispatch_with_unfinished_dependency(self) -> None:
        events = [
            full_init(),
            rec(1, "attempt.create", task_id="T-B", payload={"agent": "agent-x"}),
        ]
        with pytest.raises(DependencyUnsatisfied):
            project(events)

    def test_attempt_timeout_returns_task_to_todo(self) -> None:
        events = [
            full_init(),
            rec(1, "attempt.create", task_id="T-A", payload={"agent": "agent-x"}),
            rec(2, "attempt.timeout", task_id="T-A", payload={}),
        ]
        state = project(events)
        assert state.tasks["T-A"].state == "todo"
        assert state.tasks["T-A"].claimed_by is None

    def test_task_create_and_duplicate(self) -> None:
        new_task = {"task_id": "T-C", "kind": "qa", "title": "C", "depends_on": [], "files": []}
        events = [full_init(), rec(1, "task.create", payload={"task": new_task})]
        assert project(events).tasks["T-C"].state == "todo"
        with pytest.raises(IllegalTransition):
            project(events + [rec(2, "task.create", payload={"task": new_task})])

    def test_blocked_is_reachable_only_via_task_update(self) -> None:
        events = [full_init(), rec(1, "task.update", task_id="T-A", payload={"state": "blocked"})]
        assert project(events).tasks["T-A"].state == "blocked"

    def test_verify_events_set_verify_status(self) -> None:
        events = [full_init(), rec(1, "verify.start"), rec(2, "verify.fail", payload={"verify_status": "mismatch"})]
        assert project(events).run.verify_status == "mismatch"
        events += [rec(3, "verify.start"), rec(4, "verify.ok")]
        assert project(events).run.verify_status == "ok"

    def test_run_end_is_terminal(self) -> None:
        ended = [full_init(), rec(1, "run.end", payload={"status": "success"})]
        assert project(ended).run.status == "success"
        with pytest.raises(IllegalTransition):
            project(ended + [rec(2, "run.end", payload={"status": "success"})])
        with pytest.raises(IllegalTransition):
            project(ended + [rec(2, "task.update", task_id="T-A", payload={"state": "done"})])


# -- project() level ----------------------------------------------------------

class TestProject:
    def test_empty_event_list_rejected(self) -> None:
        with pytest.raises(ProjectionError):
            project([])

    def test_seq_density_enforced(self) -> None:
        events = [chain_init(), rec(2, "promote", task_id="T-A")]
        with pytest.raises(ProjectionError, match="seq"):
            project(events)

    def test_error_carries_offending_seq(self) -> None:
        events = simplified_events(("claim", "T-A"))
        with pytest.raises(IllegalTransition) as exc:
            project(events)
        assert exc.value.event_seq == 1

    def test_clinic_fixture_projects_to_recorded_indexes(self) -> None:
        records = read_all(FIXTURES / "activity_31.jsonl")
        state = project(records)
        sizes = {s: len(ids) for s, ids in state.indexes()["by_state"].items()}
        assert sizes == {"done": 31, "ready": 2, "backlog": 17}
        complete = [p for p, e in state.indexes()["by_phase"].items() if e["complete"]]
        assert len(complete) == 8

    def test_determinism_and_digest(self) -> None:
        records = read_all(FIXTURES / "activity_31.jsonl")
        first = project(records)
        second = project(records)
        assert first.serialize() == second.serialize()
        assert first.run.projection_hash_sha256 == second.run.projection_hash_sha256
        doc = json.loads(first.serialize().decode("utf-8"))
        assert doc["run"]["projection_hash_sha256"] == compute_projection_hash(doc)

    def test_index_derivability(self) -> None:
        records = read_all(FIXTURES / "activity_30.jsonl")
        state = project(records)
        doc = state.to_doc()
        rebuilt = roadmap_from_doc(doc, state.profile)
        assert rebuilt.indexes() == doc["indexes"]

    def test_task_count_never_decreases(self) -> None:
        records = read_all(FIXTURES / "activity_31.jsonl")
        state: Roadmap | None = None
        last = 0
        for record in records:
            state = apply_event(state, record)
            assert len(state.tasks) >= last
            last = len(state.tasks)
        assert last == 50

    def test_done_prefix_monotonicity_on_fixture(self) -> None:
        records = read_all(FIXTURES / "activity_31.jsonl")
        done: set[str] = set()
        state: Roadmap | None = None
        for record in records:
            state = apply_event(state, record)
            now_done = {t.task_id for t in state.tasks.values() if t.state == "done"}
            assert done <= now_done
            done = now_done


class TestDiffProjections:
    def test_same_state_empty_diff(self) -> None:
        records = read_all(FIXTURES / "activity_31.jsonl")
        state = project(records)
        assert diff_projections(state, state) == {}

    def test_single_complete_changes_one_task(self) -> None:
        before = project(simplified_events(("promote", "T-A")))
        after = project(simplified_events(("promote", "T-A"), ("complete", "T-A")))
        diff = diff_projections(before, after)
        assert list(diff["tasks"]) == ["T-A"]

    def test_burst_window_diff_shows_claims_and_completes(self) -> None:
        records = read_all(FIXTURES / "activity_31.jsonl")
        at_57 = project(records[:58])
        at_68 = project(records[:69])
        diff = diff_projections(at_57, at_68)
        changed = diff["tasks"]
        assert sorted(changed) == ["T-2301", "T-2302", "T-2303", "T-2401", "T-2403"]
        claimed = {t for t, d in changed.items() if d.get("claimed_by", {}).get("b") == "claude-opus-4-6"}
        assert len(claimed) == 5
        completed = {t for t, d in changed.items() if d.get("state", {}).get("b") == "done"}
        assert completed == {"T-2301", "T-2302"}

    def test_empty_diff_iff_digests_match(self) -> None:
        records = read_all(FIXTURES / "activity_31.jsonl")
        a = project(records[:58])
        b = project(records[:69])
        assert diff_projections(a, b) != {}
        assert a.run.projection_hash_sha256 != b.run.projection_hash_sha256
