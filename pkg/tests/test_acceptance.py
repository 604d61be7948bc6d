"""Acceptance gate: eight checks, one test (and one pass/fail line) each.

Run with ``pytest -v tests/test_acceptance.py`` to get exactly one verdict
line per criterion. Expectations are frozen literals; nothing here is read
back from the implementation under test.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import shutil
import threading
import time
from pathlib import Path

from esaa.canonical import canonicalize, compute_projection_hash
from esaa.cli import main
from esaa.errors import DoneRegression, ProjectionError
from esaa.orchestrator import Orchestrator, init_project
from esaa.profiles import get_profile
from esaa.projection import apply_event, project, roadmap_from_doc
from esaa.sim import ScenarioConfig, run_scenario
from esaa.store import EventRecord, read_all, tail_verify_counts
from esaa.verify import esaa_verify

from conftest import FIXTURES, SCENARIOS, envelope_for

CLINIC_STATE_INDEX = {"done": 31, "ready": 2, "backlog": 17}
CLINIC_TAIL_COUNTS = {
    "claim": 30,
    "complete": 30,
    "promote": 17,
    "phase.complete": 8,
    "roadmap.version": 1,
}

# Per-kind write permissions: one allowed and one disallowed probe each.
BOUNDARY_GRID = (
    ("spec", ".roadmap/specs/design.md", "accepted"),
    ("spec", "src/sneaky.py", "rejected"),
    ("impl", "src/feature.py", "accepted"),
    ("impl", ".roadmap/specs/rewrite.md", "rejected"),
    ("qa", ".roadmap/qa/review.md", "accepted"),
    ("qa", "src/patch.py", "rejected"),
    ("emergency_patch", "src/hotfix.py", "accepted"),
    ("emergency_patch", ".roadmap/specs/scope.md", "rejected"),
)

ALLOWED_HOME = {
    "spec": ".roadmap/specs/home.md",
    "impl": "src/home.py",
    "qa": ".roadmap/qa/home.md",
    "emergency_patch": "src/home.py",
}


def _verdict(line: str) -> None:
    print(f"{line}: PASS")


def tree_hash(root: Path) -> str:
    """Digest of every workspace file outside .roadmap/ (paths and bytes)."""
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if ".roadmap" in p.parts or not p.is_file():
            continue
        h.update(str(p.relative_to(root)).encode())
        h.update(b"\x00")
        h.update(p.read_bytes())
        h.update(b"\x00")
    return h.hexdigest()


def test_criterion_1_desk_scale_run(tmp_path: Path) -> None:
    """Bundled nine-task scenario: exactly 49 events, run success, verify 0."""
    started = time.monotonic()
    report = run_scenario(ScenarioConfig.load(SCENARIOS / "landing_page.json"), tmp_path)
    log = tmp_path / ".roadmap" / "activity.jsonl"
    assert report.wall_events == 49
    assert len(log.read_bytes().splitlines()) == 49
    assert report.final_state_index["done"] == 9
    assert report.run_status == "success"
    assert main(["--root", str(tmp_path), "verify", "--read-only"]) == 0
    assert len(log.read_bytes().splitlines()) == 49
    elapsed = time.monotonic() - started
    assert elapsed < 5.0
    _verdict(f"criterion 1 (desk-scale run, 49 events, {elapsed:.2f}s)")


def test_criterion_2_clinic_fixture_projection() -> None:
    """86-event fixture logs: frozen state index, phases, per-action counts."""
    started = time.monotonic()
    records_31 = read_all(FIXTURES / "activity_31.jsonl")
    assert isinstance(records_31, list) and len(records_31) == 86
    state = project(records_31)
    assert state.state_counts() == CLINIC_STATE_INDEX
    phases = state.indexes()["by_phase"]
    assert len(phases) == 15
    assert sum(1 for p in phases.values() if p["complete"]) == 8

    records_30 = read_all(FIXTURES / "activity_30.jsonl")
    assert isinstance(records_30, list) and len(records_30) == 86
    assert tail_verify_counts(records_30) == CLINIC_TAIL_COUNTS
    assert project(records_30).state_counts() == {"done": 30, "ready": 3, "backlog": 17}
    elapsed = time.monotonic() - started
    assert elapsed < 2.0
    _verdict(f"criterion 2 (clinic fixture projection, {elapsed:.2f}s)")


def test_criterion_3_zero_rejection_compliance(tmp_path: Path) -> None:
    """Compliant-only population over 32 tasks: rejected_count stays zero."""
    cfg = ScenarioConfig.load(SCENARIOS / "compliance.json")
    assert len(cfg.catalog) >= 30
    report = run_scenario(cfg, tmp_path)
    assert report.rejected_count == 0
    assert report.rejection_codes == {}
    assert report.final_state_index["done"] == len(cfg.catalog)
    assert report.run_status == "success"
    _verdict(f"criterion 3 (zero rejections across {len(cfg.catalog)} tasks)")


def test_criterion_4_tamper_detection(tmp_path: Path) -> None:
    """100/100 single-byte flips in hashed regions flip the verdict."""
    log_bytes = (FIXTURES / "activity_31.jsonl").read_bytes()
    roadmap_bytes = (FIXTURES / "roadmap_31.json").read_bytes()
    log = tmp_path / "activity.jsonl"
    roadmap = tmp_path / "roadmap.json"

    log.write_bytes(log_bytes)
    roadmap.write_bytes(roadmap_bytes)
    assert esaa_verify(log, roadmap).verify_status == "ok"  # untampered control

    rng = random.Random(20260826)
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"

    # Hashed regions of the stored read-model: everything outside the run
    # block (the run block is excluded from the digest by design).
    text = roadmap_bytes.decode("ascii")
    run_start = text.index('"run":') - 1  # include the leading comma
    run_end = text.index('"schema_version"', run_start)
    roadmap_positions = [
        i for i in range(len(roadmap_bytes) - 1) if not run_start <= i < run_end
    ]

    # Hashed regions of the log: the action value of each non-initial line
    # (actions drive the fold, so any change must surface during replay).
    action_spans = []
    offset = 0
    for line in log_bytes.splitlines(keepends=True):
        m = re.search(rb'"action":"([a-z.]+)"', line)
        if offset > 0:
            action_spans.extend(range(offset + m.start(1), offset + m.end(1)))
        offset += len(line)

    detected = 0
    for flip in range(100):
        if flip % 2 == 0:
            pos = rng.choice(roadmap_positions)
            original = roadmap_bytes[pos]
            replacement = rng.choice([c for c in alphabet if ord(c) != original])
            tampered = roadmap_bytes[:pos] + replacement.encode() + roadmap_bytes[pos + 1 :]
            log.write_bytes(log_bytes)
            roadmap.write_bytes(tampered)
        else:
            pos = rng.choice(action_spans)
            original = log_bytes[pos]
            replacement = rng.choice([c for c in alphabet[:26] if ord(c) != original])
            tampered = log_bytes[:pos] + replacement.encode() + log_bytes[pos + 1 :]
            log.write_bytes(tampered)
            roadmap.write_bytes(roadmap_bytes)
        if esaa_verify(log, roadmap).verify_status in ("mismatch", "corrupted"):
            detected += 1

    assert detected == 100
    log.write_bytes(log_bytes)
    roadmap.write_bytes(roadmap_bytes)
    assert esaa_verify(log, roadmap).verify_status == "ok"  # control still ok
    _verdict("criterion 4 (tamper detection 100/100, control ok)")


def test_criterion_5_deterministic_serialization() -> None:
    """Same log, projected twice plus a serialization round trip: same octets."""
    log = FIXTURES / "activity_31.jsonl"
    first = project(read_all(log)).with_hash()
    second = project(read_all(log)).with_hash()
    octets_a = first.serialize()
    octets_b = second.serialize()

    doc = json.loads(octets_a.decode("utf-8"))
    octets_c = canonicalize(doc)
    octets_d = roadmap_from_doc(doc, first.profile).with_hash().serialize()

    assert octets_a == octets_b == octets_c == octets_d
    assert octets_a == (FIXTURES / "roadmap_31.json").read_bytes()
    digest = doc["run"]["projection_hash_sha256"]
    assert re.fullmatch(r"[a-f0-9]{64}", digest)
    assert digest == compute_projection_hash(doc)
    _verdict("criterion 5 (byte-identical projection and round trip)")


def test_criterion_6_done_immutability_property() -> None:
    """10,000 generated event sequences: done tasks never leave done, and
    every injected regression folds to DoneRegression."""
    catalog = [
        {"task_id": "T-1", "kind": "impl", "title": "one", "depends_on": [],
         "files": [], "phase_id": "PH-1"},
        {"task_id": "T-2", "kind": "impl", "title": "two", "depends_on": ["T-1"],
         "files": [], "phase_id": "PH-1"},
        {"task_id": "T-3", "kind": "qa", "title": "three", "depends_on": [],
         "files": [], "phase_id": "PH-1"},
    ]
    genesis = EventRecord(
        event_seq=0,
        ts="2026-06-01T08:00:00+00:00",
        action="roadmap.version",
        payload={"project": {"name": "prop"}, "catalog": catalog, "run_id": "run-prop"},
    )
    task_ids = ("T-1", "T-2", "T-3")
    agents = ("agent-a", "agent-b")
    rng = random.Random(424242)
    sequences = 10_000
    injected = 0
    regressions_caught = 0

    for _ in range(sequences):
        state = apply_event(None, genesis)
        done_seen: set[str] = set()
        seq = 1
        inject_at = rng.randrange(1, 11)
        for step in range(rng.randrange(4, 11)):
            roll = rng.random()
            tid = rng.choice(task_ids)
            if roll < 0.40:
                ev = EventRecord(seq, "2026-06-01T08:01:00+00:00", "promote", task_id=tid)
            elif roll < 0.55:
                ev = EventRecord(
                    seq, "2026-06-01T08:01:00+00:00", "claim",
                    actor=rng.choice(agents), task_id=tid,
                )
            elif roll < 0.90:
                ev = EventRecord(
                    seq, "2026-06-01T08:01:00+00:00", "complete",
                    actor=rng.choice(agents), task_id=tid,
                    acceptance_results={"checked": True},
                )
            else:
                ev = EventRecord(
                    seq, "2026-06-01T08:01:00+00:00", "phase.complete",
                    payload={"phase_id": "PH-1"},
                )
            try:
                state = apply_event(state, ev)
            except ProjectionError:
                continue  # the kernel would reject it; nothing was appended
            seq += 1
            for tid_done in done_seen:
                assert state.tasks[tid_done].state == "done"
            done_seen |= {t for t, e in state.tasks.items() if e.state == "done"}

            if done_seen and step >= inject_at:
                target = rng.choice(sorted(done_seen))
                action = rng.choice(("promote", "claim", "complete"))
                bad = EventRecord(
                    seq, "2026-06-01T08:02:00+00:00", action,
                    actor="agent-rogue", task_id=target,
                )
                injected += 1
                try:
                    apply_event(state, bad)
                except DoneRegression:
                    regressions_caught += 1
                assert state.tasks[target].state == "done"
                inject_at = 10_000  # at most one injection per sequence

    assert injected == regressions_caught
    assert injected >= 1_000
    _verdict(
        f"criterion 6 (done immutable over {sequences} sequences, "
        f"{injected} injected regressions all caught)"
    )


def test_criterion_7_concurrent_submission(tmp_path: Path) -> None:
    """4 workers, 20 tasks, one scripted minute: gapless seqs, claim burst."""
    catalog = [
        {"task_id": f"T-{700 + i}", "kind": "impl", "title": f"job {i}",
         "depends_on": [], "files": [], "phase_id": "PH-70", "state": "ready"}
        for i in range(20)
    ]
    init_project(
        tmp_path,
        profile=get_profile("simplified"),
        project_name="burst",
        now="2026-06-01T09:59:00+00:00",
        catalog=catalog,
        run_id="run-burst",
    )
    stamp = "2026-06-01T10:00:30+00:00"
    barrier = threading.Barrier(4)
    failures: list[BaseException] = []

    def worker(index: int) -> None:
        orch = Orchestrator(tmp_path)
        mine = catalog[index * 5 : index * 5 + 5]
        barrier.wait()
        try:
            for entry in mine:
                orch.claim_task(entry["task_id"], f"agent-w{index + 1}", stamp)
        except BaseException as exc:  # surfaced after join
            failures.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert failures == []

    records = Orchestrator(tmp_path).records()
    assert [r.event_seq for r in records] == list(range(21))
    claims = [r for r in records if r.action == "claim"]
    assert len(claims) == 20
    per_agent = {a: sum(1 for c in claims if c.actor == a) for a in
                 ("agent-w1", "agent-w2", "agent-w3", "agent-w4")}
    assert per_agent == {"agent-w1": 5, "agent-w2": 5, "agent-w3": 5, "agent-w4": 5}

    # Burst pattern: at least five claims inside one scripted minute whose
    # seqs are consecutive.
    bursts = 0
    for i in range(len(records) - 4):
        window = records[i : i + 5]
        if (
            all(r.action == "claim" for r in window)
            and len({r.ts[:16] for r in window}) == 1
            and [r.event_seq for r in window]
            == list(range(window[0].event_seq, window[0].event_seq + 5))
        ):
            bursts += 1
    assert bursts >= 1
    _verdict(f"criterion 7 (gapless seqs 0..20, {bursts} burst windows)")


def test_criterion_8_boundary_enforcement(tmp_path: Path) -> None:
    """Kind/path grid (8 cases) plus traversal and absolute probes."""
    outcomes = []

    def run_case(case: int, kind: str, path: str, expect: str) -> None:
        root = tmp_path / f"case-{case}"
        declared = path if expect == "accepted" else ALLOWED_HOME[kind]
        init_project(
            root,
            profile=get_profile("full-0.3.0"),
            project_name="grid",
            now="2026-07-01T09:00:00+00:00",
            catalog=[{"task_id": "T-1", "kind": kind, "title": f"{kind} case",
                      "depends_on": [], "files": [declared]}],
            run_id=f"run-grid-{case}",
        )
        orch = Orchestrator(root)
        attempt = orch.dispatch("T-1", "agent-probe", "2026-07-01T09:05:00+00:00")
        before = tree_hash(root)
        outcome = orch.handle_agent_output(
            envelope_for(orch, attempt, path=path), "2026-07-01T09:06:00+00:00"
        )
        assert outcome.kind == expect, (kind, path, outcome.violations)
        if expect == "accepted":
            assert (root / path).is_file()
        else:
            assert [v.code for v in outcome.violations] == ["boundary-path"]
            assert tree_hash(root) == before
        outcomes.append((kind, path, outcome.kind))

    for case, (kind, path, expect) in enumerate(BOUNDARY_GRID):
        run_case(case, kind, path, expect)

    # Traversal probe: inside-looking prefix that escapes after resolution.
    run_case(len(BOUNDARY_GRID), "impl", "src/../escape.txt", "rejected")

    # Absolute-path probe: rejected by the envelope schema itself.
    root = tmp_path / "case-absolute"
    init_project(
        root,
        profile=get_profile("full-0.3.0"),
        project_name="grid",
        now="2026-07-01T09:00:00+00:00",
        catalog=[{"task_id": "T-1", "kind": "impl", "title": "absolute",
                  "depends_on": [], "files": ["src/home.py"]}],
        run_id="run-grid-abs",
    )
    orch = Orchestrator(root)
    attempt = orch.dispatch("T-1", "agent-probe", "2026-07-01T09:05:00+00:00")
    before = tree_hash(root)
    outcome = orch.handle_agent_output(
        envelope_for(orch, attempt, path="/tmp/esaa-escape.txt"),
        "2026-07-01T09:06:00+00:00",
    )
    assert outcome.kind == "rejected"
    assert "schema" in [v.code for v in outcome.violations]
    assert tree_hash(root) == before
    assert not Path("/tmp/esaa-escape.txt").exists()

    assert len(outcomes) == 9
    _verdict("criterion 8 (boundary grid 8/8 plus traversal and absolute probes)")


def test_log_size_report() -> None:
    """Desk-scale stand-in for runtime overhead: the 86-event fixture log
    lands within +/-50% of 15 KB."""
    for name in ("activity_30.jsonl", "activity_31.jsonl"):
        size = (FIXTURES / name).stat().st_size
        assert 7_500 <= size <= 22_500, (name, size)
        print(f"log size report: {name} = {size} bytes ({size / 1000:.1f} KB)")
    _verdict("log size report (within 7.5-22.5 KB)")
