#!/usr/bin/env python3
"""Generate the clinic-asr fixture logs, their roadmaps, and scenario files.

One event table drives everything: two labeled fixture variants (the
31-done log and the 30-complete log that matches the tabulated per-action
counts), the extract file with the concurrent-claim burst, canonical
roadmap.json documents for both, and the scenario plan that reproduces the
30-variant through the kernel.

Fixture lines are written in the foreign wire shape: local timestamps
without offsets, agent_id for attribution, explicit nulls, no event_seq.
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timedelta
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from esaa.projection import project  # noqa: E402
from esaa.store import read_all  # noqa: E402

SONNET = "claude-sonnet-4-6"
CODEX = "codex-gpt-5"
ANTI = "antigravity-gemini-3-pro"
OPUS = "claude-opus-4-6"

BASE = datetime(2026, 2, 19, 9, 0, 0)

# phase -> [(task_id, kind, title, depends_on)]
PHASES: dict[str, list[tuple[str, str, str, list[str]]]] = {
    "PH-19": [
        ("T-1901", "spec", "DB: patients table schema", []),
        ("T-1902", "spec", "DB: sessions table schema", []),
        ("T-1903", "spec", "DB: transcripts table schema", []),
        ("T-1904", "spec", "DB: audit log schema", []),
    ],
    "PH-20": [
        ("T-2001", "spec", "API: auth contract", ["T-1901"]),
        ("T-2002", "spec", "API: sessions endpoints", []),
        ("T-2003", "spec", "API: transcripts endpoints", []),
        ("T-2004", "spec", "API: SSE stream contract", []),
    ],
    "PH-21": [
        ("T-2101", "spec", "UI: app shell architecture", ["T-2001"]),
        ("T-2102", "spec", "UI: session timeline view", []),
        ("T-2103", "spec", "UI: live transcript view", []),
        ("T-2104", "spec", "UI: settings view", []),
    ],
    "PH-22": [
        ("T-2201", "qa", "Tests: unit test plan", ["T-2101"]),
        ("T-2202", "qa", "Tests: API contract tests", []),
        ("T-2203", "qa", "Tests: E2E scenarios", []),
        ("T-2204", "qa", "Tests: load test plan", []),
    ],
    "PH-23": [
        ("T-2301", "spec", "Security: data handling rules", ["T-2201"]),
        ("T-2302", "spec", "Security: SSE event vocabulary", ["T-2202"]),
        ("T-2303", "spec", "Security: consent flows", ["T-2203"]),
    ],
    "PH-24": [
        ("T-2401", "spec", "Obs: observability strategy", ["T-2201"]),
        ("T-2402", "spec", "Config: configuration audit", ["T-2104"]),
        ("T-2403", "spec", "Release: deployment guide", ["T-2204"]),
    ],
    "PH-25": [
        ("T-2501", "spec", "Config: runtime config design", ["T-1901"]),
        ("T-2502", "impl", "Config: loader implementation", ["T-1902"]),
        ("T-2503", "impl", "Config: validation rules", ["T-1903"]),
        ("T-2504", "impl", "Config: secrets handling", ["T-1904"]),
    ],
    "PH-26": [
        ("T-2601", "impl", "DB: persistence layer", ["T-2001"]),
        ("T-2602", "impl", "DB: repository layer", ["T-2002"]),
        ("T-2603", "impl", "API: service integration", ["T-2003"]),
        ("T-2604", "impl", "API: session service", ["T-2004"]),
    ],
    "PH-27": [
        ("T-2701", "impl", "UI: app shell", ["T-2301"]),
        ("T-2702", "impl", "UI: routing", ["T-2701"]),
        ("T-2703", "impl", "UI: state store", ["T-2701"]),
    ],
    "PH-28": [
        ("T-2801", "impl", "UI: session list", ["T-2501"]),
        ("T-2802", "impl", "UI: session detail", ["T-2502"]),
        ("T-2803", "impl", "UI: search", ["T-2503"]),
    ],
    "PH-29": [
        ("T-2901", "impl", "UI: live transcript pane", ["T-2601"]),
        ("T-2902", "impl", "UI: speaker labels", ["T-2602"]),
        ("T-2903", "impl", "UI: confidence display", ["T-2603"]),
    ],
    "PH-30": [
        ("T-3001", "impl", "UI: settings forms", ["T-2501"]),
        ("T-3002", "impl", "UI: theme support", ["T-2502"]),
        ("T-3003", "impl", "UI: keyboard shortcuts", ["T-2503"]),
    ],
    "PH-31": [
        ("T-3101", "impl", "UI: error states", ["T-2101"]),
        ("T-3102", "impl", "UI: offline mode", ["T-2102"]),
        ("T-3103", "impl", "UI: accessibility pass", ["T-2103"]),
    ],
    "PH-32": [
        ("T-3201", "impl", "UI: performance tuning", ["T-2702"]),
        ("T-3202", "impl", "UI: bundle optimization", ["T-2703"]),
        ("T-3203", "impl", "UI: telemetry hooks", ["T-2401"]),
    ],
    "PH-33": [
        ("T-3301", "qa", "Release: hardening review", ["T-2702"]),
        ("T-3302", "qa", "Release: final sign-off", ["T-3301"]),
    ],
}

READY_SEED_PHASES = ("PH-19", "PH-20", "PH-21", "PH-22")

ACCEPTANCE = {
    "T-2301": "Rules documented",
    "T-2302": "Events documented",
    "T-2303": "Flows documented",
}
PHASE_ACCEPTANCE = {
    "PH-19": "Schema reviewed",
    "PH-20": "Contract approved",
    "PH-21": "Architecture approved",
    "PH-22": "Test plan approved",
    "PH-24": "Strategy documented",
    "PH-25": "Config validated",
    "PH-26": "Integration verified",
    "PH-27": "UI verified",
}

_PHASE_OF = {tid: pid for pid, rows in PHASES.items() for tid, *_ in rows}


def acceptance_for(task_id: str) -> dict[str, bool]:
    crit = ACCEPTANCE.get(task_id) or PHASE_ACCEPTANCE.get(_PHASE_OF[task_id], "Delivered")
    return {crit: True}


def ts_at(minutes: float = 0, *, exact: str | None = None) -> str:
    if exact is not None:
        return exact
    return (BASE + timedelta(minutes=minutes)).strftime("%Y-%m-%dT%H:%M:%S")


def catalog() -> list[dict]:
    out = []
    for pid, rows in PHASES.items():
        for tid, kind, title, deps in rows:
            entry = {
                "task_id": tid,
                "kind": kind,
                "title": title,
                "depends_on": deps,
                "files": [],
                "phase_id": pid,
            }
            if pid in READY_SEED_PHASES:
                entry["state"] = "ready"
            out.append(entry)
    return out


def claim(tid: str, agent: str, ts: str) -> dict:
    return {"kind": "claim", "task_id": tid, "agent": agent, "ts": ts}


def complete(tid: str, agent: str, ts: str) -> dict:
    return {
        "kind": "complete",
        "task_id": tid,
        "agent": agent,
        "ts": ts,
        "acceptance": acceptance_for(tid),
    }


def promote(tid: str, ts: str) -> dict:
    return {"kind": "promote", "task_id": tid, "ts": ts}


def phase_done(pid: str, ts: str) -> dict:
    return {"kind": "phase.complete", "phase_id": pid, "ts": ts}


def wave(agent: str, task_ids: list[str], start_min: int) -> list[dict]:
    """Claim/complete pairs: claim at t, complete at t+15, next claim at t+25."""
    out = []
    m = start_min
    for tid in task_ids:
        out.append(claim(tid, agent, ts_at(m)))
        out.append(complete(tid, agent, ts_at(m + 15)))
        m += 25
    return out


def common_prefix() -> list[dict]:
    """Events 1..68, shared by both fixture variants."""
    events: list[dict] = []
    events += wave(SONNET, ["T-1901", "T-1902", "T-1903", "T-1904"], 5)
    events += wave(SONNET, ["T-2001", "T-2002", "T-2003", "T-2004"], 105)
    events += wave(CODEX, ["T-2101", "T-2102", "T-2103", "T-2104"], 205)
    events += wave(CODEX, ["T-2201", "T-2202", "T-2203", "T-2204"], 305)
    promote_ids = [tid for pid in ("PH-23", "PH-24", "PH-25", "PH-26") for tid, *_ in PHASES[pid]]
    for i, tid in enumerate(promote_ids):
        events.append(promote(tid, ts_at(400 + 2 * i)))
    events.append(claim("T-2501", SONNET, "2026-02-19T20:30:00"))
    events.append(claim("T-2502", CODEX, "2026-02-19T20:32:00"))
    events.append(claim("T-2503", ANTI, "2026-02-19T20:34:00"))
    events.append(claim("T-2601", ANTI, "2026-02-19T21:54:55"))
    events.append(claim("T-2602", ANTI, "2026-02-19T21:54:57"))
    events.append(claim("T-2603", ANTI, "2026-02-19T21:54:59"))
    events.append(claim("T-2604", ANTI, "2026-02-19T21:55:02"))
    events.append(complete("T-2602", ANTI, "2026-02-19T21:55:10"))
    events.append(complete("T-2603", ANTI, "2026-02-19T21:55:20"))
    events.append(complete("T-2604", ANTI, "2026-02-19T21:55:30"))
    events.append(complete("T-2601", ANTI, "2026-02-19T21:55:40"))
    events.append(claim("T-2301", OPUS, "2026-02-19T21:55:44"))
    events.append(claim("T-2302", OPUS, "2026-02-19T21:55:45"))
    events.append(claim("T-2303", OPUS, "2026-02-19T21:55:46"))
    events.append(claim("T-2401", OPUS, "2026-02-19T21:55:47"))
    events.append(claim("T-2403", OPUS, "2026-02-19T21:55:48"))
    events.append(complete("T-2301", OPUS, "2026-02-19T21:56:10"))
    events.append(complete("T-2302", OPUS, "2026-02-19T21:56:20"))
    events.append(phase_done("PH-19", "2026-02-19T21:57:00"))
    events.append(phase_done("PH-20", "2026-02-19T21:57:05"))
    events.append(phase_done("PH-21", "2026-02-19T21:57:10"))
    events.append(phase_done("PH-22", "2026-02-19T21:57:15"))
    return events


def shared_tail() -> list[dict]:
    """Events 69..75, also shared."""
    return [
        complete("T-2303", OPUS, "2026-02-19T22:05:00"),
        phase_done("PH-23", "2026-02-19T22:06:00"),
        claim("T-2402", CODEX, "2026-02-19T22:10:00"),
        complete("T-2401", OPUS, "2026-02-19T22:15:00"),
        complete("T-2402", CODEX, "2026-02-19T22:20:00"),
        complete("T-2403", OPUS, "2026-02-19T22:25:00"),
        phase_done("PH-24", "2026-02-19T22:26:00"),
    ]


def tail_31() -> list[dict]:
    """31 completes in total: T-2504 and T-2701 finish unclaimed."""
    return [
        complete("T-2501", SONNET, "2026-02-19T22:40:00"),
        complete("T-2502", CODEX, "2026-02-19T22:50:00"),
        complete("T-2503", ANTI, "2026-02-19T23:00:00"),
        complete("T-2504", SONNET, "2026-02-19T23:10:00"),
        phase_done("PH-25", "2026-02-19T23:11:00"),
        phase_done("PH-26", "2026-02-19T23:12:00"),
        promote("T-2701", "2026-02-19T23:30:00"),
        complete("T-2701", OPUS, "2026-02-20T00:10:00"),
        promote("T-2702", "2026-02-20T00:12:00"),
        promote("T-2703", "2026-02-20T00:14:00"),
    ]


def tail_30() -> list[dict]:
    """Exactly 30 claims and 30 completes, matching the count table."""
    return [
        claim("T-2504", SONNET, "2026-02-19T22:30:00"),
        complete("T-2501", SONNET, "2026-02-19T22:40:00"),
        complete("T-2502", CODEX, "2026-02-19T22:50:00"),
        complete("T-2503", ANTI, "2026-02-19T23:00:00"),
        complete("T-2504", SONNET, "2026-02-19T23:10:00"),
        phase_done("PH-25", "2026-02-19T23:11:00"),
        phase_done("PH-26", "2026-02-19T23:12:00"),
        promote("T-2701", "2026-02-19T23:30:00"),
        promote("T-2801", "2026-02-20T00:12:00"),
        promote("T-2802", "2026-02-20T00:14:00"),
    ]


def version_line() -> dict:
    return {
        "ts": "2026-02-19T09:00:00",
        "action": "roadmap.version",
        "payload": {
            "run_id": "clinic-asr-0001",
            "project": {
                "name": "clinic-asr",
                "created_at": "2026-02-19T09:00:00",
                "audit_scope": ".roadmap/ src/",
            },
            "catalog": catalog(),
        },
    }


def event_line(ev: dict) -> dict:
    """Foreign wire shape, key order: ts, action, task_id, agent_id, acceptance_results."""
    if ev["kind"] == "claim":
        return {
            "ts": ev["ts"],
            "action": "claim",
            "task_id": ev["task_id"],
            "agent_id": ev["agent"],
            "acceptance_results": None,
        }
    if ev["kind"] == "complete":
        return {
            "ts": ev["ts"],
            "action": "complete",
            "task_id": ev["task_id"],
            "agent_id": ev["agent"],
            "acceptance_results": ev["acceptance"],
        }
    if ev["kind"] == "promote":
        return {"ts": ev["ts"], "action": "promote", "task_id": ev["task_id"]}
    return {"ts": ev["ts"], "action": "phase.complete", "payload": {"phase_id": ev["phase_id"]}}


def dump_jsonl(docs: list[dict], path: Path) -> None:
    text = "".join(
        json.dumps(doc, separators=(",", ":"), ensure_ascii=False) + "\n" for doc in docs
    )
    path.write_bytes(text.encode("utf-8"))


def plan_step(ev: dict) -> dict:
    ts = ev["ts"] + "-03:00"  # kernel-written logs carry the local offset
    if ev["kind"] == "claim":
        return {"op": "claim", "task_id": ev["task_id"], "agent": ev["agent"], "ts": ts}
    if ev["kind"] == "complete":
        return {
            "op": "complete",
            "task_id": ev["task_id"],
            "agent": ev["agent"],
            "ts": ts,
            "acceptance_results": ev["acceptance"],
        }
    if ev["kind"] == "promote":
        return {"op": "promote", "task_id": ev["task_id"], "ts": ts}
    return {"op": "phase.complete", "phase_id": ev["phase_id"], "ts": ts}


def landing_page_scenario() -> dict:
    tasks = [
        ("T-1000", "spec", "Spec: page structure and copy", [], ".roadmap/specs/structure.md"),
        ("T-1010", "spec", "Spec: visual design", ["T-1000"], ".roadmap/specs/design.md"),
        ("T-1020", "spec", "Spec: interactions", ["T-1010"], ".roadmap/specs/interactions.md"),
        ("T-1030", "spec", "Spec: acceptance checklist", ["T-1020"], ".roadmap/specs/acceptance.md"),
        ("T-1100", "impl", "Implement index.html", ["T-1030"], "src/index.html"),
        ("T-1110", "impl", "Implement styles.css", ["T-1100"], "src/styles.css"),
        ("T-1120", "impl", "Implement app.js", ["T-1110"], "src/app.js"),
        ("T-1200", "qa", "QA: functional review", ["T-1120"], ".roadmap/qa/functional.md"),
        ("T-1210", "qa", "QA: release sign-off", ["T-1200"], ".roadmap/qa/signoff.md"),
    ]
    return {
        "name": "landing_page",
        "profile": "full-0.3.0",
        "project_name": "landing-page",
        "run_id": "landing-page-0001",
        "seed": 1,
        "clock": {"start": "2026-02-10T09:00:00-03:00", "step_seconds": 60},
        "catalog": [
            {
                "task_id": tid,
                "kind": kind,
                "title": title,
                "depends_on": deps,
                "files": [path],
            }
            for tid, kind, title, deps, path in tasks
        ],
        "agents": [
            {"agent_id": "agent-codex-gpt-5-3", "behavior": "compliant", "task_quota": 4, "kinds": ["spec"]},
            {"agent_id": "agent-claude-opus-4-6", "behavior": "compliant", "task_quota": 3, "kinds": ["impl"]},
            {"agent_id": "agent-antigravity-gemini-3-pro", "behavior": "compliant", "task_quota": 2, "kinds": ["qa"]},
        ],
    }


def compliance_scenario() -> dict:
    return {
        "name": "compliance",
        "profile": "full-0.3.0",
        "project_name": "compliance-batch",
        "run_id": "compliance-0001",
        "seed": 11,
        "clock": {"start": "2026-03-02T08:00:00-03:00", "step_seconds": 30},
        "catalog": [
            {
                "task_id": f"T-{5000 + i}",
                "kind": "impl",
                "title": f"Module {i:02d}",
                "depends_on": [],
                "files": [f"src/module_{i:02d}.txt"],
            }
            for i in range(32)
        ],
        "agents": [
            {"agent_id": f"agent-worker-{n}", "behavior": "compliant", "task_quota": 8}
            for n in range(1, 5)
        ],
    }


def adversarial_scenario() -> dict:
    return {
        "name": "adversarial",
        "profile": "full-0.3.0",
        "project_name": "adversarial-probe",
        "run_id": "adversarial-0001",
        "seed": 3,
        "clock": {"start": "2026-03-03T08:00:00-03:00", "step_seconds": 30},
        "catalog": [
            {
                "task_id": f"T-{9100 + i}",
                "kind": "impl",
                "title": f"Probe target {i}",
                "depends_on": [],
                "files": [f"src/probe_{i}.txt"],
            }
            for i in range(3)
        ],
        "agents": [
            {"agent_id": "agent-mangler", "behavior": "schema-violator", "task_quota": 3},
            {"agent_id": "agent-escaper", "behavior": "path-escaper", "task_quota": 3},
            {"agent_id": "agent-sleeper", "behavior": "stale-submitter", "task_quota": 3},
        ],
    }


def main() -> None:
    fixtures = REPO / "fixtures" / "clinic_asr"
    scenarios = REPO / "scenarios"
    fixtures.mkdir(parents=True, exist_ok=True)
    scenarios.mkdir(parents=True, exist_ok=True)

    prefix = common_prefix()
    events_31 = prefix + shared_tail() + tail_31()
    events_30 = prefix + shared_tail() + tail_30()
    assert len(events_31) == 85 and len(events_30) == 85

    lines_31 = [version_line()] + [event_line(ev) for ev in events_31]
    lines_30 = [version_line()] + [event_line(ev) for ev in events_30]
    dump_jsonl(lines_31, fixtures / "activity_31.jsonl")
    dump_jsonl(lines_30, fixtures / "activity_30.jsonl")
    dump_jsonl(lines_31[58:65], fixtures / "extract.jsonl")

    for name in ("activity_31", "activity_30"):
        records = read_all(fixtures / f"{name}.jsonl")
        if isinstance(records, list):
            state = project(records)
            (fixtures / f"roadmap_{name.split('_')[1]}.json").write_bytes(state.serialize())
        else:
            raise SystemExit(f"{name}: {records}")

    clinic = {
        "name": "clinic_asr",
        "profile": "simplified",
        "project_name": "clinic-asr",
        "run_id": "clinic-asr-0001",
        "seed": 0,
        "clock": {"start": "2026-02-19T09:00:00-03:00", "step_seconds": 60},
        "catalog": catalog(),
        "agents": [
            {"agent_id": agent, "behavior": "compliant"}
            for agent in (SONNET, CODEX, ANTI, OPUS)
        ],
        "plan": [plan_step(ev) for ev in events_30],
    }
    (scenarios / "clinic_asr.json").write_text(json.dumps(clinic, indent=2) + "\n", "utf-8")
    (scenarios / "landing_page.json").write_text(
        json.dumps(landing_page_scenario(), indent=2) + "\n", "utf-8"
    )
    (scenarios / "compliance.json").write_text(
        json.dumps(compliance_scenario(), indent=2) + "\n", "utf-8"
    )
    (scenarios / "adversarial.json").write_text(
        json.dumps(adversarial_scenario(), indent=2) + "\n", "utf-8"
    )

    for name, events in (("activity_31", events_31), ("activity_30", events_30)):
        counts: dict[str, int] = {"roadmap.version": 1}
        for ev in events:
            counts[ev["kind"]] = counts.get(ev["kind"], 0) + 1
        print(name, counts)


if __name__ == "__main__":
    main()
