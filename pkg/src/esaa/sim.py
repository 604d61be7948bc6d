"""Deterministic multi-agent simulation harness.

Scenarios drive the real orchestrator pipeline with scripted agents and a
scripted clock, so a (config, seed) pair reproduces the exact same log
octets every run. Agents are protocol-visible behaviors only: compliant
ones emit valid envelopes, adversarial ones violate one specific rule each
(schema, path escape, idempotency replay, stale submission).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Any

from .errors import ScenarioStuck
from .orchestrator import Attempt, Orchestrator, init_project
from .patching import make_patch
from .profiles import FULL, ProtocolProfile, get_profile
from .projection import TaskEntry, project
from .store import parse_ts, tail_verify_counts
from .verify import esaa_verify

BEHAVIORS = (
    "compliant",
    "schema-violator",
    "path-escaper",
    "idempotency-replayer",
    "stale-submitter",
)


class ScriptedClock:
    """Injected time source; the simulator never reads the wall clock."""

    def __init__(self, start: str, step_seconds: int = 60):
        self._current = parse_ts(start)
        self._step = timedelta(seconds=step_seconds)

    def now(self) -> str:
        return self._current.isoformat(timespec="seconds")

    def next(self) -> str:
        self._current += self._step
        return self.now()

    def advance(self, seconds: int) -> str:
        self._current += timedelta(seconds=seconds)
        return self.now()


@dataclass(frozen=True)
class AgentScript:
    agent_id: str
    behavior: str = "compliant"
    task_quota: int = 10_000
    kinds: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {self.behavior!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    profile: ProtocolProfile
    project_name: str
    catalog: tuple[dict[str, Any], ...]
    agents: tuple[AgentScript, ...]
    seed: int
    clock_start: str
    clock_step: int = 60
    plan: tuple[dict[str, Any], ...] = ()
    run_id: str | None = None
    audit_scope: str = ".roadmap/ src/"

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "ScenarioConfig":
        clock = doc.get("clock", {})
        agents = tuple(
            AgentScript(
                agent_id=a["agent_id"],
                behavior=a.get("behavior", "compliant"),
                task_quota=a.get("task_quota", 10_000),
                kinds=tuple(a.get("kinds", ())),
            )
            for a in doc.get("agents", [])
        )
        return cls(
            name=doc["name"],
            profile=get_profile(doc.get("profile", "full-0.3.0")),
            project_name=doc.get("project_name", doc["name"]),
            catalog=tuple(doc.get("catalog", ())),
            agents=agents,
            seed=doc.get("seed", 0),
            clock_start=clock.get("start", "2026-01-01T09:00:00"),
            clock_step=clock.get("step_seconds", 60),
            plan=tuple(doc.get("plan", ())),
            run_id=doc.get("run_id"),
            audit_scope=doc.get("audit_scope", ".roadmap/ src/"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_doc(json.loads(Path(path).read_text("utf-8")))


@dataclass(frozen=True)
class RunReport:
    scenario: str
    profile: str
    event_counts: dict[str, int]
    rejected_count: int
    rejection_codes: dict[str, int]
    final_state_index: dict[str, int]
    verify_status: str
    run_status: str
    wall_events: int
    log_bytes: int

    def to_doc(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "profile": self.profile,
            "event_counts": self.event_counts,
            "rejected_count": self.rejected_count,
            "rejection_codes": self.rejection_codes,
            "final_state_index": self.final_state_index,
            "verify_status": self.verify_status,
            "run_status": self.run_status,
            "wall_events": self.wall_events,
            "log_bytes": self.log_bytes,
        }


def _one_line_content(task: TaskEntry) -> str:
    return f"{task.task_id}: {task.title} (scripted deliverable)\n"


def build_envelope(
    agent: AgentScript, attempt: Attempt, task: TaskEntry, prior_key: str | None
) -> dict[str, Any]:
    """Deterministic envelope for one behavior; exactly one proposal."""
    path = task.files[0] if task.files else None
    proposals = []
    if path is not None:
        proposals.append(
            {"type": "file_patch", "path": path, "patch": make_patch("", _one_line_content(task), path)}
        )
    env: dict[str, Any] = {
        "schema_version": "0.3.0",
        "correlation_id": f"corr-{attempt.attempt_id}",
        "task_id": task.task_id,
        "attempt_id": attempt.attempt_id,
        "actor": agent.agent_id,
        "action": "agent.result",
        "idempotency_key": f"idem-{attempt.attempt_id}",
        "payload": {"summary": f"completed {task.task_id}", "proposals": proposals},
    }
    if agent.behavior == "schema-violator":
        env["notes"] = "extra field the closed schema forbids"
    elif agent.behavior == "path-escaper":
        env["payload"]["proposals"] = [
            {
                "type": "file_patch",
                "path": "src/../outside.txt",
                "patch": make_patch("", "escape\n", "src/../outside.txt"),
            }
        ]
    elif agent.behavior == "idempotency-replayer" and prior_key is not None:
        env["idempotency_key"] = prior_key
    return env


def _collect_report(cfg: ScenarioConfig, orch: Orchestrator) -> RunReport:
    records = orch.records()
    state = project(records)
    rejection_codes: dict[str, int] = {}
    rejected_count = 0
    for rec in records:
        if rec.action != "output.rejected":
            continue
        rejected_count += 1
        for violation in rec.payload.get("violations", []):
            code = violation.get("code", "unknown")
            rejection_codes[code] = rejection_codes.get(code, 0) + 1
    verify_status = esaa_verify(orch.log_path, orch.roadmap_path).verify_status
    return RunReport(
        scenario=cfg.name,
        profile=cfg.profile.name,
        event_counts=tail_verify_counts(records),
        rejected_count=rejected_count,
        rejection_codes=dict(sorted(rejection_codes.items())),
        final_state_index=state.state_counts(),
        verify_status=verify_status,
        run_status=state.run.status,
        wall_events=len(records),
        log_bytes=orch.log_path.stat().st_size,
    )


def _run_full(cfg: ScenarioConfig, root: Path) -> RunReport:
    clock = ScriptedClock(cfg.clock_start, cfg.clock_step)
    init_project(
        root,
        FULL,
        cfg.project_name,
        clock.now(),
        catalog=list(cfg.catalog),
        run_id=cfg.run_id,
        audit_scope=cfg.audit_scope,
    )
    orch = Orchestrator(root, FULL)
    rng = random.Random(cfg.seed)
    quotas = {a.agent_id: a.task_quota for a in cfg.agents}
    last_key: dict[str, str] = {}
    tried: set[tuple[str, str]] = set()
    expired_once = False

    while True:
        state = orch.roadmap()
        if state.all_done():
            break
        attempts = orch.attempts()
        open_tasks = {a.task_id for a in attempts.values() if a.status == "open"}
        candidates = [
            task
            for tid, task in sorted(state.tasks.items())
            if task.state in ("todo", "blocked")
            and tid not in open_tasks
            and all(state.tasks[d].state == "done" for d in task.depends_on)
        ]
        progressed = False
        for task in candidates:
            eligible = [
                a
                for a in cfg.agents
                if quotas[a.agent_id] > 0
                and (not a.kinds or task.kind in a.kinds)
                and (task.task_id, a.agent_id) not in tried
            ]
            if not eligible:
                continue
            agent = eligible[rng.randrange(len(eligible))] if len(eligible) > 1 else eligible[0]
            tried.add((task.task_id, agent.agent_id))
            attempt = orch.dispatch(task.task_id, agent.agent_id, clock.next())
            if agent.behavior == "stale-submitter":
                clock.advance(attempt.ttl + 1)
                now = clock.now()
            else:
                now = clock.next()
            env = build_envelope(agent, attempt, task, last_key.get(agent.agent_id))
            outcome = orch.handle_agent_output(env, now)
            if outcome.kind == "accepted":
                quotas[agent.agent_id] -= 1
                last_key[agent.agent_id] = env["idempotency_key"]
            progressed = True
        if progressed:
            expired_once = False
            continue

        rejected = sum(1 for r in orch.records() if r.action == "output.rejected")
        remaining = sorted(tid for tid, t in orch.roadmap().tasks.items() if t.state != "done")
        if rejected == 0:
            raise ScenarioStuck(
                f"no eligible agent can progress tasks {remaining}", remaining
            )
        if not expired_once:
            # Stalled on rejections: release leases and let untried pairs run.
            clock.advance(orch.config.ttl_seconds + 1)
            orch.expire_attempts(clock.now())
            expired_once = True
            continue
        orch.end_run(clock.next())
        return _collect_report(cfg, orch)

    esaa_verify(orch.log_path, orch.roadmap_path, now=clock.next())
    orch.end_run(clock.next())
    return _collect_report(cfg, orch)


def _run_simplified(cfg: ScenarioConfig, root: Path) -> RunReport:
    clock = ScriptedClock(cfg.clock_start, cfg.clock_step)
    init_project(
        root,
        cfg.profile,
        cfg.project_name,
        clock.now(),
        catalog=list(cfg.catalog),
        run_id=cfg.run_id,
        audit_scope=cfg.audit_scope,
    )
    orch = Orchestrator(root, cfg.profile)
    for step in cfg.plan:
        op = step["op"]
        ts = step.get("ts") or clock.next()
        if op == "claim":
            orch.claim_task(step["task_id"], step["agent"], ts)
        elif op == "complete":
            orch.complete_task(
                step["task_id"], step["agent"], ts, step.get("acceptance_results")
            )
        elif op == "promote":
            orch.promote_task(step["task_id"], ts)
        elif op == "phase.complete":
            orch.announce_phase(step["phase_id"], ts)
        else:
            raise ScenarioStuck(f"unknown plan op {op!r}")
    return _collect_report(cfg, orch)


def run_scenario(cfg: ScenarioConfig, root: str | Path) -> RunReport:
    """Execute one scenario into a fresh project root."""
    root = Path(root)
    if cfg.profile.name == FULL.name:
        return _run_full(cfg, root)
    return _run_simplified(cfg, root)


def burst_claims(cfg: ScenarioConfig, root: str | Path) -> RunReport:
    """Claims-only scenario: k ready tasks claimed inside one scripted minute.

    Uses cfg.plan when present (claims only); otherwise synthesizes claims
    for every ready catalog task, in catalog order, one second apart.
    """
    if cfg.plan:
        if any(step["op"] != "claim" for step in cfg.plan):
            raise ScenarioStuck("burst_claims plan must contain only claims")
        return run_scenario(cfg, root)
    agent = cfg.agents[0].agent_id
    base = parse_ts(cfg.clock_start)
    plan = []
    offset = 0
    for entry in cfg.catalog:
        if entry.get("state") == "ready":
            ts = (base + timedelta(seconds=offset)).isoformat(timespec="seconds")
            plan.append({"op": "claim", "task_id": entry["task_id"], "agent": agent, "ts": ts})
            offset += 1
    synthesized = ScenarioConfig(
        name=cfg.name,
        profile=cfg.profile,
        project_name=cfg.project_name,
        catalog=cfg.catalog,
        agents=cfg.agents,
        seed=cfg.seed,
        clock_start=cfg.clock_start,
        clock_step=cfg.clock_step,
        plan=tuple(plan),
        run_id=cfg.run_id,
        audit_scope=cfg.audit_scope,
    )
    return run_scenario(synthesized, root)
