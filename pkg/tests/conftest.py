"""Shared fixtures: temp project roots, catalogs, and envelope builders."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import pytest

from esaa.orchestrator import Attempt, Orchestrator, init_project
from esaa.patching import make_patch
from esaa.profiles import get_profile

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures" / "clinic_asr"
SCENARIOS = REPO / "scenarios"

CATALOG = [
    {
        "task_id": "T-100",
        "kind": "spec",
        "title": "Draft the interface brief",
        "depends_on": [],
        "files": [".roadmap/specs/spec.md"],
    },
    {
        "task_id": "T-200",
        "kind": "impl",
        "title": "Implement the module",
        "depends_on": ["T-100"],
        "files": ["src/module.py"],
    },
    {
        "task_id": "T-300",
        "kind": "qa",
        "title": "Review the module",
        "depends_on": ["T-200"],
        "files": [".roadmap/qa/review.md"],
    },
]


def make_full_project(root: Path, catalog: list[dict] | None = None) -> Orchestrator:
    init_project(
        root,
        profile=get_profile("full-0.3.0"),
        project_name="unit-test",
        run_id="run-unit",
        now="2026-04-01T09:00:00+00:00",
        catalog=catalog if catalog is not None else CATALOG,
    )
    return Orchestrator(root)


def envelope_for(
    orch: Orchestrator,
    attempt: Attempt,
    *,
    path: str | None = None,
    content: str = "line one\nline two\n",
    action: str = "agent.result",
    key: str | None = None,
    **overrides: Any,
) -> dict:
    """A schema-valid envelope for an open attempt; overrides splice raw fields."""
    if path is None:
        path = orch.roadmap().tasks[attempt.task_id].files[0]
    doc = {
        "schema_version": "0.3.0",
        "correlation_id": f"corr-{attempt.attempt_id}",
        "task_id": attempt.task_id,
        "attempt_id": attempt.attempt_id,
        "actor": attempt.agent,
        "action": action,
        "idempotency_key": key or f"idem-{attempt.attempt_id}",
        "payload": {
            "summary": f"work for {attempt.task_id}",
            "proposals": [
                {"type": "file_patch", "path": path, "patch": make_patch("", content, path)}
            ],
        },
    }
    doc.update(overrides)
    return doc


def issue_envelope(attempt: Attempt, *, severity: str = "high", **overrides: Any) -> dict:
    doc = {
        "schema_version": "0.3.0",
        "correlation_id": f"corr-{attempt.attempt_id}",
        "task_id": attempt.task_id,
        "attempt_id": attempt.attempt_id,
        "actor": attempt.agent,
        "action": "issue.report",
        "idempotency_key": f"issue-{attempt.attempt_id}",
        "payload": {
            "issue": {
                "title": "regression found",
                "details": "observed failure in review",
                "severity": severity,
            }
        },
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def full_project(tmp_path: Path) -> Orchestrator:
    return make_full_project(tmp_path)


@pytest.fixture
def dispatched(full_project: Orchestrator) -> tuple[Orchestrator, Attempt]:
    attempt = full_project.dispatch("T-100", "agent-alpha", now="2026-04-01T09:05:00+00:00")
    return full_project, attempt
