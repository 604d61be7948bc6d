"""Agent output validation and boundary contracts.

An agent may only ever emit a closed envelope (agent.result or issue.report)
that passes the shipped JSON Schema, and its file proposals must stay
inside the path prefixes granted to the task's kind. Everything here is
pure: validation never touches the log or the workspace.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import jsonschema
import yaml

from .errors import ContractConfigError
from .profiles import AGENT_ACTIONS, TASK_KINDS
from .projection import TaskEntry
from .store import EventRecord

# Codes a pipeline stage may attach to a rejection. `conflict` covers the
# overlapping-proposal stage, which has no dedicated code in the envelope
# vocabulary's rejection causes.
VIOLATION_CODES = (
    "schema",
    "authority",
    "boundary-path",
    "boundary-kind",
    "idempotency-replay",
    "stale-attempt",
    "conflict",
)

# Every proposal path must sit under one of these roots, before any
# per-kind narrowing applies.
ENVELOPE_PATH_RE = re.compile(r"^(\.roadmap/|src/)")


@dataclass(frozen=True)
class Violation:
    code: str
    pointer: str
    message: str

    def to_doc(self) -> dict[str, str]:
        return {"code": self.code, "pointer": self.pointer, "message": self.message}


@dataclass(frozen=True)
class FilePatchProposal:
    type: str
    path: str
    patch: str


@dataclass(frozen=True)
class IssueReport:
    title: str
    details: str
    severity: str


@dataclass(frozen=True)
class AgentOutputEnvelope:
    schema_version: str
    correlation_id: str
    task_id: str
    attempt_id: str
    actor: str
    action: str
    idempotency_key: str
    summary: str | None
    proposals: tuple[FilePatchProposal, ...]
    issue: IssueReport | None

    def to_doc(self) -> dict[str, Any]:
        payload: dict[str, Any] = {}
        if self.summary is not None:
            payload["summary"] = self.summary
        if self.proposals:
            payload["proposals"] = [
                {"type": p.type, "path": p.path, "patch": p.patch} for p in self.proposals
            ]
        if self.issue is not None:
            payload["issue"] = {
                "title": self.issue.title,
                "details": self.issue.details,
                "severity": self.issue.severity,
            }
        return {
            "schema_version": self.schema_version,
            "correlation_id": self.correlation_id,
            "task_id": self.task_id,
            "attempt_id": self.attempt_id,
            "actor": self.actor,
            "action": self.action,
            "idempotency_key": self.idempotency_key,
            "payload": payload,
        }

    @classmethod
    def from_doc(cls, doc: dict[str, Any]) -> "AgentOutputEnvelope":
        payload = doc["payload"]
        proposals = tuple(
            FilePatchProposal(type=p["type"], path=p["path"], patch=p["patch"])
            for p in payload.get("proposals", [])
        )
        issue_raw = payload.get("issue")
        issue = (
            IssueReport(
                title=issue_raw["title"],
                details=issue_raw["details"],
                severity=issue_raw["severity"],
            )
            if issue_raw is not None
            else None
        )
        return cls(
            schema_version=doc["schema_version"],
            correlation_id=doc["correlation_id"],
            task_id=doc["task_id"],
            attempt_id=doc["attempt_id"],
            actor=doc["actor"],
            action=doc["action"],
            idempotency_key=doc["idempotency_key"],
            summary=payload.get("summary"),
            proposals=proposals,
            issue=issue,
        )


def _load_schema(name: str) -> dict[str, Any]:
    text = resources.files("esaa.schemas").joinpath(name).read_text("utf-8")
    return json.loads(text)

ENVELOPE_SCHEMA = _load_schema("agent_output.schema.json")
ROADMAP_SCHEMA = _load_schema("roadmap.schema.json")

_ENVELOPE_VALIDATOR = jsonschema.Draft202012Validator(ENVELOPE_SCHEMA)
_ROADMAP_VALIDATOR = jsonschema.Draft202012Validator(ROADMAP_SCHEMA)


def _pointer(error: jsonschema.ValidationError) -> str:
    return "".join(f"/{part}" for part in error.absolute_path)


def validate_envelope(raw: bytes | str | dict[str, Any]) -> AgentOutputEnvelope | list[Violation]:
    """Validate one agent output document; report every violated constraint.

    Pattern failures on /actor are authority violations (the identity rule);
    everything else the schema catches is a schema violation. Two cross-field
    rules the schema cannot express are checked after it passes: issue.report
    needs an issue block, agent.result needs proposals or a summary.
    """
    if isinstance(raw, (bytes, str)):
        try:
            doc = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return [Violation("schema", "", f"unparseable JSON: {exc}")]
    else:
        doc = raw

    violations = []
    for error in sorted(_ENVELOPE_VALIDATOR.iter_errors(doc), key=lambda e: (_pointer(e), e.message)):
        pointer = _pointer(error)
        code = "authority" if pointer == "/actor" and error.validator == "pattern" else "schema"
        violations.append(Violation(code, pointer, error.message))
    if violations:
        return violations

    action = doc["action"]
    payload = doc["payload"]
    if action == "issue.report" and "issue" not in payload:
        violations.append(
            Violation("schema", "/payload", "issue.report requires payload.issue")
        )
    if action == "agent.result" and not (payload.get("proposals") or payload.get("summary")):
        violations.append(
            Violation("schema", "/payload", "agent.result requires proposals or a summary")
        )
    if violations:
        return violations
    return AgentOutputEnvelope.from_doc(doc)


def validate_roadmap_doc(doc: dict[str, Any]) -> list[str]:
    """Shipped read-model schema check; returns error messages."""
    return [e.message for e in _ROADMAP_VALIDATOR.iter_errors(doc)]


@dataclass(frozen=True)
class KindRule:
    actions: frozenset[str]
    path_prefixes: tuple[str, ...]
    max_proposals: int


@dataclass(frozen=True)
class BoundaryContract:
    """Per-kind permissions loaded from AGENT_CONTRACT.yaml.

    Agent-authored actions outside agent.result / issue.report can never be
    granted: the loader rejects such configs outright.
    """

    kinds: dict[str, KindRule]

    @classmethod
    def default(cls) -> "BoundaryContract":
        text = resources.files("esaa.defaults").joinpath("AGENT_CONTRACT.yaml").read_text("utf-8")
        return cls.from_yaml_text(text)

    @classmethod
    def from_yaml_text(cls, text: str) -> "BoundaryContract":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ContractConfigError(f"contract is not valid YAML: {exc}") from exc
        if not isinstance(doc, dict) or not isinstance(doc.get("kinds"), dict):
            raise ContractConfigError("contract must be a mapping with a 'kinds' section")
        kinds: dict[str, KindRule] = {}
        for kind, raw in doc["kinds"].items():
            if kind not in TASK_KINDS:
                raise ContractConfigError(f"unknown task kind {kind!r} in contract")
            if not isinstance(raw, dict):
                raise ContractConfigError(f"kind {kind!r} rule must be a mapping")
            actions = frozenset(raw.get("actions", []))
            illegal = actions - AGENT_ACTIONS
            if illegal:
                raise ContractConfigError(
                    f"kind {kind!r} grants prohibited agent actions {sorted(illegal)}"
                )
            prefixes = tuple(raw.get("path_prefixes", []))
            for prefix in prefixes:
                if not ENVELOPE_PATH_RE.match(prefix):
                    raise ContractConfigError(
                        f"kind {kind!r} prefix {prefix!r} lies outside .roadmap/ and src/"
                    )
            max_proposals = raw.get("max_proposals", 10)
            if not isinstance(max_proposals, int) or max_proposals < 1:
                raise ContractConfigError(f"kind {kind!r} max_proposals must be a positive integer")
            kinds[kind] = KindRule(actions=actions, path_prefixes=prefixes, max_proposals=max_proposals)
        missing = set(TASK_KINDS) - set(kinds)
        if missing:
            raise ContractConfigError(f"contract lacks rules for kinds {sorted(missing)}")
        return cls(kinds=kinds)

    @classmethod
    def load(cls, path: str | Path) -> "BoundaryContract":
        return cls.from_yaml_text(Path(path).read_text("utf-8"))


def is_escaping_path(path: str) -> bool:
    """Absolute paths and any `..` segment escape the workspace."""
    if path.startswith("/") or path.startswith("\\"):
        return True
    return ".." in path.split("/")


def enforce_boundary(
    env: AgentOutputEnvelope, task: TaskEntry, contract: BoundaryContract
) -> list[Violation]:
    """Check an already schema-valid envelope against the task's permissions."""
    violations: list[Violation] = []
    if env.task_id != task.task_id:
        violations.append(
            Violation(
                "boundary-kind",
                "/task_id",
                f"envelope targets {env.task_id!r}, checked against {task.task_id!r}",
            )
        )
    rule = contract.kinds.get(task.kind)
    if rule is None:
        violations.append(
            Violation("boundary-kind", "/task_id", f"no contract rule for kind {task.kind!r}")
        )
        return violations
    if env.action not in rule.actions:
        violations.append(
            Violation(
                "boundary-kind",
                "/action",
                f"action {env.action!r} not allowed for kind {task.kind!r}",
            )
        )
    if len(env.proposals) > rule.max_proposals:
        violations.append(
            Violation(
                "boundary-kind",
                "/payload/proposals",
                f"{len(env.proposals)} proposals exceed quota {rule.max_proposals}",
            )
        )
    for i, proposal in enumerate(env.proposals):
        pointer = f"/payload/proposals/{i}/path"
        if is_escaping_path(proposal.path):
            violations.append(
                Violation("boundary-path", pointer, f"path {proposal.path!r} escapes the workspace")
            )
            continue
        if not any(proposal.path.startswith(p) for p in rule.path_prefixes):
            violations.append(
                Violation(
                    "boundary-path",
                    pointer,
                    f"path {proposal.path!r} outside prefixes {list(rule.path_prefixes)} for kind {task.kind!r}",
                )
            )
    return violations


def check_idempotency(key: str, records: Iterable[EventRecord]) -> int | None:
    """Return the event_seq of an accepted agent event bearing `key`, if any.

    Rejected submissions do not consume keys: output.rejected events are
    ignored even though they carry the offending key.
    """
    for record in records:
        if record.action in AGENT_ACTIONS and record.idempotency_key == key:
            return record.event_seq
    return None
