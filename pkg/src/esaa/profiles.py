"""Protocol profiles: event vocabularies and task state sets.

Two profiles exist. The full profile carries the complete 15-action
vocabulary with explicit orchestrator and audit events; the simplified
profile is the 5-action lifecycle (version / promote / claim / complete /
phase.complete) that drops inferable orchestrator events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

FULL_PROFILE_NAME = "full-0.3.0"
SIMPLIFIED_PROFILE_NAME = "simplified"

FULL_VOCABULARY = frozenset(
    {
        "run.init",
        "attempt.create",
        "attempt.timeout",
        "orchestrator.dispatch",
        "agent.result",
        "issue.report",
        "output.rejected",
        "orchestrator.file.write",
        "orchestrator.view.mutate",
        "task.create",
        "task.update",
        "verify.start",
        "verify.ok",
        "verify.fail",
        "run.end",
    }
)

SIMPLIFIED_VOCABULARY = frozenset(
    {
        "roadmap.version",
        "promote",
        "claim",
        "complete",
        "phase.complete",
    }
)

# Actions an agent is permitted to author. Everything else is
# orchestrator-authored; this set is not configurable.
AGENT_ACTIONS = frozenset({"agent.result", "issue.report"})

# Actions attributed to an agent identity in the simplified profile.
SIMPLIFIED_AGENT_ACTIONS = frozenset({"claim", "complete"})

TASK_KINDS = ("spec", "impl", "qa", "emergency_patch")


@dataclass(frozen=True)
class ProtocolProfile:
    """One event vocabulary plus its task state machine."""

    name: str
    vocabulary: frozenset[str]
    task_states: tuple[str, ...]
    initial_event: str
    initial_task_state: str

    def allows(self, action: str) -> bool:
        return action in self.vocabulary


FULL = ProtocolProfile(
    name=FULL_PROFILE_NAME,
    vocabulary=FULL_VOCABULARY,
    task_states=("todo", "in_progress", "blocked", "done"),
    initial_event="run.init",
    initial_task_state="todo",
)

SIMPLIFIED = ProtocolProfile(
    name=SIMPLIFIED_PROFILE_NAME,
    vocabulary=SIMPLIFIED_VOCABULARY,
    task_states=("backlog", "ready", "done"),
    initial_event="roadmap.version",
    initial_task_state="backlog",
)

_BY_NAME = {
    FULL_PROFILE_NAME: FULL,
    "full": FULL,
    SIMPLIFIED_PROFILE_NAME: SIMPLIFIED,
}

_BY_INITIAL_EVENT = {p.initial_event: p for p in (FULL, SIMPLIFIED)}


def get_profile(name: str) -> ProtocolProfile:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown protocol profile {name!r}") from None


def profile_for_initial_action(action: str) -> ProtocolProfile:
    """Infer the profile from a log's first event action."""
    try:
        return _BY_INITIAL_EVENT[action]
    except KeyError:
        raise ValueError(
            f"cannot infer profile: {action!r} is not an initial event"
        ) from None
