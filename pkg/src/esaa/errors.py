"""Exception hierarchy for the esaa kernel."""

from __future__ import annotations


class EsaaError(Exception):
    """Base class for all kernel errors."""


class NonCanonicalizableValue(EsaaError):
    """Document contains a value the canonical serializer refuses to encode."""


class VocabularyViolation(EsaaError):
    """Event action is not part of the active protocol profile."""


class StorageFailure(EsaaError):
    """The append path could not durably persist a record."""


class IoFailure(EsaaError):
    """Operational I/O error, distinct from a corruption finding."""


class ProjectionError(EsaaError):
    """An event could not be folded into the read-model.

    Carries the sequence number of the offending event once known.
    """

    def __init__(self, message: str, event_seq: int | None = None):
        super().__init__(message)
        self.event_seq = event_seq

    def at(self, event_seq: int) -> "ProjectionError":
        self.event_seq = event_seq
        return self


class IllegalTransition(ProjectionError):
    """Event demands a task/phase transition the state machine forbids."""


class DoneRegression(IllegalTransition):
    """Event targets a task that already reached the terminal done state."""


class UnknownTask(ProjectionError):
    """Event references a task id absent from the catalog."""


class DependencyUnsatisfied(ProjectionError):
    """Task has unmet dependencies for the requested transition."""


class AlreadyDone(EsaaError):
    """Dispatch refused: the task is already done."""


class AttemptConflict(EsaaError):
    """Dispatch refused: another open attempt holds the task."""


class HunkMismatch(EsaaError):
    """Patch context lines disagree with the base content."""


class AlreadyInitialized(EsaaError):
    """Project root already contains a .roadmap/ tree."""


class NotInitialized(EsaaError):
    """Project root has no .roadmap/ tree."""


class SeqOutOfRange(EsaaError):
    """Requested replay point is outside the log's sequence range."""


class ScenarioStuck(EsaaError):
    """Scenario cannot make progress toward quiescence."""

    def __init__(self, message: str, blocked_tasks: list[str] | None = None):
        super().__init__(message)
        self.blocked_tasks = blocked_tasks or []


class ContractConfigError(EsaaError):
    """Boundary contract file is malformed or incomplete."""
