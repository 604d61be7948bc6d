"""esaa: event-sourced agent orchestration kernel.

An append-only JSONL event log is the single source of truth; the roadmap
read-model is a pure projection of it, committed to by a SHA-256 digest
over a canonical serialization. Agents emit schema-validated envelopes,
the orchestrator enforces contracts and applies effects transactionally,
and `esaa verify` proves the read-model by replaying from event zero.
"""

from .canonical import canonicalize, compute_projection_hash, hash_input, sha256_hex
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
    DoneRegression,
    EsaaError,
    HunkMismatch,
    IllegalTransition,
    IoFailure,
    NonCanonicalizableValue,
    NotInitialized,
    ProjectionError,
    ScenarioStuck,
    SeqOutOfRange,
    StorageFailure,
    UnknownTask,
    VocabularyViolation,
)
from .orchestrator import (
    Attempt,
    EffectReceipt,
    Orchestrator,
    PipelineOutcome,
    init_project,
    replay_effects,
    workspace_tree_hash,
)
from .patching import apply_patch, make_patch, reverse_patch
from .profiles import FULL, SIMPLIFIED, ProtocolProfile, get_profile
from .projection import (
    Roadmap,
    RunMeta,
    TaskEntry,
    apply_event,
    diff_projections,
    project,
    roadmap_from_doc,
)
from .sim import AgentScript, RunReport, ScenarioConfig, ScriptedClock, burst_claims, run_scenario
from .store import CorruptionReport, EventRecord, EventStore, read_all, tail_verify_counts
from .verify import VerifyReport, esaa_verify, replay_to

__version__ = "0.3.0"

__all__ = [
    "AgentOutputEnvelope",
    "AgentScript",
    "AlreadyDone",
    "AlreadyInitialized",
    "Attempt",
    "AttemptConflict",
    "BoundaryContract",
    "ContractConfigError",
    "CorruptionReport",
    "DependencyUnsatisfied",
    "DoneRegression",
    "EffectReceipt",
    "EsaaError",
    "EventRecord",
    "EventStore",
    "FULL",
    "HunkMismatch",
    "IllegalTransition",
    "IoFailure",
    "NonCanonicalizableValue",
    "NotInitialized",
    "Orchestrator",
    "PipelineOutcome",
    "ProjectionError",
    "ProtocolProfile",
    "Roadmap",
    "RunMeta",
    "RunReport",
    "ScenarioConfig",
    "ScenarioStuck",
    "ScriptedClock",
    "SeqOutOfRange",
    "SIMPLIFIED",
    "StorageFailure",
    "TaskEntry",
    "UnknownTask",
    "VerifyReport",
    "Violation",
    "VocabularyViolation",
    "apply_event",
    "apply_patch",
    "burst_claims",
    "canonicalize",
    "check_idempotency",
    "compute_projection_hash",
    "diff_projections",
    "enforce_boundary",
    "esaa_verify",
    "get_profile",
    "hash_input",
    "init_project",
    "make_patch",
    "project",
    "read_all",
    "replay_effects",
    "replay_to",
    "reverse_patch",
    "roadmap_from_doc",
    "run_scenario",
    "sha256_hex",
    "tail_verify_counts",
    "validate_envelope",
    "workspace_tree_hash",
    "__version__",
]
