"""Deterministic serialization and hashing of structured documents.

Every replay of the same log must reproduce the exact read-model bytes, so
the serialized form is pinned down to the octet: UTF-8, object keys in
ascending code-point order, ``,``/``:`` separators with no padding, non-ASCII
characters emitted raw, and exactly one trailing LF. The projection digest is
SHA-256 over that form with the mutable ``run`` block stripped out, which
keeps the digest self-reference free and stable across audits.

Only null, booleans, integers, strings, arrays and string-keyed maps are
accepted. Fractional or non-finite numbers are rejected rather than
formatted: float rendering is not portable across platforms, and a digest
that depends on it is not a commitment. Producers carry decimals as strings.
Strings are hashed as-is (no Unicode normalization); producers are expected
to emit NFC.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Any

from .errors import NonCanonicalizableValue

HEX_DIGEST_RE = re.compile(r"^[a-f0-9]{64}$")

# Keys of the read-model that participate in the digest. The run block is
# deliberately absent: it holds the stored hash and verify bookkeeping.
HASHED_KEYS = ("schema_version", "project", "tasks", "indexes")


def _normalize(value: Any, path: str) -> Any:
    """Validate and coerce a document to the canonical value domain."""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise NonCanonicalizableValue(f"non-finite number at {path}")
        if not value.is_integer():
            raise NonCanonicalizableValue(
                f"non-integer number {value!r} at {path}; carry decimals as strings"
            )
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_normalize(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if isinstance(value, dict):
        out = {}
        for k, v in value.items():
            if not isinstance(k, str):
                raise NonCanonicalizableValue(f"non-string map key {k!r} at {path}")
            out[k] = _normalize(v, f"{path}/{k}")
        return out
    raise NonCanonicalizableValue(f"unsupported type {type(value).__name__} at {path}")


def canonicalize(doc: Any) -> bytes:
    """Serialize ``doc`` to its unique canonical octet sequence.

    Byte-identical output for semantically equal documents regardless of
    input key order; terminated by exactly one LF.
    """
    normalized = _normalize(doc, "$")
    text = json.dumps(
        normalized,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )
    return text.encode("utf-8") + b"\n"


def hash_input(projected: dict[str, Any]) -> dict[str, Any]:
    """Extract the digest preimage document from a projected read-model.

    Exactly schema_version, project, tasks and indexes; the run block
    (including the stored hash) never feeds back into the digest.
    """
    return {
        "schema_version": projected["schema_version"],
        "project": projected.get("project"),
        "tasks": projected["tasks"],
        "indexes": projected.get("indexes", {}),
    }


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def compute_projection_hash(projected: dict[str, Any]) -> str:
    """SHA-256 hex digest over the canonicalized, run-excluded read-model."""
    return sha256_hex(canonicalize(hash_input(projected)))


def is_hex_digest(value: str) -> bool:
    """True iff ``value`` is a well-formed lowercase SHA-256 hex digest."""
    return bool(HEX_DIGEST_RE.match(value))
