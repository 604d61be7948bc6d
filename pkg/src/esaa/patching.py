"""Unified-diff generation and application for file patch proposals.

Managed files are LF-terminated UTF-8 text; both sides of a patch are
normalized to that form. A patch against a new file uses the empty base.
Application is strict: context and deletion lines must match the base
exactly or the whole patch is refused.
"""

from __future__ import annotations

import difflib
import re

from .errors import HunkMismatch

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def _lf_lines(text: str) -> list[str]:
    # LF is the only line terminator; str.splitlines would also break on
    # form feeds and unicode separators, silently corrupting content.
    if not text:
        return []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def make_patch(base: str, new: str, path: str) -> str:
    """Unified diff turning `base` into `new`, labeled a/<path> b/<path>."""
    lines = difflib.unified_diff(
        _lf_lines(base),
        _lf_lines(new),
        fromfile=f"a/{path}",
        tofile=f"b/{path}",
        lineterm="",
    )
    text = "\n".join(lines)
    return text + "\n" if text else ""


def apply_patch(base: str, patch: str) -> str:
    """Apply a unified diff to `base`; raises HunkMismatch on any disagreement."""
    base_lines = _lf_lines(base)
    out: list[str] = []
    pos = 0
    plines = _lf_lines(patch)
    i = 0
    hunks = 0
    while i < len(plines):
        line = plines[i]
        if line.startswith("--- ") or line.startswith("+++ "):
            i += 1
            continue
        m = _HUNK_RE.match(line)
        if m is None:
            raise HunkMismatch(f"expected hunk header, got {line!r}")
        old_start = int(m.group(1))
        old_len = int(m.group(2)) if m.group(2) is not None else 1
        anchor = old_start - 1 if old_len > 0 else old_start
        if anchor < pos or anchor > len(base_lines):
            raise HunkMismatch(f"hunk @@ -{old_start} out of order or beyond base")
        out.extend(base_lines[pos:anchor])
        pos = anchor
        i += 1
        consumed = 0
        while i < len(plines):
            pl = plines[i]
            if _HUNK_RE.match(pl):
                break
            if pl == "\\ No newline at end of file":
                i += 1
                continue
            tag, text = (pl[0], pl[1:]) if pl else (" ", "")
            if tag == " ":
                if pos >= len(base_lines) or base_lines[pos] != text:
                    raise HunkMismatch(f"context mismatch at base line {pos + 1}")
                out.append(text)
                pos += 1
                consumed += 1
            elif tag == "-":
                if pos >= len(base_lines) or base_lines[pos] != text:
                    raise HunkMismatch(f"deletion mismatch at base line {pos + 1}")
                pos += 1
                consumed += 1
            elif tag == "+":
                out.append(text)
            else:
                raise HunkMismatch(f"unrecognized patch line {pl!r}")
            i += 1
        if consumed != old_len:
            raise HunkMismatch(f"hunk consumed {consumed} base lines, header says {old_len}")
        hunks += 1
    if hunks == 0:
        raise HunkMismatch("patch contains no hunks")
    out.extend(base_lines[pos:])
    return "\n".join(out) + "\n" if out else ""


def reverse_patch(patch: str) -> str:
    """Swap the two sides of a patch so applying it undoes the original."""
    out: list[str] = []
    for line in _lf_lines(patch):
        m = _HUNK_RE.match(line)
        if m:
            a, b, c, d = m.groups()
            left = f"{c},{d}" if d is not None else c
            right = f"{a},{b}" if b is not None else a
            out.append(f"@@ -{left} +{right} @@")
        elif line.startswith("--- "):
            out.append("+++ " + line[4:])
        elif line.startswith("+++ "):
            out.append("--- " + line[4:])
        elif line.startswith("+"):
            out.append("-" + line[1:])
        elif line.startswith("-"):
            out.append("+" + line[1:])
        else:
            out.append(line)
    text = "\n".join(out)
    return text + "\n" if text else ""
