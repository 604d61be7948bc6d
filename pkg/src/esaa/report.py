"""Scenario report output: canonical JSON document plus rendered figures.

The JSON document under reports/ is the machine-readable result; next to it
a PNG summarizes the same numbers (per-action event counts and the final
task-state index) for a quick visual read.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .canonical import canonicalize
from .sim import RunReport


def write_report(report: RunReport, reports_dir: str | Path, plot: bool = True) -> dict[str, Path]:
    """Write reports/<scenario>.json (canonical octets) and optionally a PNG."""
    reports_dir = Path(reports_dir)
    reports_dir.mkdir(parents=True, exist_ok=True)
    doc = report.to_doc()
    json_path = reports_dir / f"{report.scenario}.json"
    json_path.write_bytes(canonicalize(doc))
    out = {"json": json_path}
    if plot:
        png_path = reports_dir / f"{report.scenario}.png"
        render_report_figure(doc, png_path)
        out["png"] = png_path
    return out


def render_report_figure(doc: dict[str, Any], png_path: str | Path) -> Path:
    """Two bar charts: event counts by action, task counts by state."""
    png_path = Path(png_path)
    fig, (ax_events, ax_states) = plt.subplots(1, 2, figsize=(11, 4.5))

    counts = doc.get("event_counts", {})
    actions = sorted(counts)
    ax_events.bar(range(len(actions)), [counts[a] for a in actions], color="#4878a8")
    ax_events.set_xticks(range(len(actions)))
    ax_events.set_xticklabels(actions, rotation=40, ha="right", fontsize=8)
    ax_events.set_ylabel("events")
    ax_events.set_title(f"{doc.get('scenario', 'scenario')}: event counts")

    index = doc.get("final_state_index", {})
    states = sorted(index)
    ax_states.bar(range(len(states)), [index[s] for s in states], color="#6aa84f")
    ax_states.set_xticks(range(len(states)))
    ax_states.set_xticklabels(states, fontsize=9)
    ax_states.set_ylabel("tasks")
    status = doc.get("run_status", "?")
    verify = doc.get("verify_status", "?")
    rejected = doc.get("rejected_count", 0)
    ax_states.set_title(f"final states (run {status}, verify {verify}, rejected {rejected})")

    fig.tight_layout()
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return png_path
