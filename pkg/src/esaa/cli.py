"""Operator command line: init, submit, run, verify, replay, status, log.

Machine-readable output goes to stdout (canonical JSON by default),
diagnostics to stderr. Exit codes: 0 success, 1 operational error,
2 verify mismatch, 3 verify corruption, 4 submission rejected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Any

from .canonical import canonicalize
from .errors import EsaaError
from .orchestrator import ACTIVITY_FILE, ROADMAP_DIR, ROADMAP_FILE, Orchestrator, init_project
from .profiles import get_profile
from .sim import ScenarioConfig, run_scenario
from .verify import esaa_verify, replay_to


def _now() -> str:
    return datetime.now().astimezone().isoformat(timespec="seconds")


def _emit(doc: dict[str, Any], fmt: str, text: str | None = None) -> None:
    if fmt == "text" and text is not None:
        print(text)
    else:
        sys.stdout.buffer.write(canonicalize(doc))
        sys.stdout.buffer.flush()


def cmd_init(args: argparse.Namespace) -> int:
    root = Path(args.root)
    profile = get_profile(args.profile or "full-0.3.0")
    catalog = None
    if args.catalog:
        catalog = json.loads(Path(args.catalog).read_text("utf-8"))
    name = args.name or root.resolve().name
    state = init_project(root, profile, name, _now(), catalog=catalog)
    doc = {
        "root": str(root),
        "profile": profile.name,
        "tasks": len(state.tasks),
        "run_status": state.run.status,
    }
    _emit(doc, args.format, f"initialized {root} ({profile.name}, {len(state.tasks)} tasks)")
    return 0


def cmd_submit(args: argparse.Namespace) -> int:
    if args.envelope and args.envelope != "-":
        raw: bytes = Path(args.envelope).read_bytes()
    else:
        raw = sys.stdin.buffer.read()
    orch = Orchestrator(args.root, get_profile(args.profile) if args.profile else None)
    outcome = orch.handle_agent_output(raw, _now())
    text = outcome.kind
    if outcome.violations:
        text += ": " + "; ".join(f"{v.code} at {v.pointer or '/'}" for v in outcome.violations)
    _emit(outcome.to_doc(), args.format, text)
    return 0 if outcome.kind == "accepted" else 4


def cmd_run(args: argparse.Namespace) -> int:
    cfg = ScenarioConfig.load(args.scenario)
    root = Path(args.root)
    workdir = Path(args.workdir) if args.workdir else root / "runs" / cfg.name
    report = run_scenario(cfg, workdir)
    from .report import write_report

    paths = write_report(report, root / "reports", plot=not args.no_plot)
    for label, path in sorted(paths.items()):
        print(f"{label}: {path}", file=sys.stderr)
    _emit(
        report.to_doc(),
        args.format,
        f"{cfg.name}: {report.wall_events} events, run {report.run_status}, "
        f"verify {report.verify_status}, rejected {report.rejected_count}",
    )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    root = Path(args.root)
    log_path = root / ROADMAP_DIR / ACTIVITY_FILE
    roadmap_path = root / ROADMAP_DIR / ROADMAP_FILE
    report = esaa_verify(log_path, roadmap_path, now=None if args.read_only else _now())
    _emit(report.to_doc(), args.format, f"verify: {report.verify_status}")
    return report.exit_code


def cmd_replay(args: argparse.Namespace) -> int:
    root = Path(args.root)
    state = replay_to(root / ROADMAP_DIR / ACTIVITY_FILE, args.seq)
    counts = state.state_counts()
    text = " / ".join(f"{s} {counts[s]}" for s in reversed(state.profile.task_states))
    _emit(state.to_doc(), args.format, f"seq {args.seq}: {text}")
    return 0


def cmd_status(args: argparse.Namespace) -> int:
    orch = Orchestrator(args.root, get_profile(args.profile) if args.profile else None)
    state = orch.roadmap()
    counts = state.state_counts()
    indexes = state.indexes()
    phases = indexes["by_phase"]
    done_phases = sum(1 for p in phases.values() if p["complete"])
    state_text = " / ".join(
        f"{s} {counts[s]}" for s in reversed(state.profile.task_states) if s in counts
    )
    text = f"{state_text}; phases {done_phases}/{len(phases)}"
    doc = {
        "state_counts": counts,
        "phases_complete": done_phases,
        "phases_total": len(phases),
        "run_status": state.run.status,
        "verify_status": state.run.verify_status,
    }
    _emit(doc, args.format, text)
    return 0


def cmd_log(args: argparse.Namespace) -> int:
    orch = Orchestrator(args.root, get_profile(args.profile) if args.profile else None)
    for rec in orch.records():
        if args.agent and rec.actor != args.agent:
            continue
        if args.task and rec.task_id != args.task:
            continue
        if args.action and rec.action != args.action:
            continue
        if args.format == "text":
            parts = [str(rec.event_seq), rec.ts, rec.action]
            if rec.task_id:
                parts.append(rec.task_id)
            if rec.actor != "orchestrator":
                parts.append(rec.actor)
            print(" ".join(parts))
        else:
            sys.stdout.buffer.write(canonicalize(rec.to_doc(orch.profile)))
    sys.stdout.flush()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esaa",
        description="Event-sourced agent orchestration: append-only log, "
        "projected roadmap, replay verification.",
    )
    parser.add_argument(
        "--root",
        default=os.environ.get("ESAA_ROOT", "."),
        help="project root (env ESAA_ROOT, default '.')",
    )
    parser.add_argument(
        "--profile",
        choices=["full", "full-0.3.0", "simplified"],
        help="protocol profile (default: inferred from the log)",
    )
    parser.add_argument("--format", choices=["json", "text"], default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="create .roadmap/ with the initialization event")
    p.add_argument("--name", help="project name (default: root directory name)")
    p.add_argument("--catalog", help="JSON file with task catalog seeds")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("submit", help="run one agent envelope through the pipeline")
    p.add_argument("envelope", nargs="?", help="envelope file (default stdin)")
    p.set_defaults(func=cmd_submit)

    p = sub.add_parser("run", help="execute a scenario file end to end")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--workdir", help="directory for the scenario's project tree")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="replay the log and compare projection digests")
    p.add_argument(
        "--read-only",
        action="store_true",
        help="never append verify events, even on a full-profile log",
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replay", help="print the projection at an event seq")
    p.add_argument("seq", type=int)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("status", help="print state-index counts and phase completion")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("log", help="print events, optionally filtered")
    p.add_argument("--agent", help="filter by actor / agent id")
    p.add_argument("--task", help="filter by task id")
    p.add_argument("--action", help="filter by action name")
    p.set_defaults(func=cmd_log)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EsaaError as exc:
        print(f"esaa: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"esaa: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
