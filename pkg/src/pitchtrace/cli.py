"""Command-line entry point.

Modes:
  --headless --simulate in.wav   run a full scripted session from a WAV
  --listen host:port             serve the WebSocket control/telemetry API
  --analyze session-folder       offline re-analysis of a recorded session

A config file (--config, JSON with "config" and "tasks" keys; a recorded
session's config.json works as-is) seeds everything; --subject and --seed
override it, and PITCHTRACE_LOG_DIR overrides the log root.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any

from . import analyze as analyze_mod
from .audio import SimulatedCapture
from .runner import SessionRunner
from .session import Session, SessionConfig, entry_from_dict

DEFAULT_TASK_DOCS = [
    {"id": "sustain", "pattern": "sustain", "cents": 0.0},
    {"id": "step", "pattern": "step"},
    {"id": "ramp", "pattern": "ramp"},
    {"id": "peak", "pattern": "peak"},
    {"id": "oscillate", "pattern": "oscillate"},
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pitchtrace",
        description="Real-time guided vocal pitch tracking engine",
    )
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    parser.add_argument("--subject", metavar="ID", help="subject id override")
    parser.add_argument(
        "--listen", metavar="ADDR:PORT", help="serve the WebSocket control API"
    )
    parser.add_argument(
        "--simulate", metavar="WAV", help="replace the microphone with a WAV file"
    )
    parser.add_argument(
        "--headless",
        action="store_true",
        help="no server: run the scripted task list to completion",
    )
    parser.add_argument(
        "--analyze", metavar="FOLDER", help="re-analyze a recorded session folder"
    )
    parser.add_argument("--seed", type=int, metavar="U64", help="RNG seed override")
    return parser


def load_config(args) -> tuple[SessionConfig, list[dict[str, Any]]]:
    doc: dict[str, Any] = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    cfg_doc = doc.get("config", {})
    if args.subject:
        cfg_doc["subject_id"] = args.subject
    if args.seed is not None:
        cfg_doc["seed"] = args.seed
    env_root = os.environ.get("PITCHTRACE_LOG_DIR")
    if env_root:
        cfg_doc["log_root"] = env_root
    cfg = SessionConfig.from_dict(cfg_doc)
    task_docs = doc.get("tasks", DEFAULT_TASK_DOCS)
    return cfg, task_docs


def run_headless(cfg: SessionConfig, task_docs: list[dict[str, Any]],
                 wav_path: str) -> int:
    source = SimulatedCapture(wav_path, sample_rate_hz=cfg.sample_rate_hz)
    entries = [entry_from_dict(docu, cfg.cents_default) for docu in task_docs]
    session = Session(cfg, entries)
    runner = SessionRunner(session, source, stop_when_done=True)
    summary = runner.run()
    print(f"session folder: {session.folder}")
    print(json.dumps(summary, indent=2))
    return 0


def run_analyze(folder: str) -> int:
    report = analyze_mod.reanalyze(folder)
    print(analyze_mod.format_report(report))
    return 0 if report["passed"] else 2


def run_server(cfg: SessionConfig, task_docs: list[dict[str, Any]],
               listen: str, wav_path: str | None) -> int:
    import asyncio

    from .server import ControlServer, EngineService

    host, _, port_str = listen.rpartition(":")
    host = host or "127.0.0.1"
    try:
        port = int(port_str)
    except ValueError:
        print(f"invalid --listen address {listen!r}", file=sys.stderr)
        return 2

    def source_factory(session_cfg: SessionConfig):
        if wav_path is not None:
            return SimulatedCapture(
                wav_path, sample_rate_hz=session_cfg.sample_rate_hz, realtime=True
            )
        from .audio import DeviceCapture

        return DeviceCapture(session_cfg.sample_rate_hz)

    service = EngineService(cfg, task_docs, source_factory)
    server = ControlServer(service, host, port)

    async def main() -> None:
        bound = await server.start()
        print(f"listening on ws://{host}:{bound}", flush=True)
        try:
            await asyncio.Future()
        finally:
            await server.close()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    modes = [bool(args.analyze), bool(args.headless), bool(args.listen)]
    if sum(modes) != 1:
        parser.error("pick exactly one of --headless, --listen, --analyze")
    if args.analyze and (args.simulate or args.config or args.subject):
        parser.error("--analyze takes only a session folder")
    if args.headless and not args.simulate:
        parser.error("--headless needs --simulate <wav> (no live device support)")

    if args.analyze:
        return run_analyze(args.analyze)

    cfg, task_docs = load_config(args)
    if args.headless:
        return run_headless(cfg, task_docs, args.simulate)
    return run_server(cfg, task_docs, args.listen, args.simulate)


if __name__ == "__main__":
    sys.exit(main())
