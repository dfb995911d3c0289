"""Command-line entry point.

Subcommands mirror the pipeline stages (build, decompile, readability, repair,
trace, diff, report) plus `run` for all of them and `trace reconstruct` for
turning a recorded instrumentation stream into call records. Adapters and
models come from a YAML run config; --replay forces the gateway into
replay-only mode so no network is touched.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import orchestrator
from .adapters import AdapterMode, DecompilerAdapter, LocalHostBackend, OutputUnit, RemoteExecBackend
from .functionality import parse_wire_stream, reconstruct_calls
from .gateway import ModelConfig
from .manifest import load_manifest, validate_manifest


def _load_run_config(args) -> orchestrator.RunConfig:
    raw = {}
    if args.config:
        raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
    config_dir = Path(args.config).parent if args.config else Path.cwd()

    def adapter_from(entry: dict) -> DecompilerAdapter:
        directory = entry.get("directory")
        return DecompilerAdapter(
            name=entry["name"],
            mode=AdapterMode(entry.get("mode", "DirectoryOfOutputs")),
            unit=OutputUnit(entry.get("unit", "WholeProgram")),
            directory=(config_dir / directory) if directory else None,
            command_template=entry.get("command", ""),
        )

    def model_from(entry: dict) -> ModelConfig:
        return ModelConfig(
            model_id=entry["model_id"],
            temperature=float(entry.get("temperature", 0.0)),
            top_p=float(entry.get("top_p", 1.0)),
            endpoint=entry.get("endpoint", ""),
            auth_env=entry.get("auth_env", ""),
            max_context_hint=int(entry.get("max_context_hint", 0)),
        )

    backend = LocalHostBackend()
    if raw.get("backend") == "RemoteExec":
        backend = RemoteExecBackend(raw["remote_template"])

    budget = args.budget if getattr(args, "budget", None) else int(raw.get("budget", 50))
    repair_models = [model_from(m) for m in raw.get("repair_models", [])]
    wanted = getattr(args, "llm", None)
    if wanted:
        repair_models = [m for m in repair_models if m.model_id in wanted]

    return orchestrator.RunConfig(
        manifest_path=Path(args.manifest),
        adapters=[adapter_from(a) for a in raw.get("adapters", [])],
        judge_models=[model_from(m) for m in raw.get("judges", [])],
        repair_models=repair_models,
        output_root=Path(args.out),
        run_id=args.run_id,
        budget=budget,
        window_radius=getattr(args, "window_radius", None) or int(raw.get("window_radius", 20)),
        jobs=args.jobs,
        replay=args.replay,
        backend=backend,
    )


STAGES = {
    "build": orchestrator.stage_build,
    "decompile": orchestrator.stage_decompile,
    "readability": orchestrator.stage_readability,
    "repair": orchestrator.stage_repair,
    "trace": orchestrator.stage_trace,
    "diff": orchestrator.stage_diff,
    "report": orchestrator.stage_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="decompeval")
    parser.add_argument("--manifest", help="benchmark manifest YAML")
    parser.add_argument("--out", default="out", help="output root directory")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--replay", action="store_true", help="replay-only gateway; no network")
    parser.add_argument("--config", help="run config YAML (adapters, judges, repair models)")
    parser.add_argument("--run-id", default="run")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("build", "decompile", "readability", "trace", "diff", "report", "run"):
        sub.add_parser(name)
    repair_cmd = sub.add_parser("repair")
    repair_cmd.add_argument("--budget", type=int, default=None)
    repair_cmd.add_argument("--window-radius", type=int, default=None)
    repair_cmd.add_argument("--llm", nargs="*", help="restrict to these repair model ids")

    sub.add_parser("validate", help="check the manifest and exit")

    reconstruct = sub.add_parser(
        "trace-reconstruct", help="parse a wire-format stream into call records (JSON)"
    )
    reconstruct.add_argument("stream", help="path to a .jsonl instrumentation stream")

    args = parser.parse_args(argv)

    if args.command == "trace-reconstruct":
        stream = parse_wire_stream(Path(args.stream).read_text(encoding="utf-8"))
        calls = reconstruct_calls(stream.events)
        json.dump(
            {
                "corruptions": list(stream.corruptions),
                "regions": [list(r) for r in stream.regions.ranges],
                "calls": [
                    {
                        "seq_id": c.seq_id,
                        "thread_id": c.thread_id,
                        "function": c.function,
                        "entry_registers": c.entry_registers,
                        "return_value": c.return_value,
                        "writes": [w.decode("utf-8", "replace") for w in c.attributed_writes],
                        "invocation_ordinal": c.invocation_ordinal,
                    }
                    for c in calls
                ],
            },
            sys.stdout,
            indent=2,
        )
        print()
        return 0

    if not args.manifest:
        parser.error("--manifest is required for this command")

    if args.command == "validate":
        violations = validate_manifest(load_manifest(args.manifest))
        for v in violations:
            print(f"violation: {v}")
        return 1 if violations else 0

    config = _load_run_config(args)
    if args.command == "run":
        root = orchestrator.run_pipeline(config)
        print(f"run complete: {root}")
        return 0

    run = orchestrator.Run(config)
    run.root.mkdir(parents=True, exist_ok=True)
    STAGES[args.command](run)
    print(f"stage {args.command} complete: {run.root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
