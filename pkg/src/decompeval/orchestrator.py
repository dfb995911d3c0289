"""Pipeline orchestration: build -> decompile -> readability/repair -> trace ->
diff -> report, persisted in a resumable run-directory layout.

Layout: runs/<run-id>/
  builds/<entry-id>/{binary, build.json, build.stderr.txt, orig-stdout.txt}
  tasks/<task-id>/{decompiled.*, readability/<judge>.json,
                   repair/<model>/iter-NNN/..., repair/<model>/outcome.json,
                   outcome.json, traces/..., verdicts.json}
  exchanges/   (content-addressed replay store)
  reports/     (CSV + JSON per table)

<task-id> = <dimension>_<compiler>_<opt>_<debug>_<arch>_<decompiler>. Every
stage skips work whose artifact already exists, so reruns are no-ops and a
task whose exchanges are already persisted never re-invokes a model.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import readability as rdb
from .adapters import AdapterError, DecompilerAdapter, LocalHostBackend, OutputUnit
from .build import (
    CompileInvocation,
    ToolchainNotFoundError,
    build,
    entry_id,
    host_architecture,
)
from .functionality import (
    VerdictCategory,
    build_label_sequence,
    classify_program,
    driver_coverage,
    io_match_rate,
    match_calls,
    parse_observations,
    parse_wire_stream,
    reconstruct_calls,
    seq_similarity,
)
from .gateway import (
    Gateway,
    HttpClient,
    ModelConfig,
    ReplayStore,
    UsageSummary,
    aggregate_usage,
    exchange_key,
)
from .manifest import (
    BuildAxes,
    BuildMatrix,
    Manifest,
    MatrixEntry,
    expand_matrix,
    load_manifest,
    validate_manifest,
)
from .repair import RepairOutcome, RepairTrace, Tier, run_repair
from .reporting import (
    ReportTable,
    render_effort,
    render_efficiency,
    render_functionality,
    render_readability,
    render_recompilability,
)

log = logging.getLogger(__name__)

EXEC_TIMEOUT_S = 10.0


@dataclass
class RunConfig:
    manifest_path: Path
    adapters: list[DecompilerAdapter]
    judge_models: list[ModelConfig]
    repair_models: list[ModelConfig]
    output_root: Path
    run_id: str = "run"
    budget: int = 50
    window_radius: int = 20
    jobs: int = 1
    replay: bool = False
    backend: object = field(default_factory=LocalHostBackend)
    gateway_client: object = None  # defaults to HttpClient in record mode
    axes: BuildAxes | None = None  # optional override of the manifest axes

    def validate(self) -> None:
        if not self.adapters:
            raise ValueError("at least one decompiler adapter is required")
        if not self.judge_models:
            raise ValueError("at least one judge model is required")
        if not self.repair_models:
            raise ValueError("at least one repair model is required")


@dataclass(frozen=True)
class Task:
    task_id: str
    entry: MatrixEntry
    adapter: DecompilerAdapter

    @property
    def suffix(self) -> str:
        return Path(self.entry.file.path).suffix


class Run:
    """Paths and persisted state of one run directory."""

    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self.manifest: Manifest = load_manifest(config.manifest_path)
        violations = validate_manifest(self.manifest)
        if violations:
            raise ValueError("manifest is invalid: " + "; ".join(violations))
        self.axes = config.axes or self.manifest.axes
        self.root = Path(config.output_root) / "runs" / config.run_id
        self.builds_dir = self.root / "builds"
        self.tasks_dir = self.root / "tasks"
        self.reports_dir = self.root / "reports"
        self.store = ReplayStore(self.root / "exchanges")
        self.gateway = Gateway(
            self.store,
            client=None if config.replay else (config.gateway_client or HttpClient()),
            mode="replay" if config.replay else "record",
        )

    # -- enumeration -------------------------------------------------------

    def matrix(self) -> BuildMatrix:
        return expand_matrix(self.manifest.dimension_files(), self.axes)

    def tasks(self) -> list[Task]:
        out = []
        for entry in self.matrix().entries:
            for adapter in self.config.adapters:
                task_id = "_".join(
                    (
                        entry.file.dimension.value,
                        entry.config.compiler.value,
                        entry.config.optimization.value,
                        entry.config.debug.value,
                        entry.config.architecture.value,
                        adapter.name,
                    )
                )
                out.append(Task(task_id=task_id, entry=entry, adapter=adapter))
        return out

    def entry_dir(self, entry: MatrixEntry) -> Path:
        return self.builds_dir / entry_id(entry)

    def task_dir(self, task: Task) -> Path:
        return self.tasks_dir / task.task_id

    def _map(self, fn, items):
        if self.config.jobs <= 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Stages


def stage_build(run: Run) -> list[dict]:
    """Compile every matrix entry once; configuration errors are markers, not aborts."""

    def one(entry: MatrixEntry) -> dict:
        out_dir = run.entry_dir(entry)
        meta_path = out_dir / "build.json"
        if meta_path.is_file():
            return json.loads(meta_path.read_text(encoding="utf-8"))
        out_dir.mkdir(parents=True, exist_ok=True)
        meta = {
            "entry_id": entry_id(entry),
            "file": entry.file.path,
            "dimension": entry.file.dimension.value,
            "config": entry.config.short(),
        }
        inv = CompileInvocation(
            source_paths=(run.manifest.base_dir / entry.file.path,),
            config=entry.config,
            output_path=out_dir / "binary",
        )
        try:
            result = build(inv)
            (out_dir / "build.stderr.txt").write_text(result.raw_stderr, encoding="utf-8")
            meta.update(
                compile_ok=result.compile_ok,
                link_ok=result.link_ok,
                exit_code=result.exit_code,
                duration_ms=result.duration_ms,
                config_error=None,
            )
        except ToolchainNotFoundError as exc:
            meta.update(compile_ok=False, link_ok=None, config_error=str(exc))
        meta_path.write_text(json.dumps(meta, indent=2), encoding="utf-8")
        return meta

    return run._map(one, run.matrix().entries)


def _entry_built(run: Run, entry: MatrixEntry) -> bool:
    meta_path = run.entry_dir(entry) / "build.json"
    if not meta_path.is_file():
        return False
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    return bool(meta.get("compile_ok")) and meta.get("link_ok") is not False


def stage_decompile(run: Run) -> None:
    def one(task: Task) -> None:
        tdir = run.task_dir(task)
        out = tdir / f"decompiled{task.suffix}"
        marker = tdir / "decompile-error.json"
        if out.is_file() or marker.is_file():
            return
        if not _entry_built(run, task.entry):
            return
        tdir.mkdir(parents=True, exist_ok=True)
        try:
            text = task.adapter.decompile(
                run.entry_dir(task.entry) / "binary",
                task.task_id,
                Path(task.entry.file.path).stem,
                task.suffix,
            )
            out.write_text(text, encoding="utf-8")
        except (AdapterError, OSError) as exc:
            marker.write_text(json.dumps({"error": str(exc)}), encoding="utf-8")
            log.warning("decompile failed for %s: %s", task.task_id, exc)

    run._map(one, run.tasks())


def _decompiled_text(run: Run, task: Task) -> str | None:
    path = run.task_dir(task) / f"decompiled{task.suffix}"
    return path.read_text(encoding="utf-8") if path.is_file() else None


def stage_readability(run: Run) -> None:
    def one(task: Task) -> None:
        decompiled = _decompiled_text(run, task)
        if decompiled is None:
            return
        source = run.manifest.resolve_source(task.entry.file).read_text(encoding="utf-8")
        rdir = run.task_dir(task) / "readability"
        messages = rdb.build_judge_prompt(source, decompiled)
        for judge in run.config.judge_models:
            out = rdir / f"{judge.model_id}.json"
            if out.is_file():
                continue
            rdir.mkdir(parents=True, exist_ok=True)
            ref = exchange_key(judge.model_id, messages)
            cards = rdb.score_pair(source, decompiled, [judge], run.gateway)
            card = cards[0]
            if isinstance(card, rdb.JudgeScorecard):
                payload = {"status": "ok", "exchange_ref": ref, **card.to_dict()}
            else:
                payload = {
                    "status": "missing",
                    "judge_id": card.judge_id,
                    "reason": card.reason,
                    "exchange_ref": ref,
                }
            out.write_text(json.dumps(payload, indent=2), encoding="utf-8")

    run._map(one, run.tasks())


def stage_repair(run: Run) -> None:
    def one(task: Task) -> None:
        if task.adapter.unit is OutputUnit.FunctionGranularity:
            return  # no linkable program to repair
        decompiled = _decompiled_text(run, task)
        if decompiled is None:
            return
        tdir = run.task_dir(task)
        summary_path = tdir / "outcome.json"
        summary = (
            json.loads(summary_path.read_text(encoding="utf-8")) if summary_path.is_file() else {}
        )
        changed = False
        for model in run.config.repair_models:
            wdir = tdir / "repair" / model.model_id
            if (wdir / "outcome.json").is_file():
                if model.model_id not in summary:
                    summary[model.model_id] = json.loads(
                        (wdir / "outcome.json").read_text(encoding="utf-8")
                    )
                    changed = True
                continue
            trace = run_repair(
                decompiled,
                task.entry.config,
                run.gateway,
                model,
                workdir=wdir,
                budget=run.config.budget,
                window_radius=run.config.window_radius,
                task_ref=task.task_id,
                source_suffix=task.suffix,
            )
            outcome = trace.outcome.to_dict()
            outcome["binary"] = (
                str(trace.binary_path.relative_to(run.root)) if trace.binary_path else None
            )
            (wdir / "outcome.json").write_text(json.dumps(outcome, indent=2), encoding="utf-8")
            summary[model.model_id] = outcome
            changed = True
        if changed and summary:
            summary_path.write_text(json.dumps(summary, indent=2), encoding="utf-8")

    run._map(one, run.tasks())


def _run_binary(run: Run, binary: Path) -> tuple[str, bool, int]:
    outcome = run.config.backend.run(binary, timeout_s=EXEC_TIMEOUT_S)
    return outcome.stdout, outcome.crashed, outcome.exit_code


def stage_trace(run: Run) -> None:
    """Execute original and recompiled binaries, capturing stdout observations.

    Cross-architecture entries are skipped on the local backend; the missing
    trace surfaces as Unsupported downstream. Instrumentation streams
    (orig.jsonl / recomp.jsonl), when recorded next to the stdout captures,
    feed the function- and instruction-level comparisons in stage_diff.
    """
    host = host_architecture()

    def one(task: Task) -> None:
        tdir = run.task_dir(task)
        if not tdir.is_dir():
            return
        traces = tdir / "traces"
        local_only = isinstance(run.config.backend, LocalHostBackend)
        if local_only and task.entry.config.architecture is not host:
            return
        orig_txt = traces / "orig-stdout.txt"
        if not orig_txt.is_file() and _entry_built(run, task.entry):
            cached = run.entry_dir(task.entry) / "orig-stdout.txt"
            if not cached.is_file():
                stdout, crashed, code = _run_binary(run, run.entry_dir(task.entry) / "binary")
                cached.write_text(stdout, encoding="utf-8")
                (run.entry_dir(task.entry) / "orig-meta.json").write_text(
                    json.dumps({"crashed": crashed, "exit_code": code}), encoding="utf-8"
                )
            traces.mkdir(parents=True, exist_ok=True)
            orig_txt.write_text(cached.read_text(encoding="utf-8"), encoding="utf-8")
        summary_path = tdir / "outcome.json"
        if not summary_path.is_file():
            return
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        for model_id, outcome in summary.items():
            if outcome.get("tier") != Tier.FS.value or not outcome.get("binary"):
                continue
            mdir = traces / model_id
            out_txt = mdir / "recomp-stdout.txt"
            if out_txt.is_file():
                continue
            binary = run.root / outcome["binary"]
            if not binary.is_file():
                continue
            mdir.mkdir(parents=True, exist_ok=True)
            stdout, crashed, code = _run_binary(run, binary)
            out_txt.write_text(stdout, encoding="utf-8")
            (mdir / "recomp-meta.json").write_text(
                json.dumps({"crashed": crashed, "exit_code": code}), encoding="utf-8"
            )

    run._map(one, run.tasks())


def _case_observations(observations, case_id):
    return [o for o in observations if o.case_id == case_id]


def stage_diff(run: Run) -> None:
    """Program-, function-, and instruction-level verdicts per task and model."""

    def one(task: Task) -> None:
        tdir = run.task_dir(task)
        if not tdir.is_dir():
            return
        verdicts_path = tdir / "verdicts.json"
        if verdicts_path.is_file():
            return
        traces = tdir / "traces"
        orig_txt = traces / "orig-stdout.txt"
        orig_obs = (
            parse_observations(orig_txt.read_text(encoding="utf-8"))
            if orig_txt.is_file()
            else None
        )
        case_ids = {
            cid
            for case in run.manifest.cases
            if case.source_file == task.entry.file.path
            for cid in case.expected_observation_ids
        }
        orig_stream_path = traces / "orig.jsonl"
        orig_stream = (
            parse_wire_stream(orig_stream_path.read_text(encoding="utf-8"))
            if orig_stream_path.is_file()
            else None
        )
        result: dict = {"task_id": task.task_id, "unit": task.adapter.unit.value, "models": {}}
        summary_path = tdir / "outcome.json"
        summary = (
            json.loads(summary_path.read_text(encoding="utf-8")) if summary_path.is_file() else {}
        )
        for model in run.config.repair_models:
            model_id = model.model_id
            outcome = summary.get(model_id)
            entry: dict = {"included": False, "program": None, "per_case": {},
                           "function_level": None, "instruction_level": None}
            if (
                task.adapter.unit is OutputUnit.WholeProgram
                and outcome is not None
                and outcome.get("tier") == Tier.FS.value
            ):
                entry["included"] = True
                rec_txt = traces / model_id / "recomp-stdout.txt"
                meta_path = traces / model_id / "recomp-meta.json"
                if orig_obs is None or not rec_txt.is_file():
                    # no comparable observable evidence for this task
                    entry["program"] = {
                        "category": "Unsupported",
                        "matched": 0,
                        "total_original": len(orig_obs or []),
                        "crash": False,
                        "reason": "trace missing",
                    }
                else:
                    rec_obs = parse_observations(rec_txt.read_text(encoding="utf-8"))
                    crashed = False
                    if meta_path.is_file():
                        crashed = bool(json.loads(meta_path.read_text(encoding="utf-8")).get("crashed"))
                    verdict = classify_program(orig_obs, rec_obs, crashed)
                    entry["program"] = verdict.to_dict()
                    entry["per_case"] = {
                        cid: classify_program(
                            _case_observations(orig_obs, cid),
                            _case_observations(rec_obs, cid),
                            crashed,
                        ).category.value
                        for cid in sorted(case_ids)
                    }
                rec_stream_path = traces / model_id / "recomp.jsonl"
                if orig_stream is not None and rec_stream_path.is_file():
                    rec_stream = parse_wire_stream(rec_stream_path.read_text(encoding="utf-8"))
                    orig_calls = reconstruct_calls(orig_stream.events)
                    rec_calls = reconstruct_calls(rec_stream.events)
                    pairs = match_calls(orig_calls, rec_calls)
                    rate, available = io_match_rate(pairs, task.entry.config.architecture)
                    entry["function_level"] = {
                        "pairs": len(pairs),
                        "evidence_available": available,
                        "io_match": rate if available else None,
                    }
                    seq_a = build_label_sequence(
                        orig_calls, task.entry.config.architecture, orig_stream.regions
                    )
                    seq_b = build_label_sequence(
                        rec_calls, task.entry.config.architecture, rec_stream.regions
                    )
                    entry["instruction_level"] = {
                        "similarity": seq_similarity(seq_a, seq_b),
                        "orig_tokens": len(seq_a),
                        "recomp_tokens": len(seq_b),
                    }
            result["models"][model_id] = entry
        if result["models"]:
            verdicts_path.write_text(json.dumps(result, indent=2), encoding="utf-8")

    run._map(one, run.tasks())
    _write_driver_coverage(run)


def _write_driver_coverage(run: Run) -> None:
    observations = []
    for entry in run.matrix().entries:
        cached = run.entry_dir(entry) / "orig-stdout.txt"
        if cached.is_file():
            observations.extend(parse_observations(cached.read_text(encoding="utf-8")))
    coverage = driver_coverage(observations, run.manifest)
    run.reports_dir.mkdir(parents=True, exist_ok=True)
    (run.reports_dir / "driver_coverage.json").write_text(
        json.dumps({dim.value: frac for dim, frac in sorted(coverage.items())}, indent=2),
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# Reporting


def _load_task_summaries(run: Run):
    for task in run.tasks():
        summary_path = run.task_dir(task) / "outcome.json"
        if summary_path.is_file():
            yield task, json.loads(summary_path.read_text(encoding="utf-8"))


def stage_report(run: Run) -> dict:
    """Render every table from persisted artifacts; pure, deterministic pass."""
    tables: dict[str, ReportTable] = {}
    model_order = [m.model_id for m in run.config.repair_models]
    judge_order = [j.model_id for j in run.config.judge_models]

    # Recompilability: whole-program tasks only (typed exclusion).
    counts: dict[str, dict[str, dict[Tier, int]]] = {}
    effort_sources: dict[str, list[RepairTrace]] = {}
    for task, summary in _load_task_summaries(run):
        if task.adapter.unit is OutputUnit.FunctionGranularity:
            continue
        row = counts.setdefault(task.adapter.name, {m: {} for m in model_order})
        for model_id in model_order:
            outcome = summary.get(model_id)
            if outcome is None:
                continue
            tier = Tier(outcome["tier"])
            row[model_id][tier] = row[model_id].get(tier, 0) + 1
            if tier in (Tier.LF, Tier.CF):
                effort_sources.setdefault(task.adapter.name, []).append(
                    RepairTrace(
                        task_ref=task.task_id,
                        iterations=[],
                        outcome=RepairOutcome(
                            tier=tier,
                            iterations_used=outcome["iterations_used"],
                            initial_errors=outcome["initial_errors"],
                            min_residual_errors=outcome["min_residual_errors"],
                            effort_ratio=outcome["effort_ratio"],
                            flags=frozenset(),
                        ),
                    )
                )
    if counts:
        tables["recompilability_overview"] = render_recompilability(counts, model_order)
        tables["repair_effort"] = render_effort(effort_sources)

    # Functionality: one table per repair model over its FS tasks.
    for model_id in model_order:
        rows: dict[str, dict] = {}
        for task in run.tasks():
            verdicts_path = run.task_dir(task) / "verdicts.json"
            if not verdicts_path.is_file():
                continue
            verdicts = json.loads(verdicts_path.read_text(encoding="utf-8"))
            entry = verdicts["models"].get(model_id)
            if not entry or not entry.get("included") or entry.get("program") is None:
                continue
            row = rows.setdefault(
                task.adapter.name,
                {"verdicts": {}, "denominator": 0, "function_evidence": 0,
                 "_io": [], "_sim": [], "instruction_evidence": 0},
            )
            row["denominator"] += 1
            cat = VerdictCategory(entry["program"]["category"])
            row["verdicts"][cat] = row["verdicts"].get(cat, 0) + 1
            fl = entry.get("function_level")
            if fl and fl.get("evidence_available"):
                row["function_evidence"] += 1
                row["_io"].append(fl["io_match"])
            il = entry.get("instruction_level")
            if il is not None:
                row["instruction_evidence"] += 1
                row["_sim"].append(il["similarity"])
        for row in rows.values():
            row["io_match"] = sum(row["_io"]) / len(row["_io"]) if row["_io"] else None
            row["similarity"] = sum(row["_sim"]) / len(row["_sim"]) if row["_sim"] else None
            del row["_io"], row["_sim"]
        if rows:
            tables[f"functionality_overview_{model_id}"] = render_functionality(rows)

    # Readability cells and rank agreement.
    scorecards: dict[str, list] = {}
    for task in run.tasks():
        rdir = run.task_dir(task) / "readability"
        if not rdir.is_dir():
            continue
        for judge in judge_order:
            path = rdir / f"{judge}.json"
            if not path.is_file():
                continue
            raw = json.loads(path.read_text(encoding="utf-8"))
            if raw.get("status") != "ok":
                continue
            scorecards.setdefault(task.adapter.name, []).append(
                rdb.JudgeScorecard.from_sub_scores(judge, raw["sub_scores"])
            )
    if scorecards:
        cells = rdb.aggregate_cells(scorecards)
        per_judge: dict[str, dict] = {}
        for decompiler, cards in scorecards.items():
            for level in rdb.RubricLevel:
                for judge in judge_order:
                    mine = [c.level_scores[level] for c in cards if c.judge_id == judge]
                    if mine:
                        per_judge.setdefault(judge, {}).setdefault(level, {})[decompiler] = (
                            sum(mine) / len(mine)
                        )
        rank_stats = (
            rdb.rank_agreements(per_judge) if len(scorecards) >= 2 and len(judge_order) >= 2 else []
        )
        tables["readability_overview"] = render_readability(cells, rank_stats, judge_order)

    # Efficiency: token/time sums per (model, stage), reconstructed from the
    # exchange refs each stage persisted next to its artifacts.
    efficiency: dict[str, dict[str, UsageSummary]] = {}
    judge_tasks: dict[str, list] = {j: [] for j in judge_order}
    repair_tasks: dict[str, list] = {m: [] for m in model_order}
    for task in run.tasks():
        tdir = run.task_dir(task)
        rdir = tdir / "readability"
        for judge in judge_order:
            path = rdir / f"{judge}.json"
            if not path.is_file():
                continue
            ref = json.loads(path.read_text(encoding="utf-8")).get("exchange_ref")
            recorded = run.store.get(ref) if ref else None
            if recorded:
                judge_tasks[judge].append([recorded])
        for model_id in model_order:
            wdir = tdir / "repair" / model_id
            if not wdir.is_dir():
                continue
            exchanges = []
            for edits_file in sorted(wdir.glob("iter-*/edits.json")):
                ref = json.loads(edits_file.read_text(encoding="utf-8")).get("exchange_ref")
                recorded = run.store.get(ref) if ref else None
                if recorded:
                    exchanges.append(recorded)
            if exchanges:
                repair_tasks[model_id].append(exchanges)
    for judge in judge_order:
        if judge_tasks[judge]:
            efficiency.setdefault(judge, {})["readability"] = aggregate_usage(judge_tasks[judge])
    for model_id in model_order:
        if repair_tasks[model_id]:
            efficiency.setdefault(model_id, {})["repair"] = aggregate_usage(repair_tasks[model_id])
    if efficiency:
        tables["efficiency_summary"] = render_efficiency(efficiency)

    run.reports_dir.mkdir(parents=True, exist_ok=True)
    for name, table in tables.items():
        (run.reports_dir / f"{name}.csv").write_text(table.to_csv(), encoding="utf-8")
        (run.reports_dir / f"{name}.json").write_text(table.to_json(), encoding="utf-8")
    return tables


def run_pipeline(config: RunConfig) -> Path:
    """All stages in order; per-task failures are isolated, reruns resume."""
    run = Run(config)
    for adapter in config.adapters:
        if adapter.mode.value == "DirectoryOfOutputs" and (
            adapter.directory is None or not Path(adapter.directory).is_dir()
        ):
            raise AdapterError(f"adapter {adapter.name}: output directory not resolvable")
    run.root.mkdir(parents=True, exist_ok=True)
    stage_build(run)
    stage_decompile(run)
    stage_readability(run)
    stage_repair(run)
    stage_trace(run)
    stage_diff(run)
    stage_report(run)
    return run.root
