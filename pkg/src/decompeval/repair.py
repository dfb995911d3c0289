"""Budgeted iterative compile-and-repair over decompiled output.

Each iteration compiles (and links) the current code under the task's original
build flags, feeds the structured error stack plus a code window to the repair
model, and applies the returned edit list. The loop ends on a linkable binary
or at budget exhaustion; outcomes classify into full success, link fail, or
compile fail, with the historical lowest residual error count feeding the
effort ratio.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import gateway
from .build import CompileInvocation, CompileResult, PhaseMode, build
from .diagnostics import (
    Diagnostic,
    ErrorCategory,
    ErrorSnapshot,
    Phase,
    Severity,
    dump_diagnostics,
    parse_diagnostics,
    snapshot,
)
from .manifest import BuildConfig

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 50
DEFAULT_WINDOW_RADIUS = 20
STUCK_WINDOW = 5
SHADOW_PREFIX = "__shadow_"

# libc symbols decompilers commonly re-emit as local definitions; such
# duplicates are renamed before the first compile so they cannot shadow the
# runtime at link time.
LIBC_SYMBOLS = frozenset(
    {
        "printf", "puts", "putchar", "fprintf", "sprintf", "snprintf",
        "malloc", "calloc", "realloc", "free",
        "memcpy", "memmove", "memset", "memcmp",
        "strlen", "strcmp", "strncmp", "strcpy", "strncpy", "strcat",
        "read", "write", "open", "close", "exit", "abort",
    }
)


class Tier(str, Enum):
    FS = "FS"  # full success: linkable binary within budget
    LF = "LF"  # link fail at exhaustion
    CF = "CF"  # compile fail at exhaustion


class RepairFlag(str, Enum):
    Oscillating = "Oscillating"
    Stuck = "Stuck"


class EditKind(str, Enum):
    EditCodeBlock = "edit_code_block"
    ReplaceString = "replace_string"


@dataclass(frozen=True)
class EditCommand:
    kind: EditKind
    start_line: int | None = None  # 1-based inclusive
    end_line: int | None = None
    replacement: str = ""
    needle: str | None = None

    def __post_init__(self):
        if self.kind is EditKind.EditCodeBlock:
            if self.start_line is None or self.end_line is None or self.start_line > self.end_line:
                raise ValueError("edit_code_block needs start_line <= end_line")
        else:
            if not self.needle:
                raise ValueError("replace_string needs a non-empty needle")

    def to_dict(self) -> dict:
        if self.kind is EditKind.EditCodeBlock:
            return {
                "kind": self.kind.value,
                "start_line": self.start_line,
                "end_line": self.end_line,
                "replacement": self.replacement,
            }
        return {"kind": self.kind.value, "needle": self.needle, "replacement": self.replacement}


@dataclass(frozen=True)
class ApplyFailure:
    edit_index: int
    reason: str


def apply_edits(source_text: str, edits: list[EditCommand]) -> tuple[str, list[ApplyFailure]]:
    """Apply edits in list order against the progressively edited text.

    A failing edit (out-of-range lines; absent or ambiguous needle) is
    recorded and leaves the text untouched.
    """
    text = source_text
    failures: list[ApplyFailure] = []
    for i, edit in enumerate(edits):
        if edit.kind is EditKind.EditCodeBlock:
            lines = text.split("\n")
            # Trailing newline contributes an empty split tail, not a line.
            line_count = len(lines) - 1 if lines and lines[-1] == "" else len(lines)
            if edit.start_line < 1 or edit.end_line > line_count:
                failures.append(
                    ApplyFailure(i, f"line range {edit.start_line}-{edit.end_line} outside 1-{line_count}")
                )
                continue
            replacement_lines = edit.replacement.split("\n") if edit.replacement else []
            lines[edit.start_line - 1 : edit.end_line] = replacement_lines
            text = "\n".join(lines)
        else:
            count = text.count(edit.needle)
            if count == 0:
                failures.append(ApplyFailure(i, "needle not found"))
                continue
            if count > 1:
                failures.append(ApplyFailure(i, f"needle ambiguous ({count} occurrences)"))
                continue
            text = text.replace(edit.needle, edit.replacement, 1)
    return text, failures


def _edits_schema_problems(obj) -> list[str]:
    if not isinstance(obj, dict) or "edits" not in obj:
        return ["edits"]
    if not isinstance(obj["edits"], list):
        return ["edits (not a list)"]
    return []


gateway.register_schema("repair-edits", _edits_schema_problems)


def parse_edit_list(parsed: dict) -> tuple[list[EditCommand], list[str]]:
    """Convert the model's edit JSON into commands; malformed entries are
    rejected individually, never the whole iteration."""
    edits: list[EditCommand] = []
    rejected: list[str] = []
    for i, raw in enumerate(parsed.get("edits", [])):
        try:
            kind = EditKind(raw.get("kind", ""))
            if kind is EditKind.EditCodeBlock:
                edits.append(
                    EditCommand(
                        kind=kind,
                        start_line=int(raw["start_line"]),
                        end_line=int(raw["end_line"]),
                        replacement=str(raw.get("replacement", "")),
                    )
                )
            else:
                edits.append(
                    EditCommand(
                        kind=kind,
                        needle=str(raw["needle"]),
                        replacement=str(raw.get("replacement", "")),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            rejected.append(f"edit {i}: {exc}")
    return edits, rejected


def classify_outcome(
    final_compile_ok: bool, final_link_ok: bool | None, budget_exhausted: bool
) -> Tier:
    if final_link_ok is not None and not final_compile_ok:
        raise ValueError("link status is only defined when compilation succeeded")
    if final_compile_ok and final_link_ok:
        return Tier.FS
    if not budget_exhausted:
        raise ValueError("a failing state before exhaustion is not a final outcome")
    if final_compile_ok:
        return Tier.LF
    return Tier.CF


# ---------------------------------------------------------------------------
# Link stubs

_DEFINITION_RE = re.compile(
    r"^[ \t]*(?:[A-Za-z_][\w \t\*]*[ \t\*])?([A-Za-z_]\w*)[ \t]*\([^;{}]*\)[ \t]*\{", re.MULTILINE
)
_UNDEF_REF_RE = re.compile(r"undefined reference to [`']([^`']+)'|undefined symbol: (\S+)")


@dataclass(frozen=True)
class StubUnit:
    text: str
    skipped: tuple[str, ...]


def defined_function_names(code: str) -> frozenset:
    return frozenset(m.group(1) for m in _DEFINITION_RE.finditer(code))


def extract_undefined_symbols(link_diags: list[Diagnostic]) -> list[str]:
    seen: list[str] = []
    for d in link_diags:
        if d.category is not ErrorCategory.UndefinedReference:
            continue
        for m in _UNDEF_REF_RE.finditer(d.raw_message):
            name = m.group(1) or m.group(2)
            if name and name not in seen:
                seen.append(name)
    return seen


def generate_stubs(
    unresolved_symbols: list[str],
    defined_symbols: frozenset = frozenset(),
    data_symbols: frozenset = frozenset(),
) -> StubUnit:
    """One zero-valued definition per unresolved symbol, in its own TU.

    Symbols already defined in the repaired source are skipped with a warning
    so a stub can never override a strong definition.
    """
    if not unresolved_symbols:
        raise ValueError("stub generation needs at least one unresolved symbol")
    if len(set(unresolved_symbols)) != len(unresolved_symbols):
        raise ValueError("unresolved symbol list must be deduplicated")
    lines = [
        "/* link stubs: zero-valued definitions for unresolved externals */",
        "#ifdef __cplusplus",
        'extern "C" {',
        "#endif",
    ]
    skipped: list[str] = []
    for name in unresolved_symbols:
        if name in defined_symbols:
            log.warning("stub for %s skipped: already defined in the repaired source", name)
            skipped.append(name)
        elif name in data_symbols:
            lines.append(f"long {name} = 0;")
        else:
            lines.append(f"long {name}() {{ return 0; }}")
    lines += ["#ifdef __cplusplus", "}", "#endif"]
    return StubUnit(text="\n".join(lines) + "\n", skipped=tuple(skipped))


def sanitize_runtime_shadows(code: str) -> tuple[str, dict]:
    """Rename decompiler-emitted duplicates of libc symbols before first compile."""
    renames: dict[str, str] = {}
    for name in sorted(defined_function_names(code) & LIBC_SYMBOLS):
        renames[name] = SHADOW_PREFIX + name
    for old, new in renames.items():
        code = re.sub(rf"\b{re.escape(old)}\b", new, code)
    return code, renames


# ---------------------------------------------------------------------------
# Trace records


@dataclass(frozen=True)
class IterationRecord:
    index: int
    snapshot_before: ErrorSnapshot
    diagnostics_before: tuple[Diagnostic, ...]
    edits: tuple[EditCommand, ...]
    apply_failures: tuple[ApplyFailure, ...]
    snapshot_after: ErrorSnapshot
    compile_ok_after: bool
    link_ok_after: bool | None
    exchange_ref: str | None = None
    llm_error: str | None = None
    rejected_edits: tuple[str, ...] = ()


@dataclass(frozen=True)
class RepairOutcome:
    tier: Tier
    iterations_used: int
    initial_errors: int
    min_residual_errors: int
    effort_ratio: float
    flags: frozenset

    def to_dict(self) -> dict:
        return {
            "tier": self.tier.value,
            "iterations_used": self.iterations_used,
            "initial_errors": self.initial_errors,
            "min_residual_errors": self.min_residual_errors,
            "effort_ratio": self.effort_ratio,
            "flags": sorted(f.value for f in self.flags),
        }


@dataclass
class RepairTrace:
    task_ref: str
    iterations: list[IterationRecord]
    outcome: RepairOutcome | None = None
    stub_files: list[Path] = field(default_factory=list)
    renamed_symbols: dict = field(default_factory=dict)
    binary_path: Path | None = None


def detect_flags(trace: RepairTrace, stuck_window: int = STUCK_WINDOW) -> frozenset:
    """Oscillating: an error signature vanishes and later reappears.
    Stuck: the error total is constant over `stuck_window` consecutive iterations."""
    if len(trace.iterations) < 2:
        raise ValueError("flag detection needs at least two iterations")
    flags: set[RepairFlag] = set()

    def norm(msg: str) -> str:
        # First message line only: attached notes may carry per-run paths.
        return " ".join(msg.split("\n")[0].lower().split())

    sig_sets = [
        {(d.category.value, d.line, norm(d.raw_message)) for d in it.diagnostics_before}
        for it in trace.iterations
    ]
    all_sigs = set().union(*sig_sets)
    for sig in all_sigs:
        present = [i for i, sigs in enumerate(sig_sets) if sig in sigs]
        if present[-1] - present[0] + 1 != len(present):  # presence has a gap
            flags.add(RepairFlag.Oscillating)
            break

    totals = [it.snapshot_before.total_errors for it in trace.iterations]
    run = 1
    for prev, cur in zip(totals, totals[1:]):
        run = run + 1 if cur == prev else 1
        if run >= stuck_window and cur > 0:
            flags.add(RepairFlag.Stuck)
            break
    return frozenset(flags)


def success_curve(traces: list[RepairTrace], budget: int = DEFAULT_BUDGET):
    """Cumulative fraction of traces that reached full success by iteration k."""
    n = len(traces)
    curve = []
    for k in range(1, budget + 1):
        if n == 0:
            curve.append((k, 0.0))
            continue
        wins = sum(
            1
            for t in traces
            if t.outcome is not None
            and t.outcome.tier is Tier.FS
            and t.outcome.iterations_used <= k
        )
        curve.append((k, wins / n))
    return curve


def tier_at_cap(trace: RepairTrace, cap: int) -> Tier:
    """Tier the trace would have received under a smaller iteration cap."""
    out = trace.outcome
    if out is None:
        raise ValueError("trace has no outcome")
    if out.tier is Tier.FS and out.iterations_used <= cap:
        return Tier.FS
    last = trace.iterations[min(cap, len(trace.iterations)) - 1]
    if last.compile_ok_after and last.link_ok_after:
        # Success first observed after the cap; under this cap it is a near miss.
        return Tier.LF if last.snapshot_after.phase is Phase.Link else Tier.CF
    if last.compile_ok_after:
        return Tier.LF
    return Tier.CF


# ---------------------------------------------------------------------------
# Prompt construction


def code_window(code: str, diags: list[Diagnostic], radius: int = DEFAULT_WINDOW_RADIUS) -> str:
    """Numbered source window around the first reported error line."""
    lines = code.split("\n")
    error_lines = [d.line for d in diags if d.severity is Severity.Error and d.line]
    center = min(error_lines) if error_lines else 1
    lo = max(1, center - radius)
    hi = min(len(lines), center + radius)
    return "\n".join(f"{i:4d} | {lines[i - 1]}" for i in range(lo, hi + 1))


REPAIR_SYSTEM_PROMPT = """You repair decompiled C so that it compiles and links under its original build flags without changing its high-level logic.
You receive the compiler's structured error stack and a numbered window of the problematic code region.
Respond with exactly one JSON object:
{"edits": [
  {"kind": "edit_code_block", "start_line": <int>, "end_line": <int>, "replacement": "<text>"},
  {"kind": "replace_string", "needle": "<unique text>", "replacement": "<text>"}
]}
edit_code_block replaces the inclusive 1-based line range; replace_string must match exactly one occurrence. Emit no other JSON object."""


def build_repair_prompt(
    code: str, diags: list[Diagnostic], radius: int = DEFAULT_WINDOW_RADIUS
):
    user = (
        "Structured error stack:\n"
        + dump_diagnostics(diags)
        + "\n\nCode window:\n"
        + code_window(code, diags, radius)
    )
    return [("system", REPAIR_SYSTEM_PROMPT), ("user", user)]


# ---------------------------------------------------------------------------
# The loop


@dataclass
class _Attempt:
    compile_ok: bool
    link_ok: bool | None
    diagnostics: list[Diagnostic]
    result: CompileResult


def _zero_snapshot(phase: Phase = Phase.Compile) -> ErrorSnapshot:
    return ErrorSnapshot(counts={}, total_errors=0, total_warnings=0, phase=phase)


def run_repair(
    decompiled_source: str,
    build_config: BuildConfig,
    gw: gateway.Gateway,
    model: gateway.ModelConfig,
    workdir: Path,
    budget: int = DEFAULT_BUDGET,
    window_radius: int = DEFAULT_WINDOW_RADIUS,
    stub_mode: str = "auto",
    task_ref: str = "",
    source_suffix: str = ".c",
) -> RepairTrace:
    """Run the compile-and-repair loop; every iteration is persisted under
    workdir/iter-NNN/ and the outcome under workdir/outcome.json."""
    if not decompiled_source:
        raise ValueError("decompiled source must be non-empty")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    stubs_dir = workdir / "stubs"
    compiler_hint = build_config.compiler.value.lower()

    code, renames = sanitize_runtime_shadows(decompiled_source)
    trace = RepairTrace(task_ref=task_ref, iterations=[], renamed_symbols=renames)

    def attempt(text: str, iter_dir: Path) -> _Attempt:
        src = iter_dir / f"code{source_suffix}"
        iter_dir.mkdir(parents=True, exist_ok=True)
        src.write_text(text, encoding="utf-8")
        sources = [src] + trace.stub_files
        inv = CompileInvocation(
            source_paths=tuple(sources),
            config=build_config,
            output_path=iter_dir / "binary",
            phase_mode=PhaseMode.CompileAndLink,
        )
        result = build(inv)
        if not result.compile_ok:
            diags = parse_diagnostics(result.compile_stderr, Phase.Compile, compiler_hint)
            return _Attempt(False, None, diags, result)
        link_diags = parse_diagnostics(result.link_stderr or "", Phase.Link, compiler_hint)
        if result.link_ok:
            return _Attempt(True, True, [], result)
        if stub_mode == "auto":
            missing = [
                s for s in extract_undefined_symbols(link_diags)
                if not s.startswith(SHADOW_PREFIX)
            ]
            missing = [s for s in missing if s not in defined_function_names(text)]
            if missing:
                stubs_dir.mkdir(parents=True, exist_ok=True)
                stub_path = stubs_dir / "stubs.c"
                known = set()
                if stub_path.exists():
                    known = set(
                        re.findall(r"^long (\w+)", stub_path.read_text(encoding="utf-8"), re.M)
                    )
                fresh = [s for s in missing if s not in known]
                if fresh:
                    unit = generate_stubs(
                        sorted(known | set(fresh)), defined_function_names(text)
                    )
                    stub_path.write_text(unit.text, encoding="utf-8")
                    if stub_path not in trace.stub_files:
                        trace.stub_files.append(stub_path)
                    retry = build(
                        CompileInvocation(
                            source_paths=tuple([src] + trace.stub_files),
                            config=build_config,
                            output_path=iter_dir / "binary",
                            phase_mode=PhaseMode.CompileAndLink,
                        )
                    )
                    if retry.link_ok:
                        return _Attempt(True, True, [], retry)
                    link_diags = parse_diagnostics(
                        retry.link_stderr or "", Phase.Link, compiler_hint
                    )
                    result = retry
        return _Attempt(True, False, link_diags, result)

    current = attempt(code, workdir / "iter-001")
    tier: Tier | None = None
    iterations_used = budget
    for index in range(1, budget + 1):
        iter_dir = workdir / f"iter-{index:03d}"
        snap_before = snapshot(current.diagnostics)
        if current.compile_ok and current.link_ok:
            trace.iterations.append(
                IterationRecord(
                    index=index,
                    snapshot_before=snap_before,
                    diagnostics_before=tuple(current.diagnostics),
                    edits=(),
                    apply_failures=(),
                    snapshot_after=snap_before,
                    compile_ok_after=True,
                    link_ok_after=True,
                )
            )
            tier = Tier.FS
            iterations_used = index
            trace.binary_path = iter_dir / "binary"
            break

        edits: list[EditCommand] = []
        rejected: tuple[str, ...] = ()
        exchange_ref = None
        llm_error = None
        try:
            messages = build_repair_prompt(code, current.diagnostics, window_radius)
            exchange = gw.complete(model, messages)
            exchange_ref = exchange.key
            parsed = gateway.extract_json(exchange.response_text, "repair-edits")
            edits, rejected_list = parse_edit_list(parsed)
            rejected = tuple(rejected_list)
        except (gateway.GatewayError, gateway.ExtractionError, gateway.SchemaValidationError) as exc:
            llm_error = str(exc)
            log.warning("repair iteration %d: model call failed: %s", index, exc)

        new_code, failures = apply_edits(code, edits)
        iter_dir.mkdir(parents=True, exist_ok=True)
        code_artifact = iter_dir / f"code{source_suffix}"
        if not code_artifact.exists():  # reused compile states skip attempt()
            code_artifact.write_text(code, encoding="utf-8")
        (iter_dir / "diagnostics.json").write_text(
            dump_diagnostics(current.diagnostics), encoding="utf-8"
        )
        (iter_dir / "edits.json").write_text(
            json.dumps(
                {
                    "edits": [e.to_dict() for e in edits],
                    "apply_failures": [
                        {"edit_index": f.edit_index, "reason": f.reason} for f in failures
                    ],
                    "rejected": list(rejected),
                    "llm_error": llm_error,
                    "exchange_ref": exchange_ref,
                },
                indent=2,
            ),
            encoding="utf-8",
        )

        if new_code == code:
            nxt = current  # unchanged input compiles identically; skip the recompile
        else:
            nxt = attempt(new_code, workdir / f"iter-{index + 1:03d}")
        snap_after = (
            _zero_snapshot() if (nxt.compile_ok and nxt.link_ok) else snapshot(nxt.diagnostics)
        )
        trace.iterations.append(
            IterationRecord(
                index=index,
                snapshot_before=snap_before,
                diagnostics_before=tuple(current.diagnostics),
                edits=tuple(edits),
                apply_failures=tuple(failures),
                snapshot_after=snap_after,
                compile_ok_after=nxt.compile_ok,
                link_ok_after=nxt.link_ok,
                exchange_ref=exchange_ref,
                llm_error=llm_error,
                rejected_edits=rejected,
            )
        )
        code, current = new_code, nxt

    if tier is None:
        tier = classify_outcome(current.compile_ok, current.link_ok, budget_exhausted=True)

    initial_errors = trace.iterations[0].snapshot_before.total_errors
    # The pre-edit state is part of the history: a model that only worsens the
    # code keeps the historical minimum at the initial count (effort 0).
    min_residual = min(
        [initial_errors] + [it.snapshot_after.total_errors for it in trace.iterations]
    )
    if tier is Tier.FS:
        min_residual = 0
        effort = 1.0
    elif initial_errors > 0:
        effort = (initial_errors - min_residual) / initial_errors
    else:
        effort = 0.0
    flags = detect_flags(trace) if len(trace.iterations) >= 2 else frozenset()
    trace.outcome = RepairOutcome(
        tier=tier,
        iterations_used=iterations_used,
        initial_errors=initial_errors,
        min_residual_errors=min_residual,
        effort_ratio=effort,
        flags=flags,
    )
    (workdir / "outcome.json").write_text(
        json.dumps(trace.outcome.to_dict(), indent=2), encoding="utf-8"
    )
    return trace
