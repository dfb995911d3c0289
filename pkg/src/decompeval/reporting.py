"""Aggregate report tables rendered from persisted task artifacts.

Every cell is a pure function of the artifacts, so deleting the rendered
tables and re-rendering reproduces them byte-identically. Each table exports
both CSV and structured JSON records.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from statistics import mean

from .gateway import UsageSummary
from .readability import CellStats, RankAgreement, RubricLevel
from .repair import Tier
from .functionality import VerdictCategory

TOTAL_ROW = "Total"


@dataclass
class ReportTable:
    table_id: str
    row_keys: list[str]
    col_keys: list[str]
    cells: dict = field(default_factory=dict)  # (row, col) -> formatted string
    records: list = field(default_factory=list)  # raw structured values

    def cell(self, row: str, col: str) -> str:
        return self.cells.get((row, col), "")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([self.table_id] + self.col_keys)
        for row in self.row_keys:
            writer.writerow([row] + [self.cell(row, col) for col in self.col_keys])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"table_id": self.table_id, "records": self.records}, indent=2)


def _fmt_mean(value: float) -> str:
    text = f"{value:.1f}"
    return text[:-2] if text.endswith(".0") else text


def _pct(value: float) -> str:
    return f"{value * 100:.1f}%"


def render_recompilability(
    counts: dict, model_order: list[str]
) -> ReportTable:
    """Per-decompiler tier cells: mean over repair models, its percentage, and
    the per-model counts.

    counts: decompiler -> model -> {Tier: count}. Every model must cover the
    same task denominator within a row.
    """
    tiers = [Tier.FS, Tier.LF, Tier.CF]
    table = ReportTable(
        table_id="recompilability_overview",
        row_keys=list(counts) + [TOTAL_ROW],
        col_keys=[t.value for t in tiers],
    )
    totals = {m: {t: 0 for t in tiers} for m in model_order}
    denominator_total = 0
    for decompiler, per_model in counts.items():
        denominators = {
            m: sum(per_model.get(m, {}).get(t, 0) for t in tiers) for m in model_order
        }
        if len(set(denominators.values())) != 1:
            raise ValueError(
                f"inconsistent task denominators for {decompiler}: {denominators}"
            )
        denominator = next(iter(denominators.values()))
        denominator_total += denominator
        for tier in tiers:
            per_model_counts = [per_model.get(m, {}).get(tier, 0) for m in model_order]
            avg = mean(per_model_counts)
            share = avg / denominator if denominator else 0.0
            table.cells[(decompiler, tier.value)] = (
                f"{_fmt_mean(avg)} {_pct(share)} ({'/'.join(str(c) for c in per_model_counts)})"
            )
            table.records.append(
                {
                    "decompiler": decompiler,
                    "tier": tier.value,
                    "mean": avg,
                    "share": share,
                    "per_model": dict(zip(model_order, per_model_counts)),
                    "denominator": denominator,
                }
            )
            for m, c in zip(model_order, per_model_counts):
                totals[m][tier] += c
    for tier in tiers:
        per_model_counts = [totals[m][tier] for m in model_order]
        avg = mean(per_model_counts)
        share = avg / denominator_total if denominator_total else 0.0
        table.cells[(TOTAL_ROW, tier.value)] = (
            f"{_fmt_mean(avg)} {_pct(share)} ({'/'.join(str(c) for c in per_model_counts)})"
        )
        table.records.append(
            {
                "decompiler": TOTAL_ROW,
                "tier": tier.value,
                "mean": avg,
                "share": share,
                "per_model": dict(zip(model_order, per_model_counts)),
                "denominator": denominator_total,
            }
        )
    return table


def render_functionality(rows: dict) -> ReportTable:
    """Program/function/instruction-level summary per decompiler.

    rows: decompiler -> {
        'verdicts': {VerdictCategory: count}, 'denominator': int,
        'function_evidence': int, 'io_match': float or None,
        'instruction_evidence': int, 'similarity': float or None}
    Decompilers with no tasks are omitted by the caller.
    """
    categories = [
        VerdictCategory.ExactStdout,
        VerdictCategory.Partial,
        VerdictCategory.Fail,
        VerdictCategory.Unsupported,
    ]
    col_keys = [c.value for c in categories] + [
        "Function Evidence", "I/O Match", "Instruction Evidence", "Similarity",
    ]
    table = ReportTable(
        table_id="functionality_overview",
        row_keys=list(rows) + [TOTAL_ROW],
        col_keys=col_keys,
    )

    def fill(name: str, data: dict) -> None:
        denom = data["denominator"]
        record = {"decompiler": name, "denominator": denom}
        for cat in categories:
            count = data["verdicts"].get(cat, 0)
            share = count / denom if denom else 0.0
            table.cells[(name, cat.value)] = f"{count}/{denom} ({_pct(share)})"
            record[cat.value] = count
            record[f"{cat.value}_share"] = share
        fev = data.get("function_evidence", 0)
        table.cells[(name, "Function Evidence")] = f"{fev}/{denom} ({_pct(fev / denom if denom else 0)})"
        io = data.get("io_match")
        table.cells[(name, "I/O Match")] = _pct(io) if io is not None else "-"
        iev = data.get("instruction_evidence", 0)
        table.cells[(name, "Instruction Evidence")] = f"{iev}/{denom} ({_pct(iev / denom if denom else 0)})"
        sim = data.get("similarity")
        table.cells[(name, "Similarity")] = _pct(sim) if sim is not None else "-"
        record.update(
            function_evidence=fev, io_match=io, instruction_evidence=iev, similarity=sim
        )
        table.records.append(record)

    for name, data in rows.items():
        fill(name, data)

    total = {
        "verdicts": {
            cat: sum(d["verdicts"].get(cat, 0) for d in rows.values()) for cat in categories
        },
        "denominator": sum(d["denominator"] for d in rows.values()),
        "function_evidence": sum(d.get("function_evidence", 0) for d in rows.values()),
        "instruction_evidence": sum(d.get("instruction_evidence", 0) for d in rows.values()),
    }
    io_rates = [d["io_match"] for d in rows.values() if d.get("io_match") is not None]
    sims = [d["similarity"] for d in rows.values() if d.get("similarity") is not None]
    total["io_match"] = mean(io_rates) if io_rates else None
    total["similarity"] = mean(sims) if sims else None
    fill(TOTAL_ROW, total)
    return table


def render_readability(
    cells: list[CellStats],
    rank_stats: list[RankAgreement],
    judge_order: list[str],
) -> ReportTable:
    """Readability overview: one 'mean (j1/j2/j3)' cell per (decompiler, level),
    with spread and pairwise rank agreement carried in the records."""
    decompilers = sorted({c.key[0] for c in cells})
    table = ReportTable(
        table_id="readability_overview",
        row_keys=decompilers,
        col_keys=[lvl.value for lvl in RubricLevel],
    )
    for cell in cells:
        decompiler, level = cell.key
        slots = [
            f"{cell.judge_means[j]:.2f}" if j in cell.judge_means else "-"
            for j in judge_order
        ]
        table.cells[(decompiler, level.value)] = (
            f"{cell.cross_judge_mean:.2f} ({'/'.join(slots)})"
        )
        table.records.append(
            {
                "decompiler": decompiler,
                "level": level.value,
                "cross_judge_mean": cell.cross_judge_mean,
                "judge_means": dict(cell.judge_means),
                "sample_stddev": cell.sample_stddev,
            }
        )
    for ra in rank_stats:
        table.records.append(
            {
                "level": ra.level.value,
                "judge_pair": list(ra.judge_pair),
                "spearman_rho": ra.spearman_rho,
            }
        )
    return table


def render_effort(failed_traces: dict) -> ReportTable:
    """Aggregate effort ratio inside failure tiers, normalized to initial errors.

    failed_traces: decompiler -> list of RepairTrace with LF/CF outcomes.
    """
    table = ReportTable(
        table_id="repair_effort",
        row_keys=sorted(failed_traces),
        col_keys=[Tier.LF.value, Tier.CF.value],
    )
    for decompiler, traces in sorted(failed_traces.items()):
        for tier in (Tier.LF, Tier.CF):
            group = [t for t in traces if t.outcome and t.outcome.tier is tier]
            initial = sum(t.outcome.initial_errors for t in group)
            removed = sum(
                t.outcome.initial_errors - t.outcome.min_residual_errors for t in group
            )
            ratio = removed / initial if initial else None
            table.cells[(decompiler, tier.value)] = _pct(ratio) if ratio is not None else "-"
            table.records.append(
                {
                    "decompiler": decompiler,
                    "tier": tier.value,
                    "tasks": len(group),
                    "initial_errors": initial,
                    "removed_at_best": removed,
                    "effort_ratio": ratio,
                }
            )
    return table


def render_efficiency(per_model_stage: dict) -> ReportTable:
    """Token and wall-clock accounting: model/stage -> UsageSummary."""
    rows = [f"{model}/{stage}" for model, stages in per_model_stage.items() for stage in stages]
    table = ReportTable(
        table_id="efficiency_summary",
        row_keys=rows,
        col_keys=["Token (M)", "Avg Token (K)", "Med Token (K)", "Avg Time (s)", "Med Time (s)"],
    )
    for model, stages in per_model_stage.items():
        for stage, summary in stages.items():
            row = f"{model}/{stage}"
            assert isinstance(summary, UsageSummary)
            table.cells[(row, "Token (M)")] = f"{summary.total_tokens / 1e6:.1f}"
            table.cells[(row, "Avg Token (K)")] = f"{summary.avg_tokens / 1e3:.1f}"
            table.cells[(row, "Med Token (K)")] = f"{summary.median_tokens / 1e3:.1f}"
            table.cells[(row, "Avg Time (s)")] = f"{summary.avg_time_ms / 1e3:.1f}"
            table.cells[(row, "Med Time (s)")] = f"{summary.median_time_ms / 1e3:.1f}"
            table.records.append(
                {
                    "model": model,
                    "stage": stage,
                    "total_tokens": summary.total_tokens,
                    "avg_tokens": summary.avg_tokens,
                    "median_tokens": summary.median_tokens,
                    "avg_time_ms": summary.avg_time_ms,
                    "median_time_ms": summary.median_time_ms,
                }
            )
    return table
