import json

import pytest

from decompeval.adapters import AdapterMode, DecompilerAdapter, OutputUnit
from decompeval.build import host_architecture
from decompeval.functionality import VerdictCategory
from decompeval.gateway import ModelConfig, ScriptedClient, UsageSummary
from decompeval.manifest import BuildAxes, Compiler, DebugInfo, Optimization
from decompeval.orchestrator import Run, RunConfig, run_pipeline, stage_report
from decompeval.readability import RubricLevel, cell_from_judge_means
from decompeval.repair import RepairOutcome, RepairTrace, Tier
from decompeval.reporting import (
    render_effort,
    render_efficiency,
    render_functionality,
    render_readability,
    render_recompilability,
)

from conftest import make_variant_dirs, pipeline_response, write_mini_manifest

MODEL_ORDER = ["glm", "qwen", "minimax"]


def published_counts():
    # Per-model FS/LF/CF counts of one published decompiler row plus the rest
    # of the column sums needed for the Total row.
    return {
        "IDA": {
            "glm": {Tier.FS: 445, Tier.LF: 80, Tier.CF: 115},
            "qwen": {Tier.FS: 470, Tier.LF: 73, Tier.CF: 97},
            "minimax": {Tier.FS: 329, Tier.LF: 67, Tier.CF: 244},
        },
        "Ghidra": {
            "glm": {Tier.FS: 470, Tier.LF: 83, Tier.CF: 87},
            "qwen": {Tier.FS: 452, Tier.LF: 83, Tier.CF: 105},
            "minimax": {Tier.FS: 336, Tier.LF: 70, Tier.CF: 234},
        },
        "BinaryAI": {
            "glm": {Tier.FS: 385, Tier.LF: 103, Tier.CF: 152},
            "qwen": {Tier.FS: 389, Tier.LF: 77, Tier.CF: 174},
            "minimax": {Tier.FS: 132, Tier.LF: 88, Tier.CF: 420},
        },
        "RetDec": {
            "glm": {Tier.FS: 339, Tier.LF: 26, Tier.CF: 275},
            "qwen": {Tier.FS: 356, Tier.LF: 33, Tier.CF: 251},
            "minimax": {Tier.FS: 268, Tier.LF: 36, Tier.CF: 336},
        },
        "Angr": {
            "glm": {Tier.FS: 306, Tier.LF: 80, Tier.CF: 254},
            "qwen": {Tier.FS: 341, Tier.LF: 64, Tier.CF: 235},
            "minimax": {Tier.FS: 82, Tier.LF: 40, Tier.CF: 518},
        },
    }


def test_recompilability_published_row():
    table = render_recompilability(published_counts(), MODEL_ORDER)
    record = next(
        r for r in table.records if r["decompiler"] == "IDA" and r["tier"] == "FS"
    )
    assert record["mean"] == pytest.approx(414.7, abs=0.05)
    assert record["share"] * 100 == pytest.approx(64.8, abs=0.05)
    assert record["denominator"] == 640
    assert table.cell("IDA", "FS") == "414.7 64.8% (445/470/329)"


def test_recompilability_published_total_row():
    table = render_recompilability(published_counts(), MODEL_ORDER)
    record = next(
        r for r in table.records if r["decompiler"] == "Total" and r["tier"] == "FS"
    )
    assert record["mean"] == pytest.approx(1700, abs=0.05)
    assert record["share"] * 100 == pytest.approx(53.1, abs=0.05)
    assert record["per_model"] == {"glm": 1945, "qwen": 2008, "minimax": 1147}
    assert table.cell("Total", "FS") == "1700 53.1% (1945/2008/1147)"


def test_recompilability_single_model_mean_is_count():
    counts = {"OnlyTool": {"solo": {Tier.FS: 10, Tier.LF: 2, Tier.CF: 4}}}
    table = render_recompilability(counts, ["solo"])
    record = next(r for r in table.records if r["decompiler"] == "OnlyTool" and r["tier"] == "FS")
    assert record["mean"] == 10


def test_recompilability_inconsistent_denominators_rejected():
    counts = {
        "Tool": {
            "a": {Tier.FS: 5, Tier.LF: 0, Tier.CF: 0},
            "b": {Tier.FS: 5, Tier.LF: 0, Tier.CF: 1},
        }
    }
    with pytest.raises(ValueError, match="denominator"):
        render_recompilability(counts, ["a", "b"])


def functionality_rows():
    return {
        "IDA": {
            "verdicts": {
                VerdictCategory.ExactStdout: 15,
                VerdictCategory.Partial: 117,
                VerdictCategory.Fail: 310,
                VerdictCategory.Unsupported: 3,
            },
            "denominator": 445,
            "function_evidence": 309,
            "io_match": 0.833,
            "instruction_evidence": 222,
            "similarity": 0.289,
        },
        "Ghidra": {
            "verdicts": {
                VerdictCategory.ExactStdout: 5,
                VerdictCategory.Partial: 102,
                VerdictCategory.Fail: 362,
                VerdictCategory.Unsupported: 1,
            },
            "denominator": 470,
            "function_evidence": 327,
            "io_match": 0.691,
            "instruction_evidence": 204,
            "similarity": 0.246,
        },
        "BinaryAI": {
            "verdicts": {
                VerdictCategory.ExactStdout: 1,
                VerdictCategory.Partial: 56,
                VerdictCategory.Fail: 300,
                VerdictCategory.Unsupported: 28,
            },
            "denominator": 385,
            "function_evidence": 183,
            "io_match": 0.770,
            "instruction_evidence": 122,
            "similarity": 0.241,
        },
        "RetDec": {
            "verdicts": {
                VerdictCategory.ExactStdout: 0,
                VerdictCategory.Partial: 5,
                VerdictCategory.Fail: 334,
                VerdictCategory.Unsupported: 0,
            },
            "denominator": 339,
            "function_evidence": 223,
            "io_match": 0.748,
            "instruction_evidence": 108,
            "similarity": 0.093,
        },
        "Angr": {
            "verdicts": {
                VerdictCategory.ExactStdout: 3,
                VerdictCategory.Partial: 25,
                VerdictCategory.Fail: 274,
                VerdictCategory.Unsupported: 4,
            },
            "denominator": 306,
            "function_evidence": 161,
            "io_match": 0.913,
            "instruction_evidence": 93,
            "similarity": 0.117,
        },
    }


def test_functionality_total_share():
    table = render_functionality(functionality_rows())
    record = next(r for r in table.records if r["decompiler"] == "Total")
    assert record["denominator"] == 1945
    assert record["ExactStdout"] == 24
    assert record["ExactStdout_share"] * 100 == pytest.approx(1.2, abs=0.05)
    assert table.cell("Total", "ExactStdout") == "24/1945 (1.2%)"


def test_functionality_all_unsupported():
    rows = {
        "Tool": {
            "verdicts": {VerdictCategory.Unsupported: 4},
            "denominator": 4,
            "function_evidence": 0,
            "io_match": None,
            "instruction_evidence": 0,
            "similarity": None,
        }
    }
    table = render_functionality(rows)
    assert table.cell("Tool", "Unsupported") == "4/4 (100.0%)"
    assert table.cell("Tool", "I/O Match") == "-"


def test_readability_cell_format():
    cells = [
        cell_from_judge_means(
            ("IDA", RubricLevel.LexicalClarity), {"glm": 6.58, "qwen": 5.31, "minimax": 5.78}
        )
    ]
    table = render_readability(cells, [], ["glm", "qwen", "minimax"])
    assert table.cell("IDA", "LexicalClarity") == "5.89 (6.58/5.31/5.78)"


def test_readability_missing_judge_slot():
    cells = [cell_from_judge_means(("X", RubricLevel.TypeSystemFidelity), {"glm": 6.0})]
    table = render_readability(cells, [], ["glm", "qwen"])
    assert table.cell("X", "TypeSystemFidelity") == "6.00 (6.00/-)"


def effort_trace(tier, initial, min_residual):
    return RepairTrace(
        task_ref="t",
        iterations=[],
        outcome=RepairOutcome(
            tier=tier,
            iterations_used=50,
            initial_errors=initial,
            min_residual_errors=min_residual,
            effort_ratio=(initial - min_residual) / initial if initial else 0.0,
            flags=frozenset(),
        ),
    )


def test_effort_single_cf_task():
    table = render_effort({"Tool": [effort_trace(Tier.CF, 10, 1)]})
    record = next(r for r in table.records if r["tier"] == "CF")
    assert record["effort_ratio"] == pytest.approx(0.9)
    assert table.cell("Tool", "CF") == "90.0%"


def test_effort_aggregates_over_tasks():
    traces = [effort_trace(Tier.CF, 100, 10), effort_trace(Tier.CF, 100, 11)]
    table = render_effort({"Tool": traces})
    record = next(r for r in table.records if r["tier"] == "CF")
    assert record["effort_ratio"] == pytest.approx(0.895)


def test_effort_empty_input():
    table = render_effort({})
    assert table.records == []


def test_efficiency_table_units():
    table = render_efficiency(
        {"glm": {"repair": UsageSummary(1_377_800_000, 456_100, 301_600, 1_473_500, 871_000)}}
    )
    assert table.cell("glm/repair", "Token (M)") == "1377.8"
    assert table.cell("glm/repair", "Avg Token (K)") == "456.1"
    assert table.cell("glm/repair", "Med Time (s)") == "871.0"


# ---------------------------------------------------------------------------
# Desk-scale pipeline


@pytest.fixture
def mini_run(tmp_path):
    manifest_path = write_mini_manifest(tmp_path, ["control_flow.c"])
    faithful, drifted = make_variant_dirs(tmp_path)
    config = RunConfig(
        manifest_path=manifest_path,
        adapters=[
            DecompilerAdapter("faithful", AdapterMode.DirectoryOfOutputs, directory=faithful),
            DecompilerAdapter("drifted", AdapterMode.DirectoryOfOutputs, directory=drifted),
        ],
        judge_models=[ModelConfig(model_id=m) for m in ("judge-a", "judge-b")],
        repair_models=[ModelConfig(model_id="fixer")],
        output_root=tmp_path / "out",
        run_id="mini",
        budget=5,
        jobs=2,
        gateway_client=ScriptedClient(pipeline_response),
        axes=BuildAxes(
            compilers=(Compiler.GCC,),
            optimizations=(Optimization.O0,),
            debug=(DebugInfo.WithDebug,),
            architectures=(host_architecture(),),
        ),
    )
    return config


def test_pipeline_end_to_end_and_resume(mini_run, tmp_path):
    root = run_pipeline(mini_run)
    arch = host_architecture().value

    faithful_verdicts = json.loads(
        (root / "tasks" / f"ControlFlow_GCC_O0_WithDebug_{arch}_faithful" / "verdicts.json").read_text()
    )
    drifted_verdicts = json.loads(
        (root / "tasks" / f"ControlFlow_GCC_O0_WithDebug_{arch}_drifted" / "verdicts.json").read_text()
    )
    assert faithful_verdicts["models"]["fixer"]["program"]["category"] == "ExactStdout"
    assert faithful_verdicts["models"]["fixer"]["per_case"]["CF-L3-01"] == "ExactStdout"
    assert drifted_verdicts["models"]["fixer"]["per_case"]["CF-L3-01"] == "Fail"
    assert drifted_verdicts["models"]["fixer"]["program"]["category"] == "Partial"

    # drifted variant scores lower on type-system fidelity for every judge
    for judge in ("judge-a", "judge-b"):
        def type_level(task):
            card = json.loads(
                (root / "tasks" / task / "readability" / f"{judge}.json").read_text()
            )
            return card["level_scores"]["TypeSystemFidelity"]

        assert type_level(f"ControlFlow_GCC_O0_WithDebug_{arch}_drifted") < type_level(
            f"ControlFlow_GCC_O0_WithDebug_{arch}_faithful"
        )

    # deleting every rendered table and re-rendering reproduces them
    # byte-identically from the persisted task artifacts
    report = root / "reports" / "recompilability_overview.csv"
    first = report.read_bytes()
    for table_file in (root / "reports").glob("*.csv"):
        table_file.unlink()
    run = Run(mini_run)
    stage_report(run)
    assert report.read_bytes() == first

    # resume is a no-op for LLM work: replay-only gateway succeeds end to end
    replay_config = RunConfig(
        manifest_path=mini_run.manifest_path,
        adapters=mini_run.adapters,
        judge_models=mini_run.judge_models,
        repair_models=mini_run.repair_models,
        output_root=mini_run.output_root,
        run_id="mini",
        budget=5,
        replay=True,
        axes=mini_run.axes,
    )
    root_again = run_pipeline(replay_config)
    assert root_again == root


def test_missing_trace_degrades_to_unsupported(mini_run):
    from decompeval.orchestrator import Run, stage_diff

    root = run_pipeline(mini_run)
    arch = host_architecture().value
    task_dir = root / "tasks" / f"ControlFlow_GCC_O0_WithDebug_{arch}_faithful"
    (task_dir / "verdicts.json").unlink()
    (task_dir / "traces" / "orig-stdout.txt").unlink()
    stage_diff(Run(mini_run))
    verdicts = json.loads((task_dir / "verdicts.json").read_text())
    entry = verdicts["models"]["fixer"]
    assert entry["program"]["category"] == "Unsupported"
    assert entry["program"]["reason"] == "trace missing"
    # the sibling task is untouched
    other = json.loads(
        (root / "tasks" / f"ControlFlow_GCC_O0_WithDebug_{arch}_drifted" / "verdicts.json").read_text()
    )
    assert other["models"]["fixer"]["program"]["category"] == "Partial"


def test_pipeline_excludes_function_granularity_from_repair(mini_run, tmp_path):
    fg_adapter = DecompilerAdapter(
        "fn-grain",
        AdapterMode.DirectoryOfOutputs,
        unit=OutputUnit.FunctionGranularity,
        directory=mini_run.adapters[0].directory,
    )
    mini_run.adapters = list(mini_run.adapters) + [fg_adapter]
    mini_run.run_id = "mini-fg"
    root = run_pipeline(mini_run)
    arch = host_architecture().value
    fg_task = root / "tasks" / f"ControlFlow_GCC_O0_WithDebug_{arch}_fn-grain"
    assert (fg_task / f"decompiled.c").is_file()
    assert not (fg_task / "repair").exists()
    assert (fg_task / "readability" / "judge-a.json").is_file()
    table = json.loads((root / "reports" / "recompilability_overview.json").read_text())
    assert not any(r.get("decompiler") == "fn-grain" for r in table["records"])
