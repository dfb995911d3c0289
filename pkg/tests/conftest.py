import json
import re
from pathlib import Path

import pytest

from decompeval.build import host_architecture
from decompeval.gateway import Gateway, ModelConfig, ReplayStore, ScriptedClient
from decompeval.manifest import BuildConfig, Compiler, DebugInfo, Optimization
from decompeval.readability import ALL_SUBDIMENSIONS

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"
CORPUS = ROOT / "corpus"


@pytest.fixture(scope="session")
def corpus_manifest_path():
    return CORPUS / "manifest.yaml"


@pytest.fixture
def host_config():
    return BuildConfig(
        compiler=Compiler.GCC,
        optimization=Optimization.O0,
        debug=DebugInfo.WithDebug,
        architecture=host_architecture(),
    )


# ---------------------------------------------------------------------------
# Scripted model behaviors (deterministic functions of the request content)


def scorecard_response(config, messages):
    """Heuristic judge: perfect-ish scores, docked on visible type drift."""
    user = next(text for role, text in messages if role == "user")
    blocks = re.findall(r"```c\n(.*?)\n```", user, re.DOTALL)
    source, decompiled = blocks[0], blocks[1]
    offset = {"judge-a": 0, "judge-b": -1, "judge-c": 1}.get(config.model_id, 0)

    def clamp(v):
        return max(1, min(10, v + offset))

    scores = {name: clamp(8) for name in ALL_SUBDIMENSIONS}
    if "unsigned int" in decompiled and "unsigned int" not in source:
        scores["type_precision"] = clamp(3)
        scores["type_safety"] = clamp(4)
        scores["composite_type_recovery"] = clamp(5)
    return json.dumps({"sub_scores": scores})


def declaring_fixer_response(config, messages):
    """Repairs the single-undeclared-identifier fixture with one local edit."""
    user = next(text for role, text in messages if role == "user")
    if "total" in user and "undeclared" in user:
        return json.dumps(
            {
                "edits": [
                    {
                        "kind": "replace_string",
                        "needle": "    total = 3;",
                        "replacement": "    int total = 3;",
                    }
                ]
            }
        )
    return json.dumps({"edits": []})


def noop_fixer_response(config, messages):
    return json.dumps({"edits": []})


def oscillating_fixer_response(config, messages):
    """Alternately re-introduces the error it fixed one iteration earlier."""
    user = next(text for role, text in messages if role == "user")
    if "alpha_missing" in user:
        return json.dumps(
            {"edits": [{"kind": "replace_string", "needle": "alpha_missing", "replacement": "beta_missing"}]}
        )
    return json.dumps(
        {"edits": [{"kind": "replace_string", "needle": "beta_missing", "replacement": "alpha_missing"}]}
    )


@pytest.fixture
def make_gateway(tmp_path):
    """Factory for a record-mode gateway over a scripted client (no network)."""

    def factory(response_fn, subdir="exchanges"):
        store = ReplayStore(tmp_path / subdir)
        return Gateway(store, client=ScriptedClient(response_fn), mode="record")

    return factory


@pytest.fixture
def judge_models():
    return [ModelConfig(model_id=m) for m in ("judge-a", "judge-b", "judge-c")]


# ---------------------------------------------------------------------------
# Desk-scale pipeline helpers

DRIFT_SIGNATURE = "int nested_if_deep(int a, int b, int c, int d, int e)"
DRIFTED_SIGNATURE = (
    "int nested_if_deep(unsigned int a, unsigned int b, unsigned int c, "
    "unsigned int d, unsigned int e)"
)


def make_variant_dirs(root: Path) -> tuple[Path, Path]:
    """Two synthetic decompiler outputs: a faithful copy of every source and a
    copy with signed parameters drifted to unsigned in nested_if_deep."""
    faithful = root / "variants" / "faithful"
    drifted = root / "variants" / "drifted"
    faithful.mkdir(parents=True, exist_ok=True)
    drifted.mkdir(parents=True, exist_ok=True)
    for source in sorted((CORPUS / "sources").iterdir()):
        text = source.read_text(encoding="utf-8")
        (faithful / source.name).write_text(text, encoding="utf-8")
        if source.name == "control_flow.c":
            assert DRIFT_SIGNATURE in text
            text = text.replace(DRIFT_SIGNATURE, DRIFTED_SIGNATURE)
        (drifted / source.name).write_text(text, encoding="utf-8")
    return faithful, drifted


def pipeline_response(config, messages):
    """Route scripted behavior by role: judges score, the repair model no-ops."""
    if config.model_id.startswith("judge"):
        return scorecard_response(config, messages)
    return noop_fixer_response(config, messages)


def write_mini_manifest(tmp_path: Path, source_names: list) -> Path:
    """Trimmed copy of the seed manifest holding only the named source files."""
    import shutil

    import yaml

    raw = yaml.safe_load((CORPUS / "manifest.yaml").read_text(encoding="utf-8"))
    keep = {f"sources/{name}" for name in source_names}
    raw["cases"] = [c for c in raw["cases"] if c["source_file"] in keep]
    (tmp_path / "sources").mkdir(parents=True, exist_ok=True)
    for name in source_names:
        shutil.copy(CORPUS / "sources" / name, tmp_path / "sources" / name)
    path = tmp_path / "manifest.yaml"
    path.write_text(yaml.safe_dump(raw, sort_keys=False), encoding="utf-8")
    return path
