"""Rubric-driven readability scoring of decompiled code against its source.

Five levels decompose into 18 sub-dimensions scored 1-10 by independent
judges; a level score is the arithmetic mean of its sub-dimension scores and
the overall score is the arithmetic mean of the five level scores. Cross-judge
cells carry the per-judge means, their mean, and the sample standard
deviation; rank agreement between judges uses Spearman rho with average ranks
for ties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from statistics import mean

from . import gateway
from .gateway import ChatExchange, ExtractionError, GatewayError, ModelConfig, SchemaValidationError

log = logging.getLogger(__name__)


class RubricLevel(str, Enum):
    LexicalClarity = "LexicalClarity"
    StructuralIntelligibility = "StructuralIntelligibility"
    TypeSystemFidelity = "TypeSystemFidelity"
    SemanticTransparency = "SemanticTransparency"
    ContextualCoherence = "ContextualCoherence"


LEVEL_SUBDIMENSIONS: dict[RubricLevel, tuple[str, ...]] = {
    RubricLevel.LexicalClarity: (
        "variable_naming",
        "function_naming",
        "literal_clarity",
        "noise_reduction",
    ),
    RubricLevel.StructuralIntelligibility: (
        "control_flow_naturalness",
        "function_decomposition",
        "code_linearization",
        "redundancy_elimination",
    ),
    RubricLevel.TypeSystemFidelity: (
        "type_precision",
        "composite_type_recovery",
        "type_safety",
    ),
    RubricLevel.SemanticTransparency: (
        "comment_quality",
        "idiom_recognition",
        "anomaly_indication",
        "contract_recovery",
    ),
    RubricLevel.ContextualCoherence: (
        "cross_reference_clarity",
        "module_organization",
        "build_compatibility",
    ),
}

ALL_SUBDIMENSIONS: tuple[str, ...] = tuple(
    name for level in RubricLevel for name in LEVEL_SUBDIMENSIONS[level]
)
assert len(ALL_SUBDIMENSIONS) == 18

# Focus question shown to the judge for each sub-dimension.
SUBDIMENSION_FOCUS: dict[str, str] = {
    "variable_naming": "Do variable names carry the meaning the source names carried, or are they opaque (v1, a2)?",
    "function_naming": "Are function names recovered or plausibly reconstructed rather than synthetic (sub_401000)?",
    "literal_clarity": "Are literals presented meaningfully (named constants, readable bases) where the source had them?",
    "noise_reduction": "Is the output free of decompiler noise (dead temporaries, redundant casts, spurious labels)?",
    "control_flow_naturalness": "Do loops and branches read as natural structures rather than goto mazes or inverted tests?",
    "function_decomposition": "Is the function boundary and its helper structure preserved rather than merged or split?",
    "code_linearization": "Does statement order follow the source's logical flow without artificial reordering?",
    "redundancy_elimination": "Is duplicated or vacuous code (re-computed expressions, no-op assignments) absent?",
    "type_precision": "Do scalar types match the source (signedness, width), or have they drifted (int vs unsigned)?",
    "composite_type_recovery": "Are structs, arrays, and pointer relationships recovered rather than flattened to byte math?",
    "type_safety": "Are casts and pointer conversions semantically justified rather than forced?",
    "comment_quality": "Do decompiler-emitted comments add correct, useful information?",
    "idiom_recognition": "Are standard idioms (library calls, common loops) recognized and presented as such?",
    "anomaly_indication": "Does the output flag regions it could not resolve instead of presenting guesses silently?",
    "contract_recovery": "Are assertions, bounds checks, and implicit contracts from the source still visible?",
    "cross_reference_clarity": "Are references to globals and other functions resolvable and consistently named?",
    "module_organization": "Does declaration/definition layout support reading the file as a unit?",
    "build_compatibility": "Would the output plausibly fit back into a compilable translation unit?",
}

# Qualitative anchors covering the whole 1-10 scale without gaps.
BAND_ANCHORS: tuple[tuple[int, int, str], ...] = (
    (10, 10, "as readable as the original"),
    (8, 9, "minor issues"),
    (6, 7, "moderate issues"),
    (4, 5, "significant issues"),
    (2, 3, "severe issues"),
    (1, 1, "unusable"),
)

# Equal level weights are the default; the nominal prompt weights remain
# available for sensitivity runs.
NOMINAL_LEVEL_WEIGHTS: dict[RubricLevel, float] = {
    RubricLevel.LexicalClarity: 0.30,
    RubricLevel.StructuralIntelligibility: 0.25,
    RubricLevel.TypeSystemFidelity: 0.20,
    RubricLevel.SemanticTransparency: 0.15,
    RubricLevel.ContextualCoherence: 0.10,
}


@dataclass(frozen=True)
class Rubric:
    levels: dict = None  # level -> sub-dimension names
    band_anchors: tuple = BAND_ANCHORS

    def __post_init__(self):
        if self.levels is None:
            object.__setattr__(self, "levels", dict(LEVEL_SUBDIMENSIONS))
        total = sum(len(v) for v in self.levels.values())
        if total != 18:
            raise ValueError(f"rubric must carry 18 sub-dimensions, got {total}")
        covered = set()
        for lo, hi, _ in self.band_anchors:
            covered.update(range(lo, hi + 1))
        if covered != set(range(1, 11)):
            raise ValueError("band anchors must cover 1-10 without gaps")


DEFAULT_RUBRIC = Rubric()


def _scorecard_schema_problems(obj) -> list[str]:
    if not isinstance(obj, dict) or "sub_scores" not in obj:
        return ["sub_scores"]
    sub = obj["sub_scores"]
    if not isinstance(sub, dict):
        return ["sub_scores"]
    problems = [name for name in ALL_SUBDIMENSIONS if name not in sub]
    problems += [
        f"{name} (non-numeric)" for name, v in sub.items()
        if name in ALL_SUBDIMENSIONS and not isinstance(v, (int, float))
    ]
    return problems


gateway.register_schema("uraf-scorecard", _scorecard_schema_problems)


@dataclass(frozen=True)
class JudgeScorecard:
    judge_id: str
    sub_scores: dict
    level_scores: dict
    overall: float

    @classmethod
    def from_sub_scores(cls, judge_id: str, sub_scores: dict) -> "JudgeScorecard":
        normalized: dict[str, int] = {}
        for name in ALL_SUBDIMENSIONS:
            if name not in sub_scores:
                raise ValueError(f"scorecard from {judge_id} is missing sub-dimension {name}")
            value = sub_scores[name]
            if isinstance(value, float) and not value.is_integer():
                # Half-up rounding; the schema asks for integers.
                rounded = int(value + 0.5)
                log.warning("judge %s emitted fractional %s=%s, rounded to %d", judge_id, name, value, rounded)
                value = rounded
            value = int(value)
            if not 1 <= value <= 10:
                raise ValueError(f"scorecard from {judge_id}: {name}={value} outside [1, 10]")
            normalized[name] = value
        level_scores = {
            level: mean(normalized[n] for n in names)
            for level, names in LEVEL_SUBDIMENSIONS.items()
        }
        overall = mean(level_scores.values())
        return cls(judge_id=judge_id, sub_scores=normalized, level_scores=level_scores, overall=overall)

    def to_dict(self) -> dict:
        return {
            "judge_id": self.judge_id,
            "sub_scores": dict(self.sub_scores),
            "level_scores": {lvl.value: s for lvl, s in self.level_scores.items()},
            "overall": self.overall,
        }


@dataclass(frozen=True)
class MissingScorecard:
    judge_id: str
    reason: str


def build_judge_prompt(source_code: str, decompiled_code: str, rubric: Rubric = DEFAULT_RUBRIC):
    """Deterministic judge prompt: rubric + scorecard schema, then the code pair."""
    if not source_code or not decompiled_code:
        raise ValueError("both source and decompiled code must be non-empty")
    lines = [
        "You are an objective code-quality auditor. Score how well the decompiled C",
        "recovers the readable intent of the original source. Score each sub-dimension",
        "independently on a 1-10 integer scale, judged relative to the original source.",
        "",
        "Scale anchors:",
    ]
    for lo, hi, label in rubric.band_anchors:
        band = f"{lo}" if lo == hi else f"{lo}-{hi}"
        lines.append(f"  {band}: {label}")
    lines.append("")
    lines.append("Levels and sub-dimensions:")
    for level, names in rubric.levels.items():
        lines.append(f"- {level.value}:")
        for name in names:
            lines.append(f"    {name}: {SUBDIMENSION_FOCUS[name]}")
    lines += [
        "",
        "Respond with exactly one JSON object of the form",
        '{"sub_scores": {' + ", ".join(f'"{n}": <1-10>' for n in ALL_SUBDIMENSIONS) + "}}",
        "and no other JSON object.",
    ]
    system = "\n".join(lines)
    user = (
        "Original source:\n```c\n"
        + source_code
        + "\n```\n\nDecompiled output:\n```c\n"
        + decompiled_code
        + "\n```"
    )
    return [("system", system), ("user", user)]


def score_pair(
    source_code: str,
    decompiled_code: str,
    judges: list[ModelConfig],
    gw: gateway.Gateway,
    rubric: Rubric = DEFAULT_RUBRIC,
):
    """One validated scorecard per judge; a failing judge yields a missing marker."""
    if not judges:
        raise ValueError("at least one judge is required")
    messages = build_judge_prompt(source_code, decompiled_code, rubric)
    results: list[JudgeScorecard | MissingScorecard] = []
    for judge in judges:
        try:
            exchange: ChatExchange = gw.complete(judge, messages)
            parsed = gateway.extract_json(exchange.response_text, "uraf-scorecard")
            results.append(JudgeScorecard.from_sub_scores(judge.model_id, parsed["sub_scores"]))
        except (GatewayError, ExtractionError, SchemaValidationError, ValueError) as exc:
            log.warning("judge %s failed on this pair: %s", judge.model_id, exc)
            results.append(MissingScorecard(judge_id=judge.model_id, reason=str(exc)))
    return results


@dataclass(frozen=True)
class CellStats:
    key: tuple  # (decompiler, level)
    judge_means: dict
    cross_judge_mean: float
    sample_stddev: float | None


def sample_stddev(values: list[float]) -> float | None:
    if len(values) < 2:
        return None
    m = mean(values)
    return (sum((v - m) ** 2 for v in values) / (len(values) - 1)) ** 0.5


def cell_from_judge_means(key: tuple, judge_means: dict) -> CellStats:
    values = list(judge_means.values())
    return CellStats(
        key=key,
        judge_means=dict(judge_means),
        cross_judge_mean=mean(values),
        sample_stddev=sample_stddev(values),
    )


def aggregate_cells(scorecards_by_decompiler: dict) -> list[CellStats]:
    """Fold per-(decompiler, binary, judge) scorecards into (decompiler, level) cells.

    judge_means average a judge's level score over every scored pair;
    missing-judge cells use the judges that are present.
    """
    cells: list[CellStats] = []
    for decompiler, cards in scorecards_by_decompiler.items():
        present = [c for c in cards if isinstance(c, JudgeScorecard)]
        if not present:
            continue
        judges = sorted({c.judge_id for c in present})
        for level in RubricLevel:
            judge_means = {
                j: mean(c.level_scores[level] for c in present if c.judge_id == j)
                for j in judges
            }
            cells.append(cell_from_judge_means((decompiler, level), judge_means))
    return cells


@dataclass(frozen=True)
class RankAgreement:
    level: RubricLevel
    judge_pair: tuple
    spearman_rho: float


def _average_ranks(scores: list[float]) -> list[float]:
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # ranks are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_rho(ranking_a: dict, ranking_b: dict) -> float:
    """Rank correlation between two score maps over the same items.

    Average ranks for ties; tie-free inputs use the exact integer-rank
    difference form, tied inputs fall back to Pearson over the rank vectors.
    """
    if set(ranking_a) != set(ranking_b):
        raise ValueError("rankings must cover the same item set")
    items = sorted(ranking_a)
    n = len(items)
    if n < 2:
        raise ValueError("need at least two items to correlate")
    a = _average_ranks([ranking_a[i] for i in items])
    b = _average_ranks([ranking_b[i] for i in items])
    if all(r.is_integer() for r in a) and all(r.is_integer() for r in b):
        d2 = sum((int(x) - int(y)) ** 2 for x, y in zip(a, b))
        return 1.0 - (6.0 * d2) / (n * (n * n - 1))
    ma, mb = mean(a), mean(b)
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    var_a = sum((x - ma) ** 2 for x in a)
    var_b = sum((y - mb) ** 2 for y in b)
    if var_a == 0 or var_b == 0:
        raise ValueError("constant ranking has no defined rank correlation")
    return cov / (var_a * var_b) ** 0.5


def rank_agreements(per_judge_level_scores: dict) -> list[RankAgreement]:
    """Pairwise Spearman rho of the decompiler ranking each judge induces per level.

    Input maps judge -> level -> {decompiler: mean score}.
    """
    out: list[RankAgreement] = []
    judges = sorted(per_judge_level_scores)
    for level in RubricLevel:
        for i, a in enumerate(judges):
            for b in judges[i + 1:]:
                if level not in per_judge_level_scores[a] or level not in per_judge_level_scores[b]:
                    continue
                try:
                    rho = spearman_rho(
                        per_judge_level_scores[a][level], per_judge_level_scores[b][level]
                    )
                except ValueError:
                    continue  # constant ranking carries no rank information
                out.append(RankAgreement(level=level, judge_pair=(a, b), spearman_rho=rho))
    return out
