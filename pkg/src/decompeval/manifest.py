"""Benchmark manifest: test cases, build axes, and the compilation matrix.

The manifest is a single hand-curated YAML file with a top-level ``cases``
array and an ``axes`` block. Dimension source files are derived by grouping
cases on (dimension, source_file); each dimension file is compiled once per
build configuration, so the matrix is the Cartesian product
files x compilers x optimizations x debug settings x architectures.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import yaml


class ManifestError(ValueError):
    """Raised for structurally invalid manifests, axes, or difficulty inputs."""


class Dimension(str, Enum):
    ControlFlow = "ControlFlow"
    DataTypesVariables = "DataTypesVariables"
    MemoryOperations = "MemoryOperations"
    FunctionCalls = "FunctionCalls"
    ObjectOrientedCpp = "ObjectOrientedCpp"
    CompileTimeSpecialization = "CompileTimeSpecialization"
    SystemInteraction = "SystemInteraction"
    SpecialChallenges = "SpecialChallenges"


DIMENSION_ABBREV = {
    Dimension.ControlFlow: "CF",
    Dimension.DataTypesVariables: "DT",
    Dimension.MemoryOperations: "MO",
    Dimension.FunctionCalls: "FC",
    Dimension.ObjectOrientedCpp: "OO",
    Dimension.CompileTimeSpecialization: "CS",
    Dimension.SystemInteraction: "SI",
    Dimension.SpecialChallenges: "SC",
}
ABBREV_DIMENSION = {v: k for k, v in DIMENSION_ABBREV.items()}

# Case ids look like CF-L1-03: dimension abbreviation, level digit, 2-digit ordinal.
CASE_ID_RE = re.compile(r"^(CF|DT|MO|FC|OO|CS|SI|SC)-L([1-5])-(\d{2})$")


class Compiler(str, Enum):
    GCC = "GCC"
    Clang = "Clang"


class Optimization(str, Enum):
    O0 = "O0"
    O1 = "O1"
    O2 = "O2"
    O3 = "O3"
    Os = "Os"


class DebugInfo(str, Enum):
    WithDebug = "WithDebug"
    Stripped = "Stripped"


class Architecture(str, Enum):
    x86 = "x86"
    x64 = "x64"
    ARM32 = "ARM32"
    ARM64 = "ARM64"


class Level(str, Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L4 = "L4"
    L5 = "L5"


@dataclass(frozen=True)
class BuildConfig:
    """One point of the four build axes."""

    compiler: Compiler
    optimization: Optimization
    debug: DebugInfo
    architecture: Architecture

    def short(self) -> str:
        return "_".join(
            (self.compiler.value, self.optimization.value, self.debug.value, self.architecture.value)
        )


@dataclass(frozen=True)
class BuildAxes:
    """The four axis value lists, in declared order."""

    compilers: tuple[Compiler, ...] = tuple(Compiler)
    optimizations: tuple[Optimization, ...] = tuple(Optimization)
    debug: tuple[DebugInfo, ...] = tuple(DebugInfo)
    architectures: tuple[Architecture, ...] = tuple(Architecture)

    def validate(self) -> None:
        for name, values in (
            ("compilers", self.compilers),
            ("optimizations", self.optimizations),
            ("debug", self.debug),
            ("architectures", self.architectures),
        ):
            if not values:
                raise ManifestError(f"axis {name} is empty")
            if len(set(values)) != len(values):
                raise ManifestError(f"axis {name} has duplicate values: {[v.value for v in values]}")


@dataclass(frozen=True)
class TestCase:
    id: str
    dimension: Dimension
    difficulty_views: tuple[int, int, int]  # (control_data_flow, optimization_resistance, semantic_loss_risk)
    level: Level
    function_name: str
    expected_observation_ids: tuple[str, ...]
    source_file: str


@dataclass(frozen=True)
class DimensionSourceFile:
    dimension: Dimension
    path: str
    case_ids: tuple[str, ...]

    @property
    def stem(self) -> str:
        return Path(self.path).stem


@dataclass(frozen=True)
class MatrixEntry:
    file: DimensionSourceFile
    config: BuildConfig


@dataclass(frozen=True)
class BuildMatrix:
    entries: tuple[MatrixEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class Manifest:
    cases: list[TestCase]
    axes: BuildAxes
    base_dir: Path = field(default_factory=Path)

    def case_by_id(self, case_id: str) -> TestCase:
        for case in self.cases:
            if case.id == case_id:
                return case
        raise KeyError(case_id)

    def dimension_files(self) -> list[DimensionSourceFile]:
        """Group cases into their dimension source files, preserving case order."""
        grouped: dict[tuple[Dimension, str], list[str]] = {}
        for case in self.cases:
            grouped.setdefault((case.dimension, case.source_file), []).append(case.id)
        return [
            DimensionSourceFile(dimension=dim, path=path, case_ids=tuple(ids))
            for (dim, path), ids in grouped.items()
        ]

    def resolve_source(self, file: DimensionSourceFile) -> Path:
        return self.base_dir / file.path


DEFAULT_DIFFICULTY_WEIGHTS = (0.5, 0.3, 0.2)

# Weighted view sums in [1, 5] map onto levels through evenly spaced bins.
LEVEL_THRESHOLDS = ((1.8, Level.L1), (2.6, Level.L2), (3.4, Level.L3), (4.2, Level.L4))


def assign_difficulty(
    views: tuple[int, int, int],
    weights: tuple[float, float, float] = DEFAULT_DIFFICULTY_WEIGHTS,
) -> Level:
    """Map the three difficulty view ratings onto a level via their weighted sum.

    Control/data-flow complexity must carry the strictly greatest weight; the
    weights must be non-negative and sum to 1 (tolerance 1e-9).
    """
    if len(views) != 3 or len(weights) != 3:
        raise ManifestError("expected exactly three views and three weights")
    for v in views:
        if not 1 <= v <= 5:
            raise ManifestError(f"view rating {v} outside [1, 5]")
    if any(w < 0 for w in weights):
        raise ManifestError("weights must be non-negative")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ManifestError(f"weights must sum to 1, got {sum(weights)}")
    if not (weights[0] > weights[1] and weights[0] > weights[2]):
        raise ManifestError("control/data-flow weight must be strictly greatest")
    s = sum(v * w for v, w in zip(views, weights))
    for bound, level in LEVEL_THRESHOLDS:
        if s < bound:
            return level
    return Level.L5


def expand_matrix(files: list[DimensionSourceFile], axes: BuildAxes) -> BuildMatrix:
    """Cartesian product of dimension files with the four build axes.

    Ordering is deterministic: files outermost, then each axis in its
    declared order (lexicographic over the declared axis order).
    """
    axes.validate()
    seen_paths = set()
    for f in files:
        if f.path in seen_paths:
            raise ManifestError(f"duplicate dimension source file: {f.path}")
        seen_paths.add(f.path)
    entries = tuple(
        MatrixEntry(file=f, config=BuildConfig(c, o, d, a))
        for f in files
        for c in axes.compilers
        for o in axes.optimizations
        for d in axes.debug
        for a in axes.architectures
    )
    return BuildMatrix(entries=entries)


def validate_manifest(manifest: Manifest) -> list[str]:
    """Return human-readable invariant violations; empty list means well formed."""
    violations: list[str] = []
    seen_ids: set[str] = set()
    for case in manifest.cases:
        if case.id in seen_ids:
            violations.append(f"duplicate case id: {case.id}")
        seen_ids.add(case.id)
        m = CASE_ID_RE.match(case.id)
        if not m:
            violations.append(f"case id does not match the id grammar: {case.id}")
            continue
        if ABBREV_DIMENSION[m.group(1)] is not case.dimension:
            violations.append(
                f"case {case.id}: id prefix {m.group(1)} disagrees with dimension {case.dimension.value}"
            )
        if f"L{m.group(2)}" != case.level.value:
            violations.append(f"case {case.id}: id level digit disagrees with level {case.level.value}")
        for v in case.difficulty_views:
            if not 1 <= v <= 5:
                violations.append(f"case {case.id}: view rating {v} outside [1, 5]")
                break
        else:
            derived = assign_difficulty(case.difficulty_views)
            if derived is not case.level:
                violations.append(
                    f"case {case.id}: level {case.level.value} does not follow from views "
                    f"{case.difficulty_views} (expected {derived.value})"
                )
        if not manifest.resolve_source(
            DimensionSourceFile(case.dimension, case.source_file, ())
        ).is_file():
            violations.append(f"case {case.id}: missing source file {case.source_file}")
        for obs_id in case.expected_observation_ids:
            if not CASE_ID_RE.match(obs_id):
                violations.append(f"case {case.id}: expected observation id {obs_id} malformed")
    for file in manifest.dimension_files():
        for cid in file.case_ids:
            try:
                case = manifest.case_by_id(cid)
            except KeyError:
                violations.append(f"file {file.path}: unknown case id {cid}")
                continue
            if case.dimension is not file.dimension:
                violations.append(f"file {file.path}: case {cid} has dimension {case.dimension.value}")
    try:
        manifest.axes.validate()
    except ManifestError as exc:
        violations.append(str(exc))
    return violations


def _case_to_dict(case: TestCase) -> dict:
    return {
        "id": case.id,
        "dimension": case.dimension.value,
        "difficulty_views": list(case.difficulty_views),
        "level": case.level.value,
        "function_name": case.function_name,
        "expected_observation_ids": list(case.expected_observation_ids),
        "source_file": case.source_file,
    }


def _case_from_dict(raw: dict) -> TestCase:
    try:
        return TestCase(
            id=raw["id"],
            dimension=Dimension(raw["dimension"]),
            difficulty_views=tuple(int(v) for v in raw["difficulty_views"]),
            level=Level(raw["level"]),
            function_name=raw["function_name"],
            expected_observation_ids=tuple(raw["expected_observation_ids"]),
            source_file=raw["source_file"],
        )
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"malformed case entry {raw.get('id', '<no id>')}: {exc}") from exc


def save_manifest(manifest: Manifest, path: Path | str) -> None:
    """Write the canonical YAML form (stable key order, block style)."""
    doc = {
        "axes": {
            "compilers": [c.value for c in manifest.axes.compilers],
            "optimizations": [o.value for o in manifest.axes.optimizations],
            "debug": [d.value for d in manifest.axes.debug],
            "architectures": [a.value for a in manifest.axes.architectures],
        },
        "cases": [_case_to_dict(c) for c in manifest.cases],
    }
    Path(path).write_text(
        yaml.safe_dump(doc, sort_keys=False, default_flow_style=False), encoding="utf-8"
    )


def load_manifest(path: Path | str) -> Manifest:
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict) or "cases" not in raw:
        raise ManifestError(f"{path}: manifest must be a mapping with a top-level 'cases' array")
    axes_raw = raw.get("axes", {})
    try:
        axes = BuildAxes(
            compilers=tuple(Compiler(v) for v in axes_raw.get("compilers", [c.value for c in Compiler])),
            optimizations=tuple(
                Optimization(v) for v in axes_raw.get("optimizations", [o.value for o in Optimization])
            ),
            debug=tuple(DebugInfo(v) for v in axes_raw.get("debug", [d.value for d in DebugInfo])),
            architectures=tuple(
                Architecture(v) for v in axes_raw.get("architectures", [a.value for a in Architecture])
            ),
        )
    except ValueError as exc:
        raise ManifestError(f"{path}: bad axes block: {exc}") from exc
    cases = [_case_from_dict(c) for c in raw["cases"]]
    return Manifest(cases=cases, axes=axes, base_dir=path.parent)
