import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decompeval.manifest import (
    Architecture,
    BuildAxes,
    BuildConfig,
    Compiler,
    DebugInfo,
    Dimension,
    DimensionSourceFile,
    Level,
    ManifestError,
    Optimization,
    assign_difficulty,
    expand_matrix,
    load_manifest,
    save_manifest,
    validate_manifest,
)


def make_files(n):
    dims = list(Dimension)
    return [
        DimensionSourceFile(dimension=dims[i % 8], path=f"sources/file_{i}.c", case_ids=())
        for i in range(n)
    ]


def test_expand_matrix_default_axes_yields_640():
    matrix = expand_matrix(make_files(8), BuildAxes())
    assert len(matrix) == 640
    assert len({(e.file.path, e.config) for e in matrix.entries}) == 640


def test_expand_matrix_singleton_product():
    axes = BuildAxes(
        compilers=(Compiler.GCC,),
        optimizations=(Optimization.O0,),
        debug=(DebugInfo.Stripped,),
        architectures=(Architecture.x64,),
    )
    matrix = expand_matrix(make_files(1), axes)
    assert len(matrix) == 1


def test_expand_matrix_hand_enumerated_product():
    # Oracle: the four (file, optimization) combinations written out by hand,
    # in the declared lexicographic order.
    files = make_files(2)
    axes = BuildAxes(
        compilers=(Compiler.GCC,),
        optimizations=(Optimization.O0, Optimization.O2),
        debug=(DebugInfo.Stripped,),
        architectures=(Architecture.x64,),
    )
    matrix = expand_matrix(files, axes)
    expected = [
        ("sources/file_0.c", Optimization.O0),
        ("sources/file_0.c", Optimization.O2),
        ("sources/file_1.c", Optimization.O0),
        ("sources/file_1.c", Optimization.O2),
    ]
    assert [(e.file.path, e.config.optimization) for e in matrix.entries] == expected
    for e in matrix.entries:
        assert e.config.compiler is Compiler.GCC
        assert e.config.debug is DebugInfo.Stripped
        assert e.config.architecture is Architecture.x64


def test_expand_matrix_rejects_duplicate_axis_values():
    axes = BuildAxes(compilers=(Compiler.GCC, Compiler.GCC))
    with pytest.raises(ManifestError, match="duplicate"):
        expand_matrix(make_files(1), axes)


def test_expand_matrix_rejects_empty_axis():
    with pytest.raises(ManifestError, match="empty"):
        expand_matrix(make_files(1), BuildAxes(compilers=()))


@settings(max_examples=200, deadline=None)
@given(
    f=st.integers(1, 8),
    compilers=st.lists(st.sampled_from(list(Compiler)), min_size=1, max_size=2, unique=True),
    opts=st.lists(st.sampled_from(list(Optimization)), min_size=1, max_size=5, unique=True),
    debug=st.lists(st.sampled_from(list(DebugInfo)), min_size=1, max_size=2, unique=True),
    archs=st.lists(st.sampled_from(list(Architecture)), min_size=1, max_size=4, unique=True),
)
def test_expand_matrix_is_always_the_full_product(f, compilers, opts, debug, archs):
    axes = BuildAxes(tuple(compilers), tuple(opts), tuple(debug), tuple(archs))
    matrix = expand_matrix(make_files(f), axes)
    expected = f * len(compilers) * len(opts) * len(debug) * len(archs)
    assert len(matrix) == expected
    assert len({(e.file.path, e.config) for e in matrix.entries}) == expected


def test_assign_difficulty_all_minimum_is_l1():
    assert assign_difficulty((1, 1, 1)) is Level.L1


def test_assign_difficulty_all_maximum_is_l5():
    assert assign_difficulty((5, 5, 5)) is Level.L5


def test_assign_difficulty_hand_computed_instances():
    # Oracle (by hand): 0.5*5 + 0.3*1 + 0.2*1 = 3.0, inside the [2.6, 3.4) bin.
    assert assign_difficulty((5, 1, 1), (0.5, 0.3, 0.2)) is Level.L3
    # Oracle (by hand): 0.5*4 + 0.3*4 + 0.2*1 = 3.4 lands exactly on the L4 edge.
    assert assign_difficulty((4, 4, 1), (0.5, 0.3, 0.2)) is Level.L4


def test_assign_difficulty_weight_validation():
    with pytest.raises(ManifestError, match="sum to 1"):
        assign_difficulty((1, 1, 1), (0.5, 0.3, 0.3))
    with pytest.raises(ManifestError, match="strictly greatest"):
        assign_difficulty((1, 1, 1), (0.3, 0.5, 0.2))
    with pytest.raises(ManifestError, match="non-negative"):
        assign_difficulty((1, 1, 1), (1.1, 0.0, -0.1))
    with pytest.raises(ManifestError, match="outside"):
        assign_difficulty((0, 1, 1))


LEVEL_ORDER = [Level.L1, Level.L2, Level.L3, Level.L4, Level.L5]


@settings(max_examples=300, deadline=None)
@given(
    views=st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)),
    axis=st.integers(0, 2),
)
def test_assign_difficulty_is_monotone(views, axis):
    if views[axis] == 5:
        return
    raised = list(views)
    raised[axis] += 1
    before = LEVEL_ORDER.index(assign_difficulty(views))
    after = LEVEL_ORDER.index(assign_difficulty(tuple(raised)))
    assert after >= before


def test_seed_manifest_is_well_formed(corpus_manifest_path):
    manifest = load_manifest(corpus_manifest_path)
    assert validate_manifest(manifest) == []
    assert len(manifest.cases) >= 16
    assert len(manifest.dimension_files()) == 8
    dims = {c.dimension for c in manifest.cases}
    assert len(dims) == 8
    for dim in dims:
        assert sum(1 for c in manifest.cases if c.dimension is dim) >= 2


def test_validate_manifest_flags_duplicate_id(corpus_manifest_path):
    manifest = load_manifest(corpus_manifest_path)
    manifest.cases.append(manifest.cases[0])
    violations = validate_manifest(manifest)
    assert any("duplicate case id: CF-L1-01" in v for v in violations)


def test_validate_manifest_flags_missing_source(corpus_manifest_path):
    manifest = load_manifest(corpus_manifest_path)
    broken = dataclasses.replace(manifest.cases[0], source_file="sources/not_there.c")
    manifest.cases[0] = broken
    violations = validate_manifest(manifest)
    assert any("missing source file" in v for v in violations)


def test_manifest_round_trips_bit_identically(corpus_manifest_path, tmp_path):
    manifest = load_manifest(corpus_manifest_path)
    first = tmp_path / "first.yaml"
    second = tmp_path / "second.yaml"
    save_manifest(manifest, first)
    save_manifest(load_manifest(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_build_config_short_form():
    config = BuildConfig(Compiler.Clang, Optimization.Os, DebugInfo.WithDebug, Architecture.ARM64)
    assert config.short() == "Clang_Os_WithDebug_ARM64"
