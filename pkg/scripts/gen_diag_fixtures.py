#!/usr/bin/env python3
"""Regenerate the frozen compiler-diagnostic fixtures under tests/fixtures/diagnostics/.

Each fixture is a tiny C snippet that provokes exactly one diagnostic category.
The snippet is compiled (or linked) with both GCC and Clang, the raw stderr is
frozen to <name>.<compiler>.stderr.txt, and the hand-checked expectation
(category, line, severity, phase) goes to <name>.<compiler>.expected.json.

Run from the repository root. Diagnostics are requested in plain-text form with
caret context disabled so the frozen surface is stable across terminal widths.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "diagnostics"

STABLE_FLAGS = {
    "gcc": ["-fdiagnostics-plain-output"],
    "clang": ["-fno-caret-diagnostics", "-fno-color-diagnostics", "-fno-diagnostics-show-option"],
}

# name -> (source, extra flags, expected category, expected line, expected severity)
COMPILE_SNIPPETS = {
    "syntax_error": (
        "int main(void) {\n    int x = ;\n    return 0;\n}\n",
        [],
        "SyntaxError",
        2,
        "Error",
    ),
    "undeclared_identifier": (
        "int main(void) {\n    return missing_var;\n}\n",
        [],
        "UndeclaredIdentifier",
        2,
        "Error",
    ),
    "conflicting_types": (
        "int value(void);\ndouble value(void) { return 1.0; }\n",
        [],
        "ConflictingTypes",
        2,
        "Error",
    ),
    "incompatible_pointer_type": (
        "int main(void) {\n    double d = 0;\n    int *p = &d;\n    return p != 0;\n}\n",
        [],
        "IncompatiblePointerType",
        3,
        "Warning",
    ),
    "type_conversion_warning": (
        "int shrink(double d) {\n    int x = d;\n    return x;\n}\n",
        ["-Wconversion"],
        "TypeConversionWarning",
        2,
        "Warning",
    ),
    "implicit_function_declaration": (
        "int main(void) {\n    return helper();\n}\n",
        [],
        "ImplicitFunctionDeclaration",
        2,
        "Warning",
    ),
    "member_access_error": (
        "struct point { int x; };\nint main(void) {\n    struct point p = {0};\n    return p.y;\n}\n",
        [],
        "MemberAccessError",
        4,
        "Error",
    ),
    "argument_count_mismatch": (
        "int add_one(int a);\nint main(void) {\n    return add_one(1, 2);\n}\n",
        [],
        "ArgumentCountMismatch",
        3,
        "Error",
    ),
    "void_value_error": (
        "void tick(void);\nint main(void) {\n    int x = tick();\n    return x;\n}\n",
        [],
        "VoidValueError",
        3,
        "Error",
    ),
    "unknown_type": (
        "mystery_t counter;\nint main(void) {\n    return 0;\n}\n",
        [],
        "UnknownType",
        1,
        "Error",
    ),
    "redefinition": (
        "int twice(int a) { return a + a; }\nint twice(int a) { return 2 * a; }\n",
        [],
        "Redefinition",
        2,
        "Error",
    ),
    "incomplete_type": (
        "struct opaque;\nint main(void) {\n    struct opaque o;\n    return 0;\n}\n",
        [],
        "IncompleteType",
        3,
        "Error",
    ),
}

LINK_SNIPPETS = {
    "undefined_reference": (
        ["int helper_log(int);\nint main(void) {\n    return helper_log(1);\n}\n"],
        "UndefinedReference",
    ),
    "multiple_definition": (
        [
            "int shared(void) { return 1; }\nint main(void) { return shared(); }\n",
            "int shared(void) { return 2; }\n",
        ],
        "MultipleDefinition",
    ),
}


def run(cmd, cwd):
    proc = subprocess.run(cmd, cwd=cwd, capture_output=True, text=True)
    return proc.returncode, proc.stderr


def freeze(name, compiler, stderr, expected):
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / f"{name}.{compiler}.stderr.txt").write_text(stderr, encoding="utf-8")
    (OUT / f"{name}.{compiler}.expected.json").write_text(
        json.dumps(expected, indent=2) + "\n", encoding="utf-8"
    )


def main():
    for compiler in ("gcc", "clang"):
        for name, (source, extra, category, line, severity) in COMPILE_SNIPPETS.items():
            with tempfile.TemporaryDirectory() as td:
                src = Path(td) / "case.c"
                src.write_text(source)
                cmd = [compiler, *STABLE_FLAGS[compiler], *extra, "-c", "case.c", "-o", "case.o"]
                rc, stderr = run(cmd, td)
                if not stderr.strip():
                    print(f"SKIP {name}/{compiler}: no diagnostics emitted", file=sys.stderr)
                    continue
                freeze(
                    name,
                    compiler,
                    stderr,
                    {
                        "phase": "Compile",
                        "compiler": compiler,
                        "diagnostics": [
                            {"category": category, "line": line, "severity": severity, "file": "case.c"}
                        ],
                    },
                )
                print(f"froze {name}.{compiler} (rc={rc})")
        for name, (sources, category) in LINK_SNIPPETS.items():
            with tempfile.TemporaryDirectory() as td:
                objs = []
                for i, source in enumerate(sources):
                    src = Path(td) / f"tu{i}.c"
                    src.write_text(source)
                    rc, stderr = run(
                        [compiler, *STABLE_FLAGS[compiler], "-c", src.name, "-o", f"tu{i}.o"], td
                    )
                    assert rc == 0, f"{name} TU {i} must compile cleanly: {stderr}"
                    objs.append(f"tu{i}.o")
                rc, stderr = run([compiler, *objs, "-o", "case.bin"], td)
                assert rc != 0, f"{name}/{compiler} unexpectedly linked"
                freeze(
                    name,
                    compiler,
                    stderr,
                    {
                        "phase": "Link",
                        "compiler": compiler,
                        "diagnostics": [{"category": category, "severity": "Error"}],
                    },
                )
                print(f"froze {name}.{compiler} (link)")


if __name__ == "__main__":
    main()
