"""Structured parsing and categorization of compiler/linker stderr.

GCC and Clang phrase overlapping categories differently, so classification is
an ordered first-match walk over per-compiler pattern sub-tables
(most-specific-first); an unknown compiler falls back to the union table.
Note lines and caret context are absorbed into the owning diagnostic, never
counted as separate error instances.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum


class Phase(str, Enum):
    Compile = "Compile"
    Link = "Link"


class Severity(str, Enum):
    Error = "Error"
    Warning = "Warning"


class ErrorCategory(str, Enum):
    SyntaxError = "SyntaxError"
    UndeclaredIdentifier = "UndeclaredIdentifier"
    ConflictingTypes = "ConflictingTypes"
    IncompatiblePointerType = "IncompatiblePointerType"
    TypeConversionWarning = "TypeConversionWarning"
    ImplicitFunctionDeclaration = "ImplicitFunctionDeclaration"
    MemberAccessError = "MemberAccessError"
    MultipleDefinition = "MultipleDefinition"
    ArgumentCountMismatch = "ArgumentCountMismatch"
    VoidValueError = "VoidValueError"
    UnknownType = "UnknownType"
    UndefinedReference = "UndefinedReference"
    Redefinition = "Redefinition"
    IncompleteType = "IncompleteType"
    Uncategorized = "Uncategorized"


TYPE_RELATED = frozenset(
    {
        ErrorCategory.ConflictingTypes,
        ErrorCategory.IncompatiblePointerType,
        ErrorCategory.UnknownType,
        ErrorCategory.IncompleteType,
        ErrorCategory.MemberAccessError,
        ErrorCategory.VoidValueError,
    }
)

LINK_CATEGORIES = frozenset({ErrorCategory.UndefinedReference, ErrorCategory.MultipleDefinition})


def type_related(category: ErrorCategory) -> bool:
    return category in TYPE_RELATED


@dataclass(frozen=True)
class Diagnostic:
    phase: Phase
    category: ErrorCategory
    severity: Severity
    raw_message: str
    file: str | None = None
    line: int | None = None
    column: int | None = None

    def to_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "file": self.file,
            "line": self.line,
            "column": self.column,
            "category": self.category.value,
            "severity": self.severity.value,
            "raw_message": self.raw_message,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Diagnostic":
        return cls(
            phase=Phase(raw["phase"]),
            category=ErrorCategory(raw["category"]),
            severity=Severity(raw["severity"]),
            raw_message=raw["raw_message"],
            file=raw.get("file"),
            line=raw.get("line"),
            column=raw.get("column"),
        )


@dataclass(frozen=True)
class ErrorSnapshot:
    counts: dict
    total_errors: int
    total_warnings: int
    phase: Phase

    def to_dict(self) -> dict:
        return {
            "counts": {c.value: n for c, n in self.counts.items()},
            "total_errors": self.total_errors,
            "total_warnings": self.total_warnings,
            "phase": self.phase.value,
        }


# Ordered pattern tables. '*' rows apply to both compilers; rows are tried
# top-to-bottom so specific type phrasings win over generic ones, and
# "expected"-style syntax markers come last.
_COMPILE_ROWS: list[tuple[str, str, ErrorCategory]] = [
    ("*", r"incompatible pointer type", ErrorCategory.IncompatiblePointerType),
    ("*", r"conflicting types for", ErrorCategory.ConflictingTypes),
    ("*", r"unknown type name", ErrorCategory.UnknownType),
    ("*", r"incomplete type", ErrorCategory.IncompleteType),
    ("gcc", r"storage size of .+ isn.t known", ErrorCategory.IncompleteType),
    ("*", r"no member named", ErrorCategory.MemberAccessError),
    ("gcc", r"void value not ignored", ErrorCategory.VoidValueError),
    ("clang", r"expression of (?:incompatible )?type .void.", ErrorCategory.VoidValueError),
    ("*", r"implicit declaration of function", ErrorCategory.ImplicitFunctionDeclaration),
    ("clang", r"implicitly declaring library function", ErrorCategory.ImplicitFunctionDeclaration),
    ("gcc", r"conversion from .+ (?:may change|may alter)", ErrorCategory.TypeConversionWarning),
    ("clang", r"implicit conversion", ErrorCategory.TypeConversionWarning),
    ("*", r"too (?:many|few) arguments to", ErrorCategory.ArgumentCountMismatch),
    ("*", r"redefinition of", ErrorCategory.Redefinition),
    ("*", r"undeclared", ErrorCategory.UndeclaredIdentifier),
    ("*", r"expected|stray|unterminated|missing terminating|extraneous closing brace", ErrorCategory.SyntaxError),
]

_LINK_ROWS: list[tuple[str, str, ErrorCategory]] = [
    ("*", r"multiple definition of", ErrorCategory.MultipleDefinition),
    ("*", r"undefined reference to|undefined symbol", ErrorCategory.UndefinedReference),
]


def _table(rows, compiler_hint: str | None):
    hint = (compiler_hint or "").lower()
    out = []
    for who, pattern, category in rows:
        if who == "*" or hint == "" or who == hint:
            out.append((re.compile(pattern, re.IGNORECASE), category))
    return out


def classify(
    raw_message: str, phase: Phase, compiler_hint: str | None = None
) -> ErrorCategory:
    """First-match category for one diagnostic message; Uncategorized on fall-through."""
    rows = _LINK_ROWS if phase is Phase.Link else _COMPILE_ROWS
    for pattern, category in _table(rows, compiler_hint):
        if pattern.search(raw_message):
            return category
    return ErrorCategory.Uncategorized


# file:line[:col]: severity: message   (both compilers, plain-text diagnostics)
_DIAG_LINE_RE = re.compile(
    r"^(?P<file>[^:\s][^:]*):(?P<line>\d+):(?:(?P<col>\d+):)?\s*"
    r"(?P<sev>fatal error|error|warning|note):\s*(?P<msg>.*)$"
)
# "file.c: In function 'main':" and similar scope banners carry no instance.
_SCOPE_LINE_RE = re.compile(r"^[^:\s][^:]*: (In function|In file included|At top level)")
# Linker phrasing: "obj.o: in function `f':" context and "src.c:(.text+0x..): message".
_LD_CONTEXT_RE = re.compile(r"in function `[^']*':\s*$")
_LD_MESSAGE_RE = re.compile(r"^(?:[^:\s][^:]*:\s*)?(?P<file>[^:\s][^:(]*):\(\S+\):\s*(?P<msg>.+)$")
_LD_SUMMARY_RE = re.compile(
    r"(collect2: error: ld returned|linker command failed|error: ld returned)"
)


def parse_diagnostics(
    raw_stderr: str, phase: Phase, compiler_hint: str | None = None
) -> list[Diagnostic]:
    """Order-preserving conversion of raw stderr into Diagnostic records.

    Unrecognized lines never fail the parse: notes and caret art are folded
    into the preceding diagnostic's raw_message, everything else is dropped.
    """
    if phase is Phase.Link:
        return _parse_link(raw_stderr, compiler_hint)
    diags: list[Diagnostic] = []
    for line in raw_stderr.splitlines():
        if not line.strip():
            continue
        m = _DIAG_LINE_RE.match(line)
        if m:
            sev = m.group("sev")
            if sev == "note":
                # Attach the note text without its file:line prefix so the
                # owning diagnostic's message stays path-independent.
                if diags:
                    diags[-1] = _extend(diags[-1], f"note: {m.group('msg')}")
                continue
            message = m.group("msg")
            diags.append(
                Diagnostic(
                    phase=Phase.Compile,
                    category=classify(message, Phase.Compile, compiler_hint),
                    severity=Severity.Error if sev in ("error", "fatal error") else Severity.Warning,
                    raw_message=message,
                    file=m.group("file"),
                    line=int(m.group("line")),
                    column=int(m.group("col")) if m.group("col") else None,
                )
            )
            continue
        if _SCOPE_LINE_RE.match(line):
            continue
        if diags:
            diags[-1] = _extend(diags[-1], line)
    return diags


def _parse_link(raw_stderr: str, compiler_hint: str | None) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for line in raw_stderr.splitlines():
        if not line.strip() or _LD_SUMMARY_RE.search(line) or _LD_CONTEXT_RE.search(line):
            continue
        m = _LD_MESSAGE_RE.match(line)
        message = m.group("msg") if m else line
        category = classify(message, Phase.Link, compiler_hint)
        if category is ErrorCategory.Uncategorized and not m:
            if diags:
                diags[-1] = _extend(diags[-1], line)
            continue
        diags.append(
            Diagnostic(
                phase=Phase.Link,
                category=category,
                severity=Severity.Error,
                raw_message=message,
                file=m.group("file") if m else None,
            )
        )
    return diags


def _extend(diag: Diagnostic, line: str) -> Diagnostic:
    return Diagnostic(
        phase=diag.phase,
        category=diag.category,
        severity=diag.severity,
        raw_message=diag.raw_message + "\n" + line.rstrip(),
        file=diag.file,
        line=diag.line,
        column=diag.column,
    )


def snapshot(diags: list[Diagnostic]) -> ErrorSnapshot:
    """Aggregate a diagnostic list into per-category counts and totals.

    Warnings are categorized but excluded from total_errors, which drives
    repair-progress accounting.
    """
    counts: dict[ErrorCategory, int] = {}
    errors = warnings = 0
    phase = Phase.Compile
    for d in diags:
        counts[d.category] = counts.get(d.category, 0) + 1
        if d.severity is Severity.Error:
            errors += 1
        else:
            warnings += 1
        if d.phase is Phase.Link:
            phase = Phase.Link
    return ErrorSnapshot(counts=counts, total_errors=errors, total_warnings=warnings, phase=phase)


def category_shares(all_diags: list[Diagnostic]) -> dict:
    """Fraction of the corpus in each category (fractions sum to 1)."""
    if not all_diags:
        raise ValueError("category_shares requires a non-empty diagnostic corpus")
    counts: dict[ErrorCategory, int] = {}
    for d in all_diags:
        counts[d.category] = counts.get(d.category, 0) + 1
    total = len(all_diags)
    return {c: n / total for c, n in counts.items()}


def type_related_share(shares: dict) -> float:
    return sum(share for category, share in shares.items() if type_related(category))


def dump_diagnostics(diags: list[Diagnostic]) -> str:
    """Machine-readable form persisted per repair iteration."""
    return json.dumps([d.to_dict() for d in diags], indent=2)


def load_diagnostics(text: str) -> list[Diagnostic]:
    return [Diagnostic.from_dict(raw) for raw in json.loads(text)]
