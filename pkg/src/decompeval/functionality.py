"""Differential behavioral comparison of original vs recompiled binaries.

Program level compares stdout observations (lines of the form
``[CASE-ID] payload``). Function level reconstructs call records from the
instrumentation event stream via per-thread stack simulation and pairs the
k-th invocation of each function across the two traces. Instruction level
compares normalized label sequences (function, register signature, return
category) by longest-common-subsequence similarity. Function- and
instruction-level results are conditional evidence and never alter the
program-level verdict.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum

from .manifest import Architecture, Dimension, Manifest


class StreamCorruptionError(ValueError):
    """The event stream violates stack discipline (exit without a matching enter)."""


class EventKind(str, Enum):
    Enter = "enter"
    Exit = "exit"
    Write = "write"


@dataclass(frozen=True)
class TraceEvent:
    kind: EventKind
    seq_id: int
    thread_id: int
    order_index: int
    function: str = ""
    registers: tuple = ()  # ((name, value), ...) at Enter
    return_value: int | None = None  # at Exit
    fd: int | None = None  # at Write
    data: bytes = b""  # at Write


@dataclass(frozen=True)
class MappedRegions:
    ranges: tuple[tuple[int, int], ...] = ()

    def contains(self, value: int) -> bool:
        return any(lo <= value < hi for lo, hi in self.ranges)


@dataclass(frozen=True)
class ParsedStream:
    events: tuple[TraceEvent, ...]
    regions: MappedRegions
    corruptions: tuple[str, ...] = ()


@dataclass(frozen=True)
class CallRecord:
    seq_id: int
    thread_id: int
    function: str
    entry_registers: dict
    return_value: int | None
    attributed_writes: tuple[bytes, ...]
    invocation_ordinal: int


TOPLEVEL = "toplevel"

# Canonical integer argument registers compared at entry; the captured
# superset is stored but only these decide I/O match.
CANONICAL_ARG_REGISTERS: dict[Architecture, tuple[str, ...]] = {
    Architecture.ARM64: ("x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7"),
    Architecture.x64: ("rdi", "rsi", "rdx", "rcx", "r8", "r9"),
    Architecture.ARM32: ("r0", "r1", "r2", "r3"),
    Architecture.x86: (),  # cdecl passes arguments on the stack
}

ARCH_BITS = {
    Architecture.ARM64: 64,
    Architecture.x64: 64,
    Architecture.ARM32: 32,
    Architecture.x86: 32,
}


# ---------------------------------------------------------------------------
# Wire format (line-delimited JSON records from the instrumentation agent)


def parse_wire_stream(text: str) -> ParsedStream:
    events: list[TraceEvent] = []
    regions: tuple[tuple[int, int], ...] = ()
    corruptions: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"wire stream line {lineno} is not valid JSON: {exc}") from exc
        kind = raw.get("kind")
        if kind == "maps":
            regions = tuple((int(lo), int(hi)) for lo, hi in raw.get("regions", []))
            continue
        if kind == "corrupt":
            corruptions.append(raw.get("reason", "unspecified"))
            continue
        if kind == EventKind.Enter.value:
            events.append(
                TraceEvent(
                    kind=EventKind.Enter,
                    seq_id=int(raw["seq"]),
                    thread_id=int(raw["tid"]),
                    order_index=int(raw["idx"]),
                    function=str(raw["fn"]),
                    registers=tuple(sorted((k, int(v)) for k, v in raw.get("regs", {}).items())),
                )
            )
        elif kind == EventKind.Exit.value:
            events.append(
                TraceEvent(
                    kind=EventKind.Exit,
                    seq_id=int(raw["seq"]),
                    thread_id=int(raw["tid"]),
                    order_index=int(raw["idx"]),
                    function=str(raw.get("fn", "")),
                    return_value=None if raw.get("ret") is None else int(raw["ret"]),
                )
            )
        elif kind == EventKind.Write.value:
            events.append(
                TraceEvent(
                    kind=EventKind.Write,
                    seq_id=int(raw.get("seq", -1)),
                    thread_id=int(raw["tid"]),
                    order_index=int(raw["idx"]),
                    fd=int(raw["fd"]),
                    data=base64.b64decode(raw.get("data_b64", "")),
                )
            )
        else:
            raise ValueError(f"wire stream line {lineno}: unknown record kind {kind!r}")
    return ParsedStream(events=tuple(events), regions=MappedRegions(regions), corruptions=tuple(corruptions))


def serialize_events(stream: ParsedStream) -> str:
    """Inverse of parse_wire_stream for round-trip checks and fixtures."""
    lines = [json.dumps({"kind": "maps", "regions": [list(r) for r in stream.regions.ranges]})]
    for e in stream.events:
        if e.kind is EventKind.Enter:
            rec = {
                "kind": "enter",
                "seq": e.seq_id,
                "tid": e.thread_id,
                "fn": e.function,
                "regs": {k: v for k, v in e.registers},
                "idx": e.order_index,
            }
        elif e.kind is EventKind.Exit:
            rec = {
                "kind": "exit",
                "seq": e.seq_id,
                "tid": e.thread_id,
                "fn": e.function,
                "ret": e.return_value,
                "idx": e.order_index,
            }
        else:
            rec = {
                "kind": "write",
                "seq": e.seq_id,
                "tid": e.thread_id,
                "fd": e.fd,
                "data_b64": base64.b64encode(e.data).decode("ascii"),
                "idx": e.order_index,
            }
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Call reconstruction


def reconstruct_calls(events) -> list[CallRecord]:
    """Per-thread stack simulation over an order_index-sorted event stream.

    fd=1 writes attach to the top frame of their thread (or a synthetic
    toplevel frame); enters left open at stream end become records with an
    absent return value (crash truncation).
    """
    events = list(events)
    for prev, cur in zip(events, events[1:]):
        if cur.order_index <= prev.order_index:
            raise ValueError("events must be ordered by order_index")

    @dataclass
    class _Frame:
        seq_id: int
        thread_id: int
        function: str
        entry_registers: dict
        writes: list
        ordinal: int
        return_value: int | None = None

    stacks: dict[int, list[_Frame]] = {}
    toplevels: dict[int, _Frame] = {}
    ordinals: dict[str, int] = {}
    frames_in_order: list[_Frame] = []

    for event in events:
        stack = stacks.setdefault(event.thread_id, [])
        if event.kind is EventKind.Enter:
            ordinals[event.function] = ordinals.get(event.function, 0) + 1
            frame = _Frame(
                seq_id=event.seq_id,
                thread_id=event.thread_id,
                function=event.function,
                entry_registers={k: v for k, v in event.registers},
                writes=[],
                ordinal=ordinals[event.function],
            )
            stack.append(frame)
            frames_in_order.append(frame)
        elif event.kind is EventKind.Exit:
            open_seqs = [f.seq_id for f in stack]
            if event.seq_id not in open_seqs:
                raise StreamCorruptionError(
                    f"exit for seq {event.seq_id} has no matching enter on thread {event.thread_id}"
                )
            # Frames above the matching one never exited normally.
            while stack and stack[-1].seq_id != event.seq_id:
                stack.pop()
            frame = stack.pop()
            frame.return_value = event.return_value
        elif event.kind is EventKind.Write:
            if event.fd != 1:
                continue
            if stack:
                stack[-1].writes.append(event.data)
            else:
                top = toplevels.get(event.thread_id)
                if top is None:
                    top = _Frame(
                        seq_id=-(event.thread_id + 1),
                        thread_id=event.thread_id,
                        function=TOPLEVEL,
                        entry_registers={},
                        writes=[],
                        ordinal=1,
                    )
                    toplevels[event.thread_id] = top
                    frames_in_order.append(top)
                top.writes.append(event.data)

    return [
        CallRecord(
            seq_id=f.seq_id,
            thread_id=f.thread_id,
            function=f.function,
            entry_registers=dict(f.entry_registers),
            return_value=f.return_value,
            attributed_writes=tuple(f.writes),
            invocation_ordinal=f.ordinal,
        )
        for f in frames_in_order
    ]


# ---------------------------------------------------------------------------
# Observations and the program-level verdict


class VerdictCategory(str, Enum):
    ExactStdout = "ExactStdout"
    Partial = "Partial"
    Fail = "Fail"
    Unsupported = "Unsupported"


@dataclass(frozen=True)
class Observation:
    case_id: str
    payload: str
    position: int


@dataclass(frozen=True)
class ProgramVerdict:
    category: VerdictCategory
    matched: int
    total_original: int
    crash: bool

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "matched": self.matched,
            "total_original": self.total_original,
            "crash": self.crash,
        }


OBSERVATION_RE = re.compile(r"^\[((?:CF|DT|MO|FC|OO|CS|SI|SC)-L[1-5]-\d{2})\] ?(.*)$")


def parse_observations(stdout: str) -> list[Observation]:
    """Each ``[CASE-ID] payload`` line yields one observation; noise is ignored."""
    out: list[Observation] = []
    for line in stdout.splitlines():
        m = OBSERVATION_RE.match(line.strip())
        if m:
            out.append(Observation(case_id=m.group(1), payload=m.group(2), position=len(out)))
    return out


def _lcs_length(a: list, b: list) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def matched_observations(orig: list[Observation], rec: list[Observation]) -> int:
    """Longest order-preserving alignment on (case_id, payload)."""
    return _lcs_length(
        [(o.case_id, o.payload) for o in orig], [(o.case_id, o.payload) for o in rec]
    )


def classify_program(
    orig: list[Observation], rec: list[Observation], rec_crashed: bool
) -> ProgramVerdict:
    """Four-way behavioral verdict; a mid-run crash always classifies as Fail."""
    total = len(orig)
    matched = matched_observations(orig, rec)
    if rec_crashed:
        category = VerdictCategory.Fail
    elif total == 0 or not rec:
        category = VerdictCategory.Unsupported
    elif matched == total:
        category = VerdictCategory.ExactStdout
    elif matched > 0:
        category = VerdictCategory.Partial
    else:
        category = VerdictCategory.Fail
    return ProgramVerdict(category=category, matched=matched, total_original=total, crash=rec_crashed)


# ---------------------------------------------------------------------------
# Function-level comparison


def match_calls(orig_calls: list[CallRecord], rec_calls: list[CallRecord]):
    """Pair the k-th invocation of each function across the two traces."""
    rec_index = {
        (c.function, c.invocation_ordinal): c for c in rec_calls if c.function != TOPLEVEL
    }
    pairs = []
    for call in orig_calls:
        if call.function == TOPLEVEL:
            continue
        partner = rec_index.get((call.function, call.invocation_ordinal))
        if partner is not None:
            pairs.append((call, partner))
    return pairs


def _canonical_registers(call: CallRecord, arch: Architecture) -> tuple:
    return tuple(call.entry_registers.get(name) for name in CANONICAL_ARG_REGISTERS[arch])


def io_match_rate(pairs, arch: Architecture = Architecture.x64) -> tuple[float, bool]:
    """Fraction of matched pairs whose canonical entry registers and return
    values agree; evidence is available only when at least one pair exists."""
    if not pairs:
        return 0.0, False
    matching = 0
    for a, b in pairs:
        if _canonical_registers(a, arch) == _canonical_registers(b, arch) and a.return_value == b.return_value:
            matching += 1
    return matching / len(pairs), True


# ---------------------------------------------------------------------------
# Instruction-level label sequences


class ReturnCategory(str, Enum):
    Zero = "Zero"
    Positive = "Positive"
    Negative = "Negative"
    PointerRange = "PointerRange"
    Other = "Other"


def return_category(
    value: int | None, arch: Architecture, regions: MappedRegions = MappedRegions()
) -> ReturnCategory:
    if value is None:
        return ReturnCategory.Other
    if value == 0:
        return ReturnCategory.Zero
    if regions.contains(value):
        return ReturnCategory.PointerRange
    bits = ARCH_BITS[arch]
    signed = value - (1 << bits) if value >= (1 << (bits - 1)) else value
    return ReturnCategory.Negative if signed < 0 else ReturnCategory.Positive


@dataclass(frozen=True)
class SeqToken:
    function: str
    register_signature: str
    return_category: ReturnCategory


def build_label_sequence(
    calls: list[CallRecord], arch: Architecture, regions: MappedRegions = MappedRegions()
) -> list[SeqToken]:
    tokens = []
    for call in calls:
        if call.function == TOPLEVEL:
            continue
        canon = _canonical_registers(call, arch)
        signature = hashlib.sha256(repr(canon).encode("utf-8")).hexdigest()[:12]
        tokens.append(
            SeqToken(
                function=call.function,
                register_signature=signature,
                return_category=return_category(call.return_value, arch, regions),
            )
        )
    return tokens


def seq_similarity(a: list[SeqToken], b: list[SeqToken]) -> float:
    """|LCS(a, b)| / max(|a|, |b|); both empty is 1.0 by convention."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return _lcs_length(a, b) / max(len(a), len(b))


# ---------------------------------------------------------------------------
# Driver coverage


def driver_coverage(observations: list[Observation], manifest: Manifest) -> dict:
    """Per-dimension fraction of expected case ids that the original trace observed."""
    observed = {o.case_id for o in observations}
    expected: dict[Dimension, set] = {}
    for case in manifest.cases:
        expected.setdefault(case.dimension, set()).update(case.expected_observation_ids)
    return {
        dim: (len(ids & observed) / len(ids)) if ids else 0.0
        for dim, ids in expected.items()
    }
