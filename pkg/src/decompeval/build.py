"""Compiler invocation harness with compile/link phase separation.

Repaired decompiler output is always recompiled with flags_for(original
config), byte-identical to the flags used for the original binary. Cross
toolchains are resolved through a config table with environment overrides
(DECOMPEVAL_CC_<COMPILER>_<ARCH>, DECOMPEVAL_CXX_<COMPILER>_<ARCH>); a missing
toolchain is a configuration error, distinct from a compile failure.
"""

from __future__ import annotations

import os
import platform
import shutil
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .manifest import Architecture, BuildConfig, BuildMatrix, Compiler, DebugInfo, MatrixEntry

DEFAULT_TIMEOUT_S = 120

CXX_SUFFIXES = {".cpp", ".cc", ".cxx", ".C"}


class ToolchainNotFoundError(RuntimeError):
    """The configured compiler binary for (compiler, architecture) is not on PATH."""


class HarnessError(RuntimeError):
    """Faults of the harness itself (e.g. a runaway invocation hitting the timeout)."""


class PhaseMode(str, Enum):
    CompileOnly = "CompileOnly"
    CompileAndLink = "CompileAndLink"


# (compiler, architecture) -> (cc, cxx, architecture-selection flags)
TOOLCHAIN_TABLE: dict[tuple[Compiler, Architecture], tuple[str, str, tuple[str, ...]]] = {
    (Compiler.GCC, Architecture.x64): ("gcc", "g++", ("-m64",)),
    (Compiler.GCC, Architecture.x86): ("gcc", "g++", ("-m32",)),
    (Compiler.GCC, Architecture.ARM64): ("aarch64-linux-gnu-gcc", "aarch64-linux-gnu-g++", ()),
    (Compiler.GCC, Architecture.ARM32): ("arm-linux-gnueabihf-gcc", "arm-linux-gnueabihf-g++", ()),
    (Compiler.Clang, Architecture.x64): ("clang", "clang++", ("--target=x86_64-linux-gnu",)),
    (Compiler.Clang, Architecture.x86): ("clang", "clang++", ("--target=i686-linux-gnu",)),
    (Compiler.Clang, Architecture.ARM64): ("clang", "clang++", ("--target=aarch64-linux-gnu",)),
    (Compiler.Clang, Architecture.ARM32): ("clang", "clang++", ("--target=armv7-linux-gnueabihf",)),
}

# Plain-text diagnostics with caret context disabled stabilize the parser input.
DIAG_STABILIZER_FLAGS = {
    Compiler.GCC: ("-fdiagnostics-plain-output",),
    Compiler.Clang: ("-fno-caret-diagnostics", "-fno-color-diagnostics", "-fno-diagnostics-show-option"),
}


def host_architecture() -> Architecture:
    machine = platform.machine().lower()
    return {
        "x86_64": Architecture.x64,
        "amd64": Architecture.x64,
        "i386": Architecture.x86,
        "i686": Architecture.x86,
        "aarch64": Architecture.ARM64,
        "arm64": Architecture.ARM64,
        "armv7l": Architecture.ARM32,
    }.get(machine, Architecture.x64)


def flags_for(config: BuildConfig) -> list[str]:
    """Pure mapping from a build configuration to its compilation flags."""
    _, _, arch_flags = TOOLCHAIN_TABLE[(config.compiler, config.architecture)]
    flags = [f"-{config.optimization.value}"]
    if config.debug is DebugInfo.WithDebug:
        flags.append("-g")
    flags.extend(arch_flags)
    return flags


def resolve_toolchain(config: BuildConfig, cxx: bool = False) -> str:
    cc_default, cxx_default, _ = TOOLCHAIN_TABLE[(config.compiler, config.architecture)]
    kind = "CXX" if cxx else "CC"
    env_key = f"DECOMPEVAL_{kind}_{config.compiler.value}_{config.architecture.value}".upper()
    command = os.environ.get(env_key) or (cxx_default if cxx else cc_default)
    if shutil.which(command) is None:
        raise ToolchainNotFoundError(
            f"toolchain '{command}' for {config.compiler.value}/{config.architecture.value} "
            f"not found (override with {env_key})"
        )
    return command


@dataclass(frozen=True)
class CompileInvocation:
    source_paths: tuple[Path, ...]
    config: BuildConfig
    output_path: Path
    extra_flags: tuple[str, ...] = ()
    phase_mode: PhaseMode = PhaseMode.CompileAndLink
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self):
        if not self.source_paths:
            raise ValueError("source_paths must be non-empty")


@dataclass(frozen=True)
class CompileResult:
    compile_ok: bool
    link_ok: bool | None
    raw_stderr: str
    exit_code: int
    duration_ms: int
    compile_stderr: str = ""
    link_stderr: str | None = None

    def __post_init__(self):
        if self.link_ok is not None and not self.compile_ok:
            raise ValueError("link_ok must be absent when compilation failed")


def _run(cmd: list[str], cwd: Path, timeout_s: float) -> tuple[int, str]:
    try:
        proc = subprocess.run(
            cmd, cwd=cwd, capture_output=True, text=True, timeout=timeout_s
        )
    except subprocess.TimeoutExpired as exc:
        raise HarnessError(f"invocation timed out after {timeout_s}s: {' '.join(cmd)}") from exc
    except FileNotFoundError as exc:
        raise ToolchainNotFoundError(str(exc)) from exc
    return proc.returncode, proc.stderr


def build(inv: CompileInvocation) -> CompileResult:
    """Compile (and optionally link) one invocation, capturing stderr verbatim.

    Compilation and linking run as separate steps so that a link failure after
    a clean compile is observable as its own phase.
    """
    needs_cxx = any(Path(s).suffix in CXX_SUFFIXES for s in inv.source_paths)
    command = resolve_toolchain(inv.config, cxx=needs_cxx)
    base_flags = flags_for(inv.config) + list(DIAG_STABILIZER_FLAGS[inv.config.compiler])
    out = Path(inv.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    compile_stderr_parts: list[str] = []
    exit_code = 0
    objects: list[Path] = []
    compile_ok = True
    for i, src in enumerate(inv.source_paths):
        if inv.phase_mode is PhaseMode.CompileOnly and len(inv.source_paths) == 1:
            obj = out
        else:
            obj = out.parent / f"{out.stem}.{i}.o"
        cmd = [command, *base_flags, *inv.extra_flags, "-c", str(src), "-o", str(obj)]
        rc, stderr = _run(cmd, out.parent, inv.timeout_s)
        compile_stderr_parts.append(stderr)
        objects.append(obj)
        if rc != 0:
            compile_ok = False
            exit_code = rc

    compile_stderr = "".join(compile_stderr_parts)
    link_ok: bool | None = None
    link_stderr: str | None = None
    if compile_ok and inv.phase_mode is PhaseMode.CompileAndLink:
        cmd = [command, *base_flags, *inv.extra_flags]
        if inv.config.debug is DebugInfo.Stripped:
            cmd.append("-s")
        cmd += [str(o) for o in objects] + ["-o", str(out)]
        rc, link_stderr = _run(cmd, out.parent, inv.timeout_s)
        link_ok = rc == 0
        if rc != 0:
            exit_code = rc
        for o in objects:
            if o != out:
                o.unlink(missing_ok=True)
    elif not compile_ok:
        for o in objects:
            if o != out:
                o.unlink(missing_ok=True)

    duration_ms = int((time.monotonic() - started) * 1000)
    return CompileResult(
        compile_ok=compile_ok,
        link_ok=link_ok,
        raw_stderr=compile_stderr + (link_stderr or ""),
        exit_code=exit_code,
        duration_ms=duration_ms,
        compile_stderr=compile_stderr,
        link_stderr=link_stderr,
    )


@dataclass(frozen=True)
class MatrixBuildResult:
    entry: MatrixEntry
    result: CompileResult | None = None
    config_error: str | None = None

    @property
    def ok(self) -> bool:
        return (
            self.result is not None
            and self.result.compile_ok
            and (self.result.link_ok is not False)
        )


def entry_id(entry: MatrixEntry) -> str:
    return f"{entry.file.stem}_{entry.config.short()}"


def build_matrix(
    matrix: BuildMatrix,
    source_root: Path,
    workspace: Path,
    jobs: int = 1,
    extra_flags: tuple[str, ...] = (),
) -> list[MatrixBuildResult]:
    """Build every matrix entry; per-entry failures never abort the batch.

    Results are returned in entry order regardless of worker scheduling.
    """

    def one(entry: MatrixEntry) -> MatrixBuildResult:
        out_dir = workspace / entry_id(entry)
        inv = CompileInvocation(
            source_paths=(source_root / entry.file.path,),
            config=entry.config,
            output_path=out_dir / "binary",
            extra_flags=extra_flags,
        )
        try:
            return MatrixBuildResult(entry=entry, result=build(inv))
        except ToolchainNotFoundError as exc:
            return MatrixBuildResult(entry=entry, config_error=str(exc))

    if jobs <= 1:
        return [one(e) for e in matrix.entries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, matrix.entries))
