"""Decompiler adapters and execution backends.

Decompilers are consumed through a pluggable adapter: a DirectoryOfOutputs
adapter (the default, so the framework is testable with no licensed decompiler
installed) maps each task to a pre-produced output file; an ExternalCommand
adapter invokes a tool with a command template. Function-granularity adapters
are typed as such and excluded from recompilability and program-level
functionality downstream.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class AdapterMode(str, Enum):
    ExternalCommand = "ExternalCommand"
    DirectoryOfOutputs = "DirectoryOfOutputs"


class OutputUnit(str, Enum):
    WholeProgram = "WholeProgram"
    FunctionGranularity = "FunctionGranularity"


class AdapterError(RuntimeError):
    pass


@dataclass(frozen=True)
class DecompilerAdapter:
    name: str
    mode: AdapterMode
    unit: OutputUnit = OutputUnit.WholeProgram
    directory: Path | None = None  # DirectoryOfOutputs
    command_template: str = ""  # ExternalCommand; {binary} and {output} placeholders
    timeout_s: float = 600.0

    def decompile(self, binary_path: Path, task_id: str, source_stem: str, suffix: str) -> str:
        if self.mode is AdapterMode.DirectoryOfOutputs:
            return self._from_directory(task_id, source_stem, suffix)
        return self._from_command(binary_path)

    def _from_directory(self, task_id: str, source_stem: str, suffix: str) -> str:
        if self.directory is None:
            raise AdapterError(f"adapter {self.name}: no output directory configured")
        # Most specific name first; a bare <stem> file serves every configuration.
        for candidate in (f"{task_id}{suffix}", f"{source_stem}{suffix}"):
            path = Path(self.directory) / candidate
            if path.is_file():
                return path.read_text(encoding="utf-8")
        raise AdapterError(
            f"adapter {self.name}: no output for task {task_id} under {self.directory}"
        )

    def _from_command(self, binary_path: Path) -> str:
        if not self.command_template:
            raise AdapterError(f"adapter {self.name}: no command template configured")
        out_path = Path(str(binary_path) + f".{self.name}.c")
        cmd = [
            part.format(binary=str(binary_path), output=str(out_path))
            for part in shlex.split(self.command_template)
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=self.timeout_s)
        if proc.returncode != 0 or not out_path.is_file():
            raise AdapterError(
                f"adapter {self.name}: command failed (rc={proc.returncode}): {proc.stderr[:500]}"
            )
        return out_path.read_text(encoding="utf-8")


@dataclass(frozen=True)
class ExecutionOutcome:
    exit_code: int
    stdout: str
    crashed: bool  # terminated by a signal or hung past the deadline


class LocalHostBackend:
    """Runs binaries directly on the host."""

    name = "LocalHost"

    def run(self, binary_path: Path, timeout_s: float = 10.0) -> ExecutionOutcome:
        try:
            proc = subprocess.run(
                [str(binary_path)], capture_output=True, timeout=timeout_s
            )
        except subprocess.TimeoutExpired as exc:
            partial = exc.stdout.decode("utf-8", "replace") if exc.stdout else ""
            return ExecutionOutcome(exit_code=-1, stdout=partial, crashed=True)
        return ExecutionOutcome(
            exit_code=proc.returncode,
            stdout=proc.stdout.decode("utf-8", "replace"),
            crashed=proc.returncode < 0,
        )


class RemoteExecBackend:
    """Dispatches execution through a command template, e.g. 'ssh vm-{arch} {cmd}'.

    VM lifecycle management is out of scope; the template is expected to reach
    an already-provisioned environment.
    """

    name = "RemoteExec"

    def __init__(self, template: str):
        if "{cmd}" not in template:
            raise ValueError("remote template must contain a {cmd} placeholder")
        self.template = template

    def run(self, binary_path: Path, timeout_s: float = 60.0) -> ExecutionOutcome:
        rendered = self.template.format(cmd=shlex.quote(str(binary_path)))
        try:
            proc = subprocess.run(
                rendered, shell=True, capture_output=True, timeout=timeout_s
            )
        except subprocess.TimeoutExpired as exc:
            partial = exc.stdout.decode("utf-8", "replace") if exc.stdout else ""
            return ExecutionOutcome(exit_code=-1, stdout=partial, crashed=True)
        return ExecutionOutcome(
            exit_code=proc.returncode,
            stdout=proc.stdout.decode("utf-8", "replace"),
            crashed=proc.returncode < 0,
        )
