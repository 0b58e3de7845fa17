"""Isolated subprocess execution of generated plotting code.

Each chart gets its own scratch directory ({run_id}/{chart_id}/ with
code.src, chart.png, stderr.txt); the interpreter is an opaque configurable
command run with a wall-clock timeout and a trimmed environment.  Traces
are truncated to the final lines so rectification prompts stay small.

Isolation is process-level only: the subprocess cwd is the scratch
directory and proxy variables are stripped, but no container or namespace
isolation is attempted.
"""

from __future__ import annotations

import os
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path

TRACE_TAIL_LINES = 40
DEFAULT_TIMEOUT_S = 60.0

_KEEP_ENV = ("PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH", "MPLCONFIGDIR", "TMPDIR")


@dataclass(frozen=True)
class ExecutionOutcome:
    status: str  # success | error | timeout
    trace: str | None
    image_exists: bool
    duration_ms: int

    @property
    def ok(self) -> bool:
        return self.status == "success"


class ExecutorBase:
    def execute(self, code: str, data_path: str, output_path: str,
                run_id: str, chart_id: str, timeout_s: float = DEFAULT_TIMEOUT_S) -> ExecutionOutcome:
        raise NotImplementedError


class SubprocessExecutor(ExecutorBase):
    """Runs code via a configured interpreter command in a scratch directory."""

    def __init__(self, scratch_root: str | Path, interpreter: list[str] | None = None,
                 max_concurrent: int = 4):
        # resolved so code/image paths stay valid when cwd moves to the scratch dir
        self.scratch_root = Path(scratch_root).resolve()
        self.interpreter = interpreter or [sys.executable]
        self._slots = threading.Semaphore(max_concurrent)

    def _env(self) -> dict[str, str]:
        env = {k: os.environ[k] for k in _KEEP_ENV if k in os.environ}
        env["MPLBACKEND"] = "Agg"
        return env

    def execute(self, code: str, data_path: str, output_path: str,
                run_id: str, chart_id: str, timeout_s: float = DEFAULT_TIMEOUT_S) -> ExecutionOutcome:
        scratch = self.scratch_root / run_id / chart_id
        scratch.mkdir(parents=True, exist_ok=True)
        code_path = scratch / "code.src"
        code_path.write_text(code)
        stderr_path = scratch / "stderr.txt"

        started = time.monotonic()
        with self._slots:
            try:
                proc = subprocess.run(
                    [*self.interpreter, str(code_path)],
                    cwd=scratch,
                    env=self._env(),
                    capture_output=True,
                    text=True,
                    timeout=timeout_s,
                )
            except subprocess.TimeoutExpired:
                duration = int((time.monotonic() - started) * 1000)
                stderr_path.write_text("execution timed out\n")
                return ExecutionOutcome("timeout", "execution timed out", False, duration)
        duration = int((time.monotonic() - started) * 1000)
        stderr_path.write_text(proc.stderr or "")

        if proc.returncode != 0:
            return ExecutionOutcome("error", tail_trace(proc.stderr), False, duration)
        image = Path(output_path)
        if not image.exists() or image.stat().st_size == 0:
            return ExecutionOutcome("error", "no artifact: output image missing or empty", False, duration)
        return ExecutionOutcome("success", None, True, duration)


class VirtualExecutor(ExecutorBase):
    """Simulation-mode executor: succeeds without spawning a process.

    Artifacts are virtual (no image file is written); the legibility filter
    still decides whether a chart verifies.  ``fail_plan`` maps a chart id
    to a number of initial attempts that should fail, driving the
    rectification loop deterministically in tests.
    """

    def __init__(self, fail_plan: dict[str, int] | None = None):
        self.fail_plan = dict(fail_plan or {})
        self._attempts: dict[str, int] = {}

    def execute(self, code: str, data_path: str, output_path: str,
                run_id: str, chart_id: str, timeout_s: float = DEFAULT_TIMEOUT_S) -> ExecutionOutcome:
        attempt = self._attempts.get(chart_id, 0)
        self._attempts[chart_id] = attempt + 1
        if attempt < self.fail_plan.get(chart_id, 0):
            return ExecutionOutcome(
                "error",
                f"Traceback (most recent call last):\nSimulatedError: injected failure {attempt + 1}",
                False,
                0,
            )
        return ExecutionOutcome("success", None, True, 0)


def tail_trace(stderr: str | None, lines: int = TRACE_TAIL_LINES) -> str:
    if not stderr:
        return "process exited nonzero with empty stderr"
    parts = stderr.strip().splitlines()
    return "\n".join(parts[-lines:])
