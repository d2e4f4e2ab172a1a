"""Isolated execution of model-emitted tool code.

Each snippet runs as a fresh interpreter process with its own empty working
directory, a wall-clock budget, an address-space cap, and (for Python
interpreters) a socket guard injected via sitecustomize. Isolation is
process-level and aimed at accidental damage, not adversarial code: the
working directory is the only writable location the snippet sees via
relative paths, but nothing stops absolute-path writes by hostile code.
"""

from __future__ import annotations

import os
import re
import resource
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .schema import ExecStatus, ExecutionResult

DEFAULT_INTERPRETER = "python3"

_NETWORK_GUARD = """\
import socket

def _blocked(*args, **kwargs):
    raise OSError("network access is disabled in this sandbox")

socket.socket = _blocked
socket.create_connection = _blocked
socket.socketpair = _blocked
"""

_RESOURCE_SIGNALS = {signal.SIGKILL, signal.SIGSEGV, signal.SIGXCPU, signal.SIGXFSZ, signal.SIGBUS}


@dataclass(frozen=True)
class ExecLimits:
    wall_s: float = 10.0
    mem_mb: int = 512
    stdout_cap_bytes: int = 65536
    allow_network: bool = False

    def __post_init__(self) -> None:
        if self.wall_s <= 0 or self.mem_mb <= 0 or self.stdout_cap_bytes <= 0:
            raise ValueError("execution limits must be positive")


@dataclass(frozen=True)
class ConsistencyVerdict:
    consistent: bool
    first_mismatch: tuple[int, str, str] | None = None

    def __post_init__(self) -> None:
        if self.consistent and self.first_mismatch is not None:
            raise ValueError("a consistent verdict cannot carry a mismatch")


def _child_limits(mem_bytes: int):
    def apply() -> None:
        os.setsid()
        resource.setrlimit(resource.RLIMIT_AS, (mem_bytes, mem_bytes))
    return apply


def _read_capped(path: str, cap: int) -> tuple[str, bool]:
    with open(path, "rb") as fh:
        data = fh.read(cap + 1)
    truncated = len(data) > cap
    return data[:cap].decode("utf-8", errors="replace"), truncated


def execute_code(
    code: str,
    limits: ExecLimits | None = None,
    interpreter: str = DEFAULT_INTERPRETER,
) -> ExecutionResult:
    """Run one code snippet in a throwaway subprocess and capture the outcome.

    status is ok only when the process exits 0 within every limit. A failed
    interpreter launch reports spawn_error, which is distinct from the
    snippet itself failing.
    """
    limits = limits or ExecLimits()
    tmp = tempfile.mkdtemp(prefix="tirforge-exec-")
    try:
        script = os.path.join(tmp, "snippet.py")
        workdir = os.path.join(tmp, "work")
        os.mkdir(workdir)
        with open(script, "w", encoding="utf-8") as fh:
            fh.write(code)
            if not code.endswith("\n"):
                fh.write("\n")

        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "HOME": workdir,
            "TMPDIR": workdir,
            "LANG": os.environ.get("LANG", "C.UTF-8"),
            "PYTHONDONTWRITEBYTECODE": "1",
            "PYTHONIOENCODING": "utf-8",
        }
        if not limits.allow_network:
            # Best effort: the guard only binds for Python interpreters,
            # which import sitecustomize from PYTHONPATH at startup.
            guard_dir = os.path.join(tmp, "guard")
            os.mkdir(guard_dir)
            with open(os.path.join(guard_dir, "sitecustomize.py"), "w", encoding="utf-8") as fh:
                fh.write(_NETWORK_GUARD)
            env["PYTHONPATH"] = guard_dir

        out_path = os.path.join(tmp, "stdout")
        err_path = os.path.join(tmp, "stderr")
        started = time.monotonic()
        try:
            with open(out_path, "wb") as out_fh, open(err_path, "wb") as err_fh:
                proc = subprocess.Popen(
                    [interpreter, script],
                    cwd=workdir,
                    env=env,
                    stdin=subprocess.DEVNULL,
                    stdout=out_fh,
                    stderr=err_fh,
                    preexec_fn=_child_limits(limits.mem_mb * 1024 * 1024),
                )
        except (OSError, ValueError) as exc:
            return ExecutionResult(
                status=ExecStatus.SPAWN_ERROR,
                stdout="",
                stderr=f"failed to launch {interpreter!r}: {exc}",
                wall_ms=0,
            )

        timed_out = False
        try:
            returncode = proc.wait(timeout=limits.wall_s)
        except subprocess.TimeoutExpired:
            timed_out = True
            _kill_group(proc)
            returncode = proc.wait()
        wall_ms = int((time.monotonic() - started) * 1000)

        stdout, truncated = _read_capped(out_path, limits.stdout_cap_bytes)
        stderr, _ = _read_capped(err_path, limits.stdout_cap_bytes)

        if timed_out:
            status = ExecStatus.TIMEOUT
        elif returncode == 0:
            status = ExecStatus.OK
        elif -returncode in {s.value for s in _RESOURCE_SIGNALS} or "MemoryError" in stderr:
            status = ExecStatus.RESOURCE_LIMIT
        else:
            status = ExecStatus.RUNTIME_ERROR
        return ExecutionResult(
            status=status,
            stdout=stdout,
            stderr=stderr,
            wall_ms=wall_ms,
            stdout_truncated=truncated,
        )
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def execute_many(
    codes: Sequence[str],
    limits: ExecLimits | None = None,
    interpreter: str = DEFAULT_INTERPRETER,
    workers: int = 4,
) -> list[ExecutionResult]:
    """Execute snippets in parallel; results keep the input order."""
    if not codes:
        return []
    workers = max(1, min(workers, len(codes)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: execute_code(c, limits, interpreter), codes))


_NUMERIC_TOKEN = re.compile(r"[-+]?\d+\.?\d*(?:[eE][-+]?\d+)?|[-+]?\.\d+(?:[eE][-+]?\d+)?")


def _normalize_numbers(line: str) -> str:
    """Round float-looking tokens to 10 significant digits; integers stay exact."""

    def repl(m: re.Match) -> str:
        tok = m.group(0)
        if "." not in tok and "e" not in tok and "E" not in tok:
            return tok
        try:
            return format(float(tok), ".10g")
        except (ValueError, OverflowError):
            return tok

    return _NUMERIC_TOKEN.sub(repl, line)


def _clean_lines(lines: Iterable[str]) -> list[str]:
    out = [_normalize_numbers(line.rstrip()) for line in lines]
    while out and out[-1] == "":
        out.pop()
    return out


def verify_outputs(claimed: Sequence[str], result: ExecutionResult) -> ConsistencyVerdict:
    """Compare claimed stdout lines with what the sandbox actually printed.

    Lines are compared after trailing-whitespace trimming and 10-significant-
    digit normalization of float tokens. Requires a successful execution.
    """
    if result.status is not ExecStatus.OK:
        raise ValueError("verify_outputs requires an ok execution result")
    want = _clean_lines(claimed)
    got = _clean_lines(result.stdout.splitlines())
    for i, (w, g) in enumerate(zip(want, got)):
        if w != g:
            return ConsistencyVerdict(consistent=False, first_mismatch=(i, w, g))
    if len(want) != len(got):
        i = min(len(want), len(got))
        w = want[i] if i < len(want) else ""
        g = got[i] if i < len(got) else ""
        return ConsistencyVerdict(consistent=False, first_mismatch=(i, w, g))
    return ConsistencyVerdict(consistent=True)
