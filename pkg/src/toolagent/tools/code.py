"""Code tool: sandboxed snippet execution with the error-feedback loop.

Snippets run out of process through a small runner harness: the orchestrator
writes the snippet to a scratch file, invokes the runner with
``(snippet_path, timeout_seconds)``, and reads one final JSON line from the
runner's stdout: {"ok", "stdout", "stderr", "duration_ms"}. Wall-timeout
enforcement lives HERE (process-group kill), so a hung runner cannot dodge
it. A runner that exits nonzero or emits no report is a harness fault
(SandboxUnavailable), which is a different condition from a snippet that
merely failed.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import signal
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from typing import Callable

from ..executor import CallContext, ToolResult
from ..gateway import DecodingConfig, Message, ModelHandle
from ..prompts import PromptLibrary
from ..protocol import ToolKind, first_invocation

logger = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 3
TRUNCATION_MARKER = "\n[truncated]"

# Bound simultaneous sandboxes across all traces in this process.
_SANDBOX_SLOTS = threading.BoundedSemaphore(4)


class SandboxUnavailable(Exception):
    """The runner is missing or misconfigured (not a snippet failure)."""


@dataclass(frozen=True)
class CodeLimits:
    wall_timeout: float = 10.0
    output_cap: int = 64 * 1024  # bytes per stream


@dataclass(frozen=True)
class ExecutionResult:
    ok: bool
    stdout: str
    stderr: str
    exit_status: int
    duration: float
    killed_by_timeout: bool


@dataclass(frozen=True)
class RevisionHistory:
    attempts: tuple[tuple[str, ExecutionResult], ...]
    final_ok: bool


def _truncate(text: str, cap: int) -> str:
    data = text.encode("utf-8")
    if len(data) <= cap:
        return text
    return data[:cap].decode("utf-8", errors="replace") + TRUNCATION_MARKER


def _parse_report(stdout: str) -> dict | None:
    """The final non-empty stdout line must be the JSON report."""
    lines = [line for line in stdout.splitlines() if line.strip()]
    if not lines:
        return None
    try:
        report = json.loads(lines[-1])
    except ValueError:
        return None
    if not isinstance(report, dict):
        return None
    if not isinstance(report.get("ok"), bool):
        return None
    if not all(isinstance(report.get(k), str) for k in ("stdout", "stderr")):
        return None
    if not isinstance(report.get("duration_ms"), int):
        return None
    return report


def execute(
    snippet: str,
    *,
    runner_cmd: list[str],
    limits: CodeLimits = CodeLimits(),
    clock: Callable[[], float] = time.monotonic,
) -> ExecutionResult:
    """Run one snippet in a fresh sandbox process tree.

    Each execution gets its own scratch directory (the child's cwd),
    destroyed afterwards. On wall timeout the whole process group is killed.
    """
    if not snippet:
        raise ValueError("snippet is empty")
    if not runner_cmd:
        raise SandboxUnavailable("no sandbox runner configured")
    scratch = tempfile.mkdtemp(prefix="sandbox-")
    snippet_path = os.path.join(scratch, "snippet.py")
    started = clock()
    try:
        with open(snippet_path, "w", encoding="utf-8") as fh:
            fh.write(snippet)
        argv = [*runner_cmd, snippet_path, str(limits.wall_timeout)]
        with _SANDBOX_SLOTS:
            try:
                proc = subprocess.Popen(
                    argv,
                    cwd=scratch,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    text=True,
                    start_new_session=True,
                )
            except OSError as exc:
                raise SandboxUnavailable(f"cannot start sandbox runner: {exc}") from exc
            try:
                out, err = proc.communicate(timeout=limits.wall_timeout)
            except subprocess.TimeoutExpired:
                try:
                    os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
                except (ProcessLookupError, PermissionError):
                    proc.kill()
                out, err = proc.communicate()
                duration = clock() - started
                return ExecutionResult(
                    ok=False,
                    stdout="",
                    stderr=(
                        f"execution timed out after {limits.wall_timeout:g} s"
                    ),
                    exit_status=proc.returncode if proc.returncode else -9,
                    duration=duration,
                    killed_by_timeout=True,
                )
        duration = clock() - started
        if proc.returncode != 0:
            raise SandboxUnavailable(
                f"sandbox runner exited with status {proc.returncode}: "
                f"{err.strip()[:400]}"
            )
        report = _parse_report(out)
        if report is None:
            raise SandboxUnavailable("sandbox runner emitted no report line")
        return ExecutionResult(
            ok=report["ok"],
            stdout=_truncate(report["stdout"], limits.output_cap),
            stderr=_truncate(report["stderr"], limits.output_cap),
            # The report abstracts the snippet's numeric exit status away;
            # synthesize one so ok <=> exit_status == 0 stays checkable.
            exit_status=0 if report["ok"] else 1,
            duration=duration,
            killed_by_timeout=False,
        )
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def describe_failure(result: ExecutionResult) -> str:
    if result.killed_by_timeout:
        return result.stderr or "execution timed out"
    if not result.ok:
        return result.stderr.strip() or "snippet exited with a nonzero status"
    return (
        "the snippet exited successfully but printed nothing; "
        "revise it to print the final answer"
    )


def run_with_feedback(
    snippet: str,
    question: str,
    model: ModelHandle,
    prompts: PromptLibrary,
    decoding: DecodingConfig,
    *,
    execute_fn: Callable[[str], ExecutionResult],
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> tuple[ToolResult, RevisionHistory]:
    """Execute; on failure feed (question, snippet, error) back for a fix.

    A "valid result" is exit 0 with non-empty stdout — zero-exit silence gets
    a revision asking the model to print its answer. At most
    ``max_retries + 1`` attempts happen; the revision snippet is extracted
    from a <code> block in the model's reply.
    """
    if max_retries < 0:
        raise ValueError(f"max_retries must be >= 0: {max_retries}")
    attempts: list[tuple[str, ExecutionResult]] = []
    current = snippet
    last_error = ""
    for attempt in range(max_retries + 1):
        result = execute_fn(current)
        attempts.append((current, result))
        if result.ok and result.stdout.strip():
            return (
                ToolResult(ToolKind.CODE, ok=True, content=result.stdout.strip()),
                RevisionHistory(tuple(attempts), final_ok=True),
            )
        last_error = describe_failure(result)
        if attempt == max_retries:
            break
        prompt = prompts.render(
            "code_revision", question=question, snippet=current, error=last_error
        )
        reply = model.complete(
            [Message.user(prompt)], decoding.with_stops(("</code>",))
        )
        seg = first_invocation(reply.text)
        if seg is None or seg.tool is not ToolKind.CODE or not seg.payload:
            logger.info("revision reply carried no code block; stopping the loop")
            break
        current = seg.payload
    return (
        ToolResult(ToolKind.CODE, ok=False, content=last_error),
        RevisionHistory(tuple(attempts), final_ok=False),
    )


class CodeTool:
    """Registry adapter: binds runner command, limits, and revision model."""

    def __init__(
        self,
        model: ModelHandle,
        prompts: PromptLibrary,
        decoding: DecodingConfig,
        *,
        runner_cmd: list[str],
        limits: CodeLimits = CodeLimits(),
        max_retries: int = DEFAULT_MAX_RETRIES,
    ):
        self._model = model
        self._prompts = prompts
        self._decoding = decoding
        self._runner_cmd = list(runner_cmd)
        self._limits = limits
        self._max_retries = max_retries
        self.last_history: RevisionHistory | None = None

    def _execute(self, snippet: str) -> ExecutionResult:
        return execute(snippet, runner_cmd=self._runner_cmd, limits=self._limits)

    def __call__(self, payload: str, ctx: CallContext) -> ToolResult:
        tool_result, history = run_with_feedback(
            payload,
            ctx.task.render_question(),
            self._model,
            self._prompts,
            self._decoding,
            execute_fn=self._execute,
            max_retries=self._max_retries,
        )
        self.last_history = history
        return tool_result
