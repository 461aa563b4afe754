"""Stage 2: the budgeted reason -> invoke -> inject loop.

Each turn renders the executor prompt (instruction blocks only for the
selected toolkit, accumulated context as the Answer continuation), samples a
completion with the three closing tags as stops, executes the first complete
invocation, and injects its result back as ``<result> ... </result>``. The
loop never raises past itself: tool failures become ToolError steps the model
gets to read and react to. A hard turn budget bounds every run.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .gateway import DecodingConfig, GatewayError, Message, ModelHandle
from .navigator import GlobalPlan
from .prompts import PromptLibrary
from .protocol import STOP_SEQUENCES, ToolKind, first_invocation
from .task import TaskInput

logger = logging.getLogger(__name__)

DEFAULT_MAX_TURNS = 10

#: Tool listing order in the executor prompt.
_BLOCK_ORDER = (ToolKind.SEARCH, ToolKind.PERCEIVE, ToolKind.CODE)


class StepStatus(Enum):
    TOOL_OK = "ToolOk"
    TOOL_ERROR = "ToolError"
    FINAL_CANDIDATE = "FinalCandidate"


class Termination(Enum):
    FINAL_ANSWER = "FinalAnswer"
    BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass(frozen=True)
class ToolResult:
    tool: ToolKind
    ok: bool
    content: str
    wall_time: float = 0.0


@dataclass(frozen=True)
class Step:
    """One executor turn: reasoning text, optionally an invocation + result.

    ``invocation_raw`` is the exact tagged source slice (opener..closer), kept
    so context reconstruction is byte-faithful.
    """

    index: int
    reasoning: str
    tool: ToolKind | None = None
    payload: str | None = None
    invocation_raw: str | None = None
    result: ToolResult | None = None
    status: StepStatus = StepStatus.FINAL_CANDIDATE


@dataclass(frozen=True)
class ReasoningTrace:
    task: TaskInput
    plan: GlobalPlan
    steps: tuple[Step, ...]
    terminated_by: Termination
    turns_used: int


@dataclass(frozen=True)
class CallContext:
    """What a tool handler may see besides its payload."""

    task: TaskInput
    reasoning: str  # accumulated context up to and including this invocation


ToolHandler = Callable[[str, CallContext], ToolResult]


class ToolRegistry:
    """Tool kind -> handler map; records dispatches for instrumentation."""

    def __init__(self, handlers: dict[ToolKind, ToolHandler] | None = None):
        self._handlers: dict[ToolKind, ToolHandler] = dict(handlers or {})
        self.dispatched: list[tuple[ToolKind, str]] = []

    def register(self, kind: ToolKind, handler: ToolHandler) -> None:
        self._handlers[kind] = handler

    def kinds(self) -> frozenset[ToolKind]:
        return frozenset(self._handlers)

    def dispatch(self, kind: ToolKind, payload: str, ctx: CallContext) -> ToolResult:
        self.dispatched.append((kind, payload))
        return self._handlers[kind](payload, ctx)


def serialize_history(steps: list[Step] | tuple[Step, ...]) -> str:
    """Steps -> the Answer continuation ({previous_reasoning}).

    Reasoning, the raw invocation tags, and the result wrapped as
    ``<result> ... </result>`` appear in order, unmodified; each turn's
    rendering is a strict prefix of the next.
    """
    parts: list[str] = []
    for step in steps:
        parts.append(step.reasoning)
        if step.invocation_raw is not None and step.result is not None:
            parts.append(step.invocation_raw)
            parts.append(f"<result> {step.result.content} </result>\n")
    return "".join(parts)


def render_executor_prompt(
    prompts: PromptLibrary,
    task: TaskInput,
    plan: GlobalPlan,
    history: list[Step] | tuple[Step, ...] = (),
) -> list[Message]:
    """Deterministic prompt rendering for one executor turn.

    Instruction blocks, usage hints, and few-shot examples appear only for
    tools in ``plan.selected_tools``; a truly empty toolkit renders the
    minimal direct-answer template instead.
    """
    previous = serialize_history(history)
    if not plan.selected_tools:
        text = prompts.render(
            "executor_direct",
            question=task.render_question(),
            previous_reasoning=previous,
        )
        return [Message.user(text, image=task.image)]

    enabled = [k for k in _BLOCK_ORDER if k in plan.selected_tools]
    blocks = []
    for n, kind in enumerate(enabled, start=1):
        block = prompts.load(f"executor_block_{kind.value.lower()}").strip()
        blocks.append(f"{n}. {block}")
    hints = [prompts.load(f"executor_hint_{k.value.lower()}").strip() for k in enabled]
    examples = [
        prompts.load(f"executor_example_{k.value.lower()}").strip() for k in enabled
    ]
    text = prompts.render(
        "executor",
        tool_blocks="\n".join(blocks),
        tool_usage_hints=" " + " ".join(hints) if hints else "",
        tool_examples="\n\n".join(examples),
        question=task.render_question(),
        previous_reasoning=previous,
    )
    return [Message.user(text, image=task.image)]


def run(
    task: TaskInput,
    plan: GlobalPlan,
    tools: ToolRegistry,
    model: ModelHandle,
    prompts: PromptLibrary,
    decoding: DecodingConfig,
    max_turns: int = DEFAULT_MAX_TURNS,
    clock: Callable[[], float] = time.monotonic,
) -> ReasoningTrace:
    """Run the execution loop; never raises tool or model-text problems.

    Gateway errors after retries do escape (the caller owns that policy);
    everything the model *says* is handled in-trace.
    """
    if max_turns < 1:
        raise ValueError(f"max_turns must be >= 1: {max_turns}")
    missing = plan.selected_tools - tools.kinds()
    if missing:
        names = ", ".join(sorted(k.value for k in missing))
        raise ValueError(f"no handler registered for selected tools: {names}")

    if not plan.selected_tools:
        messages = render_executor_prompt(prompts, task, plan)
        completion = model.complete(messages, decoding.with_stops(()))
        step = Step(index=1, reasoning=completion.text)
        return ReasoningTrace(
            task=task,
            plan=plan,
            steps=(step,),
            terminated_by=Termination.FINAL_ANSWER,
            turns_used=1,
        )

    steps: list[Step] = []
    stops = decoding.with_stops(STOP_SEQUENCES)
    for turn in range(1, max_turns + 1):
        messages = render_executor_prompt(prompts, task, plan, steps)
        completion = model.complete(messages, stops)
        text = completion.text
        seg = first_invocation(text)
        if seg is None:
            steps.append(Step(index=turn, reasoning=text))
            return ReasoningTrace(
                task=task,
                plan=plan,
                steps=tuple(steps),
                terminated_by=Termination.FINAL_ANSWER,
                turns_used=turn,
            )
        # Only the first invocation executes; any completion text after it is
        # discarded and the model re-generates from the injected result.
        reasoning = text[: seg.span[0]]
        assert seg.tool is not None and seg.payload is not None
        ctx = CallContext(
            task=task, reasoning=serialize_history(steps) + reasoning + seg.raw
        )
        started = clock()
        if seg.tool not in plan.selected_tools:
            result = ToolResult(
                seg.tool,
                ok=False,
                content=f"tool '{seg.tool.value}' is not available for this task",
            )
        elif not seg.payload:
            result = ToolResult(seg.tool, ok=False, content="empty tool query")
        else:
            try:
                result = tools.dispatch(seg.tool, seg.payload, ctx)
            except GatewayError as exc:
                result = ToolResult(
                    seg.tool, ok=False, content=f"tool call failed: {exc}"
                )
            except Exception as exc:  # noqa: BLE001 - must stay in-trace
                logger.exception("tool handler crashed")
                result = ToolResult(
                    seg.tool, ok=False, content=f"tool execution failed: {exc}"
                )
        result = replace(result, wall_time=clock() - started)
        steps.append(
            Step(
                index=turn,
                reasoning=reasoning,
                tool=seg.tool,
                payload=seg.payload,
                invocation_raw=seg.raw,
                result=result,
                status=StepStatus.TOOL_OK if result.ok else StepStatus.TOOL_ERROR,
            )
        )
    return ReasoningTrace(
        task=task,
        plan=plan,
        steps=tuple(steps),
        terminated_by=Termination.BUDGET_EXHAUSTED,
        turns_used=max_turns,
    )
