"""Full three-stage pipeline: plan, execute, synthesize — plus the
direct-prompting reference mode (one model call, no tools) used as the
comparison arm in benchmarks.

Each task gets its own metering wrapper around the shared model handle so
model time can be attributed per example even when many tasks run
concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

from . import executor as executor_mod
from . import navigator as navigator_mod
from .executor import (
    DEFAULT_MAX_TURNS,
    ReasoningTrace,
    Step,
    Termination,
    ToolRegistry,
)
from .gateway import DecodingConfig, MeteredModel, Message, ModelHandle
from .navigator import ALL_TOOLS, GlobalPlan
from .prompts import PromptLibrary
from .protocol import ToolKind
from .synthesizer import FinalAnswer, map_reply_to_option, synthesize
from .task import TaskInput

RegistryFactory = Callable[[ModelHandle], ToolRegistry]


@dataclass(frozen=True)
class PipelineResult:
    task: TaskInput
    plan: GlobalPlan
    trace: ReasoningTrace
    answer: FinalAnswer
    model_time: float
    model_calls: int


def run_task(
    task: TaskInput,
    *,
    model: ModelHandle,
    prompts: PromptLibrary,
    decoding: DecodingConfig,
    registry_factory: RegistryFactory,
    pool: frozenset[ToolKind] = ALL_TOOLS,
    max_turns: int = DEFAULT_MAX_TURNS,
    clock: Callable[[], float] = time.monotonic,
) -> PipelineResult:
    """Run one task through all three stages."""
    metered = MeteredModel(model)
    registry = registry_factory(metered)
    plan = navigator_mod.plan(task, metered, prompts, decoding, pool)
    trace = executor_mod.run(
        task,
        plan,
        registry,
        metered,
        prompts,
        decoding,
        max_turns=max_turns,
        clock=clock,
    )
    answer = synthesize(task, trace, metered, prompts, decoding)
    return PipelineResult(
        task=task,
        plan=plan,
        trace=trace,
        answer=answer,
        model_time=metered.model_time,
        model_calls=metered.calls,
    )


def run_direct(
    task: TaskInput,
    *,
    model: ModelHandle,
    prompts: PromptLibrary,
    decoding: DecodingConfig,
) -> PipelineResult:
    """Direct-prompting reference mode: a single call, no planning, no tools."""
    metered = MeteredModel(model)
    plan = GlobalPlan(
        selected_tools=frozenset(), global_plan="direct-prompting reference mode"
    )
    prompt_messages = executor_mod.render_executor_prompt(prompts, task, plan)
    completion = metered.complete(prompt_messages, decoding.with_stops(()))
    reply = completion.text.strip()
    answer = FinalAnswer(text=reply, trace_digest=completion.text)
    if task.options:
        mapped = map_reply_to_option(reply, task.options)
        if mapped is None:
            answer = FinalAnswer(
                text=reply,
                trace_digest=completion.text,
                warnings=("could not map the direct reply onto the options",),
            )
        else:
            answer = FinalAnswer(
                text=mapped[0], chosen_option=mapped[1], trace_digest=completion.text
            )
    trace = ReasoningTrace(
        task=task,
        plan=plan,
        steps=(Step(index=1, reasoning=completion.text),),
        terminated_by=Termination.FINAL_ANSWER,
        turns_used=1,
    )
    return PipelineResult(
        task=task,
        plan=plan,
        trace=trace,
        answer=answer,
        model_time=metered.model_time,
        model_calls=metered.calls,
    )
