"""Stage 3: condense the trace, ask for the final short answer, map options.

The digest keeps every successful step verbatim but replaces failed tool
steps' payload bodies with a one-line note — failed code snippets and dead-end
queries would only distract the synthesis call. Option mapping is ruled:
exact label, then case-insensitive value, then unique substring; anything
else falls back to the raw reply with a recorded warning rather than guessing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .executor import ReasoningTrace, Step, StepStatus
from .gateway import DecodingConfig, Message, ModelHandle
from .prompts import PromptLibrary
from .task import TaskInput, option_labels

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FinalAnswer:
    """The short answer: ``text`` is what gets scored; ``chosen_option`` is
    the matched option value (a member of the task's option set) when the
    reply could be mapped."""

    text: str
    chosen_option: str | None = None
    trace_digest: str = ""
    warnings: tuple[str, ...] = ()


def _failure_note(step: Step) -> str:
    assert step.result is not None and step.tool is not None
    first_line = step.result.content.strip().splitlines()
    detail = first_line[0] if first_line else "unknown error"
    return f"[a {step.tool.value} call failed: {detail}]\n"


def trace_digest(trace: ReasoningTrace) -> str:
    """Cleaned reasoning path: ToolOk steps verbatim (reasoning, invocation,
    result), ToolError steps reduced to reasoning plus a one-line note."""
    parts: list[str] = []
    for step in trace.steps:
        parts.append(step.reasoning)
        if step.status is StepStatus.TOOL_OK and step.result is not None:
            parts.append(step.invocation_raw or "")
            parts.append(f"<result> {step.result.content} </result>\n")
        elif step.status is StepStatus.TOOL_ERROR:
            parts.append(_failure_note(step))
    return "".join(parts)


def map_reply_to_option(
    reply: str, options: tuple[str, ...]
) -> tuple[str, str] | None:
    """Map a free-form reply onto the option set.

    Returns (answer text, chosen option value) or None when no rule applies.
    Rules, in order: exact positional-label match ("B"); case-insensitive
    value match; unique case-insensitive substring containment (option value
    inside the reply). Ambiguity fails the substring rule.
    """
    stripped = reply.strip()
    labels = option_labels(len(options))
    for label, value in zip(labels, options):
        if stripped == label:
            return label, value
    lowered = stripped.lower()
    for value in options:
        if lowered == value.lower():
            return value, value
    contained = [value for value in options if value.lower() in lowered]
    if len(contained) == 1:
        return contained[0], contained[0]
    return None


def synthesize(
    task: TaskInput,
    trace: ReasoningTrace,
    model: ModelHandle,
    prompts: PromptLibrary,
    decoding: DecodingConfig,
) -> FinalAnswer:
    """One synthesis call over the digested trace."""
    if not trace.steps:
        raise ValueError("cannot synthesize from an empty trace")
    digest = trace_digest(trace)
    prompt = prompts.render(
        "synthesizer", question=task.render_question(), reasoning=digest
    )
    completion = model.complete(
        [Message.user(prompt, image=task.image)], decoding.with_stops(())
    )
    reply = completion.text.strip()
    if not task.options:
        return FinalAnswer(text=reply, trace_digest=digest)
    mapped = map_reply_to_option(reply, task.options)
    if mapped is None:
        warning = f"could not map reply {reply!r} onto the options; keeping it raw"
        logger.info("synthesizer: %s", warning)
        return FinalAnswer(text=reply, trace_digest=digest, warnings=(warning,))
    text, value = mapped
    return FinalAnswer(text=text, chosen_option=value, trace_digest=digest)
