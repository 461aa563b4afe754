"""Perceive tool: re-ask the backbone model about the task image.

No external detector or OCR engine is involved — visual sub-questions recurse
into the same model with the original image attached and a minimal prompt,
decoded at low temperature for short factual answers.
"""

from __future__ import annotations

from ..executor import CallContext, ToolResult
from ..gateway import DecodingConfig, Message, ModelHandle
from ..prompts import PromptLibrary
from ..protocol import ToolKind

#: Terse, factual sub-answers: low temperature, short budget.
PERCEIVE_DECODING = DecodingConfig(
    temperature=0.1, top_p=0.9, top_k=50, repetition_penalty=1.05, max_new_tokens=256
)


def perceive(
    image: str | None,
    subquestion: str,
    model: ModelHandle,
    prompts: PromptLibrary,
) -> ToolResult:
    """One recursive model call over the task's own image reference."""
    if not subquestion.strip():
        return ToolResult(ToolKind.PERCEIVE, ok=False, content="empty tool query")
    if image is None:
        return ToolResult(
            ToolKind.PERCEIVE, ok=False, content="perceive requires an image"
        )
    prompt = prompts.render("perceive", question=subquestion)
    completion = model.complete([Message.user(prompt, image=image)], PERCEIVE_DECODING)
    return ToolResult(ToolKind.PERCEIVE, ok=True, content=completion.text.strip())


class PerceiveTool:
    """Registry adapter binding the model handle and prompt library."""

    def __init__(self, model: ModelHandle, prompts: PromptLibrary):
        self._model = model
        self._prompts = prompts

    def __call__(self, payload: str, ctx: CallContext) -> ToolResult:
        return perceive(ctx.task.image, payload, self._model, self._prompts)
