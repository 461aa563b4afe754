"""Stage 1: global planning — pick a toolkit subset and a free-text plan.

The planner model is asked for JSON with keys ``selected_tools`` and
``global_plan``. Model JSON is repaired, not trusted: code fences and stray
prose are stripped, tool names are normalized case-insensitively, unknown
names are dropped with a warning. One repair re-prompt is attempted; after
that the planner falls back to the full pool with empty guidance. ``plan``
never raises — a broken planner degrades the run, it must not abort it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from .gateway import DecodingConfig, GatewayError, Message, ModelHandle
from .prompts import PromptLibrary
from .protocol import ToolKind, tool_by_name
from .task import TaskInput

logger = logging.getLogger(__name__)

ALL_TOOLS: frozenset[ToolKind] = frozenset(ToolKind)

#: Pool listing order in the planner prompt.
_POOL_ORDER = (ToolKind.SEARCH, ToolKind.CODE, ToolKind.PERCEIVE)

_REPAIR_REMINDER = (
    "Your previous reply could not be parsed. Return only valid JSON in the "
    'format {"selected_tools": ["ToolName", ...], "global_plan": "..."} '
    "and nothing else."
)


@dataclass(frozen=True)
class GlobalPlan:
    """Navigator output: the selected toolkit plus free-text guidance.

    ``global_plan`` is empty only when ``fallback`` is set (parse failure
    after repair). ``raw`` keeps the last model reply for the trace log.
    """

    selected_tools: frozenset[ToolKind]
    global_plan: str
    raw: str = ""
    fallback: bool = False
    warnings: tuple[str, ...] = ()


def _strip_fences(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        first_nl = text.find("\n")
        if first_nl != -1:
            text = text[first_nl + 1 :]
        if text.rstrip().endswith("```"):
            text = text.rstrip()[:-3]
    return text.strip()


def _extract_json(text: str) -> dict | None:
    """Parse the outermost {...} object, tolerating surrounding prose."""
    text = _strip_fences(text)
    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end == -1 or end <= start:
        return None
    try:
        obj = json.loads(text[start : end + 1])
    except ValueError:
        return None
    return obj if isinstance(obj, dict) else None


def _parse_reply(
    text: str, pool: frozenset[ToolKind]
) -> tuple[frozenset[ToolKind], str, list[str]] | None:
    obj = _extract_json(text)
    if obj is None:
        return None
    names = obj.get("selected_tools")
    guidance = obj.get("global_plan")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        return None
    if not isinstance(guidance, str) or not guidance.strip():
        return None
    warnings: list[str] = []
    selected: set[ToolKind] = set()
    for name in names:
        kind = tool_by_name(name)
        if kind is None:
            warnings.append(f"unknown tool name dropped: {name!r}")
        elif kind not in pool:
            warnings.append(f"tool outside the configured pool dropped: {name!r}")
        else:
            selected.add(kind)
    return frozenset(selected), guidance.strip(), warnings


def render_pool(prompts: PromptLibrary, pool: frozenset[ToolKind]) -> str:
    lines = []
    for kind in _POOL_ORDER:
        if kind in pool:
            text = prompts.load(f"navigator_tool_{kind.value.lower()}").strip()
            lines.append(f"{len(lines) + 1}. {text}")
    return "\n".join(lines)


def plan(
    task: TaskInput,
    model: ModelHandle,
    prompts: PromptLibrary,
    decoding: DecodingConfig,
    pool: frozenset[ToolKind] = ALL_TOOLS,
) -> GlobalPlan:
    """Run the planning stage; falls back instead of raising.

    The returned toolkit is always a subset of ``pool``.
    """
    base_prompt = prompts.render(
        "navigator",
        tool_pool=render_pool(prompts, pool),
        question=task.render_question(),
    )
    warnings: list[str] = []
    last_raw = ""
    for attempt, prompt in enumerate(
        (base_prompt, base_prompt + "\n\n" + _REPAIR_REMINDER)
    ):
        try:
            completion = model.complete(
                [Message.user(prompt, image=task.image)], decoding
            )
        except GatewayError as exc:
            logger.warning("navigator call failed (attempt %d): %s", attempt + 1, exc)
            warnings.append(f"planner call failed: {exc}")
            continue
        last_raw = completion.text
        parsed = _parse_reply(completion.text, pool)
        if parsed is not None:
            selected, guidance, parse_warnings = parsed
            if attempt:
                parse_warnings.append("plan parsed after one repair re-prompt")
            return GlobalPlan(
                selected_tools=selected,
                global_plan=guidance,
                raw=completion.text,
                warnings=tuple(warnings + parse_warnings),
            )
        logger.info("navigator reply unparsable (attempt %d)", attempt + 1)
    warnings.append("plan parse failed; falling back to the full tool pool")
    return GlobalPlan(
        selected_tools=frozenset(pool),
        global_plan="",
        raw=last_raw,
        fallback=True,
        warnings=tuple(warnings),
    )
