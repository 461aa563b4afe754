"""Trace logs: one JSON document per task — the audit and golden-test unit.

Serialization is deliberately rigid (sorted keys, two-space indent, trailing
newline) so that identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from .executor import ReasoningTrace, Step
from .navigator import GlobalPlan
from .pipeline import PipelineResult
from .task import TaskInput


def _task_doc(task: TaskInput) -> dict:
    return {
        "task_id": task.task_id,
        "question": task.question,
        "image": task.image,
        "options": list(task.options),
    }


def _plan_doc(plan: GlobalPlan) -> dict:
    return {
        "selected_tools": sorted(k.value for k in plan.selected_tools),
        "global_plan": plan.global_plan,
        "fallback": plan.fallback,
        "raw": plan.raw,
        "warnings": list(plan.warnings),
    }


def _step_doc(step: Step) -> dict:
    doc: dict = {
        "index": step.index,
        "status": step.status.value,
        "reasoning": step.reasoning,
        "tool": step.tool.value if step.tool else None,
        "payload": step.payload,
        "invocation_raw": step.invocation_raw,
        "result": None,
    }
    if step.result is not None:
        doc["result"] = {
            "tool": step.result.tool.value,
            "ok": step.result.ok,
            "content": step.result.content,
            "wall_time": step.result.wall_time,
        }
    return doc


def trace_doc(result: PipelineResult) -> dict:
    """The persisted per-task record: plan, steps, timings, termination."""
    trace: ReasoningTrace = result.trace
    return {
        "task": _task_doc(result.task),
        "plan": _plan_doc(result.plan),
        "steps": [_step_doc(s) for s in trace.steps],
        "turns_used": trace.turns_used,
        "terminated_by": trace.terminated_by.value,
        "answer": {
            "text": result.answer.text,
            "chosen_option": result.answer.chosen_option,
            "warnings": list(result.answer.warnings),
        },
        "timings": {
            "model_time": result.model_time,
            "model_calls": result.model_calls,
        },
    }


def to_json(doc: dict) -> str:
    return json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def write_trace(path: str | Path, result: PipelineResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(trace_doc(result)), encoding="utf-8")
    return path
