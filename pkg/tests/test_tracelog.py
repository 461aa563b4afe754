"""Trace documents: schema, rigid serialization, and the frozen golden run."""

import json

from toolagent.executor import (
    ReasoningTrace,
    Step,
    StepStatus,
    Termination,
    ToolResult,
)
from toolagent.navigator import GlobalPlan
from toolagent.pipeline import PipelineResult
from toolagent.protocol import ToolKind
from toolagent.synthesizer import FinalAnswer
from toolagent.task import TaskInput
from toolagent.tracelog import to_json, trace_doc, write_trace

from conftest import DATA_DIR


def make_result():
    task = TaskInput(question="Qué?", task_id="t-1", options=("sí", "no"))
    plan = GlobalPlan(
        selected_tools=frozenset({ToolKind.SEARCH, ToolKind.CODE}),
        global_plan="g",
        raw="{}",
        warnings=("w1",),
    )
    step = Step(
        index=1,
        reasoning="r ",
        tool=ToolKind.SEARCH,
        payload="q",
        invocation_raw="<search> q </search>",
        result=ToolResult(ToolKind.SEARCH, True, "hit", wall_time=0.25),
        status=StepStatus.TOOL_OK,
    )
    final = Step(index=2, reasoning="done")
    trace = ReasoningTrace(task, plan, (step, final), Termination.FINAL_ANSWER, 2)
    answer = FinalAnswer(text="sí", chosen_option="sí", trace_digest="d")
    return PipelineResult(task, plan, trace, answer, model_time=1.5, model_calls=4)


def test_trace_doc_schema():
    doc = trace_doc(make_result())
    assert doc["task"] == {
        "task_id": "t-1",
        "question": "Qué?",
        "image": None,
        "options": ["sí", "no"],
    }
    assert doc["plan"] == {
        "selected_tools": ["Code", "Search"],  # sorted, names not enum reprs
        "global_plan": "g",
        "fallback": False,
        "raw": "{}",
        "warnings": ["w1"],
    }
    assert doc["turns_used"] == 2
    assert doc["terminated_by"] == "FinalAnswer"
    assert doc["answer"] == {"text": "sí", "chosen_option": "sí", "warnings": []}
    assert doc["timings"] == {"model_time": 1.5, "model_calls": 4}
    first, last = doc["steps"]
    assert first["status"] == "ToolOk"
    assert first["result"] == {
        "tool": "Search",
        "ok": True,
        "content": "hit",
        "wall_time": 0.25,
    }
    assert last == {
        "index": 2,
        "status": "FinalCandidate",
        "reasoning": "done",
        "tool": None,
        "payload": None,
        "invocation_raw": None,
        "result": None,
    }


def test_to_json_is_rigid():
    text = to_json({"b": 1, "a": "é"})
    assert text == '{\n  "a": "é",\n  "b": 1\n}\n'


def test_serialization_is_deterministic():
    result = make_result()
    assert to_json(trace_doc(result)) == to_json(trace_doc(result))


def test_write_trace_creates_parents_and_round_trips(tmp_path):
    result = make_result()
    target = tmp_path / "runs" / "deep" / "trace.json"
    written = write_trace(target, result)
    assert written == target
    loaded = json.loads(target.read_text(encoding="utf-8"))
    assert loaded == trace_doc(result)
    assert target.read_text(encoding="utf-8").endswith("\n")


def test_golden_trace_bytes_are_stable(golden_result):
    expected = (DATA_DIR / "golden_trace.json").read_text(encoding="utf-8")
    assert to_json(trace_doc(golden_result)) == expected
