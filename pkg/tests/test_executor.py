"""Stage-2 loop: prompting, invocation handling, injection, and the budget."""

import pytest

from toolagent.executor import (
    DEFAULT_MAX_TURNS,
    CallContext,
    Step,
    StepStatus,
    Termination,
    ToolRegistry,
    ToolResult,
    render_executor_prompt,
    run,
    serialize_history,
)
from toolagent.gateway import Completion, ImagePart, StopReason, TransportError
from toolagent.navigator import GlobalPlan
from toolagent.protocol import ToolKind
from toolagent.task import TaskInput

TASK = TaskInput(question="How tall is the mountain?", task_id="t1")


def make_plan(*kinds: ToolKind, guidance: str = "Use the tools.") -> GlobalPlan:
    return GlobalPlan(selected_tools=frozenset(kinds), global_plan=guidance)


def ok_handler(reply: str):
    def handler(payload: str, ctx: CallContext) -> ToolResult:
        return ToolResult(ToolKind.SEARCH, ok=True, content=reply)

    return handler


class _RawModel:
    """Returns scripted texts verbatim, ignoring stop sequences entirely."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, messages, decoding):
        self.calls += 1
        return Completion(
            text=self.replies.pop(0),
            stop_reason=StopReason.END_OF_SEQUENCE,
            matched_stop=None,
            model_time=0.0,
        )


def test_max_turns_must_be_positive(prompts, decoding, make_script):
    with pytest.raises(ValueError):
        run(
            TASK,
            make_plan(ToolKind.SEARCH),
            ToolRegistry({ToolKind.SEARCH: ok_handler("x")}),
            make_script("hi"),
            prompts,
            decoding,
            max_turns=0,
        )


def test_selected_tools_must_have_handlers(prompts, decoding, make_script):
    plan = make_plan(ToolKind.SEARCH, ToolKind.CODE)
    with pytest.raises(ValueError) as err:
        run(TASK, plan, ToolRegistry(), make_script("hi"), prompts, decoding)
    assert "Code, Search" in str(err.value)


def test_empty_toolkit_runs_one_direct_turn(prompts, decoding, make_script):
    # Without stop sequences a closing tag in the reply survives untouched.
    reply = "The mountain is 8849 metres tall. </search> is just text here."
    trace = run(
        TASK, make_plan(), ToolRegistry(), make_script(reply), prompts, decoding
    )
    assert trace.terminated_by is Termination.FINAL_ANSWER
    assert trace.turns_used == 1
    (step,) = trace.steps
    assert step.index == 1
    assert step.reasoning == reply
    assert step.tool is None and step.result is None
    assert step.status is StepStatus.FINAL_CANDIDATE


def test_plain_reply_is_a_final_candidate(prompts, decoding, make_script):
    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry({ToolKind.SEARCH: ok_handler("unused")})
    trace = run(
        TASK, plan, registry, make_script("The answer is 8849 metres."), prompts, decoding
    )
    assert trace.terminated_by is Termination.FINAL_ANSWER
    assert trace.turns_used == 1
    assert trace.steps[0].status is StepStatus.FINAL_CANDIDATE
    assert registry.dispatched == []


def test_invocation_executes_and_result_is_injected(
    prompts, decoding, make_script, zero_clock
):
    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry({ToolKind.SEARCH: ok_handler("It rises 8849 metres.")})
    model = make_script(
        "Let me check. <search> mountain height </search> ignored tail",
        (
            "<result> It rises 8849 metres. </result>",
            "So the final answer is 8849 metres.",
        ),
    )
    trace = run(
        TASK, plan, registry, model, prompts, decoding, clock=zero_clock
    )
    assert trace.terminated_by is Termination.FINAL_ANSWER
    assert trace.turns_used == 2
    first, last = trace.steps
    assert first.status is StepStatus.TOOL_OK
    assert first.reasoning == "Let me check. "
    assert first.payload == "mountain height"
    assert first.invocation_raw == "<search> mountain height </search>"
    assert first.result == ToolResult(
        ToolKind.SEARCH, ok=True, content="It rises 8849 metres.", wall_time=0.0
    )
    assert registry.dispatched == [(ToolKind.SEARCH, "mountain height")]
    assert last.reasoning == "So the final answer is 8849 metres."


def test_only_the_first_invocation_executes(prompts, decoding):
    plan = make_plan(ToolKind.SEARCH, ToolKind.PERCEIVE)
    registry = ToolRegistry(
        {
            ToolKind.SEARCH: ok_handler("hit"),
            ToolKind.PERCEIVE: ok_handler("seen"),
        }
    )
    model = _RawModel(
        [
            "a <search> one </search> b <perceive> two </perceive> c",
            "done",
        ]
    )
    trace = run(TASK, plan, registry, model, prompts, decoding)
    assert registry.dispatched == [(ToolKind.SEARCH, "one")]
    first = trace.steps[0]
    assert first.reasoning == "a "
    assert first.invocation_raw == "<search> one </search>"
    # Text after the executed invocation is discarded from the context.
    assert "perceive" not in serialize_history(trace.steps[:1])


def test_unselected_tool_invocation_becomes_an_error_step(
    prompts, decoding, make_script
):
    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry(
        {
            ToolKind.SEARCH: ok_handler("x"),
            ToolKind.CODE: ok_handler("y"),
        }
    )
    model = make_script(
        "Try code. <code> print(1) </code>",
        ("is not available for this task", "Fine, the answer is 2."),
    )
    trace = run(TASK, plan, registry, model, prompts, decoding)
    first = trace.steps[0]
    assert first.status is StepStatus.TOOL_ERROR
    assert first.result.ok is False
    assert first.result.content == "tool 'Code' is not available for this task"
    assert registry.dispatched == []
    assert trace.terminated_by is Termination.FINAL_ANSWER


def test_empty_payload_becomes_an_error_step(prompts, decoding, make_script):
    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry({ToolKind.SEARCH: ok_handler("x")})
    model = make_script(
        "Hmm. <search>   </search>",
        ("empty tool query", "The answer is 42."),
    )
    trace = run(TASK, plan, registry, model, prompts, decoding)
    assert trace.steps[0].status is StepStatus.TOOL_ERROR
    assert trace.steps[0].result.content == "empty tool query"
    assert registry.dispatched == []


def test_handler_crash_stays_in_trace(prompts, decoding, make_script):
    def boom(payload, ctx):
        raise RuntimeError("index corrupted")

    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry({ToolKind.SEARCH: boom})
    model = make_script(
        "<search> q </search>",
        ("tool execution failed: index corrupted", "Answer: none."),
    )
    trace = run(TASK, plan, registry, model, prompts, decoding)
    assert trace.steps[0].status is StepStatus.TOOL_ERROR
    assert "tool execution failed: index corrupted" in trace.steps[0].result.content


def test_handler_gateway_error_stays_in_trace(prompts, decoding, make_script):
    def flaky(payload, ctx):
        raise TransportError("vision backend down")

    plan = make_plan(ToolKind.PERCEIVE)
    registry = ToolRegistry({ToolKind.PERCEIVE: flaky})
    model = make_script(
        "<perceive> what is shown? </perceive>",
        ("tool call failed: vision backend down", "I cannot tell."),
    )
    trace = run(TASK, plan, registry, model, prompts, decoding)
    assert trace.steps[0].status is StepStatus.TOOL_ERROR
    assert trace.steps[0].result.content == "tool call failed: vision backend down"


def test_model_gateway_error_escapes_run(prompts, decoding):
    class _Down:
        def complete(self, messages, decoding):
            raise TransportError("backend unreachable")

    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry({ToolKind.SEARCH: ok_handler("x")})
    with pytest.raises(TransportError):
        run(TASK, plan, registry, _Down(), prompts, decoding)


@pytest.mark.parametrize("budget", [1, 2, 5])
def test_budget_exhaustion_is_exact(prompts, decoding, budget):
    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry({ToolKind.SEARCH: ok_handler("more data")})
    model = _RawModel([f"t{i} <search> q{i} </search>" for i in range(budget)])
    trace = run(TASK, plan, registry, model, prompts, decoding, max_turns=budget)
    assert trace.terminated_by is Termination.BUDGET_EXHAUSTED
    assert trace.turns_used == budget
    assert len(trace.steps) == budget
    assert model.calls == budget
    assert [s.index for s in trace.steps] == list(range(1, budget + 1))


def test_default_budget_is_ten(prompts, decoding):
    plan = make_plan(ToolKind.SEARCH)
    registry = ToolRegistry({ToolKind.SEARCH: ok_handler("more")})
    model = _RawModel([f"r{i} <search> q </search>" for i in range(DEFAULT_MAX_TURNS)])
    trace = run(TASK, plan, registry, model, prompts, decoding)
    assert DEFAULT_MAX_TURNS == 10
    assert trace.turns_used == 10
    assert trace.terminated_by is Termination.BUDGET_EXHAUSTED


def test_serialize_history_prefix_property(prompts):
    steps = [
        Step(
            index=1,
            reasoning="think one ",
            tool=ToolKind.SEARCH,
            payload="q1",
            invocation_raw="<search> q1 </search>",
            result=ToolResult(ToolKind.SEARCH, True, "r1"),
            status=StepStatus.TOOL_OK,
        ),
        Step(
            index=2,
            reasoning="think two ",
            tool=ToolKind.CODE,
            payload="p",
            invocation_raw="<code> p </code>",
            result=ToolResult(ToolKind.CODE, False, "err"),
            status=StepStatus.TOOL_ERROR,
        ),
        Step(index=3, reasoning="final words"),
    ]
    rendered = [serialize_history(steps[:i]) for i in range(len(steps) + 1)]
    assert rendered[0] == ""
    for shorter, longer in zip(rendered, rendered[1:]):
        assert longer.startswith(shorter)
    assert rendered[1] == "think one <search> q1 </search><result> r1 </result>\n"
    assert rendered[2].endswith("<code> p </code><result> err </result>\n")
    assert rendered[3].endswith("final words")


def test_render_prompt_blocks_follow_subset_order(prompts):
    plan = make_plan(ToolKind.CODE, ToolKind.SEARCH)
    (msg,) = render_executor_prompt(prompts, TASK, plan)
    search_block = prompts.load("executor_block_search").strip()
    code_block = prompts.load("executor_block_code").strip()
    perceive_block = prompts.load("executor_block_perceive").strip()
    assert f"1. {search_block}" in msg.text_content()
    assert f"2. {code_block}" in msg.text_content()
    assert perceive_block not in msg.text_content()
    assert prompts.load("executor_hint_search").strip() in msg.text_content()
    assert prompts.load("executor_example_code").strip() in msg.text_content()
    assert TASK.question in msg.text_content()


def test_render_prompt_empty_toolkit_uses_direct_template(prompts):
    task = TaskInput(question="Q?", image="img.png")
    (msg,) = render_executor_prompt(prompts, task, make_plan())
    direct = prompts.render("executor_direct", question="Q?", previous_reasoning="")
    assert msg.text_content() == direct
    assert msg.parts[0] == ImagePart("img.png")
    assert "<search>" not in msg.text_content()


def test_render_prompt_carries_history(prompts):
    plan = make_plan(ToolKind.SEARCH)
    steps = [
        Step(
            index=1,
            reasoning="so far ",
            tool=ToolKind.SEARCH,
            payload="q",
            invocation_raw="<search> q </search>",
            result=ToolResult(ToolKind.SEARCH, True, "found it"),
            status=StepStatus.TOOL_OK,
        )
    ]
    (msg,) = render_executor_prompt(prompts, TASK, plan, steps)
    assert "so far <search> q </search><result> found it </result>\n" in msg.text_content()
