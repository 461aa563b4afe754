"""Shared fixtures and the acceptance-criteria summary hook."""

from __future__ import annotations

from pathlib import Path

import pytest

from toolagent.gateway import ScriptEntry, ScriptedModel, named_preset
from toolagent.prompts import PromptLibrary

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES_DIR = REPO_ROOT / "fixtures"
DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def prompts() -> PromptLibrary:
    return PromptLibrary()


@pytest.fixture(scope="session")
def decoding():
    return named_preset("preset-a")


@pytest.fixture()
def zero_clock():
    """Frozen clock so every recorded duration is exactly 0.0."""
    return lambda: 0.0


@pytest.fixture()
def make_script():
    """Build a ScriptedModel from (predicate, reply) pairs or bare replies."""

    def build(*entries) -> ScriptedModel:
        parsed = []
        for entry in entries:
            if isinstance(entry, str):
                parsed.append(ScriptEntry(reply=entry))
            else:
                predicate, reply = entry
                parsed.append(ScriptEntry(reply=reply, predicate=predicate))
        return ScriptedModel(parsed)

    return build


@pytest.fixture()
def golden_result(prompts, zero_clock):
    """The scripted reference run behind the frozen trace fixture."""
    from toolagent.executor import ToolRegistry
    from toolagent.gateway import load_script
    from toolagent.pipeline import run_task
    from toolagent.protocol import ToolKind
    from toolagent.retrieval import Bm25Index, chunk, filter_pages, read_dump
    from toolagent.task import TaskInput
    from toolagent.tools.search import SearchTool

    docs = read_dump(FIXTURES_DIR / "corpus_mini.jsonl")
    kept, _ = filter_pages(docs)
    passages = [p for doc in kept for p in chunk(doc)]
    index = Bm25Index.build(passages)
    decoding = named_preset("preset-a")

    def factory(model):
        registry = ToolRegistry()
        registry.register(
            ToolKind.SEARCH, SearchTool(index, model, prompts, decoding)
        )
        return registry

    model = load_script(FIXTURES_DIR / "ask_demo_script.json")
    task = TaskInput(
        question="Which mountain is the highest above sea level?",
        task_id="golden-01",
    )
    return run_task(
        task,
        model=model,
        prompts=prompts,
        decoding=decoding,
        registry_factory=factory,
        clock=zero_clock,
    )


# ---------------------------------------------------------------------------
# One pass/fail line per acceptance criterion at the end of the run.

_ACCEPTANCE_MODULE = "test_acceptance.py"
_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if _ACCEPTANCE_MODULE not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[nodeid]
        verdict = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{verdict:7s} {nodeid.split('::')[-1]}")
