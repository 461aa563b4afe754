"""Dataset loading, scoring, latency accounting, and sweep drivers.

The harness is deliberately decoupled from model wiring: callers hand it a
``run_fn`` that maps an :class:`Example` to a :class:`~.pipeline.PipelineResult`
and it takes care of bounded-concurrency execution, per-example accounting,
and aggregation.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .pipeline import PipelineResult
from .synthesizer import FinalAnswer
from .tracelog import to_json, trace_doc

logger = logging.getLogger(__name__)

SWEEPABLE = ("top_k", "max_turns")

_TERMINAL_PUNCT = ".,!?"
_SAFE_ID_RE = re.compile(r"[^A-Za-z0-9._-]")


class DatasetError(Exception):
    """The dataset file is missing, malformed, or violates the schema."""


class EmptyDataset(Exception):
    """A benchmark run was asked to score zero examples."""


class EmptySamples(Exception):
    """A percentile was requested over an empty sample list."""


@dataclass(frozen=True)
class Example:
    """One evaluation item in the neutral JSONL schema."""

    id: str
    question: str
    gold: str
    image: str | None = None
    options: tuple[str, ...] = ()
    split: str = ""
    tags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.gold:
            raise ValueError("gold answer must be non-empty")


@dataclass(frozen=True)
class RunRecord:
    """Per-example outcome: prediction, verdict, and the latency split."""

    example_id: str
    prediction: FinalAnswer
    correct: bool
    turns_used: int
    total_latency: float
    model_time: float
    model_calls: int
    tool_time: dict[str, float] = field(default_factory=dict)
    error: str | None = None


@dataclass(frozen=True)
class Report:
    """Aggregate summary: accuracy plus the turns/latency/model-time split."""

    examples: int
    accuracy: float
    avg_turns: float
    latency_p50: float
    model_time_p50: float
    tool_time: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def normalize_answer(text: str) -> str:
    """Fold case, trim, drop terminal punctuation, collapse whitespace."""
    text = text.lower().strip()
    text = text.rstrip(_TERMINAL_PUNCT)
    return " ".join(text.split())


def exact_match(pred: str, gold: str) -> bool:
    return normalize_answer(pred) == normalize_answer(gold)


def p50(samples: Sequence[float]) -> float:
    """Median: middle element for odd n, mean of the middle pair for even."""
    if not samples:
        raise EmptySamples("p50 requires at least one sample")
    ordered = sorted(samples)
    mid = len(ordered) // 2
    if len(ordered) % 2 == 1:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def parse_example(raw: dict, context: str) -> Example:
    if not isinstance(raw, dict):
        raise DatasetError(f"{context}: example must be a JSON object")
    try:
        example = Example(
            id=str(raw["id"]),
            question=raw["question"],
            gold=raw["gold"],
            image=raw.get("image"),
            options=tuple(raw.get("options") or ()),
            split=raw.get("split", ""),
            tags=tuple(raw.get("tags") or ()),
        )
    except KeyError as exc:
        raise DatasetError(f"{context}: missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{context}: {exc}") from exc
    if example.options and not _gold_present(example):
        raise DatasetError(
            f"{context}: options do not contain the gold answer or its label"
        )
    return example


def _gold_present(example: Example) -> bool:
    from .task import option_labels

    labels = option_labels(len(example.options))
    gold = normalize_answer(example.gold)
    values = {normalize_answer(v) for v in example.options}
    return gold in values or example.gold.strip() in labels


def load_dataset(path: str | Path) -> list[Example]:
    """Read a JSONL dataset (one example per line; blank lines skipped)."""
    p = Path(path)
    if not p.is_file():
        raise DatasetError(f"dataset file not found: {p}")
    examples: list[Example] = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except ValueError as exc:
            raise DatasetError(f"{p}:{lineno}: invalid JSON: {exc}") from exc
        examples.append(parse_example(raw, f"{p}:{lineno}"))
    return examples


RunFn = Callable[[Example], PipelineResult]


def _tool_time(result: PipelineResult) -> dict[str, float]:
    totals: dict[str, float] = {}
    for step in result.trace.steps:
        if step.tool is not None and step.result is not None:
            key = step.tool.value
            totals[key] = totals.get(key, 0.0) + step.result.wall_time
    return totals


def _record_for(
    example: Example, run_fn: RunFn, clock: Callable[[], float]
) -> tuple[RunRecord, PipelineResult | None]:
    started = clock()
    try:
        result = run_fn(example)
    except Exception as exc:  # noqa: BLE001 - one bad example must not kill the run
        logger.warning("example %s failed: %s", example.id, exc)
        record = RunRecord(
            example_id=example.id,
            prediction=FinalAnswer(text=""),
            correct=False,
            turns_used=0,
            total_latency=clock() - started,
            model_time=0.0,
            model_calls=0,
            error=f"{type(exc).__name__}: {exc}",
        )
        return record, None
    record = RunRecord(
        example_id=example.id,
        prediction=result.answer,
        correct=exact_match(result.answer.text, example.gold),
        turns_used=result.trace.turns_used,
        total_latency=clock() - started,
        model_time=result.model_time,
        model_calls=result.model_calls,
        tool_time=_tool_time(result),
    )
    return record, result


def safe_id(example_id: str) -> str:
    return _SAFE_ID_RE.sub("_", example_id) or "example"


def record_doc(record: RunRecord) -> dict:
    return {
        "example_id": record.example_id,
        "prediction": {
            "text": record.prediction.text,
            "chosen_option": record.prediction.chosen_option,
            "warnings": list(record.prediction.warnings),
        },
        "correct": record.correct,
        "turns_used": record.turns_used,
        "total_latency": record.total_latency,
        "model_time": record.model_time,
        "model_calls": record.model_calls,
        "tool_time": dict(sorted(record.tool_time.items())),
        "error": record.error,
    }


def parse_record_doc(raw: dict, context: str) -> RunRecord:
    """Rebuild a RunRecord from one ``records.jsonl`` line."""
    try:
        pred = raw["prediction"]
        return RunRecord(
            example_id=raw["example_id"],
            prediction=FinalAnswer(
                text=pred["text"],
                chosen_option=pred.get("chosen_option"),
                warnings=tuple(pred.get("warnings") or ()),
            ),
            correct=bool(raw["correct"]),
            turns_used=int(raw["turns_used"]),
            total_latency=float(raw["total_latency"]),
            model_time=float(raw["model_time"]),
            model_calls=int(raw["model_calls"]),
            tool_time=dict(raw.get("tool_time") or {}),
            error=raw.get("error"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{context}: malformed run record: {exc}") from exc


def load_records(path: str | Path) -> list[RunRecord]:
    p = Path(path)
    if not p.is_file():
        raise DatasetError(f"records file not found: {p}")
    records = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except ValueError as exc:
            raise DatasetError(f"{p}:{lineno}: invalid JSON: {exc}") from exc
        records.append(parse_record_doc(raw, f"{p}:{lineno}"))
    return records


def build_report(
    records: Sequence[RunRecord], config: dict | None = None
) -> Report:
    if not records:
        raise EmptyDataset("cannot aggregate zero run records")
    n = len(records)
    tool_time: dict[str, float] = {}
    for record in records:
        for tool, seconds in record.tool_time.items():
            tool_time[tool] = tool_time.get(tool, 0.0) + seconds
    return Report(
        examples=n,
        accuracy=sum(1 for r in records if r.correct) / n,
        avg_turns=sum(r.turns_used for r in records) / n,
        latency_p50=p50([r.total_latency for r in records]),
        model_time_p50=p50([r.model_time for r in records]),
        tool_time=dict(sorted(tool_time.items())),
        config=dict(config or {}),
    )


def report_doc(report: Report) -> dict:
    return {
        "examples": report.examples,
        "accuracy": report.accuracy,
        "avg_turns": report.avg_turns,
        "latency_p50": report.latency_p50,
        "model_time_p50": report.model_time_p50,
        "tool_time": report.tool_time,
        "config": report.config,
    }


def render_table(report: Report) -> str:
    """A small fixed-width summary table (accuracy + turns/latency split)."""
    headers = ("Examples", "Accuracy", "Turns", "Latency p50 (s)", "Model p50 (s)")
    values = (
        str(report.examples),
        f"{report.accuracy:.3f}",
        f"{report.avg_turns:.2f}",
        f"{report.latency_p50:.3f}",
        f"{report.model_time_p50:.3f}",
    )
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    body = "  ".join(v.ljust(w) for v, w in zip(values, widths))
    lines = [head, body]
    if report.tool_time:
        breakdown = ", ".join(
            f"{tool}={seconds:.3f}s" for tool, seconds in report.tool_time.items()
        )
        lines.append(f"Tool wall time: {breakdown}")
    return "\n".join(lines)


@dataclass(frozen=True)
class BenchmarkRun:
    records: tuple[RunRecord, ...]
    report: Report


def run_benchmark(
    examples: Sequence[Example],
    run_fn: RunFn,
    *,
    concurrency: int = 4,
    out_dir: str | Path | None = None,
    config: dict | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> BenchmarkRun:
    """Score ``examples`` with bounded concurrency.

    Per-example failures are recorded as incorrect (with an error tag) and
    the run continues.  Records keep dataset order regardless of completion
    order, so scripted runs aggregate identically at any concurrency.
    """
    if not examples:
        raise EmptyDataset("the dataset holds no examples")
    if concurrency < 1:
        raise ValueError("concurrency must be a positive integer")
    out_path = Path(out_dir) if out_dir is not None else None
    trace_dir: Path | None = None
    if out_path is not None:
        trace_dir = out_path / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)

    def worker(example: Example) -> RunRecord:
        record, result = _record_for(example, run_fn, clock)
        if trace_dir is not None and result is not None:
            path = trace_dir / f"{safe_id(example.id)}.json"
            path.write_text(to_json(trace_doc(result)), encoding="utf-8")
        return record

    if concurrency == 1:
        records = [worker(example) for example in examples]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            records = list(pool.map(worker, examples))

    report = build_report(records, config)
    if out_path is not None:
        lines = [json.dumps(record_doc(r), ensure_ascii=False) for r in records]
        (out_path / "records.jsonl").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    return BenchmarkRun(records=tuple(records), report=report)


def sweep(
    parameter: str,
    values: Sequence,
    make_run_fn: Callable[[object], RunFn],
    examples: Sequence[Example],
    *,
    concurrency: int = 4,
    clock: Callable[[], float] = time.monotonic,
) -> list[tuple[object, Report]]:
    """Re-run the benchmark once per value of a single knob."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"unknown sweep parameter {parameter!r}; use one of {SWEEPABLE}")
    if not values:
        raise ValueError("sweep requires at least one value")
    rows: list[tuple[object, Report]] = []
    for value in values:
        run = run_benchmark(
            examples, make_run_fn(value), concurrency=concurrency, clock=clock
        )
        rows.append((value, run.report))
        logger.info(
            "sweep %s=%s: accuracy=%.3f avg_turns=%.2f",
            parameter,
            value,
            run.report.accuracy,
            run.report.avg_turns,
        )
    return rows


def write_sweep_csv(rows: Iterable[tuple[object, Report]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["value", "accuracy", "avg_turns", "latency_p50"])
        for value, report in rows:
            writer.writerow(
                [value, report.accuracy, report.avg_turns, report.latency_p50]
            )
