"""Operator surface: ingest, ask, bench, sweep, and report subcommands.

Exit-code discipline: 0 success, 1 runtime failure, 2 usage or configuration
error.  Every run that produces files also writes a ``config.json`` snapshot
alongside them so results stay reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import harness, pipeline
from .config import AppConfig, ConfigError, api_key, load_config
from .gateway import (
    GatewayError,
    HttpGateway,
    ModelHandle,
    ScriptedModel,
    ScriptEntry,
    named_preset,
    parse_script_entries,
)
from .executor import ToolRegistry
from .harness import DatasetError, EmptyDataset, Example
from .prompts import MissingAsset, PromptLibrary
from .protocol import ToolKind
from .retrieval import (
    Bm25Index,
    HttpEmbeddingProvider,
    IndexVersionMismatch,
    IngestError,
    StubEmbeddingProvider,
    ingest,
)
from .task import TaskInput
from .tools import CodeTool, PerceiveTool, SearchTool
from .tracelog import to_json, trace_doc, write_trace

logger = logging.getLogger(__name__)

_TOOL_NAMES = {
    "search": ToolKind.SEARCH,
    "perceive": ToolKind.PERCEIVE,
    "code": ToolKind.CODE,
}


class UsageError(Exception):
    """CLI-level misuse that should exit with status 2."""


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _write_snapshot(config: AppConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = json.dumps(config.snapshot(), ensure_ascii=False, indent=2, sort_keys=True)
    (out_dir / "config.json").write_text(doc + "\n", encoding="utf-8")


def _apply_flags(config: AppConfig, args: argparse.Namespace) -> AppConfig:
    """Fold command-line overrides into the loaded config."""
    try:
        updates: dict = {}
        if getattr(args, "max_turns", None) is not None:
            updates["max_turns"] = args.max_turns
        if getattr(args, "concurrency", None) is not None:
            updates["concurrency"] = args.concurrency
        retrieval = config.retrieval
        if getattr(args, "top_k", None) is not None:
            retrieval = dataclasses.replace(retrieval, top_k=args.top_k)
        if getattr(args, "tau", None) is not None:
            retrieval = dataclasses.replace(retrieval, tau=args.tau)
        if retrieval is not config.retrieval:
            updates["retrieval"] = retrieval
        return dataclasses.replace(config, **updates) if updates else config
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_tools(spec: str) -> frozenset[ToolKind]:
    kinds = set()
    for name in spec.split(","):
        name = name.strip().lower()
        if not name:
            continue
        if name not in _TOOL_NAMES:
            raise UsageError(
                f"unknown tool {name!r}; expected a comma list of "
                f"{', '.join(sorted(_TOOL_NAMES))}"
            )
        kinds.add(_TOOL_NAMES[name])
    if not kinds:
        raise UsageError("--tools must name at least one tool")
    return frozenset(kinds)


def _decoding(config: AppConfig):
    try:
        preset = named_preset(config.decoding_preset)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return dataclasses.replace(preset, max_new_tokens=config.max_new_tokens)


def _embedder(config: AppConfig):
    kind = config.embedding.provider
    if kind == "none":
        return None
    if kind == "stub":
        return StubEmbeddingProvider(config.embedding.dim)
    if kind == "http":
        if not config.embedding.endpoint:
            raise ConfigError("embedding.provider is 'http' but endpoint is empty")
        return HttpEmbeddingProvider(config.embedding.endpoint, config.embedding.dim)
    raise ConfigError(f"unknown embedding provider: {kind!r}")


def _load_index(config: AppConfig) -> Bm25Index | None:
    if not config.index_dir:
        return None
    try:
        return Bm25Index.load(config.index_dir)
    except (OSError, ValueError, KeyError, IndexVersionMismatch) as exc:
        raise ConfigError(f"cannot load index at {config.index_dir}: {exc}") from exc


def _load_mock(path: str):
    """A mock script file is either a shared entry array or {example_id: array}."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read mock script: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"mock script {path} is not valid JSON: {exc}") from exc
    try:
        if isinstance(raw, list):
            return "shared", parse_script_entries(raw)
        if isinstance(raw, dict):
            return "per_example", {
                key: parse_script_entries(value) for key, value in raw.items()
            }
    except ValueError as exc:
        raise UsageError(f"mock script {path}: {exc}") from exc
    raise UsageError(f"mock script {path} must be a JSON array or object")


def _require_model_config(config: AppConfig, args: argparse.Namespace) -> None:
    if getattr(args, "mock_script", None) is None and not config.endpoint:
        raise ConfigError(
            "no model is configured: set 'endpoint' in the config file, export "
            "TOOLAGENT_ENDPOINT, or pass --mock-script"
        )


def _gateway(config: AppConfig) -> HttpGateway:
    return HttpGateway(
        config.endpoint,
        config.model_id,
        api_key(),
        timeout=config.request_timeout,
    )


def _pool(
    config: AppConfig, args: argparse.Namespace, registry_kinds: frozenset[ToolKind]
) -> frozenset[ToolKind]:
    if getattr(args, "tools", None):
        requested = _parse_tools(args.tools)
        missing = requested - registry_kinds
        if missing:
            names = ", ".join(sorted(k.value for k in missing))
            raise ConfigError(
                f"requested tool(s) not configured: {names} "
                "(Code needs runner_cmd; Search needs index_dir)"
            )
        return requested
    return registry_kinds


def _registry_factory(
    config: AppConfig,
    prompts: PromptLibrary,
    decoding,
    index: Bm25Index | None,
    embedder,
) -> tuple[Callable[[ModelHandle], ToolRegistry], frozenset[ToolKind]]:
    """Build the per-task registry factory plus the set of usable tool kinds."""

    def factory(model: ModelHandle) -> ToolRegistry:
        registry = ToolRegistry()
        registry.register(ToolKind.PERCEIVE, PerceiveTool(model, prompts))
        registry.register(
            ToolKind.SEARCH,
            SearchTool(
                index, model, prompts, decoding, config.retrieval, embedder
            ),
        )
        if config.runner_cmd:
            registry.register(
                ToolKind.CODE,
                CodeTool(
                    model,
                    prompts,
                    decoding,
                    runner_cmd=list(config.runner_cmd),
                    limits=config.code_limits,
                    max_retries=config.max_retries,
                ),
            )
        return registry

    kinds = {ToolKind.PERCEIVE}
    if index is not None:
        kinds.add(ToolKind.SEARCH)
    if config.runner_cmd:
        kinds.add(ToolKind.CODE)
    return factory, frozenset(kinds)


# -- subcommands ------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _apply_flags(load_config(args.config), args)
    dump = Path(args.dump_path)
    if not dump.is_file():
        _fail(f"dump file not found: {dump}")
        return 2
    stats = ingest(
        dump,
        args.index_dir,
        size=args.chunk_size,
        overlap=args.chunk_overlap,
        k1=config.retrieval.bm25_k1,
        b=config.retrieval.bm25_b,
        embedder=_embedder(config),
    )
    _write_snapshot(config, Path(args.index_dir))
    print(
        f"indexed {stats.passage_count} passages from {stats.doc_count} documents "
        f"(avg passage length {stats.avg_passage_len:.1f} words, "
        f"vocabulary {stats.vocabulary_size})"
    )
    return 0


def _prepare_run(args: argparse.Namespace):
    """Shared wiring for ask/bench/sweep: config, prompts, tools, pool."""
    config = _apply_flags(load_config(args.config), args)
    _require_model_config(config, args)
    prompts = PromptLibrary(config.prompt_dir or None)
    decoding = _decoding(config)
    index = _load_index(config)
    factory, kinds = _registry_factory(
        config, prompts, decoding, index, _embedder(config)
    )
    pool = _pool(config, args, kinds)
    return config, prompts, decoding, factory, pool


def cmd_ask(args: argparse.Namespace) -> int:
    config, prompts, decoding, factory, pool = _prepare_run(args)
    if args.mock_script is not None:
        kind, data = _load_mock(args.mock_script)
        if kind != "shared":
            raise UsageError("ask needs a flat mock script (a JSON entry array)")
        model: ModelHandle = ScriptedModel(data)
    else:
        model = _gateway(config)
    task = TaskInput(
        question=args.question,
        image=args.image,
        options=tuple(args.option or ()),
        task_id="cli-ask",
    )
    if args.direct:
        result = pipeline.run_direct(
            task, model=model, prompts=prompts, decoding=decoding
        )
    else:
        result = pipeline.run_task(
            task,
            model=model,
            prompts=prompts,
            decoding=decoding,
            registry_factory=factory,
            pool=pool,
            max_turns=config.max_turns,
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = write_trace(out_dir / "trace.json", result)
    _write_snapshot(config, out_dir)
    print(result.answer.text)
    if result.answer.chosen_option is not None:
        print(f"chosen option: {result.answer.chosen_option}")
    for warning in result.answer.warnings:
        print(f"warning: {warning}")
    print(f"trace: {trace_path}")
    return 0


def _bench_run_fn(
    args: argparse.Namespace,
    config: AppConfig,
    prompts: PromptLibrary,
    decoding,
    factory,
    pool,
    examples: Sequence[Example],
) -> harness.RunFn:
    shared_entries: list[ScriptEntry] | None = None
    per_example: dict[str, list[ScriptEntry]] | None = None
    gateway: ModelHandle | None = None
    if args.mock_script is not None:
        kind, data = _load_mock(args.mock_script)
        if kind == "shared":
            shared_entries = data
        else:
            per_example = data
            missing = [ex.id for ex in examples if ex.id not in per_example]
            if missing:
                raise UsageError(
                    f"mock script has no entry for example(s): {', '.join(missing)}"
                )
    else:
        gateway = _gateway(config)

    def run_fn(example: Example):
        if shared_entries is not None:
            model: ModelHandle = ScriptedModel(shared_entries)
        elif per_example is not None:
            model = ScriptedModel(per_example[example.id])
        else:
            assert gateway is not None
            model = gateway
        task = TaskInput(
            question=example.question,
            image=example.image,
            options=example.options,
            task_id=example.id,
        )
        if args.direct:
            return pipeline.run_direct(
                task, model=model, prompts=prompts, decoding=decoding
            )
        return pipeline.run_task(
            task,
            model=model,
            prompts=prompts,
            decoding=decoding,
            registry_factory=factory,
            pool=pool,
            max_turns=config.max_turns,
        )

    return run_fn


def cmd_bench(args: argparse.Namespace) -> int:
    config, prompts, decoding, factory, pool = _prepare_run(args)
    dataset = Path(args.dataset)
    if not dataset.is_file():
        _fail(f"dataset file not found: {dataset}")
        return 2
    examples = harness.load_dataset(dataset)
    run_fn = _bench_run_fn(args, config, prompts, decoding, factory, pool, examples)
    out_dir = Path(args.out)
    run = harness.run_benchmark(
        examples,
        run_fn,
        concurrency=config.concurrency,
        out_dir=out_dir,
        config=config.snapshot(),
    )
    _write_snapshot(config, out_dir)
    report_json = json.dumps(
        harness.report_doc(run.report), ensure_ascii=False, indent=2, sort_keys=True
    )
    (out_dir / "report.json").write_text(report_json + "\n", encoding="utf-8")
    print(harness.render_table(run.report))
    print(f"records: {out_dir / 'records.jsonl'}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config, prompts, decoding, factory, pool = _prepare_run(args)
    dataset = Path(args.dataset)
    if not dataset.is_file():
        _fail(f"dataset file not found: {dataset}")
        return 2
    examples = harness.load_dataset(dataset)
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--values must be a comma list of integers: {exc}") from exc
    if not values:
        raise UsageError("--values must name at least one value")

    def make_run_fn(value) -> harness.RunFn:
        swept = config
        if args.parameter == "max_turns":
            swept = dataclasses.replace(config, max_turns=value)
        else:
            swept = dataclasses.replace(
                config,
                retrieval=dataclasses.replace(config.retrieval, top_k=value),
            )
        return _bench_run_fn(args, swept, prompts, decoding, factory, pool, examples)

    rows = harness.sweep(
        args.parameter,
        values,
        make_run_fn,
        examples,
        concurrency=config.concurrency,
    )
    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    harness.write_sweep_csv(rows, out_csv)
    _write_snapshot(config, out_csv.parent)
    for value, report in rows:
        print(
            f"{args.parameter}={value}: accuracy={report.accuracy:.3f} "
            f"avg_turns={report.avg_turns:.2f} latency_p50={report.latency_p50:.3f}"
        )
    print(f"csv: {out_csv}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    records_path = Path(args.run) / "records.jsonl"
    if not records_path.is_file():
        _fail(f"no run records found in {args.run}")
        return 1
    records = harness.load_records(records_path)
    if not records:
        _fail(f"no run records found in {args.run}")
        return 1
    report = harness.build_report(records)
    print(harness.render_table(report))
    return 0


# -- argument parsing --------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to the JSON config file")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-turns", type=int, help="execution turn budget")
    parser.add_argument("--top-k", type=int, help="retrieval depth")
    parser.add_argument("--tau", type=float, help="cross-modal similarity threshold")
    parser.add_argument(
        "--tools", help="comma list restricting the tool pool (search,perceive,code)"
    )
    parser.add_argument(
        "--mock-script", help="JSON script file; replaces the HTTP gateway"
    )
    parser.add_argument(
        "--direct",
        action="store_true",
        help="direct-prompting reference mode (single call, no tools)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolagent",
        description="Tool-augmented multimodal question answering runtime",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="build a retrieval index from a dump")
    _add_common(p_ingest)
    p_ingest.add_argument("dump_path", help="JSONL dump: one {id,title,text} per line")
    p_ingest.add_argument("index_dir", help="output index directory")
    p_ingest.add_argument("--chunk-size", type=int, default=256)
    p_ingest.add_argument("--chunk-overlap", type=int, default=32)
    p_ingest.set_defaults(fn=cmd_ingest)

    p_ask = sub.add_parser("ask", help="answer one question")
    _add_common(p_ask)
    _add_run_flags(p_ask)
    p_ask.add_argument("question")
    p_ask.add_argument("--image", help="image path or URL")
    p_ask.add_argument(
        "--option",
        action="append",
        help="candidate answer (repeat for multiple-choice)",
    )
    p_ask.add_argument("--out", default="runs/ask", help="output directory")
    p_ask.set_defaults(fn=cmd_ask)

    p_bench = sub.add_parser("bench", help="score a JSONL dataset")
    _add_common(p_bench)
    _add_run_flags(p_bench)
    p_bench.add_argument("--dataset", required=True, help="JSONL dataset path")
    p_bench.add_argument("--out", default="runs/bench", help="output directory")
    p_bench.add_argument("--concurrency", type=int, help="worker count")
    p_bench.set_defaults(fn=cmd_bench)

    p_sweep = sub.add_parser("sweep", help="re-run the benchmark over one knob")
    _add_common(p_sweep)
    _add_run_flags(p_sweep)
    p_sweep.add_argument(
        "--parameter", required=True, choices=harness.SWEEPABLE
    )
    p_sweep.add_argument("--values", required=True, help="comma list, e.g. 1,2,4,8")
    p_sweep.add_argument("--dataset", required=True, help="JSONL dataset path")
    p_sweep.add_argument("--out", default="runs/sweep.csv", help="output CSV path")
    p_sweep.add_argument("--concurrency", type=int, help="worker count")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_report = sub.add_parser("report", help="summarize a finished bench run")
    p_report.add_argument("--run", required=True, help="bench output directory")
    p_report.set_defaults(fn=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (ConfigError, UsageError) as exc:
        _fail(str(exc))
        return 2
    except (
        DatasetError,
        EmptyDataset,
        IngestError,
        GatewayError,
        MissingAsset,
        OSError,
    ) as exc:
        _fail(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
