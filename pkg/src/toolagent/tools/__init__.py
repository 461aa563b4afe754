from .code import (
    CodeLimits,
    CodeTool,
    ExecutionResult,
    RevisionHistory,
    SandboxUnavailable,
    execute,
    run_with_feedback,
)
from .perceive import PERCEIVE_DECODING, PerceiveTool, perceive
from .search import NO_DOCUMENTS, RetrievalConfig, SearchTool, format_passages, refine

__all__ = [
    "CodeLimits",
    "CodeTool",
    "ExecutionResult",
    "NO_DOCUMENTS",
    "PERCEIVE_DECODING",
    "PerceiveTool",
    "RetrievalConfig",
    "RevisionHistory",
    "SandboxUnavailable",
    "SearchTool",
    "execute",
    "format_passages",
    "perceive",
    "refine",
    "run_with_feedback",
]
