"""Training-free, tool-augmented multimodal question answering.

A three-stage runtime: a planning pass selects the tool subset worth using
for a task, a budgeted execution loop interleaves model reasoning with tool
calls expressed as inline control tokens, and a synthesis pass turns the
accumulated trace into one grounded answer.
"""

from .config import AppConfig, ConfigError, load_config
from .executor import (
    DEFAULT_MAX_TURNS,
    ReasoningTrace,
    Step,
    StepStatus,
    Termination,
    ToolRegistry,
    ToolResult,
)
from .gateway import (
    BudgetExceeded,
    Completion,
    DecodingConfig,
    GatewayError,
    HttpGateway,
    Message,
    MeteredModel,
    ModelHandle,
    ProtocolError,
    ScriptedModel,
    StopReason,
    named_preset,
)
from .navigator import ALL_TOOLS, GlobalPlan, plan
from .pipeline import PipelineResult, run_direct, run_task
from .prompts import PromptLibrary
from .protocol import STOP_SEQUENCES, Segment, SegmentKind, ToolKind, scan
from .synthesizer import FinalAnswer, synthesize
from .task import TaskInput

__version__ = "0.1.0"

__all__ = [
    "ALL_TOOLS",
    "AppConfig",
    "BudgetExceeded",
    "Completion",
    "ConfigError",
    "DecodingConfig",
    "DEFAULT_MAX_TURNS",
    "FinalAnswer",
    "GatewayError",
    "GlobalPlan",
    "HttpGateway",
    "Message",
    "MeteredModel",
    "ModelHandle",
    "PipelineResult",
    "PromptLibrary",
    "ProtocolError",
    "ReasoningTrace",
    "ScriptedModel",
    "Segment",
    "SegmentKind",
    "Step",
    "StepStatus",
    "STOP_SEQUENCES",
    "StopReason",
    "TaskInput",
    "Termination",
    "ToolKind",
    "ToolRegistry",
    "ToolResult",
    "plan",
    "run_direct",
    "run_task",
    "scan",
    "synthesize",
    "__version__",
]
