"""Search tool: BM25 text retrieval, thresholded cross-modal retrieval, and
the refiner that rewrites retrieved documents into the reasoning chain.

Dispatch rule: a payload equal to "image" (case-insensitive, trimmed) queries
the index by the task image's embedding and returns retained passages raw;
any other payload runs BM25 and passes the hits through the refiner model.
An empty retrieval is not an error — the model is told "no relevant documents
found" and reasoning proceeds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..executor import CallContext, ToolResult
from ..gateway import DecodingConfig, Message, ModelHandle
from ..prompts import PromptLibrary
from ..protocol import ToolKind
from ..retrieval import Bm25Index, EmbeddingProvider, EmbeddingUnavailable, SearchHit

logger = logging.getLogger(__name__)

NO_DOCUMENTS = "no relevant documents found"


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 8
    tau: float = 0.9
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1: {self.top_k}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1]: {self.tau}")


def format_passages(hits: list[SearchHit]) -> str:
    """Hits -> the numbered 'Searched Documents' block the refiner expects."""
    return "\n\n".join(
        f"Passage {i}:\n{hit.passage.text}" for i, hit in enumerate(hits, start=1)
    )


def refine(
    question: str,
    prior_reasoning: str,
    query: str,
    hits: list[SearchHit],
    model: ModelHandle,
    prompts: PromptLibrary,
    decoding: DecodingConfig,
) -> str:
    """One model call that rephrases retrieved passages into fluent context."""
    if not hits:
        raise ValueError("refine requires at least one retrieved passage")
    prompt = prompts.render(
        "refiner",
        question=question,
        previous_reasoning=prior_reasoning,
        calling=query,
        raw_result=format_passages(hits),
    )
    completion = model.complete([Message.user(prompt)], decoding.with_stops(()))
    return completion.text.strip()


class SearchTool:
    """Registry adapter owning the index handle and retrieval config."""

    def __init__(
        self,
        index: Bm25Index | None,
        model: ModelHandle,
        prompts: PromptLibrary,
        decoding: DecodingConfig,
        config: RetrievalConfig = RetrievalConfig(),
        embedder: EmbeddingProvider | None = None,
    ):
        self._index = index
        self._model = model
        self._prompts = prompts
        self._decoding = decoding
        self._config = config
        self._embedder = embedder

    def __call__(self, payload: str, ctx: CallContext) -> ToolResult:
        if self._index is None:
            return ToolResult(
                ToolKind.SEARCH, ok=False, content="search index is not available"
            )
        if payload.strip().lower() == "image":
            return self._image_path(ctx)
        return self._text_path(payload, ctx)

    def _image_path(self, ctx: CallContext) -> ToolResult:
        if ctx.task.image is None:
            return ToolResult(
                ToolKind.SEARCH, ok=False, content="image search requires an image"
            )
        if self._embedder is None:
            return ToolResult(
                ToolKind.SEARCH,
                ok=False,
                content="embedding provider is not configured",
            )
        if not self._index.has_embeddings:
            return ToolResult(
                ToolKind.SEARCH,
                ok=False,
                content="index has no embeddings for cross-modal search",
            )
        try:
            query_vec = self._embedder.embed_image(ctx.task.image)
        except EmbeddingUnavailable as exc:
            return ToolResult(ToolKind.SEARCH, ok=False, content=str(exc))
        hits = self._index.vector_search(
            query_vec, k=self._config.top_k, tau=self._config.tau
        )
        if not hits:
            return ToolResult(ToolKind.SEARCH, ok=True, content=NO_DOCUMENTS)
        # Cross-modal hits are passed through raw; the refiner is written
        # around textual queries.
        return ToolResult(ToolKind.SEARCH, ok=True, content=format_passages(hits))

    def _text_path(self, payload: str, ctx: CallContext) -> ToolResult:
        hits = self._index.search(payload, k=self._config.top_k)
        if not hits:
            return ToolResult(ToolKind.SEARCH, ok=True, content=NO_DOCUMENTS)
        refined = refine(
            ctx.task.render_question(),
            ctx.reasoning,
            payload,
            hits,
            self._model,
            self._prompts,
            self._decoding,
        )
        return ToolResult(ToolKind.SEARCH, ok=True, content=refined)
