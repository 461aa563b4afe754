from .bm25 import (
    BM25_B,
    BM25_K1,
    Bm25Index,
    IndexStats,
    IndexVersionMismatch,
    SearchHit,
    analyze,
)
from .chunking import (
    CHUNK_OVERLAP,
    CHUNK_SIZE,
    MIN_PAGE_WORDS,
    Document,
    FilterCounts,
    Passage,
    chunk,
    filter_pages,
)
from .embed import (
    EmbeddingProvider,
    EmbeddingUnavailable,
    HttpEmbeddingProvider,
    StubEmbeddingProvider,
    unit,
)
from .ingest import IngestError, ingest, read_dump

__all__ = [
    "BM25_B",
    "BM25_K1",
    "Bm25Index",
    "CHUNK_OVERLAP",
    "CHUNK_SIZE",
    "Document",
    "EmbeddingProvider",
    "EmbeddingUnavailable",
    "FilterCounts",
    "HttpEmbeddingProvider",
    "IndexStats",
    "IndexVersionMismatch",
    "IngestError",
    "MIN_PAGE_WORDS",
    "Passage",
    "SearchHit",
    "StubEmbeddingProvider",
    "analyze",
    "chunk",
    "filter_pages",
    "ingest",
    "read_dump",
    "unit",
]
