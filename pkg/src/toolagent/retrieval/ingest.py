"""Corpus ingestion: JSONL dump -> filtered, chunked, indexed passages."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .bm25 import BM25_B, BM25_K1, Bm25Index, IndexStats
from .chunking import (
    CHUNK_OVERLAP,
    CHUNK_SIZE,
    MIN_PAGE_WORDS,
    Document,
    chunk,
    filter_pages,
)
from .embed import EmbeddingProvider

logger = logging.getLogger(__name__)


class IngestError(Exception):
    """A dump line could not be parsed; message carries the line number."""


def read_dump(path: str | Path) -> list[Document]:
    """Read a JSONL dump of {id, title, text} objects; blank lines skipped."""
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                docs.append(
                    Document(
                        doc_id=str(rec["id"]),
                        title=str(rec.get("title", "")),
                        text=str(rec["text"]),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise IngestError(f"malformed dump line {lineno}: {exc}") from exc
    return docs


def ingest(
    dump_path: str | Path,
    index_dir: str | Path,
    *,
    min_words: int = MIN_PAGE_WORDS,
    size: int = CHUNK_SIZE,
    overlap: int = CHUNK_OVERLAP,
    k1: float = BM25_K1,
    b: float = BM25_B,
    embedder: EmbeddingProvider | None = None,
) -> IndexStats:
    """Build and persist an index from a dump; returns the index stats.

    Deterministic: the same dump yields identical passage ids and stats, so
    re-running ingestion is idempotent.
    """
    docs = read_dump(dump_path)
    kept, counts = filter_pages(docs, min_words=min_words)
    logger.info(
        "ingest: %d pages kept, %d dropped (< %d words)",
        counts.kept,
        counts.dropped,
        min_words,
    )
    passages = []
    for doc in kept:
        passages.extend(chunk(doc, size=size, overlap=overlap))
    if embedder is not None:
        for passage in passages:
            passage.embedding = embedder.embed_text(passage.text)
    index = Bm25Index.build(passages, k1=k1, b=b)
    index.save(index_dir)
    stats = index.stats()
    logger.info(
        "ingest: %d passages from %d docs, vocab %d",
        stats.passage_count,
        stats.doc_count,
        stats.vocabulary_size,
    )
    return stats
