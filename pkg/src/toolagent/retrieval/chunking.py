"""Corpus documents, the short-page filter, and sliding-window chunking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Sliding-window defaults: 256-token windows overlapping by 32.
CHUNK_SIZE = 256
CHUNK_OVERLAP = 32
MIN_PAGE_WORDS = 32


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str


@dataclass
class FilterCounts:
    kept: int = 0
    dropped: int = 0


@dataclass
class Passage:
    """A retrievable chunk: ``text`` is exactly the whitespace tokens of the
    source document in ``token_span`` rejoined with single spaces."""

    passage_id: str
    source_doc: str
    token_span: tuple[int, int]
    text: str
    embedding: np.ndarray | None = field(default=None, repr=False)


def filter_pages(
    docs: list[Document], min_words: int = MIN_PAGE_WORDS
) -> tuple[list[Document], FilterCounts]:
    """Keep pages with at least ``min_words`` whitespace-delimited words."""
    counts = FilterCounts()
    kept: list[Document] = []
    for doc in docs:
        if len(doc.text.split()) >= min_words:
            kept.append(doc)
            counts.kept += 1
        else:
            counts.dropped += 1
    return kept, counts


def chunk(
    doc: Document, size: int = CHUNK_SIZE, overlap: int = CHUNK_OVERLAP
) -> list[Passage]:
    """Split a document into overlapping token windows.

    With stride = size - overlap, passage i spans token indices
    [i*stride, min(i*stride + size, N)); windows are emitted until one
    reaches the end of the document, so every token lands in at least one
    passage, no passage is empty, and a document no longer than ``size``
    yields exactly one passage. Every non-final window is full, which makes
    each consecutive overlap exactly ``overlap`` tokens.
    """
    if overlap >= size:
        raise ValueError(f"overlap {overlap} must be smaller than size {size}")
    stride = size - overlap
    tokens = doc.text.split()
    n = len(tokens)
    passages: list[Passage] = []
    i = 0
    while n > 0:
        start = i * stride
        end = min(start + size, n)
        passages.append(
            Passage(
                passage_id=f"{doc.doc_id}:{i:05d}",
                source_doc=doc.doc_id,
                token_span=(start, end),
                text=" ".join(tokens[start:end]),
            )
        )
        if end >= n:
            break
        i += 1
    return passages
