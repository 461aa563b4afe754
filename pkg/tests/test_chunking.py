"""Sliding-window chunking and the short-page filter."""

import math
import random

import pytest

from toolagent.retrieval import (
    CHUNK_OVERLAP,
    CHUNK_SIZE,
    MIN_PAGE_WORDS,
    Document,
    chunk,
    filter_pages,
)


def make_doc(n_tokens: int, doc_id: str = "d") -> Document:
    return Document(doc_id, "T", " ".join(f"t{i}" for i in range(n_tokens)))


def oracle_spans(n: int, size: int = 256, overlap: int = 32) -> list[tuple[int, int]]:
    if n <= size:
        return [(0, n)]
    stride = size - overlap
    count = 1 + math.ceil((n - size) / stride)
    return [(i * stride, min(i * stride + size, n)) for i in range(count)]


def test_constants_match_the_protocol():
    assert (CHUNK_SIZE, CHUNK_OVERLAP, MIN_PAGE_WORDS) == (256, 32, 32)


def test_300_token_example():
    spans = [p.token_span for p in chunk(make_doc(300))]
    assert spans == [(0, 256), (224, 300)]


def test_exact_window_is_one_passage():
    spans = [p.token_span for p in chunk(make_doc(256))]
    assert spans == [(0, 256)]


def test_one_past_window_spills():
    spans = [p.token_span for p in chunk(make_doc(257))]
    assert spans == [(0, 256), (224, 257)]


def test_short_doc_yields_one_passage():
    spans = [p.token_span for p in chunk(make_doc(5))]
    assert spans == [(0, 5)]


def test_overlap_must_be_smaller_than_size():
    with pytest.raises(ValueError):
        chunk(make_doc(10), size=32, overlap=32)


def test_passage_ids_and_text_slices():
    doc = make_doc(300, doc_id="docx")
    passages = chunk(doc)
    assert [p.passage_id for p in passages] == ["docx:00000", "docx:00001"]
    tokens = doc.text.split()
    for p in passages:
        start, end = p.token_span
        assert p.text == " ".join(tokens[start:end])
        assert p.source_doc == "docx"


def test_random_lengths_match_closed_form_oracle():
    rng = random.Random(2026)
    for _ in range(60):
        n = rng.randint(1, 2000)
        spans = [p.token_span for p in chunk(make_doc(n))]
        assert spans == oracle_spans(n)
        # Full coverage, in order.
        assert spans[0][0] == 0
        assert spans[-1][1] == n
        covered = set()
        for start, end in spans:
            assert start < end
            covered.update(range(start, end))
        assert covered == set(range(n))
        # Every non-final window is full, so each consecutive overlap is
        # exactly the configured 32 tokens.
        for i in range(len(spans) - 1):
            assert spans[i][1] - spans[i + 1][0] == 32


def test_filter_pages_threshold_is_inclusive():
    keep = make_doc(32, "keep")
    drop = make_doc(31, "drop")
    kept, counts = filter_pages([keep, drop])
    assert [d.doc_id for d in kept] == ["keep"]
    assert (counts.kept, counts.dropped) == (1, 1)


def test_filter_pages_counts_empty_corpus():
    kept, counts = filter_pages([])
    assert kept == []
    assert (counts.kept, counts.dropped) == (0, 0)
