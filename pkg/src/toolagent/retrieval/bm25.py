"""Hand-rolled BM25 over an inverted index, plus embedding-threshold search.

Two tokenizers exist on purpose and must not be conflated: chunk windows are
measured in *whitespace* tokens (see chunking.py), while indexing and scoring
analyze text into lowercased alphanumeric runs. Ranking is deterministic:
score descending, then passage id ascending.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chunking import Passage

INDEX_FORMAT_VERSION = 1

BM25_K1 = 1.2
BM25_B = 0.75

# Lowercased maximal runs of alphanumeric characters (unicode-aware).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def analyze(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class IndexVersionMismatch(Exception):
    """On-disk index was written by an incompatible format version."""


@dataclass(frozen=True)
class IndexStats:
    doc_count: int
    passage_count: int
    avg_passage_len: float
    vocabulary_size: int


@dataclass(frozen=True)
class SearchHit:
    passage: Passage
    score: float


class Bm25Index:
    """In-memory inverted index with optional passage embeddings."""

    def __init__(self, k1: float = BM25_K1, b: float = BM25_B):
        self.k1 = k1
        self.b = b
        self.passages: list[Passage] = []
        self.postings: dict[str, list[tuple[int, int]]] = {}
        self.doc_lens: list[int] = []
        self.avgdl = 0.0
        self._embeddings: np.ndarray | None = None

    # -- construction ------------------------------------------------------

    @classmethod
    def build(
        cls, passages: list[Passage], k1: float = BM25_K1, b: float = BM25_B
    ) -> "Bm25Index":
        index = cls(k1=k1, b=b)
        index.passages = list(passages)
        for idx, passage in enumerate(index.passages):
            terms = analyze(passage.text)
            index.doc_lens.append(len(terms))
            for term, tf in Counter(terms).items():
                index.postings.setdefault(term, []).append((idx, tf))
        index.avgdl = (
            sum(index.doc_lens) / len(index.doc_lens) if index.doc_lens else 0.0
        )
        embeddings = [p.embedding for p in index.passages]
        if any(e is not None for e in embeddings):
            if any(e is None for e in embeddings):
                raise ValueError("either all passages carry embeddings or none do")
            dims = {e.shape for e in embeddings}
            if len(dims) > 1:
                raise ValueError(f"embedding dimensions differ: {dims}")
            index._embeddings = np.stack(embeddings).astype(np.float32)
        return index

    # -- scoring -----------------------------------------------------------

    def idf(self, term: str) -> float:
        n = len(self.postings.get(term, ()))
        N = len(self.passages)
        return math.log((N - n + 0.5) / (n + 0.5) + 1.0)

    def search(self, query: str, k: int) -> list[SearchHit]:
        """Top-k passages by BM25 (k1/b from construction).

        Only passages containing at least one query term are candidates; a
        query whose terms appear nowhere returns an empty list. Requesting
        more than the candidate count returns all candidates, ranked.
        """
        if k <= 0:
            return []
        scores: dict[int, float] = {}
        for term in analyze(query):
            postings = self.postings.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            for idx, tf in postings:
                dl = self.doc_lens[idx]
                norm = tf * (self.k1 + 1) / (
                    tf + self.k1 * (1 - self.b + self.b * dl / self.avgdl)
                )
                scores[idx] = scores.get(idx, 0.0) + idf * norm
        ranked = sorted(
            scores.items(), key=lambda item: (-item[1], self.passages[item[0]].passage_id)
        )
        return [SearchHit(self.passages[i], s) for i, s in ranked[:k]]

    def vector_search(
        self, query_vec: np.ndarray, k: int, tau: float
    ) -> list[SearchHit]:
        """Embedding search: passages with cosine similarity strictly above
        ``tau``, ranked by similarity descending (ties: passage id ascending),
        truncated to the top k. Vectors are assumed unit-norm, so cosine
        similarity is the dot product."""
        if self._embeddings is None:
            raise ValueError("index carries no embeddings")
        if k <= 0:
            return []
        sims = self._embeddings @ np.asarray(query_vec, dtype=np.float32)
        above = [
            (float(sims[i]), self.passages[i].passage_id, i)
            for i in range(len(self.passages))
            if float(sims[i]) > tau
        ]
        above.sort(key=lambda t: (-t[0], t[1]))
        return [SearchHit(self.passages[i], sim) for sim, _, i in above[:k]]

    @property
    def has_embeddings(self) -> bool:
        return self._embeddings is not None

    def stats(self) -> IndexStats:
        span_lens = [p.token_span[1] - p.token_span[0] for p in self.passages]
        return IndexStats(
            doc_count=len({p.source_doc for p in self.passages}),
            passage_count=len(self.passages),
            avg_passage_len=sum(span_lens) / len(span_lens) if span_lens else 0.0,
            vocabulary_size=len(self.postings),
        )

    # -- persistence -------------------------------------------------------

    def save(self, index_dir: str | Path) -> None:
        path = Path(index_dir)
        path.mkdir(parents=True, exist_ok=True)
        stats = self.stats()
        manifest = {
            "format_version": INDEX_FORMAT_VERSION,
            "k1": self.k1,
            "b": self.b,
            "has_embeddings": self.has_embeddings,
            "doc_count": stats.doc_count,
            "passage_count": stats.passage_count,
            "avg_passage_len": stats.avg_passage_len,
            "vocabulary_size": stats.vocabulary_size,
        }
        (path / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        with open(path / "passages.jsonl", "w", encoding="utf-8") as fh:
            for p in self.passages:
                fh.write(
                    json.dumps(
                        {
                            "passage_id": p.passage_id,
                            "source_doc": p.source_doc,
                            "token_span": list(p.token_span),
                            "text": p.text,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        postings_wire = {t: [[i, tf] for i, tf in plist] for t, plist in self.postings.items()}
        with open(path / "postings.json", "w", encoding="utf-8") as fh:
            json.dump(
                {"doc_lens": self.doc_lens, "postings": postings_wire},
                fh,
                ensure_ascii=False,
            )
        if self._embeddings is not None:
            np.save(path / "embeddings.npy", self._embeddings)

    @classmethod
    def load(cls, index_dir: str | Path) -> "Bm25Index":
        path = Path(index_dir)
        manifest_path = path / "manifest.json"
        if not manifest_path.is_file():
            raise FileNotFoundError(f"no index manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        version = manifest.get("format_version")
        if version != INDEX_FORMAT_VERSION:
            raise IndexVersionMismatch(
                f"index format {version!r} != supported {INDEX_FORMAT_VERSION}"
            )
        index = cls(k1=manifest["k1"], b=manifest["b"])
        with open(path / "passages.jsonl", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                index.passages.append(
                    Passage(
                        passage_id=rec["passage_id"],
                        source_doc=rec["source_doc"],
                        token_span=tuple(rec["token_span"]),
                        text=rec["text"],
                    )
                )
        with open(path / "postings.json", encoding="utf-8") as fh:
            stored = json.load(fh)
        index.doc_lens = list(stored["doc_lens"])
        index.postings = {
            term: [(int(i), int(tf)) for i, tf in plist]
            for term, plist in stored["postings"].items()
        }
        index.avgdl = (
            sum(index.doc_lens) / len(index.doc_lens) if index.doc_lens else 0.0
        )
        if manifest.get("has_embeddings"):
            index._embeddings = np.load(path / "embeddings.npy")
            for i, p in enumerate(index.passages):
                p.embedding = index._embeddings[i]
        return index
