"""Chunk reference documents and retrieve passages by TF-IDF cosine.

Retrieval is deliberately deterministic: lowercase alphanumeric tokens, raw
term frequency scaled by a smoothed inverse document frequency
(``ln(N/df) + 1``, so terms present in every chunk still carry weight), and
cosine similarity with ties broken by chunk id. No learned embeddings, no
randomness; the same corpus and configuration always build byte-identical
serialized indexes. The search surface is small enough that an embedding
backend could replace it without touching any caller.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ConfigError

DEFAULT_CHUNK_SIZE = 1200
DEFAULT_CHUNK_OVERLAP = 200
DEFAULT_TOP_K = 4

INDEX_SCHEMA_VERSION = 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class Chunk:
    id: int
    doc_id: str
    text: str
    char_range: tuple[int, int]


@dataclass(frozen=True)
class Index:
    vocabulary: dict[str, int]
    vectors: tuple[dict[int, float], ...]
    chunks: tuple[Chunk, ...]
    doc_count: int


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def chunk_document(
    doc_id: str,
    text: str,
    size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> list[Chunk]:
    """Split ``text`` into overlapping chunks covering every character.

    Starts advance by exactly ``size - overlap``; chunk ends snap back to
    the nearest whitespace when that does not open a gap before the next
    start. The union of char ranges always equals ``[0, len(text))``.
    """
    if size <= 0:
        raise ConfigError(f"chunk size must be positive, got {size}")
    if overlap < 0 or overlap >= size:
        raise ConfigError(f"overlap must satisfy 0 <= overlap < size, got {overlap} vs {size}")
    if not text:
        return []
    step = size - overlap
    chunks: list[Chunk] = []
    start = 0
    while start < len(text):
        end = min(start + size, len(text))
        if end < len(text):
            end = _snap_to_whitespace(text, start + step, end)
        chunks.append(Chunk(id=len(chunks), doc_id=doc_id, text=text[start:end], char_range=(start, end)))
        start += step
    return chunks


def _snap_to_whitespace(text: str, floor: int, end: int) -> int:
    # Coverage constraint: never snap past the next chunk's start (floor).
    for pos in range(end, floor, -1):
        if text[pos - 1].isspace():
            return pos
    return end


def build_index(chunks: Sequence[Chunk]) -> Index:
    """Build the TF-IDF term-weight index over a chunk list."""
    chunk_tokens = [tokenize(chunk.text) for chunk in chunks]
    vocabulary: dict[str, int] = {}
    for term in sorted({t for tokens in chunk_tokens for t in tokens}):
        vocabulary[term] = len(vocabulary)
    doc_count = len(chunks)
    df = [0] * len(vocabulary)
    for tokens in chunk_tokens:
        for term in set(tokens):
            df[vocabulary[term]] += 1
    idf = [math.log(doc_count / d) + 1.0 if d else 0.0 for d in df]
    vectors = []
    for tokens in chunk_tokens:
        tf: dict[int, int] = {}
        for term in tokens:
            dim = vocabulary[term]
            tf[dim] = tf.get(dim, 0) + 1
        vectors.append({dim: count * idf[dim] for dim, count in tf.items()})
    return Index(vocabulary=vocabulary, vectors=tuple(vectors), chunks=tuple(chunks), doc_count=doc_count)


def search(index: Index, query: str, k: int = DEFAULT_TOP_K) -> list[tuple[Chunk, float]]:
    """Top-k chunks by cosine similarity, descending; zero scores dropped.

    Ties break on ascending chunk id so results are reproducible.
    """
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    idf = _idf_vector(index)
    qtf: dict[int, int] = {}
    for term in tokenize(query):
        dim = index.vocabulary.get(term)
        if dim is not None:
            qtf[dim] = qtf.get(dim, 0) + 1
    qvec = {dim: count * idf[dim] for dim, count in qtf.items()}
    qnorm = math.sqrt(sum(w * w for w in qvec.values()))
    if qnorm == 0.0:
        return []
    scored: list[tuple[float, int]] = []
    for chunk, vec in zip(index.chunks, index.vectors):
        dot = sum(w * vec.get(dim, 0.0) for dim, w in qvec.items())
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm == 0.0 or dot == 0.0:
            continue
        scored.append((dot / (qnorm * norm), chunk.id))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [(index.chunks[cid], score) for score, cid in scored[:k]]


def _idf_vector(index: Index) -> list[float]:
    df = [0] * len(index.vocabulary)
    for vec in index.vectors:
        for dim in vec:
            df[dim] += 1
    return [math.log(index.doc_count / d) + 1.0 if d else 0.0 for d in df]


def save_index(index: Index, path: Path | str) -> None:
    """Serialize to a single versioned JSON file with stable byte output."""
    payload = {
        "schema_version": INDEX_SCHEMA_VERSION,
        "doc_count": index.doc_count,
        "vocabulary": index.vocabulary,
        "chunks": [
            {"id": c.id, "doc_id": c.doc_id, "text": c.text, "char_range": list(c.char_range)}
            for c in index.chunks
        ],
        "vectors": [{str(dim): w for dim, w in sorted(vec.items())} for vec in index.vectors],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_index(path: Path | str) -> Index:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("schema_version") != INDEX_SCHEMA_VERSION:
        raise ConfigError(f"unsupported index schema in {path}")
    chunks = tuple(
        Chunk(id=c["id"], doc_id=c["doc_id"], text=c["text"], char_range=tuple(c["char_range"]))
        for c in payload["chunks"]
    )
    vectors = tuple({int(dim): w for dim, w in vec.items()} for vec in payload["vectors"])
    return Index(
        vocabulary=dict(payload["vocabulary"]),
        vectors=vectors,
        chunks=chunks,
        doc_count=payload["doc_count"],
    )


def index_document(
    doc_id: str,
    text: str,
    size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> Index:
    """Chunk one document and build its index in a single call."""
    return build_index(chunk_document(doc_id, text, size=size, overlap=overlap))
