"""Corpus ingestion, BM25 ranked search and gold-document perturbation.

The corpus is immutable after ingest; concurrent searches are safe. The
binary index format is internal and versioned with a magic header.
"""

from __future__ import annotations

import pickle
import random
import re
from dataclasses import dataclass, field
from math import log
from pathlib import Path

import numpy as np

from confuse.model import Document
from confuse.retrieval.kernel import accumulate, HAVE_COMPILED_KERNEL

BM25_K1 = 1.2
BM25_B = 0.75

INDEX_MAGIC = b"CFIDX001"

_TOKEN_RE = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric, drop empty tokens."""
    return _TOKEN_RE.findall(text.lower())


class DuplicateDocumentError(ValueError):
    pass


class EmptyCorpusError(ValueError):
    pass


@dataclass
class Corpus:
    documents: list[Document]
    postings: dict[str, list[tuple[int, int]]]
    doc_lengths: list[int]
    avg_doc_length: float

    def __len__(self) -> int:
        return len(self.documents)


def ingest(documents: list[Document]) -> Corpus:
    """Build an inverted index over the documents."""
    seen: set[str] = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise DuplicateDocumentError(f"duplicate doc_id: {doc.doc_id!r}")
        seen.add(doc.doc_id)

    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    for ordinal, doc in enumerate(documents):
        tokens = tokenize(doc.title + " " + doc.body)
        doc_lengths.append(len(tokens))
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for token, tf in counts.items():
            postings.setdefault(token, []).append((ordinal, tf))

    avg = sum(doc_lengths) / len(doc_lengths) if doc_lengths else 0.0
    return Corpus(documents=list(documents), postings=postings,
                  doc_lengths=doc_lengths, avg_doc_length=avg)


def idf(n_docs: int, doc_freq: int) -> float:
    return log((n_docs - doc_freq + 0.5) / (doc_freq + 0.5) + 1.0)


def search(corpus: Corpus, query: str, k: int,
           k1: float = BM25_K1, b: float = BM25_B) -> list[tuple[Document, float]]:
    """BM25 ranked retrieval.

    Documents sharing no term with the query are excluded; results sort by
    score descending with ties broken by ascending doc_id.
    """
    if k <= 0:
        raise ValueError("k must be a positive integer")
    if not corpus.documents:
        raise EmptyCorpusError("corpus is empty")

    n_docs = len(corpus.documents)
    norms = k1 * (1.0 - b + b * np.asarray(corpus.doc_lengths, dtype=np.float64)
                  / corpus.avg_doc_length)
    scores = np.zeros(n_docs, dtype=np.float64)
    matched: set[int] = set()
    for term in sorted(set(tokenize(query))):
        plist = corpus.postings.get(term)
        if not plist:
            continue
        ordinals = np.fromiter((p[0] for p in plist), dtype=np.int64,
                               count=len(plist))
        tfs = np.fromiter((p[1] for p in plist), dtype=np.float64,
                          count=len(plist))
        accumulate(scores, ordinals, tfs, idf(n_docs, len(plist)), k1, norms)
        matched.update(int(o) for o in ordinals)

    ranked = sorted(matched, key=lambda o: (-scores[o], corpus.documents[o].doc_id))
    return [(corpus.documents[o], float(scores[o])) for o in ranked[:k]]


@dataclass(frozen=True)
class PerturbationPolicy:
    drop_probability: float = 0.5
    target_size: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in (0, 1]")
        if self.target_size < 1:
            raise ValueError("target_size must be >= 1")


@dataclass(frozen=True)
class PerturbationResult:
    documents: tuple[Document, ...]
    dropped: tuple[str, ...]
    underfilled: bool = False


def perturb_documents(gold: list[Document], corpus: Corpus, query: str,
                      policy: PerturbationPolicy) -> PerturbationResult:
    """Drop gold documents at random and pad with retrieved distractors.

    At least one gold document is always absent from the output (force-drop
    rule), which guarantees the document-label case invariant. Dropped gold
    documents are never re-added via retrieval.
    """
    if not gold:
        raise ValueError("gold documents must be non-empty")
    rng = random.Random(policy.seed)
    kept = [d for d in gold if rng.random() >= policy.drop_probability]
    if len(kept) == len(gold):
        kept.pop(rng.randrange(len(kept)))
    gold_ids = {d.doc_id for d in gold}
    dropped = tuple(d.doc_id for d in gold if d.doc_id not in
                    {kd.doc_id for kd in kept})

    result = list(kept)
    present = {d.doc_id for d in result}
    if len(result) < policy.target_size and len(corpus):
        for doc, _score in search(corpus, query, k=len(corpus)):
            if len(result) >= policy.target_size:
                break
            if doc.doc_id in present or doc.doc_id in gold_ids:
                continue
            result.append(doc)
            present.add(doc.doc_id)
    return PerturbationResult(
        documents=tuple(result[:policy.target_size]),
        dropped=dropped,
        underfilled=len(result) < policy.target_size,
    )


def save_index(corpus: Corpus, path: str | Path) -> None:
    payload = pickle.dumps({
        "documents": [d.to_dict() for d in corpus.documents],
        "postings": corpus.postings,
        "doc_lengths": corpus.doc_lengths,
        "avg_doc_length": corpus.avg_doc_length,
    })
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(payload)


def load_index(path: str | Path) -> Corpus:
    data = Path(path).read_bytes()
    if not data.startswith(INDEX_MAGIC):
        raise ValueError(f"not a corpus index file: {path}")
    payload = pickle.loads(data[len(INDEX_MAGIC):])
    return Corpus(
        documents=[Document.from_dict(d) for d in payload["documents"]],
        postings=payload["postings"],
        doc_lengths=payload["doc_lengths"],
        avg_doc_length=payload["avg_doc_length"],
    )
