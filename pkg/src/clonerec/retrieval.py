"""TF-IDF retrieval of clone methods by cosine similarity.

Terms are unigram token texts, meta-tokens included.  A term occurring
``tf`` times in a method gets weight ``(1 + ln tf) * ln(J / df)`` where ``J``
is the corpus size and ``df`` the number of methods containing the term;
vectors are L2-normalized, so a dot product is a cosine.

Sums of products use :func:`math.fsum`.  The correctly rounded result does
not depend on summation order, so mathematically tied scores compare equal
and the record_id tie-break is applied consistently.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .corpus import ParseError, SearchCorpus
from .tokenizer import EOC, SOC, texts

SNAPSHOT_FORMAT = "clonerec-tfidf/1"


class EmptyCorpus(ValueError):
    pass


class MissingStartMarker(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Sorted ``(term_id, weight)`` pairs; zero weights are not stored."""

    term_ids: np.ndarray
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        ids = np.asarray(self.term_ids, dtype=np.int64)
        w = np.asarray(self.weights, dtype=float)
        if ids.shape != w.shape or ids.ndim != 1:
            raise ValueError("term_ids and weights must be aligned 1-d arrays")
        if ids.size > 1 and np.any(np.diff(ids) <= 0):
            raise ValueError("term_ids must be strictly increasing")
        if np.any(~(w > 0)):
            raise ValueError("weights must be positive; zeros are not stored")
        ids.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "term_ids", ids)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return int(self.term_ids.size)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (self.normalized == other.normalized
                and np.array_equal(self.term_ids, other.term_ids)
                and np.array_equal(self.weights, other.weights))

    def get(self, term_id: int) -> float:
        pos = np.searchsorted(self.term_ids, term_id)
        if pos < self.term_ids.size and self.term_ids[pos] == term_id:
            return float(self.weights[pos])
        return 0.0

    def norm(self) -> float:
        return math.sqrt(math.fsum(w * w for w in self.weights.tolist()))

    def to_dense(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        out[self.term_ids] = self.weights
        return out

    def items(self) -> list[tuple[int, float]]:
        return list(zip(self.term_ids.tolist(), self.weights.tolist()))


def _weigh(tf: Counter, df: np.ndarray, n_docs: int) -> SparseVector:
    """(1 + ln tf) * ln(J / df) per known term id, then L2-normalize."""
    ids = sorted(tf)
    raw = [(1.0 + math.log(tf[t])) * math.log(n_docs / df[t]) for t in ids]
    keep = [(t, w) for t, w in zip(ids, raw) if w > 0.0]
    if not keep:
        return SparseVector(np.empty(0, np.int64), np.empty(0), normalized=True)
    norm = math.sqrt(math.fsum(w * w for _, w in keep))
    return SparseVector(
        np.array([t for t, _ in keep], dtype=np.int64),
        np.array([w / norm for _, w in keep]),
        normalized=True,
    )


class TfIdfIndex:
    """Document-frequency statistics, normalized document vectors and a
    term-major postings list over a search corpus."""

    def __init__(self, terms: dict[str, int], df: np.ndarray, record_ids: Sequence[int],
                 doc_vectors: Sequence[SparseVector], functionality_ids: Sequence[int] | None = None):
        self.terms = dict(terms)
        self.df = np.asarray(df, dtype=np.int64)
        self.record_ids = list(record_ids)
        self.doc_vectors = list(doc_vectors)
        self.functionality_ids = list(functionality_ids) if functionality_ids is not None else None
        if len(self.doc_vectors) != len(self.record_ids):
            raise ValueError("one vector per record is required")
        if self.df.size != len(self.terms):
            raise ValueError("df must cover every term")
        if self.df.size and (self.df.min() < 1 or self.df.max() > self.n_docs):
            raise ValueError("document frequencies must lie in [1, J]")
        self._postings: list[list[tuple[int, float]]] = [[] for _ in range(len(self.terms))]
        for doc, vec in enumerate(self.doc_vectors):
            for tid, w in vec.items():
                self._postings[tid].append((doc, w))

    @property
    def n_docs(self) -> int:
        return len(self.record_ids)

    def postings(self, term: str) -> list[tuple[int, float]]:
        """``(record_id, weight)`` pairs for a term with nonzero weight."""
        tid = self.terms.get(term)
        if tid is None:
            return []
        return [(self.record_ids[d], w) for d, w in self._postings[tid]]

    def vector_for(self, record_id: int) -> SparseVector:
        return self.doc_vectors[self.record_ids.index(record_id)]

    def __eq__(self, other):
        if not isinstance(other, TfIdfIndex):
            return NotImplemented
        return (self.terms == other.terms and np.array_equal(self.df, other.df)
                and self.record_ids == other.record_ids
                and self.doc_vectors == other.doc_vectors
                and self.functionality_ids == other.functionality_ids)

    def __repr__(self):
        return f"TfIdfIndex({self.n_docs} documents, {len(self.terms)} terms)"

    def to_json(self) -> dict:
        vocab = sorted(self.terms, key=self.terms.__getitem__)
        return {
            "format": SNAPSHOT_FORMAT,
            "terms": vocab,
            "df": self.df.tolist(),
            "record_ids": self.record_ids,
            "functionality_ids": self.functionality_ids,
            "vectors": [[v.term_ids.tolist(), v.weights.tolist()] for v in self.doc_vectors],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TfIdfIndex":
        if obj.get("format") != SNAPSHOT_FORMAT:
            raise ValueError(f"unsupported index format {obj.get('format')!r}")
        vectors = [SparseVector(np.array(ids, dtype=np.int64), np.array(w, dtype=float), True)
                   for ids, w in obj["vectors"]]
        return cls({t: i for i, t in enumerate(obj["terms"])}, np.array(obj["df"], dtype=np.int64),
                   obj["record_ids"], vectors, obj.get("functionality_ids"))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TfIdfIndex":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid index snapshot ({exc.msg})", exc.lineno, path) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid index snapshot ({exc})", 1, path) from exc


def fit(corpus: SearchCorpus) -> TfIdfIndex:
    """Build the TF-IDF index over every record of *corpus*."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot index an empty corpus")
    terms: dict[str, int] = {}
    doc_tfs = []
    for rec in corpus:
        tf = Counter()
        for tok in rec.tokens:
            tf[terms.setdefault(tok, len(terms))] += 1
        doc_tfs.append(tf)
    df = np.zeros(len(terms), dtype=np.int64)
    for tf in doc_tfs:
        df[list(tf)] += 1
    n_docs = len(corpus)
    vectors = [_weigh(tf, df, n_docs) for tf in doc_tfs]
    return TfIdfIndex(terms, df, [r.record_id for r in corpus], vectors,
                      [r.functionality_id for r in corpus])


def vectorize_query(index: TfIdfIndex, tokens: Sequence[str]) -> SparseVector:
    """Weigh a token sequence with the corpus statistics; unknown terms drop out."""
    tf = Counter(index.terms[t] for t in texts(tokens) if t in index.terms)
    return _weigh(tf, index.df, index.n_docs)


def score_all(index: TfIdfIndex, query: SparseVector) -> list[float]:
    """Cosine score of every document, in index order."""
    products: list[list[float]] = [[] for _ in range(index.n_docs)]
    for tid, qw in query.items():
        for doc, dw in index._postings[tid]:
            products[doc].append(qw * dw)
    return [min(math.fsum(p), 1.0) if p else 0.0 for p in products]


def rank(index: TfIdfIndex, query: SparseVector, k: int = 10) -> list[tuple[int, float]]:
    """Top-*k* ``(record_id, score)`` by descending score, ties by record_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = score_all(index, query)
    order = sorted(range(index.n_docs), key=lambda d: (-scores[d], index.record_ids[d]))
    return [(index.record_ids[d], scores[d]) for d in order[:k]]


class CloneSpan(NamedTuple):
    tokens: list[str]
    terminated: bool


def extract_clone_span(generated: Sequence[str]) -> CloneSpan:
    """Tokens from the first ``<soc>`` through the next ``<eoc>``, inclusive.

    Without a closing ``<eoc>`` the span runs to the end and ``terminated``
    is False.
    """
    seq = texts(generated)
    try:
        start = seq.index(SOC)
    except ValueError:
        raise MissingStartMarker("generated sequence has no <soc> token") from None
    try:
        end = seq.index(EOC, start + 1)
    except ValueError:
        return CloneSpan(seq[start:], False)
    return CloneSpan(seq[start:end + 1], True)


def recommend(index: TfIdfIndex, generated: Sequence[str], k: int = 10) -> list[tuple[int, float]]:
    """Span extraction, vectorization and ranking in one call."""
    span = extract_clone_span(generated)
    return rank(index, vectorize_query(index, span.tokens), k)
