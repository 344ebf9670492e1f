"""Reference n-gram generator, nucleus sampling and perplexity.

The n-gram model is a desk-scale stand-in for a large pretrained code model.
Any object with a ``vocab`` list, a ``token_id`` method and a ``next_probs``
method returning a probability vector aligned with ``vocab`` can be used
wherever a model is expected (see :class:`LanguageModel`).

Scoring uses stupid backoff (factor 0.4) over k-gram relative frequencies,
bottoming out in an add-one smoothed unigram over the whole vocabulary, and
renormalizes per context so every distribution sums to one.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Protocol, Sequence

import numpy as np

from .corpus import ParseError, dump_jsonl, iter_jsonl
from .tokenizer import EOC, META_TOKENS, SOC, UNK, texts

DEFAULT_WINDOW_LEN = 20
DEFAULT_NUCLEUS_P = 0.95
DEFAULT_BACKOFF = 0.4
MODEL_FORMAT = "clonerec-ngram/1"


class EmptyTrainingSet(ValueError):
    pass


class DegenerateDistribution(ValueError):
    pass


class LanguageModel(Protocol):
    vocab: Sequence[str]

    def token_id(self, token: str) -> int: ...

    def next_probs(self, context: Sequence[str]) -> np.ndarray: ...


class NGramModel:
    """Count-based n-gram model with stupid backoff.

    ``counts[k]`` maps a length-``k`` context (tuple of token ids) to a
    ``Counter`` of next-token ids; ``counts[0][()]`` holds unigram counts.
    """

    def __init__(self, order: int, vocab: Sequence[str], counts: list[dict[tuple, Counter]],
                 backoff: float = DEFAULT_BACKOFF):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not 0 < backoff <= 1:
            raise ValueError("backoff must be in (0, 1]")
        missing = set(META_TOKENS) - set(vocab)
        if missing:
            raise ValueError(f"vocabulary lacks meta-tokens {sorted(missing)}")
        if len(counts) != order:
            raise ValueError("need one count table per order")
        self.order = order
        self.backoff = backoff
        self.vocab = list(vocab)
        self._ids = {t: i for i, t in enumerate(self.vocab)}
        if len(self._ids) != len(self.vocab):
            raise ValueError("duplicate vocabulary entries")
        self.counts = counts
        self._totals = [{ctx: sum(c.values()) for ctx, c in table.items()} for table in counts]
        uni = np.zeros(len(self.vocab))
        for tid, c in counts[0].get((), Counter()).items():
            uni[tid] = c
        self._unigram = (uni + 1.0) / (uni.sum() + len(self.vocab))
        self._cache: dict[tuple, np.ndarray] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def token_id(self, token: str) -> int:
        """Vocabulary id of *token*; unseen tokens map to ``<unk>``."""
        return self._ids.get(token, self._ids[UNK])

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.token_id(t) for t in tokens)

    def count(self, ngram: Sequence[str]) -> int:
        """Raw training count of an n-gram given as token texts."""
        ids = self.encode(ngram)
        if not 1 <= len(ids) <= self.order:
            return 0
        return self.counts[len(ids) - 1].get(ids[:-1], Counter()).get(ids[-1], 0)

    def _probs_for_ids(self, ctx_ids: tuple[int, ...]) -> np.ndarray:
        cached = self._cache.get(ctx_ids)
        if cached is not None:
            return cached
        scores = self._unigram.copy()
        for k in range(1, min(self.order - 1, len(ctx_ids)) + 1):
            ctx = ctx_ids[len(ctx_ids) - k:]
            seen = self.counts[k].get(ctx)
            scores *= self.backoff
            if seen:
                total = self._totals[k][ctx]
                for tid, c in seen.items():
                    scores[tid] = c / total
        probs = scores / scores.sum()
        probs.setflags(write=False)
        self._cache[ctx_ids] = probs
        return probs

    def next_probs(self, context: Sequence[str]) -> np.ndarray:
        """Next-token distribution as a vector aligned with ``vocab``."""
        if self.order == 1:
            return self._probs_for_ids(())
        tail = context[-(self.order - 1):]
        return self._probs_for_ids(self.encode(texts(tail)))

    def __eq__(self, other):
        if not isinstance(other, NGramModel):
            return NotImplemented
        return (self.order == other.order and self.backoff == other.backoff
                and self.vocab == other.vocab and self.counts == other.counts)

    def __repr__(self):
        return f"NGramModel(order={self.order}, vocab_size={self.vocab_size})"

    def save(self, path: str | os.PathLike) -> None:
        tables = []
        for table in self.counts:
            rows = [[list(ctx), tid, c]
                    for ctx in sorted(table) for tid, c in sorted(table[ctx].items())]
            tables.append(rows)
        payload = {"format": MODEL_FORMAT, "order": self.order, "backoff": self.backoff,
                   "vocab": self.vocab, "counts": tables}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "NGramModel":
        try:
            with open(path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid model file ({exc.msg})", exc.lineno, path) from exc
        if payload.get("format") != MODEL_FORMAT:
            raise ParseError(f"unsupported model format {payload.get('format')!r}", 1, path)
        counts = []
        for rows in payload["counts"]:
            table: dict[tuple, Counter] = {}
            for ctx, tid, c in rows:
                table.setdefault(tuple(ctx), Counter())[tid] = c
            counts.append(table)
        return cls(payload["order"], payload["vocab"], counts, payload["backoff"])


def train(sequences: Iterable[Sequence[str]], order: int,
          backoff: float = DEFAULT_BACKOFF) -> NGramModel:
    """Count all k-grams (k <= order) over the concatenated sequences."""
    if order < 1:
        raise ValueError("order must be >= 1")
    stream = [t for seq in sequences for t in texts(seq)]
    if not stream:
        raise EmptyTrainingSet("no tokens to train on")
    vocab = list(META_TOKENS) + sorted(set(stream) - set(META_TOKENS))
    ids = {t: i for i, t in enumerate(vocab)}
    encoded = [ids[t] for t in stream]
    counts: list[dict[tuple, Counter]] = [dict() for _ in range(order)]
    for k in range(order):
        table = counts[k]
        for i in range(k, len(encoded)):
            ctx = tuple(encoded[i - k:i])
            table.setdefault(ctx, Counter())[encoded[i]] += 1
    return NGramModel(order, vocab, counts, backoff)


def next_distribution(model: LanguageModel, context: Sequence[str]) -> dict[str, float]:
    probs = model.next_probs(list(texts(context)))
    return {tok: float(p) for tok, p in zip(model.vocab, probs)}


def _as_arrays(dist) -> tuple[list | None, np.ndarray]:
    if isinstance(dist, Mapping):
        keys = list(dist.keys())
        return keys, np.fromiter((dist[k] for k in keys), dtype=float, count=len(keys))
    return None, np.asarray(dist, dtype=float)


def nucleus_set(dist, p: float) -> list:
    """Smallest top-probability prefix whose cumulative mass reaches *p*.

    Tokens are ordered by descending probability, ties by ascending id (the
    position in *dist*).  *dist* is a mapping token -> probability or a
    probability vector; the returned items are its keys or indices.
    """
    keys, probs = _as_arrays(dist)
    order, n = _nucleus_order(probs, p)
    return [int(i) if keys is None else keys[i] for i in order[:n]]


def _nucleus_order(probs: np.ndarray, p: float) -> tuple[np.ndarray, int]:
    if not 0 < p <= 1:
        raise ValueError("nucleus threshold must be in (0, 1]")
    if probs.size == 0 or not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise DegenerateDistribution("distribution is empty or invalid")
    total = probs.sum()
    if total <= 0:
        raise DegenerateDistribution("distribution has no mass")
    probs = probs / total
    order = np.lexsort((np.arange(probs.size), -probs))
    cum = np.cumsum(probs[order])
    cutoff = min(int(np.searchsorted(cum, p, side="left")), probs.size - 1)
    return order, cutoff + 1


def nucleus_sample(dist, p: float, rng: np.random.Generator, size: int | None = None):
    """Draw from *dist* restricted to its nucleus set and renormalized.

    Returns one key (or index, for vector input), or a list of *size* draws.
    """
    keys, probs = _as_arrays(dist)
    order, n = _nucleus_order(probs, p)
    head = order[:n]
    mass = probs[head]
    cum = np.cumsum(mass)
    u = rng.random(1 if size is None else size) * cum[-1]
    picks = np.minimum(np.searchsorted(cum, u, side="right"), n - 1)
    chosen = [int(head[j]) if keys is None else keys[head[j]] for j in picks]
    return chosen[0] if size is None else chosen


@dataclass(frozen=True)
class GenerationConfig:
    nucleus_threshold: float = DEFAULT_NUCLEUS_P
    max_tokens: int = 512
    stop_token: str = EOC
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.nucleus_threshold <= 1:
            raise ValueError("nucleus_threshold must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


class Generation(NamedTuple):
    tokens: list[str]
    truncated: bool


def generate_clone(model: LanguageModel, context: Sequence[str], config: GenerationConfig,
                   rng: np.random.Generator | None = None) -> Generation:
    """Extend *context* token by token until the stop token or the cap.

    The returned tokens include the context.  ``truncated`` is set when
    ``max_tokens`` new tokens were produced without emitting the stop token.
    """
    tokens = list(texts(context))
    if not tokens:
        raise ValueError("context must be non-empty")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    for _ in range(config.max_tokens):
        idx = nucleus_sample(model.next_probs(tokens), config.nucleus_threshold, rng)
        tok = model.vocab[idx]
        tokens.append(tok)
        if tok == config.stop_token:
            return Generation(tokens, False)
    return Generation(tokens, True)


def perplexity(model: LanguageModel, tokens: Sequence[str]) -> float:
    """exp of the mean negative log-likelihood, natural log.

    Every token is scored, the first one against the empty context.
    """
    seq = list(texts(tokens))
    if not seq:
        raise ValueError("cannot score an empty sequence")
    nll = 0.0
    for i, tok in enumerate(seq):
        prob = model.next_probs(seq[:i])[model.token_id(tok)]
        nll -= math.log(prob)
    return math.exp(nll / len(seq))


@dataclass(frozen=True)
class QueryWindow:
    tokens: tuple[str, ...]
    offset: int


def extract_query_windows(stream: Sequence[str], window_len: int = DEFAULT_WINDOW_LEN,
                          marker: str = SOC) -> list[QueryWindow]:
    """All stride-1 windows of *window_len* tokens that contain ``<soc>``."""
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    seq = list(texts(stream))
    windows = []
    for start in range(len(seq) - window_len + 1):
        chunk = tuple(seq[start:start + window_len])
        if marker in chunk:
            windows.append(QueryWindow(chunk, start))
    return windows


@dataclass(frozen=True)
class GenerationRecord:
    query_id: int
    context: tuple[str, ...]
    generated: tuple[str, ...]
    truncated: bool = False
    ground_truth_id: int | None = None


def write_generations(path: str | os.PathLike, records: Iterable[GenerationRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {"query_id": r.query_id, "context": list(r.context),
                   "generated": list(r.generated), "truncated": r.truncated}
            if r.ground_truth_id is not None:
                obj["ground_truth_id"] = r.ground_truth_id
            fh.write(dump_jsonl(obj))


def ingest_generations(path: str | os.PathLike) -> list[GenerationRecord]:
    """Read a generations file; marker tokens are not validated here."""
    out = []
    for lineno, obj in iter_jsonl(path):
        try:
            context, generated = obj["context"], obj["generated"]
            for arr in (context, generated):
                if not isinstance(arr, list) or not all(isinstance(t, str) for t in arr):
                    raise ValueError("token arrays must contain strings")
            gt = obj.get("ground_truth_id")
            out.append(GenerationRecord(
                query_id=int(obj["query_id"]),
                context=tuple(context),
                generated=tuple(generated),
                truncated=bool(obj.get("truncated", False)),
                ground_truth_id=None if gt is None else int(gt),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad generation record ({exc})", lineno, path) from exc
    return out
