"""Evaluation harness: ROUGE, top-k accuracy, MRR and perplexity aggregates.

A query is a token window ending somewhere after a ``<soc>``; the model
completes it, the completed clone span is used as a retrieval query, and
the ranked methods are compared with the ground-truth method that actually
followed the window.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import CloneMethodRecord, SearchCorpus, dump_jsonl, iter_jsonl, ParseError
from .lm import (
    GenerationConfig,
    GenerationRecord,
    LanguageModel,
    QueryWindow,
    extract_query_windows,
    generate_clone,
    perplexity,
)
from .retrieval import TfIdfIndex, extract_clone_span, rank, vectorize_query
from .tokenizer import SOC, texts

EXACT = "exact"
FUNCTIONALITY = "functionality"
MATCHERS = (EXACT, FUNCTIONALITY)
ACCURACY_KS = (1, 3, 5, 10)
MRR_DEPTH = 10
ROUGE_METRICS = ("rouge-1", "rouge-2", "rouge-l")
RANK_GROUPS = (("Top 1", 1, 1), ("Top (2-4)", 2, 4), ("Top (5-10)", 5, 10))


class EmptyResultSet(ValueError):
    pass


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f_measure: float

    @classmethod
    def from_overlap(cls, overlap: int, n_candidate: int, n_reference: int) -> "RougeScore":
        p = overlap / n_candidate if n_candidate else 0.0
        r = overlap / n_reference if n_reference else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.precision, self.recall, self.f_measure)


def _ngrams(seq: Sequence[str], n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap: each n-gram counts at most as often as it
    occurs in the other sequence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = _ngrams(texts(candidate), n)
    ref = _ngrams(texts(reference), n)
    overlap = sum(min(c, ref[g]) for g, c in cand.items())
    return RougeScore.from_overlap(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length, bit-parallel over *b*.

    Each DP row is packed into one integer (Crochemore et al. 2001); the
    LCS length is the number of cleared bits after the last row.
    """
    masks: dict[str, int] = {}
    for i, y in enumerate(b):
        masks[y] = masks.get(y, 0) | (1 << i)
    full = (1 << len(b)) - 1
    v = full
    for x in a:
        u = v & masks.get(x, 0)
        v = ((v + u) | (v - u)) & full
    return len(b) - v.bit_count()


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    cand, ref = texts(candidate), texts(reference)
    return RougeScore.from_overlap(lcs_length(cand, ref), len(cand), len(ref))


def rouge_all(candidate: Sequence[str], reference: Sequence[str]) -> dict[str, RougeScore]:
    return {
        "rouge-1": rouge_n(candidate, reference, 1),
        "rouge-2": rouge_n(candidate, reference, 2),
        "rouge-l": rouge_l(candidate, reference),
    }


@dataclass(frozen=True)
class Recommendation:
    record_id: int
    score: float
    functionality_id: int
    exact_match: bool


@dataclass
class QueryResult:
    query_id: int
    context: tuple[str, ...]
    generated: tuple[str, ...]
    terminated: bool
    ground_truth_id: int
    ground_truth_tokens: tuple[str, ...]
    ground_truth_functionality: int
    ranked: tuple[Recommendation, ...]
    rouge_vs_ground_truth: dict[str, RougeScore]
    rouge_vs_ranked: tuple[dict[str, RougeScore], ...]
    perplexity_generated: float
    perplexity_ground_truth: float
    perplexity_ranked: tuple[float, ...]

    def first_match(self, matcher: str, depth: int = MRR_DEPTH) -> int | None:
        """1-based rank of the first matching recommendation, if any."""
        if matcher not in MATCHERS:
            raise ValueError(f"unknown matcher {matcher!r}")
        for pos, rec in enumerate(self.ranked[:depth], 1):
            if matcher == EXACT and rec.exact_match:
                return pos
            if matcher == FUNCTIONALITY and rec.functionality_id == self.ground_truth_functionality:
                return pos
        return None

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "context": list(self.context),
            "generated": list(self.generated),
            "terminated": self.terminated,
            "ground_truth_id": self.ground_truth_id,
            "ground_truth_tokens": list(self.ground_truth_tokens),
            "ground_truth_functionality": self.ground_truth_functionality,
            "ranked": [[r.record_id, r.score, r.functionality_id, r.exact_match] for r in self.ranked],
            "rouge_vs_ground_truth": {m: s.as_tuple() for m, s in self.rouge_vs_ground_truth.items()},
            "rouge_vs_ranked": [{m: s.as_tuple() for m, s in d.items()} for d in self.rouge_vs_ranked],
            "perplexity_generated": self.perplexity_generated,
            "perplexity_ground_truth": self.perplexity_ground_truth,
            "perplexity_ranked": list(self.perplexity_ranked),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QueryResult":
        def rouge(d):
            return {m: RougeScore(*v) for m, v in d.items()}
        return cls(
            query_id=obj["query_id"],
            context=tuple(obj["context"]),
            generated=tuple(obj["generated"]),
            terminated=obj["terminated"],
            ground_truth_id=obj["ground_truth_id"],
            ground_truth_tokens=tuple(obj["ground_truth_tokens"]),
            ground_truth_functionality=obj["ground_truth_functionality"],
            ranked=tuple(Recommendation(*r) for r in obj["ranked"]),
            rouge_vs_ground_truth=rouge(obj["rouge_vs_ground_truth"]),
            rouge_vs_ranked=tuple(rouge(d) for d in obj["rouge_vs_ranked"]),
            perplexity_generated=obj["perplexity_generated"],
            perplexity_ground_truth=obj["perplexity_ground_truth"],
            perplexity_ranked=tuple(obj["perplexity_ranked"]),
        )


def _check_results(results: Sequence[QueryResult]):
    if not results:
        raise EmptyResultSet("no query results to score")


def top_k_accuracy(results: Sequence[QueryResult], k: int, matcher: str = EXACT) -> float:
    """Fraction of queries with a match among the first *k* recommendations."""
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_results(results)
    hits = sum(r.first_match(matcher, depth=k) is not None for r in results)
    return hits / len(results)


def mrr(results: Sequence[QueryResult], matcher: str = EXACT) -> float:
    _check_results(results)
    total = 0.0
    for r in results:
        pos = r.first_match(matcher, depth=MRR_DEPTH)
        total += 1.0 / pos if pos else 0.0
    return total / len(results)


class Stat(NamedTuple):
    mean: float
    std: float
    count: int

    @classmethod
    def of(cls, values: Iterable[float]) -> "Stat":
        arr = np.asarray(list(values), dtype=float)
        if arr.size == 0:
            return cls(math.nan, math.nan, 0)
        return cls(float(arr.mean()), float(arr.std()), int(arr.size))

    def __str__(self):
        return f"{self.mean:.3f} ± {self.std:.3f}"


def aggregate(results: Sequence[QueryResult]) -> dict:
    """Mean and population std of every reported quantity."""
    if not results:
        return {}
    ppl = {"DCO": Stat.of(r.perplexity_generated for r in results),
           "GT": Stat.of(r.perplexity_ground_truth for r in results)}
    depth = max(len(r.ranked) for r in results)
    for i in range(depth):
        ppl[str(i + 1)] = Stat.of(r.perplexity_ranked[i] for r in results if i < len(r.perplexity_ranked))

    def rouge_stats(pairs: list[dict[str, RougeScore]]):
        return {
            m: {
                "precision": Stat.of(p[m].precision for p in pairs),
                "recall": Stat.of(p[m].recall for p in pairs),
                "f_measure": Stat.of(p[m].f_measure for p in pairs),
            }
            for m in ROUGE_METRICS
        }

    rouge = {"DCO vs GT": rouge_stats([r.rouge_vs_ground_truth for r in results])}
    for name, lo, hi in RANK_GROUPS:
        rouge[name] = rouge_stats([d for r in results for d in r.rouge_vs_ranked[lo - 1:hi]])
    accuracy = {}
    for matcher in MATCHERS:
        row = {"MRR": mrr(results, matcher)}
        for k in ACCURACY_KS:
            row[f"Top-{k}"] = top_k_accuracy(results, k, matcher)
        accuracy[matcher] = row
    return {"n_queries": len(results), "perplexity": ppl, "rouge": rouge, "accuracy": accuracy}


@dataclass
class EvalReport:
    results: list[QueryResult]
    failures: list[tuple[int, str]] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)

    @classmethod
    def from_results(cls, results: Iterable[QueryResult], failures=()) -> "EvalReport":
        ordered = sorted(results, key=lambda r: r.query_id)
        return cls(ordered, sorted(failures), aggregate(ordered))

    def write_rows(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.results:
                fh.write(dump_jsonl(r.to_json()))

    def write_failures(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for qid, msg in self.failures:
                fh.write(dump_jsonl({"query_id": qid, "error": msg}))

    def summary(self) -> str:
        return format_summary(self.aggregates, failures=len(self.failures))


def read_rows(path: str | os.PathLike) -> list[QueryResult]:
    rows = []
    for lineno, obj in iter_jsonl(path):
        try:
            rows.append(QueryResult.from_json(obj))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad result row ({exc})", lineno, path) from exc
    return rows


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), "  ".join("-" * w for w in widths)]
    lines += [fmt.format(*map(str, row)) for row in rows]
    return "\n".join(lines)


def format_summary(agg: dict, failures: int = 0) -> str:
    """Plain-text ROUGE, perplexity and accuracy tables."""
    if not agg:
        return f"queries: 0\nfailed queries: {failures}\n"
    parts = [f"queries: {agg['n_queries']}", f"failed queries: {failures}", ""]
    groups = ["DCO vs GT"] + [g for g, _, _ in RANK_GROUPS]
    rows = []
    for m in ROUGE_METRICS:
        rows.append([m.upper()] + [""] * len(groups))
        for part in ("precision", "recall", "f_measure"):
            rows.append(["  " + part] + [str(agg["rouge"][g][m][part]) for g in groups])
    parts += ["ROUGE (candidate = generated clone)", _table([""] + groups, rows), ""]
    parts += ["Perplexity",
              _table(["", "perplexity"], [[k, str(v)] for k, v in agg["perplexity"].items()]), ""]
    acc = agg["accuracy"]
    keys = list(acc[EXACT])
    parts += ["MRR and top-k accuracy",
              _table(["", "Exact Match", "Functionality Type Match"],
                     [[k, f"{acc[EXACT][k]:.3f}", f"{acc[FUNCTIONALITY][k]:.3f}"] for k in keys])]
    return "\n".join(parts) + "\n"


@dataclass(frozen=True)
class EvalQuery:
    query_id: int
    window: QueryWindow
    ground_truth_id: int


def build_queries(test_records: Sequence[CloneMethodRecord],
                  window_len: int = 20) -> tuple[list[str], list[EvalQuery]]:
    """Concatenate held-out methods into a stream and cut query windows.

    The ground truth of a window is the method opened by its first ``<soc>``.
    """
    stream, starts = [], {}
    for rec in test_records:
        starts[len(stream)] = rec.record_id
        stream.extend(rec.tokens)
    queries = []
    for qid, win in enumerate(extract_query_windows(stream, window_len)):
        soc_at = win.offset + win.tokens.index(SOC)
        queries.append(EvalQuery(qid, win, starts[soc_at]))
    return stream, queries


def score_generation(model: LanguageModel, corpus: SearchCorpus, index: TfIdfIndex,
                     query_id: int, context: Sequence[str], generated: Sequence[str],
                     ground_truth_id: int, k: int = 10) -> QueryResult:
    """Retrieve and score one completed generation against its ground truth."""
    gt = corpus.get(ground_truth_id)
    span = extract_clone_span(generated)
    ranked_ids = rank(index, vectorize_query(index, span.tokens), k)
    ranked, ranked_tokens = [], []
    for rid, score in ranked_ids:
        rec = corpus.get(rid)
        ranked.append(Recommendation(rid, score, rec.functionality_id,
                                     rid == gt.record_id or rec.tokens == gt.tokens))
        ranked_tokens.append(rec.tokens)
    return QueryResult(
        query_id=query_id,
        context=tuple(texts(context)),
        generated=tuple(span.tokens),
        terminated=span.terminated,
        ground_truth_id=gt.record_id,
        ground_truth_tokens=gt.tokens,
        ground_truth_functionality=gt.functionality_id,
        ranked=tuple(ranked),
        rouge_vs_ground_truth=rouge_all(span.tokens, gt.tokens),
        rouge_vs_ranked=tuple(rouge_all(span.tokens, toks) for toks in ranked_tokens),
        perplexity_generated=perplexity(model, span.tokens),
        perplexity_ground_truth=perplexity(model, gt.tokens),
        perplexity_ranked=tuple(perplexity(model, toks) for toks in ranked_tokens),
    )


def query_rng(seed: int, query_id: int) -> np.random.Generator:
    """Independent generator per query so results do not depend on order."""
    return np.random.default_rng([seed, query_id])


def evaluate_pipeline(model: LanguageModel, corpus: SearchCorpus, index: TfIdfIndex,
                      queries: Sequence[EvalQuery], config: GenerationConfig,
                      k: int = 10) -> EvalReport:
    """Generate, retrieve and score every query; failures are collected."""
    results, failures = [], []
    for q in queries:
        try:
            gen = generate_clone(model, q.window.tokens, config, query_rng(config.rng_seed, q.query_id))
            results.append(score_generation(model, corpus, index, q.query_id, q.window.tokens,
                                            gen.tokens, q.ground_truth_id, k))
        except Exception as exc:  # per-query isolation
            failures.append((q.query_id, f"{type(exc).__name__}: {exc}"))
    return EvalReport.from_results(results, failures)


def evaluate_generations(model: LanguageModel, corpus: SearchCorpus, index: TfIdfIndex,
                         records: Sequence[GenerationRecord], k: int = 10) -> EvalReport:
    """Score externally produced generations; each needs a ground_truth_id."""
    results, failures = [], []
    for g in records:
        try:
            if g.ground_truth_id is None:
                raise ValueError("generation record has no ground_truth_id")
            results.append(score_generation(model, corpus, index, g.query_id, g.context,
                                            g.generated, g.ground_truth_id, k))
        except Exception as exc:  # per-query isolation
            failures.append((g.query_id, f"{type(exc).__name__}: {exc}"))
    return EvalReport.from_results(results, failures)


def aggregates_to_json(agg: dict) -> dict:
    """JSON-friendly copy of :func:`aggregate` output."""
    def conv(x):
        if isinstance(x, Stat):
            return {"mean": x.mean, "std": x.std, "count": x.count}
        if isinstance(x, dict):
            return {k: conv(v) for k, v in x.items()}
        return x
    return conv(agg)


def write_aggregates(path: str | os.PathLike, agg: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(aggregates_to_json(agg), fh, indent=2)
        fh.write("\n")
