"""Recommend real clone methods for a language-model-predicted method body."""

from .corpus import (
    CloneMethodRecord,
    CloneReference,
    SearchCorpus,
    build_corpus,
    extract,
    load_corpus,
    read_reference_table,
    save_corpus,
)
from .evaluation import (
    EvalReport,
    QueryResult,
    RougeScore,
    build_queries,
    evaluate_pipeline,
    mrr,
    rouge_l,
    rouge_n,
    top_k_accuracy,
)
from .lm import (
    GenerationConfig,
    NGramModel,
    extract_query_windows,
    generate_clone,
    ingest_generations,
    next_distribution,
    nucleus_sample,
    perplexity,
    train,
)
from .retrieval import TfIdfIndex, extract_clone_span, fit, rank, recommend, vectorize_query
from .tokenizer import Token, lex, mark_clone, normalize

__version__ = "0.1.0"

__all__ = [
    "CloneMethodRecord", "CloneReference", "SearchCorpus", "build_corpus", "extract",
    "load_corpus", "read_reference_table", "save_corpus",
    "EvalReport", "QueryResult", "RougeScore", "build_queries", "evaluate_pipeline", "mrr",
    "rouge_l", "rouge_n", "top_k_accuracy",
    "GenerationConfig", "NGramModel", "extract_query_windows", "generate_clone",
    "ingest_generations", "next_distribution", "nucleus_sample", "perplexity", "train",
    "TfIdfIndex", "extract_clone_span", "fit", "rank", "recommend", "vectorize_query",
    "Token", "lex", "mark_clone", "normalize",
]
