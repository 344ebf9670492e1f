"""Command-line entry point.

Every flag can also come from a JSON manifest (``--manifest run.json``)
whose keys are the long flag names with dashes or underscores; flags given on
the command line win.  Exit codes: 0 success, 1 usage error, 2 input or
parse error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from .corpus import (
    CorpusError,
    build_corpus,
    extract,
    load_corpus,
    read_reference_table,
    save_corpus,
    write_skipped_report,
)
from .evaluation import (
    build_queries,
    evaluate_generations,
    evaluate_pipeline,
    query_rng,
    write_aggregates,
)
from .lm import (
    DEFAULT_NUCLEUS_P,
    DEFAULT_WINDOW_LEN,
    GenerationConfig,
    GenerationRecord,
    NGramModel,
    generate_clone,
    ingest_generations,
    train,
    write_generations,
)
from .retrieval import SNAPSHOT_FORMAT, TfIdfIndex, extract_clone_span, fit, rank, vectorize_query
from .tokenizer import SOC, LexError, lex, normalize, texts

log = logging.getLogger("clonerec")

DEFAULT_SEED = 0
DEFAULT_ORDER = 3
EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

# flag name -> default, shared between argparse and manifest merging
DEFAULTS = {
    "window_len": DEFAULT_WINDOW_LEN,
    "threshold": DEFAULT_NUCLEUS_P,
    "order": DEFAULT_ORDER,
    "k": 10,
    "seed": DEFAULT_SEED,
    "max_tokens": 512,
    "lenient": False,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add(p, *names, **kw):
    p.add_argument(*names, default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clonerec", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_):
        p = sub.add_parser(name, help=help_)
        _add(p, "--manifest", help="JSON file supplying any of the flags")
        return p

    p = command("build-corpus", "extract, normalize and dedupe referenced methods")
    _add(p, "--reference-table", help="CSV/TSV with record_id,functionality_id,file_path,start_line,end_line")
    _add(p, "--source-root", help="directory the reference file paths are relative to")
    _add(p, "--corpus", help="output corpus file (JSON lines)")
    _add(p, "--skipped-report", help="where to write skipped records (default: <corpus>.skipped.jsonl)")
    p.add_argument("--lenient", action="store_true", default=None,
                   help="map unknown characters to <unk> instead of skipping the record")

    p = command("build-index", "write a TF-IDF index snapshot for a corpus")
    _add(p, "--corpus")
    _add(p, "--index", help="output snapshot file")

    p = command("train-lm", "train the reference n-gram model")
    _add(p, "--corpus")
    _add(p, "--order", type=int)
    _add(p, "--model", help="output model file")

    p = command("generate", "complete every <soc> window of a test stream")
    _add(p, "--model")
    _add(p, "--test-stream", help="corpus-format file whose methods form the test stream")
    _add(p, "--window-len", type=int)
    _add(p, "--threshold", type=float, help="nucleus threshold in (0, 1]")
    _add(p, "--seed", type=int)
    _add(p, "--max-tokens", type=int)
    _add(p, "--generations", help="output generations file")

    p = command("recommend", "rank corpus methods against a query")
    _add(p, "--index", help="index snapshot or corpus file")
    _add(p, "--corpus", help="corpus file (alternative to --index)")
    g = p.add_mutually_exclusive_group()
    _add(g, "--query", help="inline Java text / token texts")
    _add(g, "--query-file")
    _add(g, "--generations", help="generations file; every record is ranked")
    _add(p, "--k", type=int)

    p = command("evaluate", "run generation, retrieval and scoring; write a report")
    _add(p, "--corpus")
    _add(p, "--index")
    _add(p, "--model", help="model file; trained from --corpus with --order if absent")
    _add(p, "--order", type=int)
    _add(p, "--test-stream")
    _add(p, "--generations", help="score these generations instead of generating")
    _add(p, "--window-len", type=int)
    _add(p, "--threshold", type=float)
    _add(p, "--seed", type=int)
    _add(p, "--max-tokens", type=int)
    _add(p, "--k", type=int)
    _add(p, "--report-dir")

    p = command("query", "interactive: read contexts from stdin, print recommendations")
    _add(p, "--index")
    _add(p, "--corpus")
    _add(p, "--model")
    _add(p, "--order", type=int)
    _add(p, "--threshold", type=float)
    _add(p, "--seed", type=int)
    _add(p, "--max-tokens", type=int)
    _add(p, "--k", type=int)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < manifest < command line."""
    opts = dict(DEFAULTS)
    if args.manifest:
        try:
            with open(args.manifest, encoding="utf-8") as fh:
                manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{args.manifest}: invalid manifest ({exc.msg})") from exc
        if not isinstance(manifest, dict):
            raise ValueError(f"{args.manifest}: manifest must be a JSON object")
        # accept both flat manifests and the echoed {"paths", "parameters"} form
        for section in ("paths", "parameters"):
            if isinstance(manifest.get(section), dict):
                manifest.update(manifest.pop(section))
        known = set(vars(args))
        for key, value in manifest.items():
            key = key.replace("-", "_")
            if key in known and value is not None:
                opts[key] = value
    for key, value in vars(args).items():
        if value is not None:
            opts[key] = value
    return opts


def _need(opts, *keys):
    missing = [k for k in keys if not opts.get(k)]
    if missing:
        raise UsageError("missing " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _config(opts) -> GenerationConfig:
    try:
        return GenerationConfig(float(opts["threshold"]), int(opts["max_tokens"]),
                                rng_seed=int(opts["seed"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_index_and_corpus(opts):
    """Returns (index, corpus-or-None) from --index (snapshot or corpus) / --corpus."""
    corpus = load_corpus(opts["corpus"]) if opts.get("corpus") else None
    path = opts.get("index")
    if path:
        with open(path, encoding="utf-8") as fh:
            head = fh.read(64)
        if SNAPSHOT_FORMAT in head:
            return TfIdfIndex.load(path), corpus
        corpus = load_corpus(path)
    if corpus is None:
        raise UsageError("need --index or --corpus")
    return fit(corpus), corpus


def _model(opts, corpus):
    if opts.get("model"):
        return NGramModel.load(opts["model"])
    if corpus is None:
        raise UsageError("need --model or --corpus to train one")
    return train([r.tokens for r in corpus], int(opts["order"]))


def _query_tokens(text: str) -> list[str]:
    return texts(normalize(lex(text, lenient=True)))


def _print_ranking(index: TfIdfIndex, ranking, out, label=None):
    fids = dict(zip(index.record_ids, index.functionality_ids or [None] * index.n_docs))
    if label is not None:
        print(f"# {label}", file=out)
    for pos, (rid, score) in enumerate(ranking, 1):
        print(f"{pos}\t{rid}\t{fids[rid]}\t{score:.6f}", file=out)


def _rank_tokens(index, tokens, k):
    if SOC in tokens:
        tokens = extract_clone_span(tokens).tokens
    return rank(index, vectorize_query(index, tokens), k)


def cmd_build_corpus(opts) -> int:
    _need(opts, "reference_table", "source_root", "corpus")
    if not Path(opts["source_root"]).is_dir():
        log.error("source root %s does not exist", opts["source_root"])
        return EXIT_INPUT
    refs = read_reference_table(opts["reference_table"])
    extracted, failures = extract(refs, opts["source_root"])
    corpus, skipped = build_corpus(extracted, lenient=bool(opts["lenient"]))
    save_corpus(corpus, opts["corpus"])
    report = opts.get("skipped_report") or str(opts["corpus"]) + ".skipped.jsonl"
    n_skipped = write_skipped_report(report, [*failures, *skipped])
    log.info("%d references -> %d distinct methods, %d skipped", len(refs), len(corpus), n_skipped)
    print(f"wrote {len(corpus)} records to {opts['corpus']} ({n_skipped} skipped, see {report})")
    if refs and not (extracted and len(skipped) < len(extracted)):
        log.error("every reference failed")
        return EXIT_INPUT
    return EXIT_OK


def cmd_build_index(opts) -> int:
    _need(opts, "corpus", "index")
    index = fit(load_corpus(opts["corpus"]))
    index.save(opts["index"])
    print(f"indexed {index.n_docs} documents, {len(index.terms)} terms -> {opts['index']}")
    return EXIT_OK


def cmd_train_lm(opts) -> int:
    _need(opts, "corpus", "model")
    order = int(opts["order"])
    if order < 1:
        raise UsageError("--order must be >= 1")
    corpus = load_corpus(opts["corpus"])
    model = train([r.tokens for r in corpus], order)
    model.save(opts["model"])
    print(f"trained order-{order} model, vocabulary {model.vocab_size} -> {opts['model']}")
    return EXIT_OK


def _generate_all(model, queries, config):
    out = []
    for q in queries:
        gen = generate_clone(model, q.window.tokens, config, query_rng(config.rng_seed, q.query_id))
        out.append(GenerationRecord(q.query_id, q.window.tokens, tuple(gen.tokens),
                                    gen.truncated, q.ground_truth_id))
    return out


def cmd_generate(opts) -> int:
    _need(opts, "model", "test_stream", "generations")
    config = _config(opts)
    if int(opts["window_len"]) < 1:
        raise UsageError("--window-len must be >= 1")
    model = NGramModel.load(opts["model"])
    _, queries = build_queries(list(load_corpus(opts["test_stream"])), int(opts["window_len"]))
    if not queries:
        log.warning("no window of the test stream contains <soc>")
    records = _generate_all(model, queries, config)
    write_generations(opts["generations"], records)
    print(f"wrote {len(records)} generations to {opts['generations']}")
    return EXIT_OK


def cmd_recommend(opts, out=None) -> int:
    out = out or sys.stdout
    k = int(opts["k"])
    if k < 1:
        raise UsageError("--k must be >= 1")
    index, _ = _load_index_and_corpus(opts)
    if opts.get("generations"):
        for rec in ingest_generations(opts["generations"]):
            _print_ranking(index, _rank_tokens(index, list(rec.generated), k), out,
                           label=f"query {rec.query_id}")
        return EXIT_OK
    if opts.get("query") is not None:
        text = opts["query"]
    elif opts.get("query_file"):
        text = Path(opts["query_file"]).read_text(encoding="utf-8")
    else:
        raise UsageError("need --query, --query-file or --generations")
    _print_ranking(index, _rank_tokens(index, _query_tokens(text), k), out)
    return EXIT_OK


def _manifest_record(opts) -> dict:
    paths = {k: opts.get(k) for k in ("reference_table", "source_root", "corpus", "index",
                                        "model", "test_stream", "generations", "report_dir")}
    params = {k: opts.get(k) for k in ("window_len", "threshold", "order", "k", "seed", "max_tokens")}
    return {"paths": paths, "parameters": params}


def cmd_evaluate(opts) -> int:
    _need(opts, "report_dir")
    if not (opts.get("test_stream") or opts.get("generations")):
        raise UsageError("need --test-stream or --generations")
    started = datetime.now(timezone.utc).isoformat()
    config = _config(opts)
    index, corpus = _load_index_and_corpus(opts)
    if corpus is None:
        raise UsageError("evaluate needs the corpus (--corpus) for ground-truth lookup")
    model = _model(opts, corpus)
    k = int(opts["k"])
    if opts.get("generations"):
        report = evaluate_generations(model, corpus, index, ingest_generations(opts["generations"]), k)
    else:
        _, queries = build_queries(list(load_corpus(opts["test_stream"])), int(opts["window_len"]))
        report = evaluate_pipeline(model, corpus, index, queries, config, k)
    outdir = Path(opts["report_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    report.write_rows(outdir / "rows.jsonl")
    report.write_failures(outdir / "failures.jsonl")
    write_aggregates(outdir / "aggregates.json", report.aggregates)
    summary = report.summary()
    (outdir / "summary.txt").write_text(summary, encoding="utf-8")
    manifest = _manifest_record(opts)
    manifest["timestamps"] = {"started": started, "finished": datetime.now(timezone.utc).isoformat()}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(summary, end="")
    if report.failures and not report.results:
        log.error("every query failed")
        return EXIT_INPUT
    return EXIT_OK


def cmd_query(opts, stdin=None, out=None) -> int:
    stdin, out = stdin or sys.stdin, out or sys.stdout
    config = _config(opts)
    index, corpus = _load_index_and_corpus(opts)
    model = _model(opts, corpus)
    k = int(opts["k"])
    for lineno, line in enumerate(stdin, 1):
        if not line.strip():
            continue
        try:
            context = texts(normalize(lex(line)))
        except LexError as exc:
            print(f"# line {lineno}: {exc}", file=out)
            continue
        if SOC not in context:
            context.append(SOC)
        gen = generate_clone(model, context, config, query_rng(config.rng_seed, lineno))
        span = extract_clone_span(gen.tokens)
        print(f"# line {lineno}: {' '.join(span.tokens)}", file=out)
        _print_ranking(index, rank(index, vectorize_query(index, span.tokens), k), out)
        out.flush()
    return EXIT_OK


COMMANDS = {
    "build-corpus": cmd_build_corpus,
    "build-index": cmd_build_index,
    "train-lm": cmd_train_lm,
    "generate": cmd_generate,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "query": cmd_query,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"clonerec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, CorpusError) as exc:
        print(f"clonerec {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
