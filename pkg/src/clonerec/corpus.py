"""Search corpus construction: extraction, marking, normalization, dedupe.

Clone references point at line ranges of Java files.  Each referenced method
is lexed, literal-normalized and wrapped in ``<soc>``/``<eoc>``; methods with
identical token sequences collapse to the lowest ``record_id``.

Corpus files are JSON Lines, one record per line::

    {"record_id": 7, "functionality_id": 2, "file_path": "a/B.java",
     "start_line": 10, "end_line": 24, "tokens": ["<soc>", ..., "<eoc>"]}
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .tokenizer import EOC, SOC, LexError, tokenize_method

REFERENCE_COLUMNS = ("record_id", "functionality_id", "file_path", "start_line", "end_line")


class CorpusError(Exception):
    pass


class ParseError(CorpusError, ValueError):
    """Malformed corpus, reference table or generations file."""

    def __init__(self, message: str, line: int, path: str | os.PathLike | None = None):
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path


class ExtractionError(CorpusError):
    kind = "extraction"

    def __init__(self, message: str, reference: "CloneReference"):
        super().__init__(message)
        self.reference = reference


class SourceFileNotFound(ExtractionError):
    kind = "FileNotFound"


class LineRangeOutOfBounds(ExtractionError):
    kind = "LineRangeOutOfBounds"


@dataclass(frozen=True)
class CloneReference:
    record_id: int
    functionality_id: int
    file_path: str
    start_line: int
    end_line: int

    def __post_init__(self):
        if not self.file_path:
            raise ValueError("file_path must be non-empty")
        if self.start_line < 1 or self.start_line > self.end_line:
            raise ValueError(
                f"bad line range {self.start_line}..{self.end_line} for record {self.record_id}"
            )


def dedupe_key(tokens: Sequence[str]) -> str:
    """Canonical hash of a token-text sequence."""
    payload = json.dumps(list(tokens), ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CloneMethodRecord:
    source_ref: CloneReference
    tokens: tuple[str, ...]
    dedupe_key: str = field(init=False, compare=False)

    def __post_init__(self):
        toks = tuple(self.tokens)
        if len(toks) < 2 or toks[0] != SOC or toks[-1] != EOC:
            raise ValueError(f"record {self.source_ref.record_id} is not a marked clone method")
        if toks.count(SOC) != 1 or toks.count(EOC) != 1:
            raise ValueError(f"record {self.source_ref.record_id} has nested clone markers")
        object.__setattr__(self, "tokens", toks)
        object.__setattr__(self, "dedupe_key", dedupe_key(toks))

    @property
    def record_id(self) -> int:
        return self.source_ref.record_id

    @property
    def functionality_id(self) -> int:
        return self.source_ref.functionality_id


class SearchCorpus:
    """Immutable, record_id-ordered collection of distinct clone methods."""

    def __init__(self, records: Iterable[CloneMethodRecord] = ()):
        self._records = tuple(sorted(records, key=lambda r: r.record_id))
        self._position: dict[int, int] = {}
        self._by_key: dict[str, int] = {}
        for pos, rec in enumerate(self._records):
            if rec.record_id in self._position:
                raise ValueError(f"duplicate record_id {rec.record_id}")
            if rec.dedupe_key in self._by_key:
                raise ValueError(
                    f"records {self._by_key[rec.dedupe_key]} and {rec.record_id} are identical"
                )
            self._position[rec.record_id] = pos
            self._by_key[rec.dedupe_key] = rec.record_id

    @property
    def records(self) -> tuple[CloneMethodRecord, ...]:
        return self._records

    def __len__(self):
        return len(self._records)

    def __iter__(self) -> Iterator[CloneMethodRecord]:
        return iter(self._records)

    def __getitem__(self, position: int) -> CloneMethodRecord:
        return self._records[position]

    def __eq__(self, other):
        if not isinstance(other, SearchCorpus):
            return NotImplemented
        return self._records == other._records

    def __repr__(self):
        return f"SearchCorpus({len(self)} records)"

    def position(self, record_id: int) -> int:
        return self._position[record_id]

    def get(self, record_id: int) -> CloneMethodRecord:
        return self._records[self._position[record_id]]

    def __contains__(self, record_id) -> bool:
        return record_id in self._position

    def find(self, tokens: Sequence[str]) -> int | None:
        """record_id of the record with exactly these tokens, if any."""
        return self._by_key.get(dedupe_key(tokens))


@dataclass(frozen=True)
class SkippedRecord:
    record_id: int
    error_kind: str
    message: str


def read_reference_table(path: str | os.PathLike, delimiter: str | None = None) -> list[CloneReference]:
    """Load a header-bearing delimited reference table.

    The delimiter defaults to tab for ``.tsv`` files and comma otherwise.
    """
    path = Path(path)
    if delimiter is None:
        delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
    refs = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        missing = set(REFERENCE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"missing columns {sorted(missing)}", 1, path)
        for row in reader:
            line = reader.line_num
            try:
                ref = CloneReference(
                    record_id=int(row["record_id"]),
                    functionality_id=int(row["functionality_id"]),
                    file_path=row["file_path"].strip(),
                    start_line=int(row["start_line"]),
                    end_line=int(row["end_line"]),
                )
            except (TypeError, ValueError) as exc:
                raise ParseError(str(exc), line, path) from exc
            if ref.record_id in seen:
                raise ParseError(f"duplicate record_id {ref.record_id}", line, path)
            seen.add(ref.record_id)
            refs.append(ref)
    return refs


def write_reference_table(path: str | os.PathLike, references: Iterable[CloneReference]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REFERENCE_COLUMNS)
        for r in references:
            writer.writerow([r.record_id, r.functionality_id, r.file_path, r.start_line, r.end_line])


def _slice_lines(ref: CloneReference, root: Path, cache: dict) -> str:
    target = (root / ref.file_path).resolve()
    if not target.is_relative_to(root):
        raise SourceFileNotFound(f"{ref.file_path} escapes the source root", ref)
    if target not in cache:
        try:
            cache[target] = target.read_text(encoding="utf-8", errors="replace").splitlines(keepends=True)
        except (FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
            raise SourceFileNotFound(f"{ref.file_path}: no such file", ref) from exc
    lines = cache[target]
    if ref.end_line > len(lines):
        raise LineRangeOutOfBounds(
            f"{ref.file_path} has {len(lines)} lines, reference wants {ref.start_line}..{ref.end_line}",
            ref,
        )
    return "".join(lines[ref.start_line - 1:ref.end_line])


def extract(
    references: Iterable[CloneReference], source_root: str | os.PathLike
) -> tuple[list[tuple[str, CloneReference]], list[ExtractionError]]:
    """Slice each referenced line range out of its source file.

    Failures do not stop extraction; they are returned alongside the
    successfully extracted ``(text, reference)`` pairs.
    """
    root = Path(source_root).resolve()
    if not root.is_dir():
        raise FileNotFoundError(f"source root {source_root} is not a directory")
    cache: dict = {}
    extracted, failures = [], []
    for ref in references:
        try:
            extracted.append((_slice_lines(ref, root, cache), ref))
        except ExtractionError as exc:
            failures.append(exc)
    return extracted, failures


def build_corpus(
    extracted: Iterable[tuple[str, CloneReference]], lenient: bool = False
) -> tuple[SearchCorpus, list[SkippedRecord]]:
    """Tokenize, normalize and mark extracted methods, then dedupe.

    Records that fail to lex are reported as skipped rather than aborting
    the build.  Among identical token sequences the lowest record_id wins,
    so the result does not depend on input order.
    """
    items = sorted(extracted, key=lambda item: item[1].record_id)
    ids = [ref.record_id for _, ref in items]
    if len(set(ids)) != len(ids):
        raise ValueError("record_ids must be unique")
    kept: dict[str, CloneMethodRecord] = {}
    skipped = []
    for text, ref in items:
        try:
            rec = CloneMethodRecord(ref, tuple(tokenize_method(text, lenient=lenient)))
        except (LexError, ValueError) as exc:
            skipped.append(SkippedRecord(ref.record_id, type(exc).__name__, str(exc)))
            continue
        kept.setdefault(rec.dedupe_key, rec)
    return SearchCorpus(kept.values()), skipped


def record_to_json(rec: CloneMethodRecord) -> dict:
    r = rec.source_ref
    return {
        "record_id": r.record_id,
        "functionality_id": r.functionality_id,
        "file_path": r.file_path,
        "start_line": r.start_line,
        "end_line": r.end_line,
        "tokens": list(rec.tokens),
    }


def record_from_json(obj: dict) -> CloneMethodRecord:
    tokens = obj["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ValueError("tokens must be an array of strings")
    ref = CloneReference(
        record_id=int(obj["record_id"]),
        functionality_id=int(obj["functionality_id"]),
        file_path=str(obj["file_path"]),
        start_line=int(obj["start_line"]),
        end_line=int(obj["end_line"]),
    )
    return CloneMethodRecord(ref, tuple(tokens))


def iter_jsonl(path: str | os.PathLike) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for each non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno, path) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", lineno, path)
            yield lineno, obj


def dump_jsonl(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": ")) + "\n"


def save_corpus(corpus: SearchCorpus, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus:
            fh.write(dump_jsonl(record_to_json(rec)))


def load_corpus(path: str | os.PathLike) -> SearchCorpus:
    records = []
    for lineno, obj in iter_jsonl(path):
        try:
            records.append(record_from_json(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad record ({exc})", lineno, path) from exc
    try:
        return SearchCorpus(records)
    except ValueError as exc:
        raise ParseError(str(exc), 0, path) from exc


def write_skipped_report(path: str | os.PathLike, skipped: Iterable[SkippedRecord | ExtractionError]) -> int:
    """Write line-delimited ``(record_id, error_kind, message)`` rows."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for item in skipped:
            if isinstance(item, ExtractionError):
                item = SkippedRecord(item.reference.record_id, item.kind, str(item))
            fh.write(dump_jsonl({
                "record_id": item.record_id,
                "error_kind": item.error_kind,
                "message": item.message,
            }))
            n += 1
    return n


def token_stream(records: Iterable[CloneMethodRecord]) -> list[str]:
    """Concatenate marked methods into one token stream."""
    stream: list[str] = []
    for rec in records:
        stream.extend(rec.tokens)
    return stream
