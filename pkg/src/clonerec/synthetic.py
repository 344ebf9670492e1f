"""Synthetic clone corpora for demos and tests.

Each functionality has a template method body; clones are produced by
renaming identifiers and dropping, duplicating or swapping statements, in the
spirit of type-2/type-3 clones.  The output is already tokenized, normalized
and marked.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .corpus import CloneMethodRecord, CloneReference, SearchCorpus
from .tokenizer import EOC, NUM_VAL, SOC, STR_VAL

_TYPES = ["int", "String", "File", "List", "byte", "long", "Object", "Map"]
_CALLS = ["read", "write", "close", "add", "get", "put", "open", "size", "copy",
          "delete", "parse", "format", "split", "append", "flush", "sort"]


def _statement(rng: np.random.Generator, names: Sequence[str], calls: Sequence[str]) -> list[str]:
    a, b = rng.choice(names, 2, replace=False)
    call = str(rng.choice(calls))
    kind = rng.integers(4)
    if kind == 0:
        return [a, "=", b, ".", call, "(", NUM_VAL, ")", ";"]
    if kind == 1:
        return ["if", "(", a, "!=", "null", ")", "{", b, ".", call, "(", a, ")", ";", "}"]
    if kind == 2:
        return ["for", "(", "int", "i", "=", NUM_VAL, ";", "i", "<", a, ".", call, "(", ")",
                ";", "i", "++", ")", "{", b, "+=", STR_VAL, ";", "}"]
    return [a, ".", call, "(", b, ",", STR_VAL, ")", ";"]


def _template(rng: np.random.Generator, fid: int) -> tuple[list[str], list[list[str]]]:
    names = [f"f{fid}v{j}" for j in range(4)]
    calls = list(rng.choice(_CALLS, 4, replace=False))
    ret = str(rng.choice(_TYPES))
    header = ["public", "static", ret, f"func{fid}", "(", str(rng.choice(_TYPES)), names[0], ")", "{"]
    body = [_statement(rng, names, calls) for _ in range(int(rng.integers(3, 6)))]
    body.append(["return", names[1], ";"])
    return header, body


def _mutate(rng: np.random.Generator, header: list[str], body: list[list[str]],
            variant: int, noise: float) -> list[str]:
    stmts = [list(s) for s in body]
    if rng.random() < noise and len(stmts) > 2:
        del stmts[int(rng.integers(len(stmts) - 1))]
    if rng.random() < noise:
        stmts.insert(int(rng.integers(len(stmts))), list(stmts[int(rng.integers(len(stmts)))]))
    if rng.random() < noise and len(stmts) > 2:
        i = int(rng.integers(len(stmts) - 2))
        stmts[i], stmts[i + 1] = stmts[i + 1], stmts[i]
    toks = header + [t for s in stmts for t in s] + ["}"]
    if variant and rng.random() < noise:
        # identifier renaming within the method
        old = toks[6]
        new = f"{old}_{variant}"
        toks = [new if t == old else t for t in toks]
    return [SOC] + toks + [EOC]


def synthetic_corpus(n_functionalities: int = 43, per_functionality: int = 10,
                     noise: float = 0.5, seed: int = 0) -> SearchCorpus:
    """Deduplicated corpus with ``per_functionality`` distinct clones per class.

    record_ids are consecutive from 1 and functionality ids from 0.
    """
    rng = np.random.default_rng(seed)
    records = []
    seen = set()
    rid = 1
    for fid in range(n_functionalities):
        header, body = _template(rng, fid)
        made, variant, attempts = 0, 0, 0
        while made < per_functionality:
            attempts += 1
            if attempts > 100 * per_functionality:
                raise RuntimeError("could not produce enough distinct clones")
            toks = tuple(_mutate(rng, header, body, variant, noise))
            variant += 1
            if toks in seen:
                continue
            seen.add(toks)
            ref = CloneReference(rid, fid, f"synthetic/F{fid}.java", 1, len(toks))
            records.append(CloneMethodRecord(ref, toks))
            rid += 1
            made += 1
    return SearchCorpus(records)
