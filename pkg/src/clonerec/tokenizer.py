"""Java 8 lexer and token normalization for clone-method corpora.

Source text is split into lexical tokens (whitespace and comments dropped),
literal values are replaced with placeholder meta-tokens, and method bodies
are wrapped in ``<soc>`` / ``<eoc>`` markers.  Everything here is a pure
function over immutable values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

SOC = "<soc>"
EOC = "<eoc>"
NUM_VAL = "<num_val>"
STR_VAL = "<str_val>"
UNK = "<unk>"
META_TOKENS = (SOC, EOC, NUM_VAL, STR_VAL, UNK)

IDENTIFIER = "identifier"
KEYWORD = "keyword"
OPERATOR = "operator"
SEPARATOR = "separator"
NUMERIC_LITERAL = "numeric-literal"
STRING_LITERAL = "string-literal"
CHAR_LITERAL = "char-literal"
META = "meta"
TOKEN_KINDS = (
    IDENTIFIER, KEYWORD, OPERATOR, SEPARATOR,
    NUMERIC_LITERAL, STRING_LITERAL, CHAR_LITERAL, META,
)

# JLS 3.9; ``true``/``false``/``null`` are literals in the JLS but are kept
# verbatim here, so they are lexed as keywords.
JAVA_KEYWORDS = frozenset("""
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
""".split())
RESERVED_LITERALS = frozenset(("true", "false", "null"))

SEPARATORS = ("...", "::", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@")
# Right shifts are emitted as repeated ``>`` tokens, as javalang does, so
# nested generics close one bracket per token.
OPERATORS = (
    ">>>=", "<<=", ">>=", "->", "==", ">=", "<=", "!=", "&&", "||",
    "++", "--", "<<", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=",
    "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
)


class LexError(ValueError):
    """Raised when source text cannot be tokenized."""

    def __init__(self, message: str, offset: int, line: int):
        super().__init__(f"{message} at line {line} (byte offset {offset})")
        self.offset = offset
        self.line = line


class UnterminatedString(LexError):
    pass


class UnterminatedComment(LexError):
    pass


class UnknownCharacter(LexError):
    pass


class AlreadyMarked(ValueError):
    """Raised when marking a sequence that already has clone markers."""


@dataclass(frozen=True)
class Token:
    kind: str
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")
        if self.kind not in TOKEN_KINDS:
            raise ValueError(f"unknown token kind {self.kind!r}")
        if self.kind == META and self.text not in META_TOKENS:
            raise ValueError(f"{self.text!r} is not a meta-token")

    def __str__(self):
        return self.text


TokenSequence = Sequence[Token]

_DIGITS = r"[0-9](?:[0-9_]*[0-9])?"
_HEX = r"[0-9a-fA-F](?:[0-9a-fA-F_]*[0-9a-fA-F])?"
_EXP = rf"[eE][+-]?{_DIGITS}"
_NUMBER = re.compile(
    "|".join((
        rf"0[xX](?:{_HEX})?(?:\.(?:{_HEX})?)?[pP][+-]?{_DIGITS}[fFdD]?",
        rf"0[xX]{_HEX}[lL]?",
        r"0[bB][01](?:[01_]*[01])?[lL]?",
        rf"{_DIGITS}\.(?:{_DIGITS})?(?:{_EXP})?[fFdD]?",
        rf"\.{_DIGITS}(?:{_EXP})?[fFdD]?",
        rf"{_DIGITS}{_EXP}[fFdD]?",
        rf"{_DIGITS}[fFdDlL]?",
    ))
)
_IDENT = re.compile(r"(?:[^\W\d]|\$)[\w$]*")
_META = re.compile("|".join(re.escape(m) for m in META_TOKENS))
_PUNCT = sorted(
    [(s, SEPARATOR) for s in SEPARATORS] + [(o, OPERATOR) for o in OPERATORS],
    key=lambda item: -len(item[0]),
)


def _line_and_offset(source: str, pos: int) -> tuple[int, int]:
    prefix = source[:pos]
    return prefix.count("\n") + 1, len(prefix.encode("utf-8"))


def _error(cls, message, source, pos):
    line, offset = _line_and_offset(source, pos)
    return cls(message, offset, line)


def _scan_quoted(source: str, start: int, quote: str) -> int:
    """Return the index just past the closing quote of a literal at *start*."""
    i = start + 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\\":
            i += 2
            continue
        if c == quote:
            return i + 1
        if c in "\r\n":
            break
        i += 1
    kind = "string" if quote == '"' else "character"
    raise _error(UnterminatedString, f"unterminated {kind} literal", source, start)


def lex(source: str, lenient: bool = False) -> list[Token]:
    """Split Java source text into tokens.

    Whitespace and comments are discarded.  Literals keep their surface text
    and are tagged with their literal kind; use :func:`normalize` to replace
    them.  Meta-tokens such as ``<soc>`` are recognized as single tokens so
    normalized output can be lexed again.

    With ``lenient=True`` an unrecognized character becomes an ``<unk>``
    token instead of raising :class:`UnknownCharacter`.
    """
    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if source.startswith("//", i):
            end = source.find("\n", i)
            i = n if end < 0 else end + 1
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end < 0:
                raise _error(UnterminatedComment, "unterminated block comment", source, i)
            i = end + 2
            continue
        if c == '"':
            end = _scan_quoted(source, i, '"')
            tokens.append(Token(STRING_LITERAL, source[i:end]))
            i = end
            continue
        if c == "'":
            end = _scan_quoted(source, i, "'")
            tokens.append(Token(CHAR_LITERAL, source[i:end]))
            i = end
            continue
        if c == "<":
            m = _META.match(source, i)
            if m:
                tokens.append(Token(META, m.group()))
                i = m.end()
                continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            if m:
                tokens.append(Token(NUMERIC_LITERAL, m.group()))
                i = m.end()
                continue
        m = _IDENT.match(source, i)
        if m:
            word = m.group()
            kind = KEYWORD if word in JAVA_KEYWORDS or word in RESERVED_LITERALS else IDENTIFIER
            tokens.append(Token(kind, word))
            i = m.end()
            continue
        for text, kind in _PUNCT:
            if source.startswith(text, i):
                tokens.append(Token(kind, text))
                i += len(text)
                break
        else:
            if not lenient:
                raise _error(UnknownCharacter, f"unknown character {c!r}", source, i)
            tokens.append(Token(META, UNK))
            i += 1
    return tokens


def normalize(tokens: Iterable[Token]) -> list[Token]:
    """Replace numeric literals with ``<num_val>`` and string/char literals
    with ``<str_val>``; other tokens pass through unchanged."""
    out = []
    for tok in tokens:
        if tok.kind == NUMERIC_LITERAL:
            tok = Token(NUMERIC_LITERAL, NUM_VAL)
        elif tok.kind in (STRING_LITERAL, CHAR_LITERAL):
            tok = Token(tok.kind, STR_VAL)
        out.append(tok)
    return out


def mark_clone(tokens: Iterable[Token]) -> list[Token]:
    body = list(tokens)
    if any(t.text in (SOC, EOC) for t in body):
        raise AlreadyMarked("sequence already contains a clone marker")
    return [Token(META, SOC), *body, Token(META, EOC)]


def texts(tokens: Iterable[Token | str]) -> list[str]:
    """Token texts of a sequence; plain strings pass through."""
    return [t if isinstance(t, str) else t.text for t in tokens]


def tokenize_method(source: str, lenient: bool = False) -> list[str]:
    """Lex, normalize and mark a method body; returns the token texts."""
    return texts(mark_clone(normalize(lex(source, lenient=lenient))))
