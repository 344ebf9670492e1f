import pytest
from hypothesis import given, settings, strategies as st

from clonerec.tokenizer import (
    CHAR_LITERAL,
    EOC,
    IDENTIFIER,
    KEYWORD,
    META,
    NUM_VAL,
    NUMERIC_LITERAL,
    OPERATOR,
    SEPARATOR,
    SOC,
    STR_VAL,
    STRING_LITERAL,
    UNK,
    AlreadyMarked,
    Token,
    UnknownCharacter,
    UnterminatedComment,
    UnterminatedString,
    lex,
    mark_clone,
    normalize,
    texts,
    tokenize_method,
)


def kinds(tokens):
    return [t.kind for t in tokens]


def test_lex_drops_line_comment():
    toks = lex("int x = 42; // set")
    assert texts(toks) == ["int", "x", "=", "42", ";"]
    assert kinds(toks) == [KEYWORD, IDENTIFIER, OPERATOR, NUMERIC_LITERAL, SEPARATOR]


def test_lex_empty():
    assert lex("") == []
    assert lex("   \n\t /* nothing */ // here") == []


def test_lex_string_literal():
    toks = lex('String s = "hi";')
    assert texts(toks) == ["String", "s", "=", '"hi"', ";"]
    assert toks[3].kind == STRING_LITERAL


def test_lex_literal_forms():
    src = "a = 0x1FL + 0b101 + 017 + 1_000L + 3.5e-2f + .5 + 1e3 + 2f + 0x1.8p1 + 'c' + '\\n';"
    nums = [t.text for t in lex(src) if t.kind == NUMERIC_LITERAL]
    assert nums == ["0x1FL", "0b101", "017", "1_000L", "3.5e-2f", ".5", "1e3", "2f", "0x1.8p1"]
    chars = [t.text for t in lex(src) if t.kind == CHAR_LITERAL]
    assert chars == ["'c'", "'\\n'"]


def test_lex_escaped_quote_in_string():
    toks = lex(r'"a\"b" + x')
    assert texts(toks) == [r'"a\"b"', "+", "x"]


def test_keywords_include_literal_words():
    toks = lex("return null == true || false;")
    assert [t.kind for t in toks[:4]] == [KEYWORD, KEYWORD, OPERATOR, KEYWORD]


def test_shift_operators_split_like_javalang():
    assert texts(lex("a >> 2; b >>> c; d >>= 1; List<List<X>> y;")) == [
        "a", ">", ">", "2", ";", "b", ">", ">", ">", "c", ";", "d", ">>=", "1", ";",
        "List", "<", "List", "<", "X", ">", ">", "y", ";",
    ]


def test_meta_tokens_are_atomic():
    toks = lex("<soc> x = <num_val> ; <eoc>")
    assert toks[0] == Token(META, SOC)
    assert toks[3] == Token(META, NUM_VAL)
    assert toks[-1] == Token(META, EOC)


def test_annotation_and_method_ref():
    assert texts(lex("@Override void f() { list.forEach(System.out::println); }"))[:2] == ["@", "Override"]
    assert "::" in texts(lex("a::b"))


def test_unterminated_string_reports_position():
    with pytest.raises(UnterminatedString) as exc:
        lex('x = 1;\ns = "abc\n;')
    assert exc.value.line == 2
    assert exc.value.offset == 11


def test_unterminated_comment():
    with pytest.raises(UnterminatedComment) as exc:
        lex("int a; /* never closed")
    assert exc.value.line == 1
    assert exc.value.offset == 7


def test_unknown_character_strict_and_lenient():
    with pytest.raises(UnknownCharacter) as exc:
        lex("int é = 1; #")
    assert exc.value.offset == len("int é = 1; ".encode())
    assert texts(lex("a # b", lenient=True)) == ["a", UNK, "b"]


def test_normalize_replaces_literals():
    toks = normalize(lex("x = 42;"))
    assert texts(toks) == ["x", "=", NUM_VAL, ";"]
    toks = normalize(lex("s = \"hi\" + 'c'"))
    assert texts(toks) == ["s", "=", STR_VAL, "+", STR_VAL]
    assert normalize([]) == []


def test_normalize_keeps_keyword_literals():
    assert texts(normalize(lex("x = null; y = true;"))) == ["x", "=", "null", ";", "y", "=", "true", ";"]


def test_mark_clone():
    body = lex("void f ( ) { }")
    marked = mark_clone(body)
    assert texts(marked) == [SOC, "void", "f", "(", ")", "{", "}", EOC]
    assert texts(mark_clone([])) == [SOC, EOC]
    with pytest.raises(AlreadyMarked):
        mark_clone(lex("<soc> a"))


def test_tokenize_method_pipeline():
    assert tokenize_method('int f() { return 0x10 + "s".length(); }') == [
        SOC, "int", "f", "(", ")", "{", "return", NUM_VAL, "+", STR_VAL, ".", "length",
        "(", ")", ";", "}", EOC,
    ]


def test_token_invariants():
    with pytest.raises(ValueError):
        Token(IDENTIFIER, "")
    with pytest.raises(ValueError):
        Token(META, "<nope>")


JAVA_SNIPPETS = [
    "int x = 42; // set",
    'String s = "hi";',
    "public static void copy(File src, File dst) throws IOException { byte[] buf = new byte[1024]; }",
    "for (int i = 0; i < n; i++) { sum += a[i] * 0x1F; }",
    "Map<String, List<Integer>> m = new HashMap<>(); m.put(\"k\", null);",
    "x >>>= 3; y = x >> 2 ^ ~z; b = c != d && e || !f;",
    "char c = '\\''; double d = 1.5e-3; long l = 0b1010L; float f = .25f;",
    "@Override public boolean equals(Object o) { return o instanceof Foo ? true : false; }",
    "list.stream().map(x -> x + 1).forEach(System.out::println);",
    "/* block */ int /* inline */ y = 7; // trailing",
]


def _javalang_kind(tok):
    name = type(tok).__name__
    if tok.value == "::":
        return SEPARATOR  # javalang says operator; JLS 3.11 lists it as a separator
    if name in ("Keyword", "Modifier", "BasicType", "Boolean", "Null"):
        return KEYWORD
    if name == "Identifier":
        return IDENTIFIER
    if name in ("Operator",):
        return OPERATOR
    if name in ("Separator", "Annotation"):
        return SEPARATOR
    if name == "String":
        return CHAR_LITERAL if tok.value.startswith("'") else STRING_LITERAL
    if name.endswith(("Integer", "FloatingPoint")):
        return NUMERIC_LITERAL
    raise AssertionError(name)


@pytest.mark.parametrize("src", JAVA_SNIPPETS)
def test_matches_reference_java_lexer(src):
    javalang = pytest.importorskip("javalang")
    ref = list(javalang.tokenizer.tokenize(src))
    ours = lex(src)
    assert texts(ours) == [t.value for t in ref]
    assert kinds(ours) == [_javalang_kind(t) for t in ref]


_atoms = st.one_of(
    st.sampled_from(["int", "x", "foo_1", "$y", "null", "return", "(", ")", "{", "}", ";", ".",
                     "+", "-", "==", ">>=", "<", ">", "->", "::", "@", "?", ":", "...", "&&"]),
    st.integers(0, 10**6).map(str),
    st.sampled_from(["0x1F", "0b11L", "1.5e3", ".5f", "3L"]),
    st.text(alphabet="abc xyz", max_size=5).map(lambda s: f'"{s}"'),
    st.sampled_from(["'a'", "'\\n'"]),
)
_gaps = st.sampled_from([" ", "\n", "\t", " /* c */ ", " // c\n"])


@st.composite
def java_sources(draw):
    atoms = draw(st.lists(_atoms, max_size=30))
    out = []
    for a in atoms:
        out.append(a)
        out.append(draw(_gaps))
    return "".join(out)


@settings(max_examples=300, deadline=None)
@given(java_sources())
def test_normalize_properties(src):
    toks = lex(src)
    norm = normalize(toks)
    assert len(norm) == len(toks)
    assert normalize(norm) == norm
    for t in norm:
        assert t.text.strip() == t.text and not t.text.startswith(("//", "/*"))
        if t.kind == NUMERIC_LITERAL:
            assert t.text == NUM_VAL
        if t.kind in (STRING_LITERAL, CHAR_LITERAL):
            assert t.text == STR_VAL


@settings(max_examples=300, deadline=None)
@given(java_sources())
def test_round_trip_stability(src):
    norm = texts(normalize(lex(src)))
    assert texts(lex(" ".join(norm))) == norm
