# Building a search corpus from a Java source tree
#
# A reference table points at methods inside source files by line range.
# Each referenced slice is lexed, literals are replaced by placeholders,
# the method is wrapped in <soc> ... <eoc>, and duplicates collapse onto
# the lowest record id.

import tempfile
from pathlib import Path

from clonerec.corpus import build_corpus, extract, read_reference_table, save_corpus
from clonerec.tokenizer import lex, normalize, tokenize_method

# A tiny source tree: two copy routines that differ only in a constant,
# and one string helper.

root = Path(tempfile.mkdtemp())
(root / "io").mkdir()
(root / "io" / "Files.java").write_text(
    "class Files {\n"
    "  void copy(File src, File dst) {\n"
    "    write(dst, read(src), 4096);\n"
    "  }\n"
    "  void copy(File src, File dst) {\n"
    "    write(dst, read(src), 8192); // bigger buffer\n"
    "  }\n"
    "}\n"
)
(root / "Text.java").write_text(
    "class Text {\n"
    "  String greet(String who) {\n"
    "    return \"hello \" + who + '!';\n"
    "  }\n"
    "}\n"
)
(root / "refs.csv").write_text(
    "record_id,functionality_id,file_path,start_line,end_line\n"
    "3,1,io/Files.java,2,4\n"
    "7,1,io/Files.java,5,7\n"
    "9,2,Text.java,2,4\n"
    "12,2,Missing.java,1,3\n"
)

# Lexing keeps every token with its kind; normalization only touches literals.

raw = lex('return "hello " + who;')
print([(t.kind, t.text) for t in raw])
print([t.text for t in normalize(raw)])
print(tokenize_method("int answer() { return 42; }"))

# Extraction reports missing files instead of stopping.

refs = read_reference_table(root / "refs.csv")
extracted, failures = extract(refs, root)
for f in failures:
    print("failed:", f.reference.record_id, f.kind, f)

# The two copy methods normalize to the same tokens, so record 7 folds into 3.

corpus, skipped = build_corpus(extracted)
for rec in corpus:
    print(rec.record_id, rec.functionality_id, " ".join(rec.tokens))

save_corpus(corpus, root / "corpus.jsonl")
print("saved to", root / "corpus.jsonl")
