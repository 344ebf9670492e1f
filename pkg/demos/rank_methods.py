# Ranking corpus methods with TF-IDF and cosine similarity
#
# Weights are (1 + ln tf) * ln(J / df).  A term present in every method,
# like <soc> and <eoc>, gets weight zero and drops out of every vector.

import tempfile
from pathlib import Path

from clonerec.retrieval import TfIdfIndex, fit, rank, recommend, vectorize_query
from clonerec.synthetic import synthetic_corpus
from clonerec.tokenizer import SOC, tokenize_method

corpus = synthetic_corpus(n_functionalities=8, per_functionality=5, seed=3)
index = fit(corpus)
print(index)
print("df of <soc>:", index.df[index.terms[SOC]], "of", index.n_docs)
print("postings of <soc>:", index.postings(SOC))

# Querying with a corpus method returns it first with score 1.

probe = corpus[10]
for rid, score in rank(index, vectorize_query(index, probe.tokens), k=5):
    print(f"{rid:3d}  F{corpus.get(rid).functionality_id}  {score:.4f}")

# recommend() takes raw generator output: everything outside the first
# <soc> ... <eoc> span is ignored.

noisy = ["x", "=", "y", ";"] + list(probe.tokens[:-4]) + ["<eoc>", "junk"]
print(recommend(index, noisy, k=3))

# Queries can be arbitrary Java; unseen identifiers simply contribute nothing.

query = tokenize_method("void copy(File a, File b) { b.write(a.read()); }")
print(rank(index, vectorize_query(index, query), k=3))

# The index snapshot is plain JSON and reloads to an equal object.

path = Path(tempfile.mkdtemp()) / "index.json"
index.save(path)
print(TfIdfIndex.load(path) == index)
