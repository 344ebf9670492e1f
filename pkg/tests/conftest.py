import pytest

from clonerec.corpus import CloneMethodRecord, CloneReference, SearchCorpus
from clonerec.tokenizer import EOC, SOC


def make_record(record_id, body, functionality_id=0):
    """Marked record from a body given as a list or space-separated string."""
    if isinstance(body, str):
        body = body.split()
    tokens = (SOC, *body, EOC)
    ref = CloneReference(record_id, functionality_id, f"f{record_id}.java", 1, 1)
    return CloneMethodRecord(ref, tokens)


def make_corpus(bodies, functionality_ids=None):
    fids = functionality_ids or [0] * len(bodies)
    return SearchCorpus(make_record(i + 1, b, f) for i, (b, f) in enumerate(zip(bodies, fids)))


def make_distinct_corpus(bodies):
    """Like make_corpus, but later duplicates of an earlier body are dropped."""
    seen, keep = set(), []
    for b in bodies:
        key = tuple(b.split() if isinstance(b, str) else b)
        if key not in seen:
            seen.add(key)
            keep.append(b)
    return make_corpus(keep)


@pytest.fixture
def java_tree(tmp_path):
    """Three small Java files and a reference table over them."""
    src = tmp_path / "src"
    (src / "pkg").mkdir(parents=True)
    (src / "pkg" / "A.java").write_text(
        "class A {\n"                                   # 1
        "  int add(int a, int b) {\n"                   # 2
        "    return a + b; // sum\n"                    # 3
        "  }\n"                                         # 4
        "  int add2(int a, int b) {\n"                  # 5
        "    return a + b;\n"                           # 6
        "  }\n"                                         # 7
        "}\n"                                           # 8
    )
    (src / "pkg" / "B.java").write_text(
        "class B {\n"
        "  void copy(File s, File d) {\n"
        "    write(d, read(s), 4096);\n"
        "  }\n"
        "}\n"
    )
    (src / "C.java").write_text(
        "class C {\n"
        "  String hello() {\n"
        "    return \"hi\" + 'x';\n"
        "  }\n"
        "}\n"
    )
    table = tmp_path / "refs.csv"
    table.write_text(
        "record_id,functionality_id,file_path,start_line,end_line\n"
        "10,1,pkg/A.java,2,4\n"
        "11,1,pkg/A.java,5,7\n"
        "12,2,pkg/B.java,2,4\n"
        "13,3,C.java,2,4\n"
    )
    return src, table


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by the test")


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria.append((crit, report.outcome))


_criteria = []


@pytest.fixture(autouse=True)
def _tag_criterion(request):
    mark = request.node.get_closest_marker("criterion")
    if mark is not None:
        request.node.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
