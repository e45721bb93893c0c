import os

import pytest

from axpre_engine.axisgraph import Collection

import _report

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")

PSIMI = os.path.join(FIXTURES, "psimi-sample.xml")
RSS = [os.path.join(FIXTURES, "rss1.xml"), os.path.join(FIXTURES, "rss2.xml")]
WITNESS = os.path.join(FIXTURES, "lpath-witness.xml")


def sid_by(sd, label, size=None):
    """The one summary node carrying ``label`` (and extent ``size`` if given)."""
    for s in sd.sids():
        n = sd.node(s)
        if n.label == label and (size is None or len(n.extent) == size):
            return s
    raise AssertionError("no node %s/%s" % (label, size))


def ext(sd, sid):
    """Extent ordinals with the document ids stripped; single-doc helper."""
    return {v for _, v in sd.extent(sid)}


@pytest.fixture(scope="session")
def psimi_path():
    return PSIMI


@pytest.fixture(scope="session")
def rss_paths():
    return list(RSS)


@pytest.fixture(scope="session")
def witness_path():
    return WITNESS


@pytest.fixture(scope="session")
def psimi_source():
    with open(PSIMI, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def psimi_coll(psimi_source):
    # shared read-only; summaries built from it are always fresh objects
    return Collection.from_sources([("psimi", psimi_source)])


@pytest.fixture(scope="session")
def psimi_graph(psimi_coll):
    return psimi_coll.graph(1)


@pytest.fixture(scope="session")
def rss_coll():
    coll, skipped = Collection.from_paths(RSS)
    assert not skipped
    return coll


@pytest.fixture(scope="session")
def witness_graph():
    coll, _ = Collection.from_paths([WITNESS])
    return coll.graph(1)


def pytest_terminal_summary(terminalreporter):
    if not _report.lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _report.lines:
        terminalreporter.write_line(line)
