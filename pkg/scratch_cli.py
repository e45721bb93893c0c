import json
import os
import shutil
import subprocess
import sys
import tempfile

from axpre_engine.store import EngineStore, IndexLock

FIX = os.path.join("tests", "fixtures")
PSIMI = os.path.abspath(os.path.join(FIX, "psimi-sample.xml"))
RSS = [os.path.abspath(os.path.join(FIX, "rss1.xml")),
       os.path.abspath(os.path.join(FIX, "rss2.xml"))]

tmp = tempfile.mkdtemp(prefix="axcli-")


def idx(name):
    return os.path.join(tmp, name)


def run(*argv, code=0):
    proc = subprocess.run([sys.executable, "-m", "axpre_engine.cli"] + list(argv),
                          capture_output=True, text=True)
    assert proc.returncode == code, (argv, proc.returncode, proc.stdout, proc.stderr)
    return proc.stdout, proc.stderr


# build the psimi label index, spec example output
out, _ = run("--index", idx("psimi"), "build", PSIMI, "--preset", "label")
assert "nodes: 10" in out, out
assert "parse: 1 docs" in out and "partition: 10 nodes" in out and "edges:" in out, out

# refine the participant node, sizes 1 and 4 in creation order
out, _ = run("--index", idx("psimi"), "refine", "--sid", "s4",
             "--axpre", "[participant].c")
assert "(extent 1)" in out and "(extent 4)" in out, out
assert out.index("(extent 1)") < out.index("(extent 4)"), out

# json output shape
out, _ = run("--index", idx("psimi"), "export", "--format", "json")
sd = json.loads(out)
assert sd["v"] == 1 and len(sd["nodes"]) == 11, len(sd["nodes"])
out, _ = run("--index", idx("psimi"), "export", "--format", "dot")
assert out.startswith("digraph"), out[:40]

# rss index, query adapt splits the channel node into two
out, _ = run("--index", idx("rss"), "build", *RSS, "--preset", "label")
assert "nodes:" in out
out, _ = run("--index", idx("rss"), "query",
             "--xpath", "/rss/channel[item[pubDate]]", "--adapt", "--json")
payload = json.loads(out)
assert payload["v"] == 1
assert len(payload["adapt"]["created"]) == 2, payload["adapt"]
assert payload["answerDocs"] == payload["candidateDocs"] == [1, 2] or \
    set(payload["answerDocs"]) <= set(payload["candidateDocs"]), payload
assert payload["answerCount"] >= 1
assert "timings" in payload and "total" in payload["timings"]

# plain query with explain
out, _ = run("--index", idx("rss"), "query",
             "--xpath", "/rss/channel[item[pubDate]]", "--explain")
assert "candidates:" in out and "answers:" in out and "timings:" in out, out

# stabilize by axis runs and reports (s1 is the rss root)
out, _ = run("--index", idx("rss"), "stabilize", "--axis", "s1", "c", "--json")
rep = json.loads(out)
assert rep["v"] == 1 and "created" in rep

# compare: label psimi vs the refined one
out, _ = run("--index", idx("psimi2"), "build", PSIMI, "--preset", "label")
out, _ = run("--index", idx("psimi2"), "compare", "--other", idx("psimi"), "--json")
rows = json.loads(out)["rows"]
bysid = {}
for r in rows:
    bysid.setdefault(r["sid"], []).append(r)
assert sorted(x["count"] for x in bysid[4]) == [1, 4], bysid[4]

# journal replay reproduces the index byte for byte in structure
out, _ = run("--index", idx("rss2"), "replay",
             "--journal", os.path.join(idx("rss"), "journal.log"))
assert "replayed" in out, out
a = EngineStore.load(idx("rss"))
b = EngineStore.load(idx("rss2"))
assert a.signature() == b.signature()
assert a.sd.seq == b.sd.seq


def file_bytes(d, name):
    with open(os.path.join(d, name), "rb") as fh:
        return fh.read()


for name in ("sdgraph.json", "ees.json", "elemdb.bin"):
    assert file_bytes(idx("rss"), name) == file_bytes(idx("rss2"), name), name

# locked index refuses a second process
lock = IndexLock(idx("psimi")).acquire()
try:
    _, err = run("--index", idx("psimi"), "export", "--format", "json", code=2)
    assert "held by another process" in err, err
finally:
    lock.release()

# exit codes: usage, data, contract families
_, err = run("--index", idx("psimi"), "refine", "--sid", "s1",
             "--axpre", "[entrySet].(", code=1)
assert "usage error" in err, err
_, err = run("--index", idx("psimi"), "refine", "--sid", "s99",
             "--axpre", "[participant].c", code=2)
assert "data error" in err, err
_, err = run("--index", idx("nosuch"), "export", "--format", "json", code=2)
_, err = run("nosuchcommand", code=1)
_, err = run("--index", idx("psimi3"), "build", PSIMI, code=1)
assert "needs --axpre or --preset" in err, err

# virtual mode round trip through the cli
out, _ = run("--index", idx("rssv"), "build", *RSS, "--preset", "label",
             "--mode", "virtual")
out, _ = run("--index", idx("rssv"), "refine", "--sid", "s2",
             "--axpre", "[channel].c.c")
assert "created" in out
v = EngineStore.load(idx("rssv"))
assert v.mode == "virtual"
v.check(deep=True)

# preset listing
out, _ = run("preset")
assert "label" in out and "bpci" in out
out, _ = run("preset", "a", "--k", "2")
assert out.strip() == "p.p", out

# streamed chain build matches the default lane
out, _ = run("--index", idx("pk1"), "build", *RSS, "--preset", "a", "--k", "inf",
             "--stream")
assert "stream:" in out, out
out, _ = run("--index", idx("pk2"), "build", *RSS, "--preset", "a", "--k", "inf")
s1 = EngineStore.load(idx("pk1"))
s2 = EngineStore.load(idx("pk2"))
assert s1.signature(include_stability=False) == s2.signature(include_stability=False)

print("cli scratch green")
shutil.rmtree(tmp)
