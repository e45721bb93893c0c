import os
import shutil
import tempfile

from fastapi.testclient import TestClient

from axpre_engine.server import create_app
from axpre_engine.store import MATERIALIZED, EngineStore, ingest
from axpre_engine.cli import main as cli_main

FIX = os.path.join("tests", "fixtures")
PSIMI = os.path.abspath(os.path.join(FIX, "psimi-sample.xml"))
RSS = [os.path.abspath(os.path.join(FIX, "rss1.xml")),
       os.path.abspath(os.path.join(FIX, "rss2.xml"))]

tmp = tempfile.mkdtemp(prefix="axsrv-")

# in-memory store, no persistence
store = ingest([PSIMI], MATERIALIZED, "e")
app = create_app(store=store, persist=False)
client = TestClient(app, raise_server_exceptions=False)

r = client.get("/sd")
assert r.status_code == 200
sd = r.json()
assert sd["v"] == 1 and len(sd["nodes"]) == 10 and sd["seq"] == 0, sd["seq"]

r = client.get("/sd/node/s4/extent", params={"limit": 2})
assert r.status_code == 200
body = r.json()
assert body["size"] == 5 and len(body["items"]) == 2
assert body["items"][0]["doc"] == 1 and body["items"][0]["end"] > body["items"][0]["start"]

r = client.get("/sd/node/s4/ee")
assert r.status_code == 200 and r.json()["text"], r.json()

r = client.get("/sd/node/s99/extent")
assert r.status_code == 404 and r.json()["kind"] == "UnknownSidError", r.json()

r = client.get("/doc/1", params={"highlight": "s4"})
assert r.status_code == 200
doc = r.json()
assert doc["text"].lstrip().startswith("<") and len(doc["spans"]) == 5, doc.keys()

r = client.get("/doc/99")
assert r.status_code == 404

# malformed expression: 400 with parser position
r = client.post("/sd/refine", json={"sid": "s4", "axpre": "[participant].("})
assert r.status_code == 400 and r.json()["position"] is not None, r.json()

# stale sequence number: 409 with both sides
r = client.post("/sd/refine", json={"sid": "s4", "axpre": "[participant].c",
                                    "seq": 7})
assert r.status_code == 409
assert r.json()["expected"] == 7 and r.json()["actual"] == 0, r.json()

# the spec example refinement
r = client.post("/sd/refine", json={"sid": "s4", "axpre": "[participant].c",
                                    "seq": 0})
assert r.status_code == 200
body = r.json()
assert len(body["report"]["created"]) == 2, body
sizes = sorted(e["extentSize"] for e in body["report"]["created"])
assert sizes == [1, 4], sizes
assert body["seq"] == 1

r = client.get("/sd")
assert len(r.json()["nodes"]) == 11 and r.json()["seq"] == 1

# job registry remembers the mutation
job = client.get("/job/%d" % body["job"])
assert job.status_code == 200 and job.json()["state"] == "done"
assert job.json()["report"]["created"] == body["report"]["created"]

# stabilize through the api
r = client.post("/sd/stabilize", json={"kind": "axis",
                                       "args": {"sid": "s1", "axis": "c"}})
assert r.status_code == 200, r.json()
r = client.post("/sd/stabilize", json={"kind": "bogus", "args": {}})
assert r.status_code == 400

# query endpoint on an rss store, adapt splits the channel
rstore = ingest(RSS, MATERIALIZED, "e")
rapp = create_app(store=rstore, persist=False)
rc = TestClient(rapp, raise_server_exceptions=False)

r = rc.post("/query", json={"xpath": "/rss/channel[item[pubDate]]"})
assert r.status_code == 200
q = r.json()
assert set(q["answerDocs"]) <= set(q["candidateDocs"]), q
assert q["answerCount"] >= 1 and "timings" in q and q["touchedSids"], q

r = rc.post("/query", json={"xpath": "/rss/channel[item[pubDate]]",
                            "adapt": True})
assert r.status_code == 200
q = r.json()
assert len(q["report"]["created"]) == 2, q["report"]
assert q["seq"] == 1

r = rc.post("/query", json={"xpath": "/rss/channel[", "adapt": False})
assert r.status_code == 400 and r.json()["position"] is not None

# persistence parity: api mutations == cli mutations on the same directory
api_dir = os.path.join(tmp, "api")
cli_dir = os.path.join(tmp, "cli")
for d in (api_dir, cli_dir):
    code = cli_main(["--index", d, "--quiet", "build", PSIMI, "--preset", "label"])
    assert code == 0

pstore = EngineStore.load(api_dir)
papp = create_app(store=pstore, persist=True)
pc = TestClient(papp, raise_server_exceptions=False)
r = pc.post("/sd/refine", json={"sid": "s4", "axpre": "[participant].c"})
assert r.status_code == 200

code = cli_main(["--index", cli_dir, "--quiet", "refine", "--sid", "s4",
                 "--axpre", "[participant].c"])
assert code == 0

a = EngineStore.load(api_dir)
b = EngineStore.load(cli_dir)
assert a.signature() == b.signature()
assert a.sd.seq == b.sd.seq


def file_bytes(d, name):
    with open(os.path.join(d, name), "rb") as fh:
        return fh.read()


for name in ("sdgraph.json", "ees.json", "elemdb.bin"):
    assert file_bytes(api_dir, name) == file_bytes(cli_dir, name), name

# reloaded persisted store serves the refined state
r2 = TestClient(create_app(index_dir=api_dir, persist=False),
                raise_server_exceptions=False)
assert len(r2.get("/sd").json()["nodes"]) == 11

print("server scratch green")
shutil.rmtree(tmp)
