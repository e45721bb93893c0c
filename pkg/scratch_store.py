import os
import shutil
import tempfile

from axpre_engine.errors import (
    ContractViolation,
    CoverageError,
    DataError,
    StoreError,
    UsageError,
)
from axpre_engine.extent import annotate_node
from axpre_engine.refine import refine_node
from axpre_engine.axisgraph import Collection
from axpre_engine.store import (
    MATERIALIZED,
    VIRTUAL,
    DocRecord,
    ElemRecord,
    EngineStore,
    SDMaps,
    ingest,
)
from axpre_engine.summary import INF, build_pk, create_sd, preset

FIX = os.path.join("tests", "fixtures")
PSIMI = os.path.join(FIX, "psimi-sample.xml")
RSS = [os.path.join(FIX, "rss1.xml"), os.path.join(FIX, "rss2.xml")]

tmp = tempfile.mkdtemp(prefix="axstore-")


def sub(name):
    p = os.path.join(tmp, name)
    os.makedirs(p, exist_ok=True)
    return p


def file_bytes(d, name):
    with open(os.path.join(d, name), "rb") as fh:
        return fh.read()


# -- virtual label store over the two feeds
rs = ingest(RSS, VIRTUAL, preset("label"))
item_sid = next(s for s in rs.sd.sids() if rs.sd.label(s) == "item")
assert rs.docs_lookup(item_sid) == {1, 2}
assert rs.extent_lookup(item_sid) == {(1, 6), (2, 7), (2, 13)}
assert rs.doc_records()
rs.check(deep=True)

# -- empty ingestion
empty = ingest([], MATERIALIZED, preset("label"))
assert empty.sd.sids() == [] and empty.records() == []
empty_v = ingest([], VIRTUAL, preset("label"))
assert empty_v.doc_records() == []

# -- determinism of tables
d1, d2 = sub("det1"), sub("det2")
ingest([PSIMI], MATERIALIZED, preset("label"), store_dir=d1)
ingest([PSIMI], MATERIALIZED, preset("label"), store_dir=d2)
for name in ("elemdb.bin", "sdgraph.json", "ees.json"):
    if name == "ees.json" or os.path.exists(os.path.join(d1, name)):
        assert file_bytes(d1, name) == file_bytes(d2, name), name
print("virtual rss + determinism ok")

# -- the refining family for the participant split, from an in-memory twin
twin_coll = Collection.from_paths([PSIMI])[0]
twin = create_sd(twin_coll, preset("label"))
report = refine_node(twin, 4, "[participant].c")
created = [e["sid"] for e in report.created]
created.sort(key=lambda s: min(twin.extent(s)))
family = [annotate_node(twin, s).text for s in created]
sizes = [len(twin.extent(s)) for s in created]
assert sizes == [1, 4]

# -- materialized refine per the located-key path
ms = ingest([PSIMI], MATERIALIZED, preset("label"))
total_before = len(ms.records())
touched_before = [r for r in ms.records() if r.sid == 4]
assert len(touched_before) == 5
rep = ms.refine_materialized(4, family)
assert [e["extentSize"] for e in rep.created] == [1, 4]
new1, new2 = [e["sid"] for e in rep.created]
assert len(ms.records()) == total_before
assert {v for _, v in ms.extent_lookup(new2)} == {6, 18, 23, 28}
assert {v for _, v in ms.extent_lookup(new1)} == {4}
changed = [r for r in ms.records() if r.sid in (new1, new2)]
assert len(changed) == 5
ms.check(deep=True)
# stabilities come straight from the record merge
from axpre_engine.summary import Stability

assert ms.sd.edges[(3, "c", new1)] == Stability.EXISTENTIAL
assert ms.sd.edges[(3, "c", new2)] == Stability.BIDIRECTIONAL
assert ms.sd.edges[(new2, "c", 5)] == Stability.FORWARD
assert ms.sd.edges[(new1, "fs", new2)] == Stability.FORWARD

# rollback on partial family
partial = ingest([PSIMI], MATERIALIZED, preset("label"))
before_records = list(partial.records())
before_nodes = set(partial.sd.sids())
before_seq = partial.sd.seq
try:
    partial.refine_materialized(4, [family[0]])
    raise SystemExit("partial family must not cover")
except CoverageError:
    pass
assert list(partial.records()) == before_records
assert set(partial.sd.sids()) == before_nodes and partial.sd.seq == before_seq

try:
    ms.refine_materialized(998, family)
    raise SystemExit("unknown sid must fail")
except DataError:
    pass
print("materialized refine ok")

# -- virtual refine mirrors the materialized one structurally
vs = ingest([PSIMI], VIRTUAL, preset("label"))
vrep = vs.refine_virtual(4, family)
assert [e["extentSize"] for e in vrep.created] == [1, 4]
assert vs.signature(include_stability=False) == ms.signature(include_stability=False)
assert vs.docs_lookup(new2) == {1}
vs.check(deep=True)
print("virtual refine ok")

# -- snapshot round trips
snap1, snap2 = sub("snap1"), sub("snap2")
ms.save(snap1)
loaded = EngineStore.load(snap1)
assert loaded.extent_lookup(new2) == ms.extent_lookup(new2)
assert loaded.signature() == ms.signature()
assert loaded.sd.seq == ms.sd.seq and loaded.sd.next_sid == ms.sd.next_sid
loaded.check(deep=True)
loaded.save(snap2)
for name in ("elemdb.bin", "sdgraph.json", "ees.json"):
    assert file_bytes(snap1, name) == file_bytes(snap2, name), name

vsnap1, vsnap2 = sub("vsnap1"), sub("vsnap2")
vs.save(vsnap1)
vloaded = EngineStore.load(vsnap1)
assert vloaded.extent_lookup(new2) == vs.extent_lookup(new2)
assert vloaded.signature() == vs.signature()
vloaded.save(vsnap2)
for name in ("docdb.bin", "sdgraph.json", "ees.json"):
    assert file_bytes(vsnap1, name) == file_bytes(vsnap2, name), name
print("snapshot round trips ok")

# -- key lookup
r = ms.records()[0]
assert ms.elem_record(r.sid, r.doc_id, r.end_pos) == r
try:
    ms.elem_record(r.sid, r.doc_id, r.end_pos + 99991)
    raise SystemExit("bad key must fail")
except DataError:
    pass

# -- secondary summary
plain = ingest([PSIMI], MATERIALIZED, preset("label"))
plain.attach_secondary(ms)
rows = plain.secondary_report()
by_first = {}
for row in rows:
    by_first.setdefault(row["sid"], []).append(row)
assert sorted(x["count"] for x in by_first[4]) == [1, 4]
assert {x["sid2"] for x in by_first[4]} == {new1, new2}
resnap = sub("resnap")
plain.save(resnap)
reloaded = EngineStore.load(resnap)
assert reloaded.secondary_report() == rows
print("secondary report ok")

# -- maps
maps = ms.maps
maps.verify(ms.sd)
broken = SDMaps(dict(maps.label_map), {k: dict(v) for k, v in maps.axis_maps.items()})
some_axis = next(iter(broken.axis_maps))
victim = next(iter(broken.axis_maps[some_axis]))
broken.axis_maps[some_axis][victim] = set()
try:
    broken.verify(ms.sd)
    raise SystemExit("broken maps must fail verify")
except ContractViolation:
    pass

# -- streaming chain build against the in-memory one
gen = sub("gen")
paths = []
for i in range(14):
    body = "<a><b code=\"%d\"><c>x</c></b>%s</a>" % (i, "<d/>" * (i % 4))
    p = os.path.join(gen, "doc%03d.xml" % i)
    with open(p, "w") as fh:
        fh.write(body)
    paths.append(p)

sdir, mdir = sub("stream"), sub("mem")
streamed = ingest(paths, MATERIALIZED, INF, store_dir=sdir)
assert streamed.sd.extent_counts is not None
inmem = ingest(paths, MATERIALIZED, INF)
inmem.save(mdir)
assert file_bytes(sdir, "elemdb.bin") == file_bytes(mdir, "elemdb.bin")
assert file_bytes(sdir, "sdgraph.json") == file_bytes(mdir, "sdgraph.json")
streamed.check(deep=True)
sl = EngineStore.load(sdir)
assert sl.stats()["elements"] == inmem.stats()["elements"]
sl.materialize_extents()
assert sl.sd.extent_counts is None
assert {s: sl.sd.extent(s) for s in sl.sd.sids()} == {
    s: inmem.sd.extent(s) for s in inmem.sd.sids()
}
print("streaming build ok")

# -- skipped files keep ids dense
skipdir = sub("skips")
good1 = os.path.join(skipdir, "good1.xml")
bad = os.path.join(skipdir, "bad.xml")
good2 = os.path.join(skipdir, "good2.xml")
open(good1, "w").write("<r><x/></r>")
open(bad, "w").write("<r><unclosed></r>")
open(good2, "w").write("<r><y/></r>")
folder = os.path.join(skipdir, "sub")
os.makedirs(folder)
sk = ingest([good1, bad, folder, good2], MATERIALIZED, preset("label"))
assert len(sk.skipped) == 2
assert [sk.collection.name(d).endswith(n) for d, n in zip(sk.collection.ids(), ["good1.xml", "good2.xml"])] == [True, True]
skdir = sub("sksnap")
sk.save(skdir)
skl = EngineStore.load(skdir)
assert [p for p, _ in skl.skipped] == [bad, folder]
print("skip handling ok")

# -- numeric virtual goes through the generic lane
nv = ingest([PSIMI], VIRTUAL, 0)
label_store = ingest([PSIMI], VIRTUAL, preset("label"))
mine = {nv.sd.label(s): nv.extent_lookup(s) for s in nv.sd.sids()}
theirs = {label_store.sd.label(s): label_store.extent_lookup(s) for s in label_store.sd.sids()}
assert mine == theirs
nv.check(deep=True)

# -- annotate on a materialized store persists expressions
ann = ingest([PSIMI], MATERIALIZED, preset("label"))
ann.annotate()
anndir = sub("ann")
ann.save(anndir)
annl = EngineStore.load(anndir)
assert annl.sd.node(4).ee == ann.sd.node(4).ee
assert set(annl.ees) == set(ann.ees)

# -- save refuses memory-backed documents
membacked = Collection.from_sources([("m", "<a/>")])
msd = create_sd(membacked, preset("label"))
mst = EngineStore(membacked, msd, MATERIALIZED, elem_records=[])
try:
    mst.save(sub("never"))
    raise SystemExit("memory-backed save must fail")
except UsageError:
    pass

# -- corrupt table raises StoreError
corr = sub("corr")
ms.save(corr)
with open(os.path.join(corr, "elemdb.bin"), "r+b") as fh:
    fh.seek(0)
    fh.write(b"NOTMAGIC")
try:
    EngineStore.load(corr).records()
    raise SystemExit("corrupt table must fail")
except StoreError:
    pass

shutil.rmtree(tmp)
print("store scratch green")
