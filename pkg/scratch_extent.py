import sys

sys.path.insert(0, "src")
from axpre_engine.axisgraph import Collection
from axpre_engine.summary import create_sd, preset, Stability
from axpre_engine.refine import refine_node, stabilize_edge
from axpre_engine.extent import (
    EeKind,
    MergeEdgeResult,
    annotate_all,
    annotate_node,
    compute_edge_by_merge,
    compute_edge_by_xpath,
    evaluate_ee,
    generate_ee,
    generate_ee_cstar,
    has_count_closure_shape,
    records_from_sd,
    stabilize_edge_xpath,
)
from axpre_engine.errors import (
    ContractViolation,
    DataError,
    MissingExtentExpressionError,
    NotDistinguishableError,
    UsageError,
)

psimi = open("tests/fixtures/psimi-sample.xml", "rb").read()


def fresh():
    return Collection.from_sources([("psimi", psimi)])


def sid_by(sd, label, size=None):
    for s in sd.sids():
        n = sd.node(s)
        if n.label == label and (size is None or len(n.extent) == size):
            return s
    raise AssertionError("no node %s/%s" % (label, size))


def ext(sd, sid):
    return {v for _, v in sd.extent(sid)}


# --- label SD base expressions
coll = fresh()
sd = create_sd(coll, preset("label"))
p_sid = sid_by(sd, "participant")
erl_sid = sid_by(sd, "expRoleList")
ees = annotate_all(sd)
assert ees[p_sid].text == "/ds::participant", ees[p_sid].text
assert ees[erl_sid].text == "/ds::expRoleList", ees[erl_sid].text
assert ees[p_sid].kind is EeKind.NOT_PREDICATED
for s in sd.sids():
    got = evaluate_ee(coll, sd.node(s).ee)
    assert got == sd.extent(s), (s, sd.node(s).ee, sorted(got))
print("label SD base expressions exact for all 10 nodes")

# --- golden general EE after the c.fc.ns* refinement
coll = fresh()
sd = create_sd(coll, preset("label"))
refine_node(sd, sid_by(sd, "participant"), "[participant].c.fc.ns*")
lone = sid_by(sd, "participant", 1)
golden = (
    "/ds::participant[c::interactorRef]"
    "[not(c::expRoleList/c::*[1][s::expRole])]"
    "[not(c::expRoleList/c::*[1][s::expRole]/fs::*[1][expRole])]"
)
ee = generate_ee(sd, lone)
assert ee.text == golden, ee.text
assert evaluate_ee(coll, ee.text) == {(1, 4)}
for s in sd.sids():
    if sd.node(s).label != "participant":
        continue
    got = evaluate_ee(coll, generate_ee(sd, s).text)
    assert got == sd.extent(s), (s, sorted(got), sorted(sd.extent(s)))
print("golden first-child/sibling EE byte-exact and all three classes exact")

# sibling-step negatives stay strict when no shorter negative subsumes them
coll = fresh()
sd = create_sd(coll, preset("label"))
refine_node(sd, sid_by(sd, "participant"), "[participant].c.c.ns")
assert {frozenset(ext(sd, s)) for s in sd.sids() if sd.node(s).label == "participant"} == {
    frozenset({4}),
    frozenset({6, 28}),
    frozenset({18, 23}),
}
for s in sd.sids():
    if sd.node(s).label != "participant":
        continue
    text = generate_ee(sd, s).text
    got = evaluate_ee(coll, text)
    assert got == sd.extent(s), (s, text, sorted(got))
    if ext(sd, s) == {18, 23}:
        assert "fs::*[1][s::expRole])]" in text, text
print("child-chain sibling EEs exact; lone negatives keep the strict spelling")

# --- count-closed form
coll = fresh()
sd = create_sd(coll, preset("label"))
refine_node(sd, sid_by(sd, "participant"), "[participant].c*")
parts = {frozenset(ext(sd, s)) for s in sd.sids() if sd.node(s).label == "participant"}
assert parts == {frozenset({4}), frozenset({6, 18, 23, 28})}, parts
lone = sid_by(sd, "participant", 1)
assert has_count_closure_shape(sd.axpre(lone))
assert not has_count_closure_shape("[participant]")
assert not has_count_closure_shape("[participant].c.c")
cstar_golden = "ds::participant[c::interactorRef][count(d::*)=count(c::interactorRef)]"
ee = generate_ee_cstar(sd, lone)
assert ee.text == cstar_golden, ee.text
assert ee.kind is EeKind.COUNT_CLOSED
assert evaluate_ee(coll, ee.text) == {(1, 4)}
big = sid_by(sd, "participant", 4)
assert evaluate_ee(coll, generate_ee_cstar(sd, big).text) == sd.extent(big)

# classes that differ only below a repeated sibling share a path set, and
# the count balance holds for both: neither form can separate them
twins = Collection.from_sources(
    [
        (
            "twins",
            b"<root>"
            b"<participant><expRoleList><expRole><names/></expRole></expRoleList></participant>"
            b"<participant><expRoleList><expRole><names/></expRole><expRole/></expRoleList></participant>"
            b"</root>",
        )
    ]
)
sdt = create_sd(twins, preset("label"))
refine_node(sdt, sid_by(sdt, "participant"), "[participant].c*")
t_classes = [s for s in sdt.sids() if sdt.node(s).label == "participant"]
assert len(t_classes) == 2
for s in t_classes:
    for make in (generate_ee_cstar, generate_ee):
        try:
            make(sdt, s)
            raise AssertionError("expected NotDistinguishableError")
        except NotDistinguishableError:
            pass
print("count-closed golden byte-exact; path-set twins rejected by both forms")

# count closure with several terms, on a collection where shapes differ by path
shaped = Collection.from_sources(
    [
        (
            "shapes",
            b"<root>"
            b"<participant><interactorRef/></participant>"
            b"<participant><interactorRef/><expRoleList><expRole/></expRoleList></participant>"
            b"<participant><interactorRef/><expRoleList><expRole/><expRole/></expRoleList></participant>"
            b"</root>",
        )
    ]
)
sd = create_sd(shaped, preset("label"))
refine_node(sd, sid_by(sd, "participant"), "[participant].c*")
deep = sid_by(sd, "participant", 2)
ee = generate_ee_cstar(sd, deep)
assert ee.text.startswith("ds::participant[c::interactorRef]"), ee.text
assert "count(d::*)=count(c::interactorRef)+count(c::expRoleList)+" in ee.text, ee.text
assert evaluate_ee(shaped, ee.text) == sd.extent(deep)
lone = sid_by(sd, "participant", 1)
assert evaluate_ee(shaped, generate_ee_cstar(sd, lone).text) == sd.extent(lone)
leafy = Collection.from_sources([("leafy", b"<r><interactorRef/><x><interactorRef/></x></r>")])
sd_leaf = create_sd(leafy, preset("label"))
refine_node(sd_leaf, sid_by(sd_leaf, "interactorRef"), "[interactorRef].c*")
leaf = sid_by(sd_leaf, "interactorRef")
assert generate_ee_cstar(sd_leaf, leaf).text == "ds::interactorRef[count(d::*)=0]"
print("multi-term count closure exact; leaf closure collapses to a zero count")

# cstar precondition
sd = create_sd(fresh(), preset("label"))
try:
    generate_ee_cstar(sd, sid_by(sd, "participant"))
    raise AssertionError("expected ContractViolation")
except ContractViolation:
    pass

# --- expression-driven stabilization against the materialized one
coll = fresh()
sd = create_sd(coll, preset("label"))
p_sid = sid_by(sd, "participant")
erl_sid = sid_by(sd, "expRoleList")
try:
    stabilize_edge_xpath(sd, p_sid, erl_sid)
    raise AssertionError("expected MissingExtentExpressionError")
except MissingExtentExpressionError:
    pass
annotate_all(sd)
old_candidates = sorted({b for (a, ax, b) in sd.edges if a == p_sid and ax == "c"})
report = stabilize_edge_xpath(sd, p_sid, erl_sid)
assert not report.noop
assert [e["extentSize"] for e in report.created] == [1, 4]
lone, big = report.created_sids()
assert ext(sd, lone) == {4} and ext(sd, big) == {6, 18, 23, 28}
golden_with = "/ds::participant[child::expRoleList intersect /ds::expRoleList]"
golden_without = "/ds::participant[not(child::expRoleList intersect /ds::expRoleList)]"
assert sd.node(big).ee == golden_with, sd.node(big).ee
assert sd.node(lone).ee == golden_without, sd.node(lone).ee
assert evaluate_ee(coll, golden_with) == {(1, 6), (1, 18), (1, 23), (1, 28)}
assert evaluate_ee(coll, golden_without) == {(1, 4)}
assert sd.edges[(big, "c", erl_sid)] == Stability.BIDIRECTIONAL
assert (lone, "c", erl_sid) not in sd.edges

coll2 = fresh()
sd2 = create_sd(coll2, preset("label"))
stabilize_edge(sd2, sid_by(sd2, "participant"), sid_by(sd2, "expRoleList"))
assert {s: (sd.node(s).label, sd.axpre(s), ext(sd, s)) for s in sd.sids()} == {
    s: (sd2.node(s).label, sd2.axpre(s), ext(sd2, s)) for s in sd2.sids()
}
assert set(sd.edges) == set(sd2.edges)
print("expression-driven stabilization matches the materialized split, goldens byte-exact")

# repeat on an already forward edge is a noop
report = stabilize_edge_xpath(sd, big, erl_sid)
assert report.noop

# --- edge recomputation by expression
added = compute_edge_by_xpath(
    sd, "c", big, sd.extent(big), p_sid, candidates=old_candidates + [p_sid]
)
assert set(added) == {(big, "c", erl_sid), (big, "c", sid_by(sd, "interactorRef"))}, added
sd3 = create_sd(fresh(), preset("label"))
annotate_all(sd3)
er_sid = sid_by(sd3, "expRole")
added = compute_edge_by_xpath(
    sd3, "ns", er_sid, sd3.extent(er_sid), er_sid, candidates=[er_sid]
)
assert added == [(er_sid, "ns", er_sid)]
print("edge recomputation by expression finds child and sibling loop edges")

# --- edge computation from span records
coll = fresh()
sd = create_sd(coll, preset("label"))
sd.classify_all()
records = records_from_sd(sd)
checked = 0
for (si, ax, sj), known in sorted(sd.edges.items()):
    result = compute_edge_by_merge(records, ax, si, sj)
    assert result.exists
    assert result.stability == known, (si, ax, sj, result, known)
    checked += 1
assert checked >= 10
p_sid = sid_by(sd, "participant")
names_sid = sid_by(sd, "names")
root_sid = sid_by(sd, "entrySet")
absent = compute_edge_by_merge(records, "c", p_sid, names_sid)
assert not absent.exists and absent.stability is None
below = compute_edge_by_merge(records, "d", root_sid, names_sid)
assert below.stability == Stability.BIDIRECTIONAL
after = compute_edge_by_merge(records, "f", sid_by(sd, "interactorRef"), names_sid)
assert after.stability == Stability.BIDIRECTIONAL, after
er_sid = sid_by(sd, "expRole")
tail = compute_edge_by_merge(records, "f", er_sid, er_sid)
assert tail.exists and tail.stability == Stability.EXISTENTIAL, tail
print("merge edges agree with classification on every stored edge (%d checked)" % checked)

# attributes ride along through their value spans
attrs = Collection.from_sources(
    [("doc", b'<r a="1" b="2"><x a="3"/><x a="4"/><y/></r>')]
)
sda = create_sd(attrs, preset("label"))
sda.classify_all()
arecords = records_from_sd(sda)
for (si, ax, sj), known in sorted(sda.edges.items()):
    result = compute_edge_by_merge(arecords, ax, si, sj)
    assert result.stability == known, (si, ax, sj, result, known)
x_sid = sid_by(sda, "x")
a_sid = sid_by(sda, "@a")
fcr = compute_edge_by_merge(arecords, "fc", x_sid, a_sid)
assert fcr.stability == Stability.FORWARD, fcr
print("attribute records merge like elements")

# errors
try:
    compute_edge_by_merge(records, "s", p_sid, names_sid)
    raise AssertionError("expected UsageError")
except UsageError:
    pass
try:
    compute_edge_by_merge(
        [r for r in records if r[1] != p_sid], "c", p_sid, names_sid
    )
    raise AssertionError("expected DataError")
except DataError:
    pass
try:
    stabilize_edge_xpath(sd, p_sid, p_sid)
    raise AssertionError("expected UsageError")
except UsageError:
    pass

print("extent scratch green")
