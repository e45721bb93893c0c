import sys

sys.path.insert(0, "src")
from axpre_engine.axisgraph import Collection, parse_document
from axpre_engine.automata import neighbourhood, build_axpre_automaton
from axpre_engine.bisim import bisimilar
from axpre_engine.summary import create_sd, preset, Stability
from axpre_engine.refine import (
    refine_node,
    stabilize_edge,
    stabilize_neighbourhood,
    unfold_edge,
    lpath_set,
    lpath_to_string,
    extent_axpre,
    representative_neighbourhood,
)
from axpre_engine.errors import ContainmentError

psimi = open("tests/fixtures/psimi-sample.xml", "rb").read()
coll = Collection.from_sources([("psimi", psimi)])
g = coll.graph(1)


def pext(sd):
    return {
        frozenset(v for _, v in n.extent)
        for n in sd.nodes.values()
        if n.label == "participant"
    }


# refine golden
sd = create_sd(coll, preset("label"))
rep = refine_node(sd, 4, "[participant].c")
sizes = sorted(e["extentSize"] for e in rep.created)
assert sizes == [1, 4], sizes
assert pext(sd) == {frozenset({4}), frozenset({6, 18, 23, 28})}
big = next(s for s in sd.sids() if sd.node(s).label == "participant" and len(sd.extent(s)) == 4)
rep2 = refine_node(sd, big, "[participant].c.c.ns")
assert pext(sd) == {frozenset({4}), frozenset({6, 28}), frozenset({18, 23})}, pext(sd)

# wrong-direction containment must be rejected
sd_err = create_sd(coll, preset("label"))
try:
    refine_node(sd_err, 4, "[interaction].c")
except ContainmentError:
    pass
else:
    raise AssertionError("containment violation not caught")

# idempotent refine
sd_id = create_sd(coll, preset("label"))
rep_id = refine_node(sd_id, 4, "[participant]")
assert len(rep_id.created) == 1 and rep_id.created[0]["extentSize"] == 5

# stabilize edge golden
sd2 = create_sd(coll, preset("label"))
assert sd2.node(6).label == "expRoleList"
rep3 = stabilize_edge(sd2, 4, 6, "c")
assert sorted(e["extentSize"] for e in rep3.created) == [1, 4]
assert pext(sd2) == {frozenset({4}), frozenset({6, 18, 23, 28})}
s42 = next(
    s for s in sd2.sids() if sd2.node(s).label == "participant" and len(sd2.extent(s)) == 4
)
assert sd2.node(s42).axpre == "([participant]|c[expRoleList])", sd2.node(s42).axpre
assert sd2.edges[(s42, "c", 6)] in (Stability.FORWARD, Stability.BIDIRECTIONAL)

# unfold ns loop on the big class
assert (s42, "ns", s42) in sd2.edges
rep4 = unfold_edge(sd2, s42, "ns")
assert pext(sd2) == {frozenset({6, 28}), frozenset({18}), frozenset({23})} | {frozenset({4})}
# surviving ns edges forward-stable
for (a, ax, b) in list(sd2.edges):
    if ax == "ns" and sd2.node(a).label == "participant" and a != b:
        if sd2.node(b).label == "participant":
            cls = sd2.classify_edge(a, b, ax)
            assert cls in (Stability.FORWARD, Stability.BIDIRECTIONAL), ((a, ax, b), cls)

# stabilize neighbourhood end-to-end
sd3 = create_sd(coll, preset("label"))
rep5 = stabilize_neighbourhood(sd3, "[participant].(c|fc|ns*)", 4)
assert pext(sd3) == {
    frozenset({4}),
    frozenset({6, 28}),
    frozenset({18}),
    frozenset({23}),
}, pext(sd3)

# lpath golden on node 2
nb2 = neighbourhood(g, 2, build_axpre_automaton("[interaction].c[participantList].(c|p)"))
lp2 = {lpath_to_string(p) for p in lpath_set(nb2)}
assert lp2 == {
    "c[participantList]",
    "c[participantList].c[participant]",
    "c[participantList].p[interaction]",
}, lp2

# extent axpre golden
sd4 = create_sd(coll, ("[participant].c.fc.ns*", "[~participant]"))
assert pext(sd4) == {frozenset({4}), frozenset({6, 28}), frozenset({18, 23})}
cls68 = next(
    s
    for s in sd4.sids()
    if sd4.node(s).label == "participant" and {v for _, v in sd4.extent(s)} == {6, 28}
)
ea = extent_axpre(sd4, cls68)
assert (
    str(ea)
    == "[participant].(c[interactorRef]|c[expRoleList]|c[expRoleList].fc[expRole]|c[expRoleList].fc[expRole].ns[expRole])"
), str(ea)

# leaf class: extent axpre is the bare label test
leaf_sid = next(s for s in sd4.sids() if sd4.node(s).label == "names")
assert str(extent_axpre(sd4, leaf_sid)) == "[names]"

# representative of interaction class has one participant node
sd5 = create_sd(coll, ("[interaction].c[participantList].(c|p)", "[~interaction]"))
isid = next(s for s in sd5.sids() if sd5.node(s).label == "interaction")
rep_nb = representative_neighbourhood(sd5, isid)
assert sum(1 for l in rep_nb.labels.values() if l == "participant") == 1

# lpath witness: equal lpath sets, not bisimilar
witness = open("tests/fixtures/lpath-witness.xml", "rb").read()
wg = parse_document(witness, 1, "witness")
auto = build_axpre_automaton("[expRoleList].c.f[expRole]")
w1 = neighbourhood(wg, 2, auto)
w2 = neighbourhood(wg, 5, auto)
assert lpath_set(w1) == lpath_set(w2), (lpath_set(w1), lpath_set(w2))
assert not bisimilar(w1, w2)

print("refine smoke OK")
