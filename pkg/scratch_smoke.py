import sys

sys.path.insert(0, "src")
from axpre_engine.axisgraph import Collection, parse_document
from axpre_engine.axpre import parse_axpre, canonical_string
from axpre_engine.automata import neighbourhood, build_axpre_automaton, axpre_contains
from axpre_engine.bisim import (
    axpre_partition,
    bisimilar,
    backwards_k_partition,
    fb_fixpoint_partition,
    bpci_partition,
    as_block_sets,
    contraction,
    INF,
)
from axpre_engine.summary import create_sd, build_pk, preset, Stability

psimi = open("tests/fixtures/psimi-sample.xml", "rb").read()
g = parse_document(psimi, 1, "psimi")
print("psimi size:", g.size)
assert g.size == 34, g.size
assert g.label(6) == "participant", g.label(6)
assert g.label(8) == "expRoleList" and g.label(9) == "expRole" and g.label(11) == "expRole"
assert g.axis_step(8, "c") == [9, 11]
assert g.axis_step(8, "fc") == [9]
assert g.axis_step(9, "ns") == [11]
assert g.label(13) == "experimentList" and g.children[13] == []
assert g.label(14) == "interaction" and g.label(17) == "participantList"
assert [g.label(v) for v in (18, 23, 28)] == ["participant"] * 3

# neighbourhood goldens
nb6 = neighbourhood(g, 6, build_axpre_automaton("[participant].c.fc.ns*"))
nb18 = neighbourhood(g, 18, build_axpre_automaton("[participant].c.fc.ns*"))
print("nb6 nodes:", sorted(nb6.project().nodes()), "edges:", sorted(nb6.project().edges))
assert sorted(nb6.project().nodes()) == [6, 7, 8, 9, 11]
assert sorted(nb18.project().nodes()) == [18, 19, 20, 21]
assert not bisimilar(nb6, nb18)
cs6 = neighbourhood(g, 6, build_axpre_automaton("[participant].c*"))
cs18 = neighbourhood(g, 18, build_axpre_automaton("[participant].c*"))
assert bisimilar(cs6, cs18), (sorted(cs6.nodes()), sorted(cs18.nodes()))

nb8 = neighbourhood(g, 8, build_axpre_automaton("[expRoleList].fc.ns*"))
assert (8, "c", 11) not in nb8.project().edges
assert (8, "fc", 9) in nb8.project().edges and (9, "ns", 11) in nb8.project().edges

# wrong-label root => empty
assert neighbourhood(g, 6, build_axpre_automaton("[interaction].c")).is_empty

classes, empty = axpre_partition([g], "[participant]")
assert len(classes) == 1 and sorted(v for _, v in classes[0]) == [4, 6, 18, 23, 28]
assert len(empty) == 34 - 5

# contraction example: one participant node in the representative
nb2 = neighbourhood(g, 2, build_axpre_automaton("[interaction].c[participantList].(c|p)"))
nb14 = neighbourhood(g, 14, build_axpre_automaton("[interaction].c[participantList].(c|p)"))
print("nb2:", sorted(nb2.nodes()), sorted(nb2.edges))
rep = contraction([nb2, nb14])
part_nodes = [v for v, l in rep.labels.items() if l == "participant"]
assert len(part_nodes) == 1, rep.labels
# root interaction, participantList, participant, and the interaction
# reached back through p (a leaf role, so a block of its own)
assert len(rep.labels) == 4, rep.labels

# label SD of psimi
coll = Collection.from_sources([("psimi", psimi)])
sd = create_sd(coll, preset("label"))
print("label SD nodes:", len(sd.nodes))
assert len(sd.nodes) == 10
assert sd.node(4).label == "participant"
assert {v for _, v in sd.extent(4)} == {4, 6, 18, 23, 28}
assert sd.axpre(4) == "[participant]"
# (s2,s10) experimentRef edge existential only
assert sd.node(10).label == "experimentRef", sd.node(10).label
cls = sd.classify_edge(2, 10, "c")
assert cls == Stability.EXISTENTIAL, cls

# sd_neighbourhood example
sdn = sd.sd_neighbourhood(2, "c.fc.ns*").project()
assert (2, "c", 3) in sdn.edges and (3, "fc", 4) in sdn.edges and (2, "c", 9) in sdn.edges

# RSS pair
r1 = open("tests/fixtures/rss1.xml", "rb").read()
r2 = open("tests/fixtures/rss2.xml", "rb").read()
rcoll = Collection.from_sources([("rss1", r1), ("rss2", r2)])
rsd = create_sd(rcoll, preset("label"))
offs = {1: 0, 2: 11}
item_sid = next(s for s in rsd.sids() if rsd.node(s).label == "item")
assert item_sid == 6, item_sid
flat = {offs[d] + v for d, v in rsd.extent(6)}
print("item extent flat:", sorted(flat))
assert flat == {6, 18, 24}
enc_sid = next(s for s in rsd.sids() if rsd.node(s).label == "enclosure")
assert enc_sid == 8, enc_sid
assert rsd.classify_edge(6, 8, "c") == Stability.BIDIRECTIONAL
lang_sid = next(s for s in rsd.sids() if rsd.node(s).label == "language")
assert rsd.classify_edge(2, lang_sid, "c") == Stability.EXISTENTIAL

# containment
assert axpre_contains("p*", "p.p")
assert not axpre_contains("p.p", "p*")
assert axpre_contains("[participant].(as|c.fc.ns)", "[participant].c.fc.ns")
assert not axpre_contains("[participant].c.fc.ns", "[participant].(as|c.fc.ns)")
assert axpre_contains("[participant].c", "[participant]")  # refine precondition shape

# oracle equivalences on psimi
graphs = [g]
assert as_block_sets(axpre_partition(graphs, "p*")[0]) == as_block_sets(
    backwards_k_partition(graphs, INF)
)
assert as_block_sets(axpre_partition(graphs, "p.p")[0]) == as_block_sets(
    backwards_k_partition(graphs, 2)
)
assert as_block_sets(axpre_partition(graphs, "(p|c)*")[0]) == as_block_sets(
    fb_fixpoint_partition(graphs)
)
assert as_block_sets(axpre_partition(graphs, "(p*|c*)")[0]) == as_block_sets(
    bpci_partition(graphs, INF, INF, 1)
)

# F+B fast path in create_sd matches the generic partition
fb_sd = create_sd(coll, preset("F+B"), with_edges=False)
fb_blocks = {frozenset(n.extent) for n in fb_sd.nodes.values()}
gen_blocks = as_block_sets(axpre_partition(graphs, "(p*|c*)")[0])
assert fb_blocks == gen_blocks

# build_pk k=0 equals label SD partition
pk0 = build_pk(coll, 0)
assert {frozenset(n.extent) for n in pk0.nodes.values()} == {
    frozenset(n.extent) for n in sd.nodes.values()
}

# refinement partition goldens via axpre_partition
cls_c, _ = axpre_partition(graphs, "[participant].c")
sets_c = {frozenset(v for _, v in b) for b in cls_c}
assert sets_c == {frozenset({4}), frozenset({6, 18, 23, 28})}, sets_c
cls_ccns, _ = axpre_partition(graphs, "[participant].c.c.ns")
sets2 = {frozenset(v for _, v in b) for b in cls_ccns}
assert sets2 == {frozenset({4}), frozenset({6, 28}), frozenset({18, 23})}, sets2

print("smoke OK")
