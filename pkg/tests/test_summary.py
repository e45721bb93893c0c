import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axpre_engine.axisgraph import Collection, parse_document
from axpre_engine.axpre import canonical_string, parse_axpre
from axpre_engine.bisim import INF, as_block_sets, axpre_partition
from axpre_engine.errors import PartitionError, UsageError
from axpre_engine.summary import Stability, build_pk, create_sd, preset
from xmlgen import random_doc


def test_label_summary_of_psimi(psimi_coll):
    sd = create_sd(psimi_coll, preset("label"))
    assert len(sd.nodes) == 10
    assert sd.node(4).label == "participant"
    assert {v for _, v in sd.extent(4)} == {4, 6, 18, 23, 28}
    assert sd.axpre(4) == "[participant]"
    assert sd.node(10).label == "experimentRef"


def test_edge_stability_classification(psimi_coll):
    sd = create_sd(psimi_coll, preset("label"))
    # some interactions carry an experimentRef child, some do not
    assert sd.classify_edge(2, 10, "c") == Stability.EXISTENTIAL
    erl = next(s for s in sd.sids() if sd.node(s).label == "expRoleList")
    er = next(s for s in sd.sids() if sd.node(s).label == "expRole")
    # every expRoleList holds an expRole and every expRole sits in one
    assert sd.classify_edge(erl, er, "c") == Stability.BIDIRECTIONAL
    # ...but only the first expRole of a list is reached through fc
    assert sd.classify_edge(erl, er, "fc") == Stability.FORWARD


def test_rss_label_summary_and_edges(rss_coll):
    sd = create_sd(rss_coll, preset("label"))
    offs = {1: 0, 2: 11}
    item = next(s for s in sd.sids() if sd.node(s).label == "item")
    assert item == 6
    assert {offs[d] + v for d, v in sd.extent(item)} == {6, 18, 24}
    enc = next(s for s in sd.sids() if sd.node(s).label == "enclosure")
    assert sd.classify_edge(item, enc, "c") == Stability.BIDIRECTIONAL
    lang = next(s for s in sd.sids() if sd.node(s).label == "language")
    assert sd.classify_edge(2, lang, "c") == Stability.EXISTENTIAL


def test_summary_neighbourhood_walks_summary_edges(psimi_coll):
    sd = create_sd(psimi_coll, preset("label"))
    sdn = sd.sd_neighbourhood(2, "c.fc.ns*").project()
    assert (2, "c", 3) in sdn.edges
    assert (3, "fc", 4) in sdn.edges
    assert (2, "c", 9) in sdn.edges


def test_paired_star_fast_path_matches_generic_partition(psimi_coll, psimi_graph):
    fb_sd = create_sd(psimi_coll, preset("F+B"), with_edges=False)
    blocks = {frozenset(n.extent) for n in fb_sd.nodes.values()}
    assert blocks == as_block_sets(axpre_partition([psimi_graph], "(p*|c*)")[0])


def test_chain_summary_zero_depth_equals_label_summary(psimi_coll):
    sd = create_sd(psimi_coll, preset("label"))
    pk0 = build_pk(psimi_coll, 0)
    assert {frozenset(n.extent) for n in pk0.nodes.values()} == {
        frozenset(n.extent) for n in sd.nodes.values()
    }


def test_chain_summary_shows_realized_depths():
    coll = Collection.from_sources([("d", b"<r><a><b/></a><a/></r>")])
    sd = build_pk(coll, INF)
    shown = sorted(sd.axpre(s) for s in sd.sids())
    assert shown == ["[a].p", "[b].p.p", "[r]"]


def test_chain_summary_streaming_counts_only():
    coll = Collection.from_sources([("d", b"<r><a/><a/><b/></r>")])
    rows = []
    sd = build_pk(coll, INF, row_sink=lambda *row: rows.append(row))
    assert sd.extent_counts is not None
    assert sorted(sd.extent_counts.values()) == [1, 1, 2]
    assert all(not n.extent for n in sd.nodes.values())
    assert len(rows) == 4
    doc_ids, sids, vs = {r[0] for r in rows}, {r[1] for r in rows}, [r[2] for r in rows]
    assert doc_ids == {1} and sorted(vs) == [1, 2, 3, 4]
    assert sids == set(sd.sids())


def test_partition_error_when_expressions_do_not_cover(psimi_coll):
    with pytest.raises(PartitionError):
        create_sd(psimi_coll, ("[participant]",))


def test_first_expression_wins_ties():
    coll = Collection.from_sources([("d", b"<r><a/></r>")])
    sd = create_sd(coll, ("[a]", "e"), with_edges=False)
    a_sid = next(s for s in sd.sids() if sd.node(s).label == "a")
    assert sd.axpre(a_sid) == "[a]"


@pytest.mark.parametrize(
    "name,expected",
    [
        ("label", "e"),
        ("dataguide-tree", "p*"),
        ("1-index", "p*"),
        ("F&B", "(p|c)*"),
        ("fb", "(p|c)*"),
        ("F+B", "(p*|c*)"),
        ("skeleton", "(fc.ns*)*"),
    ],
)
def test_preset_names_normalize(name, expected):
    (expr,) = preset(name)
    assert canonical_string(expr) == expected


def test_parameterized_presets():
    (expr,) = preset("a", k=2)
    assert canonical_string(expr) == "p.p"
    (expr,) = preset("bpci", k_in=1, k_out=1, td=2)
    assert canonical_string(expr) == "(p|c).(p|c)"
    with pytest.raises(UsageError):
        preset("a")
    with pytest.raises(UsageError):
        preset("bpci", k_in=1, k_out=1, td=0)
    with pytest.raises(UsageError):
        preset("nosuch")


def test_summary_stats_and_exports(psimi_coll):
    sd = create_sd(psimi_coll, preset("label"))
    stats = sd.stats()
    assert stats["nodes"] == 10
    assert stats["elements"] == 34
    payload = sd.to_json(classify=True)
    assert payload["v"] == 1
    assert len(payload["nodes"]) == 10
    dot = sd.to_dot()
    assert dot.startswith("digraph")


def _random_coll(seed):
    rng = random.Random(seed)
    sources = []
    for i in range(rng.randint(1, 3)):
        sources.append(("g%d" % i, random_doc(rng, max_nodes=rng.randint(3, 16))))
    return Collection.from_sources(sources)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_summary_extents_partition_the_collection(seed):
    coll = _random_coll(seed)
    expr = random.Random(seed).choice(["label", "1-index", "fb", "F+B", "skeleton"])
    sd = create_sd(coll, preset(expr), with_edges=False)
    union = set()
    for s in sd.sids():
        ext = sd.extent(s)
        assert ext, "summary node with empty extent"
        assert not (ext & union)
        union |= ext
    assert union == {(g.doc_id, v) for g in coll.graphs() for v in g.node_ids()}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unbounded_chain_summary_groups_by_label_path(seed):
    coll = _random_coll(seed)
    sd = build_pk(coll, INF)

    def label_path(g, v):
        out = [g.label(v)]
        u = g.parent[v]
        while u:
            out.append(g.label(u))
            u = g.parent[u]
        return tuple(out)

    expected = {}
    for g in coll.graphs():
        for v in g.node_ids():
            expected.setdefault(label_path(g, v), set()).add((g.doc_id, v))
    assert {frozenset(n.extent) for n in sd.nodes.values()} == {
        frozenset(b) for b in expected.values()
    }


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_bounded_chain_summary_matches_generic_partition(seed, k):
    coll = _random_coll(seed)
    graphs = list(coll.graphs())
    sd = build_pk(coll, k)
    expr = parse_axpre(".".join(["p"] * k)) if k else parse_axpre("e")
    blocks = as_block_sets(axpre_partition(graphs, expr)[0])
    assert {frozenset(n.extent) for n in sd.nodes.values()} == blocks
