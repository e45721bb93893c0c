import pytest

from axpre_engine.axisgraph import Collection, parse_document, text_within
from axpre_engine.errors import (
    DocumentParseError,
    UnknownAxisError,
    UnknownDocumentError,
    UsageError,
)


def test_psimi_fixture_parses_to_known_shape(psimi_graph):
    g = psimi_graph
    assert g.size == 34
    assert g.label(6) == "participant"
    assert g.label(8) == "expRoleList"
    assert g.label(9) == "expRole" and g.label(11) == "expRole"
    assert g.label(13) == "experimentList" and g.children[13] == []
    assert g.label(14) == "interaction"
    assert [g.label(v) for v in (18, 23, 28)] == ["participant"] * 3


def test_axis_steps_on_psimi(psimi_graph):
    g = psimi_graph
    assert g.axis_step(8, "c") == [9, 11]
    assert g.axis_step(8, "fc") == [9]
    assert g.axis_step(9, "ns") == [11]
    assert g.axis_step(11, "ns") == []
    assert g.axis_step(9, "p") == [8]
    assert g.axis_step(9, "s") == [9]
    assert g.axis_step(11, "ns_inv") == [9]
    assert g.axis_step(9, "fc_inv") == [8]
    assert g.axis_step(11, "fc_inv") == []


def test_reverse_axes_list_nearest_first(psimi_graph):
    g = psimi_graph
    assert g.axis_step(9, "a") == [8, 6, 3, 2, 1]
    assert g.axis_step(9, "as") == [9, 8, 6, 3, 2, 1]
    assert g.ancestors(9) == [8, 6, 3, 2, 1]
    ps = g.axis_step(11, "ps")
    assert ps and ps[0] == 9
    pc = g.axis_step(6, "pc")
    assert pc == sorted(pc, reverse=True)
    assert 3 not in pc and 1 not in pc  # ancestors are excluded


def test_subtree_and_following_axes(psimi_graph):
    g = psimi_graph
    assert g.axis_step(8, "d") == [9, 10, 11, 12]
    assert g.axis_step(8, "ds") == [8, 9, 10, 11, 12]
    f = g.axis_step(8, "f")
    assert f == list(range(13, 35))


def test_unknown_axis_raises(psimi_graph):
    with pytest.raises(UnknownAxisError):
        psimi_graph.axis_step(1, "ns2")


def test_attribute_nodes_join_the_sibling_chain():
    g = parse_document(b'<r id="7" lang="en"><a/></r>')
    assert g.labels[1:] == ["r", "@id", "@lang", "a"]
    assert g.axis_step(1, "c") == [2, 3, 4]
    assert g.axis_step(1, "fc") == [2]
    assert g.axis_step(2, "ns") == [3]
    assert g.is_attribute(2) and not g.is_attribute(4)
    assert g.strval(2) == "7"
    assert g.strval(3) == "en"


def test_strval_concatenates_descendant_text():
    g = parse_document(b"<r><a>5</a><b> x <c>y</c></b></r>")
    assert g.strval(1) == "5 x y"
    assert g.strval(3) == " x y"


def test_strval_decodes_entities():
    g = parse_document(b"<r>a&amp;b &lt;tag&gt; &#65;</r>")
    assert g.strval(1) == "a&b <tag> A"


def test_spans_cover_full_elements_and_self_closing_tags():
    data = b"<r><a>5</a><b/></r>"
    g = parse_document(data)
    assert text_within(data, g.span(1)) is not None
    s, e = g.span(2)
    assert data[s:e] == b"<a>5</a>"
    s, e = g.span(3)
    assert data[s:e] == b"<b/>"


def test_namespace_prefixes_expand_to_clark_names():
    g = parse_document(
        b'<r xmlns:m="urn:m"><m:a/><b m:k="1"/></r>'
    )
    # the declaration itself stays visible as an attribute node
    assert g.labels[1:] == ["r", "@xmlns:m", "{urn:m}a", "b", "@{urn:m}k"]


def test_parse_error_carries_location():
    with pytest.raises(DocumentParseError) as err:
        parse_document(b"<r><a></r>", name="broken.xml")
    msg = str(err.value)
    assert "broken.xml" in msg
    assert err.value.line is not None


def test_primitive_edges_and_debug_export():
    g = parse_document(b"<r><a/><b/></r>", doc_id=3)
    assert list(g.primitive_edges()) == [(1, "fc", 2), (2, "ns", 3)]
    dbg = g.export_debug()
    assert [n["label"] for n in dbg["nodes"]] == ["r", "a", "b"]
    assert dbg["edges"] == [
        {"from": 1, "axis": "fc", "to": 2},
        {"from": 2, "axis": "ns", "to": 3},
    ]


def test_collection_assigns_dense_ids_and_caches_graphs(psimi_source):
    coll = Collection.from_sources([("one", psimi_source), ("two", b"<r/>")])
    assert coll.ids() == [1, 2]
    assert len(coll) == 2
    assert coll.name(1) == "one"
    g1 = coll.graph(1)
    assert coll.graph(1) is g1
    coll.drop_cache()
    assert coll.graph(1) is not g1
    assert coll.graph(1).size == g1.size


def test_collection_cache_eviction_is_bounded(psimi_source):
    coll = Collection.from_sources(
        [("a", b"<r/>"), ("b", b"<r/>"), ("c", psimi_source)], cache_size=1
    )
    coll.graph(1)
    coll.graph(2)
    assert len(coll._cache) == 1
    ga = coll.graph(1)
    assert coll.graph(1) is ga  # most recent stays resident


def test_from_paths_skips_unparseable_files(tmp_path, psimi_source):
    good1 = tmp_path / "good1.xml"
    good1.write_bytes(psimi_source)
    bad = tmp_path / "bad.xml"
    bad.write_bytes(b"<r><oops></r>")
    good2 = tmp_path / "good2.xml"
    good2.write_bytes(b"<r/>")
    coll, skipped = Collection.from_paths(
        [good1, bad, good2], on_error="skip"
    )
    assert coll.ids() == [1, 2]
    assert [coll.name(d).endswith(n) for d, n in [(1, "good1.xml"), (2, "good2.xml")]]
    assert len(skipped) == 1 and skipped[0][0].endswith("bad.xml")
    with pytest.raises(DocumentParseError):
        Collection.from_paths([bad])


def test_unknown_document_and_adopt_contract(tmp_path):
    coll = Collection()
    with pytest.raises(UnknownDocumentError):
        coll.graph(7)
    p = tmp_path / "d.xml"
    p.write_bytes(b"<r/>")
    g = parse_document(b"<r/>", doc_id=2)
    with pytest.raises(UsageError):
        coll.adopt(p, g)  # first slot is id 1
    g1 = parse_document(b"<r/>", doc_id=1)
    assert coll.adopt(p, g1) == 1
    assert coll.graph(1) is g1


def test_label_universe_spans_all_documents(psimi_source):
    coll = Collection.from_sources([("p", psimi_source), ("t", b"<zzz/>")])
    universe = coll.label_universe()
    assert "participant" in universe and "zzz" in universe


def test_virtual_document_node_is_not_materialized():
    g = parse_document(b"<r/>")
    assert g.root == 1
    assert list(g.node_ids()) == [1]
