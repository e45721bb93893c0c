import random

from hypothesis import given, settings
from hypothesis import strategies as st

from axpre_engine.automata import build_axpre_automaton, neighbourhood
from axpre_engine.axisgraph import parse_document
from axpre_engine.bisim import (
    INF,
    as_block_sets,
    axpre_partition,
    backwards_k_partition,
    bisimilar,
    bpci_partition,
    contraction,
    fb_fixpoint_partition,
    label_partition,
)
from xmlgen import random_doc


def _nb(g, v, expr):
    return neighbourhood(g, v, build_axpre_automaton(expr))


def test_bisimilarity_separates_distinct_role_lists(psimi_graph):
    g = psimi_graph
    assert not bisimilar(_nb(g, 6, "[participant].c.fc.ns*"), _nb(g, 18, "[participant].c.fc.ns*"))
    assert bisimilar(_nb(g, 6, "[participant].c*"), _nb(g, 18, "[participant].c*"))


def test_anchor_partition_collects_matching_roots(psimi_graph):
    classes, empty = axpre_partition([psimi_graph], "[participant]")
    assert len(classes) == 1
    assert sorted(v for _, v in classes[0]) == [4, 6, 18, 23, 28]
    assert len(empty) == psimi_graph.size - 5


def test_refining_partitions_on_psimi(psimi_graph):
    cls_c, _ = axpre_partition([psimi_graph], "[participant].c")
    assert {frozenset(v for _, v in b) for b in cls_c} == {
        frozenset({4}),
        frozenset({6, 18, 23, 28}),
    }
    cls2, _ = axpre_partition([psimi_graph], "[participant].c.c.ns")
    assert {frozenset(v for _, v in b) for b in cls2} == {
        frozenset({4}),
        frozenset({6, 28}),
        frozenset({18, 23}),
    }


def test_contraction_merges_bisimilar_blocks(psimi_graph):
    g = psimi_graph
    expr = "[interaction].c[participantList].(c|p)"
    rep = contraction([_nb(g, 2, expr), _nb(g, 14, expr)])
    part_nodes = [v for v, l in rep.labels.items() if l == "participant"]
    assert len(part_nodes) == 1
    assert len(rep.labels) == 4


def test_generic_partition_matches_dedicated_algorithms(psimi_graph):
    graphs = [psimi_graph]
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


def test_zero_step_backwards_partition_is_the_label_partition(psimi_graph):
    graphs = [psimi_graph]
    assert as_block_sets(backwards_k_partition(graphs, 0)) == as_block_sets(
        label_partition(graphs)
    )


def _random_graphs(seed):
    rng = random.Random(seed)
    graphs = []
    for i in range(rng.randint(1, 3)):
        data = random_doc(rng, max_nodes=rng.randint(3, 14))
        graphs.append(parse_document(data, i + 1, "gen%d" % i))
    return graphs


def _is_partition(blocks, graphs):
    universe = {(g.doc_id, v) for g in graphs for v in g.node_ids()}
    seen = set()
    for b in blocks:
        assert b, "empty block"
        assert not (b & seen), "blocks overlap"
        seen |= set(b)
    return seen <= universe


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_backwards_partitions_are_partitions_and_form_a_chain(seed):
    graphs = _random_graphs(seed)
    prev = None
    for k in (0, 1, 2, INF):
        blocks = as_block_sets(backwards_k_partition(graphs, k))
        assert _is_partition(blocks, graphs)
        if prev is not None:
            # a deeper look only splits blocks, never merges them
            for b in blocks:
                assert any(b <= c for c in prev), (k, b)
        prev = blocks


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fixpoint_partition_refines_the_backwards_partition(seed):
    graphs = _random_graphs(seed)
    back = as_block_sets(backwards_k_partition(graphs, INF))
    both = as_block_sets(fb_fixpoint_partition(graphs))
    assert _is_partition(both, graphs)
    for b in both:
        assert any(b <= c for c in back)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_members_of_a_block_share_a_label(seed):
    graphs = _random_graphs(seed)
    for blocks in (
        as_block_sets(fb_fixpoint_partition(graphs)),
        as_block_sets(bpci_partition(graphs, 1, 1, 2)),
    ):
        lookup = {g.doc_id: g for g in graphs}
        for b in blocks:
            labels = {lookup[d].label(v) for d, v in b}
            assert len(labels) == 1, b
