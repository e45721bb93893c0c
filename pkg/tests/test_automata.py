import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from axpre_engine.automata import (
    accepts_path,
    axpre_contains,
    axpre_equivalent,
    build_axpre_automaton,
    neighbourhood,
)
from axpre_engine.axpre import parse_axpre


def test_accepts_path_walks_axis_label_pairs():
    assert accepts_path("[item].c", "item", [("c", "title")])
    assert not accepts_path("[item].c", "channel", [("c", "title")])
    assert accepts_path("[item].c[title]", "item", [("c", "title")])
    assert not accepts_path("[item].c[title]", "item", [("c", "link")])
    assert accepts_path("c*", "r", [("c", "x"), ("c", "y")])
    assert not accepts_path("c*", "r", [("p", "x")])


def test_anchor_only_match_reads_just_the_root_label():
    assert accepts_path("[item]", "item")
    assert not accepts_path("[item]", "channel")
    assert accepts_path("[~item]", "channel")
    # an axis-led expression still anchors on any label
    assert accepts_path("c.c", "whatever")


def test_compiled_automata_are_cached_by_expression():
    assert build_axpre_automaton("c.fc") is build_axpre_automaton("c.fc")


def test_automaton_accepts_tree_and_text_forms():
    a = build_axpre_automaton("[item].c")
    b = build_axpre_automaton(parse_axpre("[item].c"))
    for root, steps in [("item", ()), ("item", (("c", "x"),)), ("other", ())]:
        assert accepts_path(a, root, steps) == accepts_path(b, root, steps)


_PATH_EXPRS = [
    "c*",
    "(c|p)*",
    "c.c",
    "[x].c*",
    "(p*|c*)",
    "c.fc.ns*",
    "[x].(c|fc)",
    "d*",
    "[y].p.p",
]
_AXES_POOL = ["c", "p", "fc", "ns", "d"]


@given(st.sampled_from(_PATH_EXPRS), st.integers(0, 2**32 - 1))
def test_acceptance_is_prefix_closed(expr, seed):
    rng = random.Random(seed)
    root = rng.choice("xy")
    steps = [
        (rng.choice(_AXES_POOL), rng.choice("xy")) for _ in range(rng.randint(0, 4))
    ]
    if accepts_path(expr, root, steps):
        for k in range(len(steps)):
            assert accepts_path(expr, root, steps[:k]), (expr, root, steps, k)


def test_neighbourhoods_follow_only_matched_axis_steps(psimi_graph):
    auto = build_axpre_automaton("[participant].c.fc.ns*")
    nb6 = neighbourhood(psimi_graph, 6, auto)
    nb18 = neighbourhood(psimi_graph, 18, auto)
    assert sorted(nb6.project().nodes()) == [6, 7, 8, 9, 11]
    assert sorted(nb18.project().nodes()) == [18, 19, 20, 21]


def test_neighbourhood_keeps_tracked_edges_and_drops_the_rest(psimi_graph):
    nb8 = neighbourhood(psimi_graph, 8, build_axpre_automaton("[expRoleList].fc.ns*"))
    edges = nb8.project().edges
    assert (8, "fc", 9) in edges
    assert (9, "ns", 11) in edges
    # node 11 is reachable as a child, but the expression never reads c
    assert (8, "c", 11) not in edges


def test_wrong_root_label_gives_the_empty_neighbourhood(psimi_graph):
    assert neighbourhood(psimi_graph, 6, build_axpre_automaton("[interaction].c")).is_empty


def test_containment_follows_language_inclusion():
    assert axpre_contains("p*", "p.p")
    assert not axpre_contains("p.p", "p*")
    assert axpre_contains("[participant].(as|c.fc.ns)", "[participant].c.fc.ns")
    assert not axpre_contains("[participant].c.fc.ns", "[participant].(as|c.fc.ns)")
    # the refinement precondition shape: the finer expression extends the coarser
    assert axpre_contains("[participant].c", "[participant]")


def test_containment_is_reflexive_and_transitive_on_a_chain():
    chain = ["p.p", "p.p.p", "p*"]
    for e in chain:
        assert axpre_contains(e, e)
    assert axpre_contains("p*", "p.p.p")
    assert axpre_contains("p*", "p.p")


def test_equivalence_ignores_disjunct_order():
    assert axpre_equivalent("(p*|c*)", "(c*|p*)")
    assert axpre_equivalent("c.c", "c.c")
    assert not axpre_equivalent("p*", "p.p")


@pytest.mark.parametrize("k", [1, 2, 3])
def test_star_contains_every_finite_power(k):
    assert axpre_contains("c*", ".".join(["c"] * k))
