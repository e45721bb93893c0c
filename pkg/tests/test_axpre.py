import pytest
from hypothesis import given
from hypothesis import strategies as st

from axpre_engine.axpre import (
    AXIS_NAMES,
    EPSILON,
    axis,
    canonical_string,
    concat,
    disj,
    eps,
    parse_axpre,
    star,
)
from axpre_engine.axpre import test as label_test
from axpre_engine.errors import AxpreSyntaxError


def rt(text):
    return canonical_string(parse_axpre(text))


def test_atoms_round_trip():
    assert rt("e") == "e"
    assert rt("c") == "c"
    assert rt("[item]") == "[item]"
    assert rt("[~item]") == "[~item]"
    assert rt("c[item]") == "c[item]"
    assert rt("ns[~item]") == "ns[~item]"


def test_star_binds_tighter_than_concat_than_disjunction():
    assert parse_axpre("c.p|d") == disj(concat(axis("c"), axis("p")), axis("d"))
    assert parse_axpre("c.p*") == concat(axis("c"), star(axis("p")))
    assert parse_axpre("(c.p)*") == star(concat(axis("c"), axis("p")))
    assert parse_axpre("(c|p).d") == concat(disj(axis("c"), axis("p")), axis("d"))


def test_whitespace_is_insignificant():
    assert parse_axpre(" c . p | d ") == parse_axpre("c.p|d")


def test_concat_drops_the_empty_expression():
    assert parse_axpre("e.c") == axis("c")
    assert parse_axpre("c.e.p") == parse_axpre("c.p")
    assert canonical_string(concat(eps(), axis("c"), eps())) == "c"


def test_star_of_empty_is_empty():
    assert star(eps()) == EPSILON
    assert parse_axpre("e*") == EPSILON


def test_constructors_flatten_nested_shapes():
    assert concat(concat(axis("c"), axis("p")), axis("d")) == parse_axpre("c.p.d")
    assert disj(disj(axis("c"), axis("p")), axis("d")) == parse_axpre("c|p|d")
    assert concat(axis("c")) == axis("c")
    assert disj(axis("c")) == axis("c")


def test_label_tests_on_axes_and_anchors_differ():
    assert parse_axpre("[item]") != parse_axpre("c[item]")
    assert parse_axpre("c[item]") != parse_axpre("c[~item]")
    assert parse_axpre("c[item]") != parse_axpre("c")


@pytest.mark.parametrize(
    "bad",
    ["", "   ", "[unterminated", "[]", "[~]", "q", "c.", "(c", "c)", "|c", ".", "c..p"],
)
def test_malformed_expressions_are_rejected(bad):
    with pytest.raises(AxpreSyntaxError):
        parse_axpre(bad)


def test_unknown_axis_is_a_syntax_error():
    with pytest.raises(AxpreSyntaxError):
        parse_axpre("child")
    with pytest.raises(AxpreSyntaxError):
        axis("child")


_labels = st.sampled_from(["item", "participant", "a1"])
_axis_names = st.sampled_from(sorted(AXIS_NAMES))

_leaves = st.one_of(
    st.just(eps()),
    st.builds(label_test, _labels, st.booleans()),
    st.builds(axis, _axis_names),
    st.builds(axis, _axis_names, _labels, st.booleans()),
)

_exprs = st.recursive(
    _leaves,
    lambda inner: st.one_of(
        st.builds(lambda a, b: concat(a, b), inner, inner),
        st.builds(lambda a, b: disj(a, b), inner, inner),
        st.builds(star, inner),
    ),
    max_leaves=10,
)


@given(_exprs)
def test_parse_inverts_canonical_string(expr):
    assert parse_axpre(canonical_string(expr)) == expr


@given(_exprs)
def test_canonical_string_is_a_fixed_point(expr):
    text = canonical_string(expr)
    assert canonical_string(parse_axpre(text)) == text
