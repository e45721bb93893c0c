"""Extent expressions: XPath formulas that name a summary node's extent.

Each materialized summary node can carry an expression whose answer over
the collection is exactly the node's extent.  With those expressions an
index can drop the element table and still refine or stabilize nodes by
evaluating composed expressions instead of touching stored element ids.

Three forms are produced here:

* ``generate_ee`` builds the general form: a label anchor, one existence
  predicate per path of the representative neighbourhood, and negated
  predicates that rule out the paths seen only in competing nodes.
* ``generate_ee_cstar`` builds the count-closed form available when the
  node's expression is a child closure: the descendant count must equal
  the sum of the counts along the known paths, which pins the subtree.
* ``stabilize_edge_xpath`` composes existing expressions with an axis
  intersection to split a node without consulting stored extents.
"""

from bisect import bisect_left
from dataclasses import dataclass
from enum import Enum

from .automata import axpre_contains
from .axisgraph import AXIS_INVERSE
from .axpre import AxisStep, Concat, Disj, Empty, LabelTest, Star, TestStep, disj, parse_axpre
from .errors import (
    ContractViolation,
    CoverageError,
    DataError,
    MissingExtentExpressionError,
    NotDistinguishableError,
    UsageError,
)
from .refine import (
    RefinementReport,
    _node_entry,
    _resolve_edge,
    lpath_set,
    lpath_to_string,
    lpaths_in_emission_order,
    representative_neighbourhood,
)
from .summary import Stability
from .xpath import eval_xpath, parse_xpath


class EeKind(str, Enum):
    NOT_PREDICATED = "not-predicated"
    COUNT_CLOSED = "count-closed"
    COMPOSED = "composed"


@dataclass(frozen=True)
class ExtentExpression:
    """An XPath expression contracted to evaluate to a node's extent."""

    sid: int
    text: str
    kind: EeKind

    def parse(self):
        return parse_xpath(self.text)

    def evaluate(self, collection):
        return evaluate_ee(collection, self.text)

    def to_json(self):
        return {"sid": self.sid, "text": self.text, "kind": self.kind.value}


def evaluate_ee(collection, expr):
    """Answer of ``expr`` over every document, as a set of (doc, node)."""
    ast = parse_xpath(expr) if isinstance(expr, str) else expr
    out = set()
    for doc_id in collection.ids():
        g = collection.graph(doc_id)
        for v in eval_xpath(ast, g):
            out.add((doc_id, v))
    return out


# -- path step rendering
#
# fc and ns have no XPath axis of their own, so their steps go through
# position one on the child and following-sibling axes.  Inside a negated
# path that extends another negated path, the extension is only reached
# when the shorter path already failed, so sibling steps past that point
# may use the loose child-test spelling without changing the answer.

_FULL_AXIS = {
    "c": "child",
    "p": "parent",
    "d": "descendant",
    "a": "ancestor",
    "ds": "descendant-or-self",
    "as": "ancestor-or-self",
    "f": "following",
    "pc": "preceding",
    "fs": "following-sibling",
    "ps": "preceding-sibling",
}


def _render_step(axis_name, label, loose=False):
    if axis_name == "fc":
        return "c::*[1][s::%s]" % label
    if axis_name == "ns":
        if loose:
            return "fs::*[1][%s]" % label
        return "fs::*[1][s::%s]" % label
    return "%s::%s" % (axis_name, label)


def _render_lpath(path, loose_from=None):
    parts = []
    for idx, (axis_name, label) in enumerate(path):
        loose = loose_from is not None and idx >= loose_from
        parts.append(_render_step(axis_name, label, loose))
    return "/".join(parts)


def _longest_negative_prefix(path, negatives):
    best = None
    for other in negatives:
        if len(other) < len(path) and path[: len(other)] == other:
            if best is None or len(other) > best:
                best = len(other)
    return best


def _maximal_paths(paths):
    return [
        p
        for p in paths
        if not any(q != p and q[: len(p)] == p for q in paths)
    ]


def _competitor_paths(sd, node, own):
    """LPath sets of same-label nodes with comparable expressions.

    Raises when a competitor carries the very same path set: no path
    based expression can tell the two extents apart then.
    """
    out = []
    own_expr = parse_axpre(node.axpre)
    for other in sd.sids():
        if other == node.sid:
            continue
        peer = sd.nodes[other]
        if peer.label != node.label:
            continue
        peer_expr = parse_axpre(peer.axpre)
        if not (
            axpre_contains(own_expr, peer_expr) or axpre_contains(peer_expr, own_expr)
        ):
            continue
        peer_paths = lpath_set(representative_neighbourhood(sd, other))
        if peer_paths == own:
            raise NotDistinguishableError([node.sid, other])
        out.append(peer_paths)
    return out


def generate_ee(sd, sid):
    """General extent expression for a materialized node.

    Positive predicates assert every path of the representative
    neighbourhood; negative predicates rule out the maximal extra paths
    of each competing node with the same label and a comparable
    expression.  A competitor with the very same path set cannot be told
    apart and raises.
    """
    node = sd.node(sid)
    rep = representative_neighbourhood(sd, sid)
    own = lpath_set(rep)

    negatives = []
    seen = set()
    for peer_paths in _competitor_paths(sd, node, own):
        for path in _maximal_paths(peer_paths - own):
            if path not in seen:
                seen.add(path)
                negatives.append(path)
    negatives.sort(key=lambda p: (len(p), lpath_to_string(p)))

    parts = ["/ds::%s" % node.label]
    for path in lpaths_in_emission_order(rep):
        parts.append("[%s]" % _render_lpath(path))
    for path in negatives:
        loose_from = _longest_negative_prefix(path, seen)
        parts.append("[not(%s)]" % _render_lpath(path, loose_from))
    return ExtentExpression(sid, "".join(parts), EeKind.NOT_PREDICATED)


def _walk_axes(expr, axes, stars):
    if isinstance(expr, AxisStep):
        axes.add(expr.axis)
    elif isinstance(expr, (Concat, Disj)):
        for part in expr.parts:
            _walk_axes(part, axes, stars)
    elif isinstance(expr, Star):
        inner = set()
        _walk_axes(expr.inner, inner, stars)
        axes.update(inner)
        if inner:
            stars.append(inner)
    elif isinstance(expr, (Empty, TestStep)):
        pass


def has_count_closure_shape(expr):
    """True when the expression is a child closure, the shape whose
    extents are pinned by a descendant count."""
    ast = parse_axpre(expr) if isinstance(expr, str) else expr
    axes = set()
    stars = []
    _walk_axes(ast, axes, stars)
    return axes <= {"c"} and bool(stars)


def generate_ee_cstar(sd, sid):
    """Count-closed extent expression for a child-closure node.

    Every neighbourhood path is asserted, and the count of all
    descendants must equal the sum of the counts along those paths, so
    no unseen structure can hide anywhere in a matching subtree.
    """
    node = sd.node(sid)
    if not has_count_closure_shape(node.axpre):
        raise ContractViolation(
            "expression %s of s%d is not a child closure; the count-closed "
            "form does not apply" % (node.axpre, sid)
        )
    rep = representative_neighbourhood(sd, sid)
    paths = lpaths_in_emission_order(rep)
    for path in paths:
        if any(axis_name != "c" for axis_name, _ in path):
            raise ContractViolation(
                "neighbourhood of s%d leaves the child axis" % sid
            )
    # multiplicity is invisible to the count balance, so an identical
    # competing path set defeats this form just like the general one
    _competitor_paths(sd, node, lpath_set(rep))

    parts = ["ds::%s" % node.label]
    for path in paths:
        parts.append("[%s]" % _render_lpath(path))
    if paths:
        total = "+".join("count(%s)" % _render_lpath(p) for p in paths)
    else:
        total = "0"
    parts.append("[count(d::*)=%s]" % total)
    return ExtentExpression(sid, "".join(parts), EeKind.COUNT_CLOSED)


def annotate_node(sd, sid):
    """Attach an extent expression to the node, preferring the
    count-closed form when the node's expression allows it."""
    if has_count_closure_shape(sd.axpre(sid)):
        ee = generate_ee_cstar(sd, sid)
    else:
        ee = generate_ee(sd, sid)
    sd.node(sid).ee = ee.text
    return ee


def annotate_all(sd):
    """Annotate every node that admits an expression; nodes that cannot
    be told apart are left bare.  Returns the annotated expressions."""
    out = {}
    for sid in sd.sids():
        try:
            out[sid] = annotate_node(sd, sid)
        except NotDistinguishableError:
            sd.node(sid).ee = None
    return out


# -- stabilization by expression


def _axis_target_expr(axis_name, label):
    if axis_name == "fc":
        return "c::*[1][s::%s]" % label
    if axis_name == "ns":
        return "fs::*[1][s::%s]" % label
    return "%s::%s" % (_FULL_AXIS[axis_name], label)


def stabilize_edge_xpath(sd, si, sj, axis_name=None):
    """Split ``si`` along its edge to ``sj`` using extent expressions only.

    The partition is obtained by evaluating the base expression of
    ``si`` restricted to elements whose axis step intersects the
    expression of ``sj``, and its complement.  Stored extents are used
    solely to sanity-check coverage; the split itself never reads them.
    """
    sd.node(si)
    sd.node(sj)
    if si == sj:
        raise UsageError(
            "self loops are unrolled structurally; use unfold_edge for s%d" % si
        )
    axis_name = _resolve_edge(sd, si, sj, axis_name)
    if axis_name is None:
        return RefinementReport(noop=True)
    cls = sd.classify_edge(si, sj, axis_name)
    if cls in (Stability.FORWARD, Stability.BIDIRECTIONAL) or cls is None:
        return RefinementReport(noop=True)

    base = sd.node(si).ee
    target = sd.node(sj).ee
    if base is None:
        raise MissingExtentExpressionError(si)
    if target is None:
        raise MissingExtentExpressionError(sj)

    pred = "%s intersect %s" % (_axis_target_expr(axis_name, sd.label(sj)), target)
    with_edge = "%s[%s]" % (base, pred)
    without_edge = "%s[not(%s)]" % (base, pred)
    with_extent = evaluate_ee(sd.collection, with_edge)
    without_extent = evaluate_ee(sd.collection, without_edge)

    old = sd.node(si)
    if (with_extent | without_extent) != old.extent or (with_extent & without_extent):
        raise CoverageError(
            "composed expressions do not partition the extent of s%d" % si
        )
    if not without_extent:
        sd.edges[(si, axis_name, sj)] = cls
        return RefinementReport(noop=True)

    composed = disj(
        parse_axpre(old.axpre), AxisStep(axis_name, LabelTest("eq", sd.label(sj)))
    )
    shown = str(composed)
    removed = [_node_entry(old)]
    sd.remove_node(si)
    created = []
    created_sids = []
    blocks = sorted(
        [(without_extent, without_edge), (with_extent, with_edge)],
        key=lambda block: min(block[0]),
    )
    for extent, text in blocks:
        new_sid = sd.add_node(old.label, shown, extent, ee=text)
        created_sids.append(new_sid)
        created.append(
            {"sid": new_sid, "axpre": shown, "label": old.label, "extentSize": len(extent)}
        )
    sd.refresh_edges_around(created_sids)
    for new_sid in created_sids:
        if (new_sid, axis_name, sj) in sd.edges:
            sd.classify_edge(new_sid, sj, axis_name)
    touched = sum(
        1 for (a, _, b) in sd.edges if a in created_sids or b in created_sids
    )
    sd.seq += 1
    return RefinementReport(removed, created, touched)


# -- edge recomputation without stored extents


def compute_edge_by_xpath(sd, axis_name, si, extent, s, candidates=None):
    """Recreate the ``axis_name`` edges of a node that replaced ``s``.

    Candidates default to the axis successors of ``s`` while its edges
    are still present; callers that already dropped ``s`` pass the
    candidate sids themselves.  A candidate equal to ``s`` stands for
    the replacement and yields a self loop.  Each candidate's extent
    expression is evaluated per document and an edge is added when some
    extent member's axis step meets the answer.  Added edges stay
    unchecked.
    """
    if candidates is None:
        candidates = sorted(
            {b for (a, ax, b) in sd.edges if a == s and ax == axis_name}
        )
    by_doc = {}
    for doc_id, v in extent:
        by_doc.setdefault(doc_id, []).append(v)
    added = []
    for cj in candidates:
        target_sid = si if cj == s else cj
        node = sd.nodes.get(target_sid)
        if node is None:
            continue
        if node.ee is None:
            raise MissingExtentExpressionError(target_sid)
        ast = parse_xpath(node.ee)
        hit = False
        for doc_id in sorted(by_doc):
            g = sd.collection.graph(doc_id)
            answer = set(eval_xpath(ast, g))
            if not answer:
                continue
            if any(set(g.axis_step(v, axis_name)) & answer for v in by_doc[doc_id]):
                hit = True
                break
        if hit:
            sd.add_edge(si, axis_name, target_sid)
            added.append((si, axis_name, target_sid))
            inv = AXIS_INVERSE.get(axis_name)
            if inv in sd.sd_axes and (target_sid, inv, si) not in added:
                sd.add_edge(target_sid, inv, si)
    return added


_MERGE_AXES = frozenset({"fc", "c", "p", "a", "d", "ns", "fs", "f", "ps", "pc"})


@dataclass(frozen=True)
class MergeEdgeResult:
    """Outcome of deciding one summary edge from span records alone."""

    axis: str
    si: int
    sj: int
    exists: bool
    left_total: int
    left_hit: int
    right_total: int
    right_hit: int

    @property
    def stability(self):
        if not self.exists:
            return None
        if self.left_hit == self.left_total:
            if self.right_hit == self.right_total:
                return Stability.BIDIRECTIONAL
            return Stability.FORWARD
        return Stability.EXISTENTIAL


def _axis_targets(i, axis_name, recs, starts, parent, children, pos_in_parent):
    n = len(recs)
    if axis_name == "c":
        return children[i]
    if axis_name == "p":
        return [] if parent[i] is None else [parent[i]]
    if axis_name == "fc":
        return children[i][:1]
    if axis_name in ("ns", "fs", "ps"):
        p = parent[i]
        if p is None:
            return []
        sibs = children[p]
        pos = pos_in_parent[i]
        if axis_name == "ns":
            return sibs[pos + 1 : pos + 2]
        if axis_name == "fs":
            return sibs[pos + 1 :]
        return sibs[:pos]
    if axis_name == "d":
        return range(i + 1, bisect_left(starts, recs[i][2]))
    if axis_name == "a":
        out = []
        j = parent[i]
        while j is not None:
            out.append(j)
            j = parent[j]
        return out
    if axis_name == "f":
        return range(bisect_left(starts, recs[i][2]), n)
    # pc: entirely before, so closed no later than our start
    return [j for j in range(i) if recs[j][2] <= recs[i][1]]


def compute_edge_by_merge(records, axis_name, si, sj):
    """Decide the edge ``(si, axis, sj)`` from span records alone.

    ``records`` is the full element table as (doc, sid, start, end)
    rows.  Within each document the rows are merged by position:
    containment gives the child and descendant family, sibling order
    and span precedence give the rest.  Rows of different documents are
    never related.  The result carries enough hit counts to state the
    stability class exactly as edge classification would.
    """
    if axis_name not in _MERGE_AXES:
        raise UsageError(
            "axis %s is not decidable by the merge computation" % axis_name
        )
    docs = {}
    for doc_id, sid, start, end in records:
        docs.setdefault(doc_id, []).append((sid, start, end))

    exists = False
    left_total = left_hit = right_total = right_hit = 0
    for doc_id in sorted(docs):
        recs = sorted(docs[doc_id], key=lambda r: r[1])
        n = len(recs)
        starts = [r[1] for r in recs]
        parent = [None] * n
        children = [[] for _ in range(n)]
        pos_in_parent = [0] * n
        stack = []
        for i, (_, start, _) in enumerate(recs):
            while stack and recs[stack[-1]][2] <= start:
                stack.pop()
            if stack:
                parent[i] = stack[-1]
                pos_in_parent[i] = len(children[stack[-1]])
                children[stack[-1]].append(i)
            stack.append(i)

        lefts = [i for i in range(n) if recs[i][0] == si]
        rights = {i for i in range(n) if recs[i][0] == sj}
        left_total += len(lefts)
        right_total += len(rights)
        if not lefts or not rights:
            continue
        hit = set()
        for i in lefts:
            targets = _axis_targets(
                i, axis_name, recs, starts, parent, children, pos_in_parent
            )
            matched = [j for j in targets if j in rights]
            if matched:
                left_hit += 1
                hit.update(matched)
                exists = True
        right_hit += len(hit)

    if left_total == 0:
        raise DataError(
            "summary node s%d has no element records; its extent is virtual "
            "or empty" % si
        )
    if right_total == 0:
        raise DataError(
            "summary node s%d has no element records; its extent is virtual "
            "or empty" % sj
        )
    return MergeEdgeResult(
        axis_name, si, sj, exists, left_total, left_hit, right_total, right_hit
    )


def records_from_sd(sd):
    """Span records of every materialized extent member, for the merge
    based edge computation."""
    out = []
    for sid in sd.sids():
        for doc_id, v in sorted(sd.extent(sid)):
            start, end = sd.collection.graph(doc_id).span(v)
            out.append((doc_id, sid, start, end))
    return out
