"""Declarative summary refinements.

All operations replace summary nodes by repartitioning their extents
under a richer expression: splitting a node, making an edge or a whole
axis forward stable, unrolling a self loop, or stabilizing everything an
expression reaches from a node.  Each returns a report of the nodes it
removed and created.

The module also derives label paths (LPaths) from representative
neighbourhoods and builds extent expressions out of them.
"""

from .axpre import AxisStep, LabelTest, TestStep, concat, disj, parse_axpre, star
from .automata import build_axpre_automaton, neighbourhood
from .axisgraph import AXIS_INVERSE
from .bisim import contraction, partition_by_bisimilarity
from .errors import (
    ContainmentError,
    CoverageError,
    InclusionError,
    UnknownSidError,
    UsageError,
)
from .automata import axpre_contains
from .summary import Stability


class RefinementReport:
    def __init__(self, removed=(), created=(), edges_recomputed=0, noop=False):
        self.removed = list(removed)
        self.created = list(created)
        self.edges_recomputed = edges_recomputed
        self.noop = noop

    def merge(self, other):
        self.removed.extend(other.removed)
        self.created.extend(other.created)
        self.edges_recomputed += other.edges_recomputed
        self.noop = self.noop and other.noop
        return self

    def created_sids(self):
        return [entry["sid"] for entry in self.created]

    def to_json(self):
        return {
            "v": 1,
            "noop": self.noop,
            "removed": self.removed,
            "created": self.created,
            "edgesRecomputed": self.edges_recomputed,
        }

    def __repr__(self):
        return "RefinementReport(removed=%r, created=%r)" % (self.removed, self.created)


def _parse(expr):
    return parse_axpre(expr) if isinstance(expr, str) else expr


def _node_entry(node):
    return {"sid": node.sid, "axpre": node.axpre, "extentSize": len(node.extent)}


def refine_node(sd, sid, expr, complements=()):
    """Split summary node ``sid`` by the classes of ``expr``.

    ``expr`` must describe at least the node's current neighbourhood
    (checked through containment).  Extent members that fall outside
    ``expr``'s positive classes must be caught by one of the
    ``complements``; any member left over is a coverage error.
    """
    node = sd.node(sid)
    primary = _parse(expr)
    exprs = [primary] + [_parse(c) for c in complements]
    current = _parse(sd.axpre(sid))
    if not axpre_contains(primary, current):
        raise ContainmentError(
            "refining expression %s does not extend %s" % (primary, sd.axpre(sid))
        )

    autos = [build_axpre_automaton(e) for e in exprs]
    pairs = [[] for _ in exprs]
    for doc_id, v in sorted(node.extent):
        g = sd.collection.graph(doc_id)
        for idx, auto in enumerate(autos):
            nb = neighbourhood(g, v, auto)
            if not nb.is_empty:
                pairs[idx].append(((doc_id, v), nb))
                break
        else:
            raise CoverageError(
                "element %d of document %d leaves the partition under %s"
                % (v, doc_id, primary)
            )

    label = node.label
    removed = [_node_entry(node)]
    sd.remove_node(sid)
    created = []
    created_sids = []
    for idx, expr_pairs in enumerate(pairs):
        if not expr_pairs:
            continue
        classes, _ = partition_by_bisimilarity(expr_pairs)
        shown = str(exprs[idx])
        for block in classes:
            new_sid = sd.add_node(label, shown, block)
            created_sids.append(new_sid)
            created.append(
                {"sid": new_sid, "axpre": shown, "label": label, "extentSize": len(block)}
            )

    total = sum(entry["extentSize"] for entry in created)
    assert total == removed[0]["extentSize"], "refinement lost elements"

    sd.refresh_edges_around(created_sids)
    touched = sum(1 for (si, _, sj) in sd.edges if si in created_sids or sj in created_sids)
    sd.seq += 1
    return RefinementReport(removed, created, touched)


def _resolve_edge(sd, si, sj, axis_name):
    axes = sorted({ax for (a, ax, b) in sd.edges if a == si and b == sj})
    if axis_name is not None:
        return axis_name if (si, axis_name, sj) in sd.edges else None
    if not axes:
        return None
    if len(axes) > 1:
        raise UsageError(
            "nodes s%d and s%d are connected by several axes %s; pick one" % (si, sj, axes)
        )
    return axes[0]


def stabilize_edge(sd, si, sj, axis_name=None):
    """Split ``si`` so the surviving edge to ``sj`` is forward stable."""
    sd.node(si)
    sd.node(sj)
    if si == sj:
        return unfold_edge(sd, si, axis_name)
    axis_name = _resolve_edge(sd, si, sj, axis_name)
    if axis_name is None:
        return RefinementReport(noop=True)
    cls = sd.classify_edge(si, sj, axis_name)
    if cls in (Stability.FORWARD, Stability.BIDIRECTIONAL) or cls is None:
        return RefinementReport(noop=True)
    composed = disj(
        _parse(sd.axpre(si)), AxisStep(axis_name, LabelTest("eq", sd.label(sj)))
    )
    report = refine_node(sd, si, composed)
    for new_sid in report.created_sids():
        if (new_sid, axis_name, sj) in sd.edges:
            sd.classify_edge(new_sid, sj, axis_name)
    return report


def unfold_edge(sd, sid, axis_name=None):
    """Unroll a non-stable self loop into forward-stable structure."""
    sd.node(sid)
    loops = sorted({ax for (a, ax, b) in sd.edges if a == sid and b == sid})
    if axis_name is not None:
        loops = [ax for ax in loops if ax == axis_name]
    if not loops:
        return RefinementReport(noop=True)
    if len(loops) > 1:
        raise UsageError("node s%d has several self loops %s; pick one" % (sid, loops))
    axis_name = loops[0]
    if sd.classify_edge(sid, sid, axis_name) in (Stability.FORWARD, Stability.BIDIRECTIONAL):
        return RefinementReport(noop=True)
    composed = disj(_parse(sd.axpre(sid)), star(AxisStep(axis_name)))
    report = refine_node(sd, sid, composed)
    for new_sid in report.created_sids():
        for other in report.created_sids():
            if (new_sid, axis_name, other) in sd.edges:
                sd.classify_edge(new_sid, other, axis_name)
    return report


def stabilize_axis(sd, sid, axis_name):
    """Stabilize every ``axis``-labelled edge leaving ``sid`` at once."""
    sd.node(sid)
    targets = [sj for (a, ax, sj) in sd.edges if a == sid and ax == axis_name]
    if not targets:
        return RefinementReport(noop=True)
    unstable = [
        sj
        for sj in targets
        if sd.classify_edge(sid, sj, axis_name)
        not in (Stability.FORWARD, Stability.BIDIRECTIONAL, None)
    ]
    if not unstable:
        return RefinementReport(noop=True)
    composed = disj(_parse(sd.axpre(sid)), AxisStep(axis_name))
    report = refine_node(sd, sid, composed)
    for new_sid in report.created_sids():
        for (a, ax, sj) in list(sd.edges):
            if a == new_sid and ax == axis_name:
                sd.classify_edge(new_sid, sj, ax)
    return report


def _longest_simple_distance(nb):
    """Longest simple (edge-distinct) path length from the root to every
    neighbourhood node."""
    best = {nb.root: 0}
    out = nb.out_map()

    def walk(v, used, depth):
        for axis_name, targets in out.get(v, {}).items():
            for w in targets:
                edge = (v, axis_name, w)
                if edge in used:
                    continue
                if depth + 1 > best.get(w, -1):
                    best[w] = depth + 1
                used.add(edge)
                walk(w, used, depth + 1)
                used.discard(edge)

    walk(nb.root, set(), 0)
    return best


def stabilize_neighbourhood(sd, expr, sid):
    """Make every edge of the expression's summary neighbourhood of
    ``sid`` forward stable, processing nodes farthest first."""
    sd.node(sid)
    expr = _parse(expr)
    roots = {sid}
    combined = RefinementReport(noop=True)
    guard = 0
    while True:
        guard += 1
        if guard > 10000:
            raise RuntimeError("stabilization did not converge")
        action = _next_unstable(sd, expr, roots)
        if action is None:
            break
        kind, args = action
        if kind == "unfold":
            report = unfold_edge(sd, args[0], args[1])
        else:
            report = stabilize_edge(sd, args[0], args[1], args[2])
        removed = {entry["sid"] for entry in report.removed}
        if roots & removed:
            roots = (roots - removed) | set(report.created_sids())
        combined.merge(report)
    return combined


def _next_unstable(sd, expr, roots):
    nodes = {}
    edges = set()
    for root in sorted(roots):
        if root not in sd.nodes:
            continue
        nb = sd.sd_neighbourhood(root, expr).project()
        if nb.is_empty:
            continue
        dist = _longest_simple_distance(nb)
        for v, d in dist.items():
            nodes[v] = max(nodes.get(v, 0), d)
        edges.update(nb.edges)
    order = sorted(nodes, key=lambda v: (-nodes[v], v))
    stable = (Stability.FORWARD, Stability.BIDIRECTIONAL, None)

    def current_class(a, b, ax):
        cls = sd.edges.get((a, ax, b))
        if cls == Stability.UNCHECKED:
            cls = sd.classify_edge(a, b, ax)
        return cls

    for v in order:
        for (a, ax, b) in sorted(edges):
            if a == v and b == v:
                if current_class(v, v, ax) not in stable:
                    return ("unfold", (v, ax))
        for (a, ax, b) in sorted(edges):
            if b == v and a != v:
                if current_class(a, b, ax) not in stable:
                    return ("stabilize", (a, b, ax))
    return None


# ---------------------------------------------------------------------------
# label paths


def lpath_set(nb):
    """All simple (edge-distinct) axis label paths from the root.

    Paths are tuples of ``(axis, label)`` steps; the root's own label is
    not part of them.  The result is prefix closed.
    """
    if nb.is_empty:
        return frozenset()
    paths = set()
    out = nb.out_map()

    def walk(v, used, prefix):
        steps = []
        for axis_name, targets in out.get(v, {}).items():
            for w in targets:
                steps.append((w, axis_name))
        for w, axis_name in sorted(steps):
            edge = (v, axis_name, w)
            if edge in used:
                continue
            path = prefix + ((axis_name, nb.labels[w]),)
            paths.add(path)
            used.add(edge)
            walk(w, used, path)
            used.discard(edge)

    walk(nb.root, set(), ())
    return frozenset(paths)


def lpaths_in_emission_order(nb):
    """LPaths ordered by the depth-first walk that discovered them first,
    successors taken in ascending node order."""
    if nb.is_empty:
        return []
    seen = set()
    ordered = []
    out = nb.out_map()

    def walk(v, used, prefix):
        steps = []
        for axis_name, targets in out.get(v, {}).items():
            for w in targets:
                steps.append((w, axis_name))
        for w, axis_name in sorted(steps):
            edge = (v, axis_name, w)
            if edge in used:
                continue
            path = prefix + ((axis_name, nb.labels[w]),)
            if path not in seen:
                seen.add(path)
                ordered.append(path)
            used.add(edge)
            walk(w, used, path)
            used.discard(edge)

    walk(nb.root, set(), ())
    return ordered


def lpath_to_string(path):
    return ".".join("%s[%s]" % (axis_name, label) for axis_name, label in path)


def representative_neighbourhood(sd, sid):
    """Contraction of the extent members' neighbourhoods under the node's
    own expression."""
    node = sd.node(sid)
    auto = build_axpre_automaton(node.axpre)
    nbs = []
    for doc_id, v in sorted(node.extent):
        g = sd.collection.graph(doc_id)
        nbs.append(neighbourhood(g, v, auto))
    return contraction(nbs)


def _path_expr(path):
    return concat(*[AxisStep(axis_name, LabelTest("eq", label)) for axis_name, label in path])


def extent_axpre(sd, sid):
    """Expression naming the extent: the node's label test prefixing the
    disjunction of its representative neighbourhood's LPaths.

    Siblings sharing label and expression must not have identical LPath
    sets, otherwise no expression can tell the extents apart.
    """
    node = sd.node(sid)
    rep = representative_neighbourhood(sd, sid)
    own = lpath_set(rep)
    for other in sd.sids():
        if other == sid:
            continue
        peer = sd.nodes[other]
        if peer.label != node.label or peer.axpre != node.axpre:
            continue
        if lpath_set(representative_neighbourhood(sd, other)) == own:
            raise InclusionError([sid, other])
    ordered = lpaths_in_emission_order(rep)
    if not ordered:
        return TestStep(LabelTest("eq", node.label))
    return concat(
        TestStep(LabelTest("eq", node.label)), disj(*[_path_expr(p) for p in ordered])
    )
