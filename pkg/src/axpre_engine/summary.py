"""Structural summaries of document collections.

A summary descriptor (SD) partitions every node of a collection into
extents, one extent per summary node: two document nodes share an extent
when some defining path expression gives them bisimilar neighbourhoods.
Summary nodes are connected by axis edges whenever their extents contain
related elements; each edge carries a stability class that starts out
unchecked and is upgraded on demand.

Construction has special-cased plans for the common expression shapes
(pure label tests, ancestor chains, the two-star disjunction) so the
classic summaries stay linear; everything else goes through automaton
neighbourhoods and partition refinement.
"""

import math
from enum import Enum

from .axisgraph import AXIS_INVERSE, DEFAULT_SD_AXES
from .axpre import (
    AxisStep,
    Concat,
    Disj,
    Empty,
    Star,
    TestStep,
    axis,
    canonical_string,
    concat,
    disj,
    eps,
    parse_axpre,
    star,
    test,
)
from .automata import axpre_contains, build_axpre_automaton, neighbourhood
from .bisim import partition_by_bisimilarity
from .errors import PartitionError, UnknownSidError, UsageError

INF = math.inf


class Stability(str, Enum):
    UNCHECKED = "unchecked"
    EXISTENTIAL = "existential"
    FORWARD = "forward-stable"
    BIDIRECTIONAL = "bidirectional-stable"


#: DOT line styles; unchecked edges draw dashed because nothing stronger
#: than existence has been established for them yet.
DOT_STYLE = {
    Stability.UNCHECKED: "dashed",
    Stability.EXISTENTIAL: "dashed",
    Stability.FORWARD: "solid",
    Stability.BIDIRECTIONAL: "bold",
}


class SdNode:
    __slots__ = ("sid", "label", "axpre", "extent", "ee")

    def __init__(self, sid, label, axpre, extent, ee=None):
        self.sid = sid
        self.label = label
        self.axpre = axpre
        self.extent = extent
        self.ee = ee

    def __repr__(self):
        size = len(self.extent) if self.extent is not None else "?"
        return "SdNode(s%d, %s, %s, |extent|=%s)" % (self.sid, self.label, self.axpre, size)


class SummaryDescriptor:
    """Partition of a collection plus the axis edges between its blocks."""

    def __init__(self, collection, axpre_set, sd_axes=DEFAULT_SD_AXES):
        self.collection = collection
        self.axpre_set = tuple(axpre_set)
        self.sd_axes = tuple(sd_axes)
        self.nodes = {}
        self.edges = {}
        self.sid_of = {}
        self.next_sid = 1
        self.seq = 0
        self._adj = None
        self._witnesses = {}
        # populated instead of extents when they stay unmaterialized
        self.extent_counts = None

    # -- node bookkeeping

    def node(self, sid):
        try:
            return self.nodes[sid]
        except KeyError:
            raise UnknownSidError(sid) from None

    def sids(self):
        return sorted(self.nodes)

    def extent(self, sid):
        return self.node(sid).extent

    def axpre(self, sid):
        return self.node(sid).axpre

    def extent_of(self, doc_id, v):
        return self.sid_of.get((doc_id, v))

    def extent_size(self, sid):
        node = self.node(sid)
        if node.extent or self.extent_counts is None:
            return len(node.extent)
        return self.extent_counts.get(sid, 0)

    def witness_graph(self, doc_id):
        """Parsed graph of a document probed for class invariants.

        Kept on the descriptor so that invariant probes stay independent
        of the collection's document cache.
        """
        g = self._witnesses.get(doc_id)
        if g is None:
            g = self.collection.graph(doc_id)
            self._witnesses[doc_id] = g
        return g

    def add_node(self, label, axpre, extent, ee=None):
        sid = self.next_sid
        self.next_sid += 1
        self.nodes[sid] = SdNode(sid, label, axpre, set(extent), ee)
        for key in extent:
            self.sid_of[key] = sid
        if self.extent_counts is not None:
            self.extent_counts[sid] = len(self.nodes[sid].extent)
        self._adj = None
        return sid

    def remove_node(self, sid):
        node = self.node(sid)
        for key in node.extent:
            if self.sid_of.get(key) == sid:
                del self.sid_of[key]
        for edge in [e for e in self.edges if sid in (e[0], e[2])]:
            del self.edges[edge]
        del self.nodes[sid]
        if self.extent_counts is not None:
            self.extent_counts.pop(sid, None)
        self._adj = None

    def add_edge(self, si, axis_name, sj, stability=Stability.UNCHECKED):
        key = (si, axis_name, sj)
        if key not in self.edges:
            self.edges[key] = stability
            self._adj = None
        return key

    # -- summary graph protocol (so neighbourhood extraction can run on
    # the SD itself, with SIDs playing the node role)

    def label(self, sid):
        return self.node(sid).label

    def axis_step(self, sid, axis_name):
        if self._adj is None:
            adj = {}
            for (si, ax, sj) in self.edges:
                adj.setdefault(si, {}).setdefault(ax, set()).add(sj)
            self._adj = adj
        return sorted(self._adj.get(sid, {}).get(axis_name, ()))

    def sd_neighbourhood(self, sid, expr):
        self.node(sid)
        return neighbourhood(self, sid, build_axpre_automaton(_as_string(expr)))

    # -- stability

    def refresh_edges_around(self, sids):
        """Recompute edges incident to the given summary nodes from the
        documents.  Used after refinements replace nodes."""
        changed = set(sids)
        members = []
        for sid in changed:
            members.extend((sid, key) for key in self.node(sid).extent)
        for sid, (doc_id, v) in members:
            g = self.collection.graph(doc_id)
            for ax in self.sd_axes:
                for w in g.axis_step(v, ax):
                    sj = self.sid_of.get((doc_id, w))
                    if sj is not None:
                        self.add_edge(sid, ax, sj)
                inv = AXIS_INVERSE[ax]
                for u in g.axis_step(v, inv):
                    si = self.sid_of.get((doc_id, u))
                    if si is not None:
                        self.add_edge(si, ax, sid)

    def classify_edge(self, si, sj, axis_name):
        """Upgrade edge ``(si, axis, sj)`` to its exact stability class.

        Returns the class, or None (and drops the edge) when no element
        pair is related at all.
        """
        ext_i = self.extent(si)
        ext_j = self.extent(sj)
        inv = AXIS_INVERSE[axis_name]
        any_pair = False
        forward = True
        for doc_id, v in sorted(ext_i):
            g = self.collection.graph(doc_id)
            hit = any(self.sid_of.get((doc_id, w)) == sj for w in g.axis_step(v, axis_name))
            any_pair = any_pair or hit
            forward = forward and hit
        if not any_pair:
            self.edges.pop((si, axis_name, sj), None)
            self._adj = None
            return None
        backward = True
        if forward:
            for doc_id, w in sorted(ext_j):
                g = self.collection.graph(doc_id)
                if not any(self.sid_of.get((doc_id, u)) == si for u in g.axis_step(w, inv)):
                    backward = False
                    break
        if forward and backward:
            cls = Stability.BIDIRECTIONAL
        elif forward:
            cls = Stability.FORWARD
        else:
            cls = Stability.EXISTENTIAL
        if (si, axis_name, sj) in self.edges:
            self.edges[(si, axis_name, sj)] = cls
        return cls

    def classify_all(self):
        for si, ax, sj in list(self.edges):
            if self.edges.get((si, ax, sj)) == Stability.UNCHECKED:
                self.classify_edge(si, sj, ax)

    # -- exports

    def stats(self):
        return {
            "documents": len(self.collection),
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "elements": sum(self.extent_size(s) for s in self.nodes),
        }

    def to_json(self, classify=False):
        if classify:
            self.classify_all()
        return {
            "v": 1,
            "seq": self.seq,
            "axpres": [_as_string(a) for a in self.axpre_set],
            "sdAxes": list(self.sd_axes),
            "nodes": [
                {
                    "sid": n.sid,
                    "label": n.label,
                    "axpre": n.axpre,
                    "extentSize": self.extent_size(n.sid),
                }
                for n in (self.nodes[s] for s in self.sids())
            ],
            "edges": [
                {"from": si, "axis": ax, "to": sj, "stability": self.edges[(si, ax, sj)].value}
                for si, ax, sj in sorted(self.edges)
            ],
        }

    def to_dot(self, classify=False):
        if classify:
            self.classify_all()
        lines = ["digraph sd {", "  rankdir=TB;", "  node [shape=box];"]
        for sid in self.sids():
            n = self.nodes[sid]
            lines.append(
                '  n%d [label="s%d %s\\n%s (%d)"];'
                % (sid, sid, n.label, n.axpre, self.extent_size(sid))
            )
        for si, ax, sj in sorted(self.edges):
            style = DOT_STYLE[self.edges[(si, ax, sj)]]
            lines.append('  n%d -> n%d [label="%s", style=%s];' % (si, sj, ax, style))
        lines.append("}")
        return "\n".join(lines)


def _as_string(expr):
    return expr if isinstance(expr, str) else canonical_string(expr)


# ---------------------------------------------------------------------------
# construction plans


def _wild(step):
    return step.test is None or step.test.op == "any"


def _chain_length(expr):
    """Length of a pure ancestor chain, INF for p*, 0 for the empty
    expression; None when the shape does not apply."""
    if isinstance(expr, Empty):
        return 0
    if isinstance(expr, AxisStep) and expr.axis == "p" and _wild(expr):
        return 1
    if isinstance(expr, Star):
        inner = expr.inner
        if isinstance(inner, AxisStep) and inner.axis == "p" and _wild(inner):
            return INF
        return None
    if isinstance(expr, Concat) and all(
        isinstance(p, AxisStep) and p.axis == "p" and _wild(p) for p in expr.parts
    ):
        return len(expr.parts)
    return None


def _is_two_star(expr):
    """p*|c* in either order."""
    if not isinstance(expr, Disj) or len(expr.parts) != 2:
        return False
    seen = set()
    for part in expr.parts:
        if isinstance(part, Star) and isinstance(part.inner, AxisStep) and _wild(part.inner):
            seen.add(part.inner.axis)
    return seen == {"p", "c"}


def _plan(expr):
    if isinstance(expr, TestStep):
        return ("test", expr.test)
    k = _chain_length(expr)
    if k is not None:
        return ("chain", k)
    if _is_two_star(expr):
        return ("fb",)
    return ("generic", build_axpre_automaton(expr))


def _chain_key(g, k, cache):
    """Per-node ancestor label chains truncated to ``k`` labels above the
    node; interning keeps keys small for the unbounded case."""
    keys = {}
    if k is INF:
        for v in g.node_ids():
            parent = g.parent[v]
            key = (g.label(v), keys[parent] if parent else None)
            keys[v] = cache.setdefault(key, len(cache))
    else:
        chains = {}
        for v in g.node_ids():
            parent = g.parent[v]
            chain = ((g.label(v),) + (chains[parent] if parent else ()))[: int(k) + 1]
            chains[v] = chain
            keys[v] = cache.setdefault(chain, len(cache))
    return keys


def _fb_keys(g, up_cache, down_cache, pair_cache):
    up = {}
    for v in g.node_ids():
        parent = g.parent[v]
        key = (g.label(v), up[parent] if parent else None)
        up[v] = up_cache.setdefault(key, len(up_cache))
    down = {}
    for v in reversed(g.node_ids()):
        key = (g.label(v), frozenset(down[c] for c in g.children[v]))
        down[v] = down_cache.setdefault(key, len(down_cache))
    return {
        v: pair_cache.setdefault((up[v], down[v]), len(pair_cache)) for v in g.node_ids()
    }


def create_sd(collection, axpres, sd_axes=DEFAULT_SD_AXES, with_edges=True):
    """Build the summary descriptor defined by the expression set.

    Every node of the collection must fall in the positive class of some
    expression; the first expression that accepts a node claims it, and a
    node claimed by nobody raises PartitionError.
    """
    exprs = []
    for a in axpres:
        exprs.append(parse_axpre(a) if isinstance(a, str) else a)
    if not exprs:
        raise UsageError("an SD needs at least one path expression")
    plans = [_plan(e) for e in exprs]

    caches = []
    for plan in plans:
        if plan[0] == "chain":
            caches.append({})
        elif plan[0] == "fb":
            caches.append(({}, {}, {}))
        else:
            caches.append(None)

    class_of = {}
    generic_pairs = [[] for _ in plans]
    for doc_id in collection.ids():
        g = collection.graph(doc_id)
        per_plan = []
        for idx, plan in enumerate(plans):
            if plan[0] == "chain":
                per_plan.append(_chain_key(g, plan[1], caches[idx]))
            elif plan[0] == "fb":
                per_plan.append(_fb_keys(g, *caches[idx]))
            else:
                per_plan.append(None)
        for v in g.node_ids():
            key = (doc_id, v)
            for idx, plan in enumerate(plans):
                kind = plan[0]
                if kind == "test":
                    if plan[1].matches(g.label(v)):
                        class_of[key] = (idx, g.label(v))
                        break
                elif kind in ("chain", "fb"):
                    class_of[key] = (idx, per_plan[idx][v])
                    break
                else:
                    nb = neighbourhood(g, v, plan[1])
                    if not nb.is_empty:
                        class_of[key] = (idx, None)
                        generic_pairs[idx].append((key, nb))
                        break
            else:
                raise PartitionError(
                    "element %d of document %d (label %s) is outside every "
                    "positive class" % (v, doc_id, g.label(v))
                )

    for idx, pairs in enumerate(generic_pairs):
        if not pairs:
            continue
        classes, _ = partition_by_bisimilarity(pairs)
        for cls_id, block in enumerate(classes):
            for key in block:
                class_of[key] = (idx, cls_id)

    sd = SummaryDescriptor(collection, [_as_string(e) for e in exprs], sd_axes)
    _assign_sids(sd, collection, class_of, exprs)
    if with_edges:
        _compute_edges(sd, collection)
    return sd


def _assign_sids(sd, collection, class_of, exprs):
    by_class = {}
    for doc_id in collection.ids():
        g = collection.graph(doc_id)
        for v in g.node_ids():
            key = (doc_id, v)
            ck = class_of[key]
            sid = by_class.get(ck)
            if sid is None:
                expr = exprs[ck[0]]
                shown = (
                    "[%s]" % g.label(v) if isinstance(expr, Empty) else _as_string(expr)
                )
                sid = sd.add_node(g.label(v), shown, ())
                by_class[ck] = sid
            sd.nodes[sid].extent.add(key)
            sd.sid_of[key] = sid


def _compute_edges(sd, collection):
    sid_of = sd.sid_of
    for doc_id in collection.ids():
        g = collection.graph(doc_id)
        for ax in sd.sd_axes:
            if ax == "fs":
                _sibling_closure_edges(sd, g, doc_id, forward=True)
            elif ax == "ps":
                _sibling_closure_edges(sd, g, doc_id, forward=False)
            else:
                for v in g.node_ids():
                    sv = sid_of[(doc_id, v)]
                    for w in g.axis_step(v, ax):
                        sd.add_edge(sv, ax, sid_of[(doc_id, w)])


def _sibling_closure_edges(sd, g, doc_id, forward):
    """fs/ps edges via per-sibling-group suffix and prefix sid sets, which
    avoids enumerating the quadratic sibling pairs."""
    axis_name = "fs" if forward else "ps"
    sid_of = sd.sid_of
    for v in g.node_ids():
        group = g.children[v]
        if len(group) < 2:
            continue
        seen = set()
        order = reversed(group) if forward else group
        for w in order:
            sw = sid_of[(doc_id, w)]
            for target in seen:
                sd.add_edge(sw, axis_name, target)
            seen.add(sw)


def _doc_edges(sd, g, local):
    """Edges contributed by one document, from its node-to-sid map."""
    for ax in sd.sd_axes:
        if ax in ("fs", "ps"):
            forward = ax == "fs"
            for v in g.node_ids():
                group = g.children[v]
                if len(group) < 2:
                    continue
                seen = set()
                for w in reversed(group) if forward else group:
                    sw = local[w]
                    for target in seen:
                        sd.add_edge(sw, ax, target)
                    seen.add(sw)
        else:
            for v in g.node_ids():
                sv = local[v]
                for w in g.axis_step(v, ax):
                    sd.add_edge(sv, ax, local[w])


def build_pk(collection, k, sd_axes=DEFAULT_SD_AXES, with_edges=False,
             row_sink=None, materialize_extents=None):
    """Ancestor-chain summary built one document at a time.

    Nodes are grouped by their label plus the labels of up to ``k``
    ancestors, the key maintained along the open-element chain, so memory
    stays bounded by one document regardless of collection size.

    With ``materialize_extents=False`` members are not kept in memory at
    all: nodes carry counts only and each member is handed to
    ``row_sink(doc_id, sid, v, start, end)`` as it is classified, which
    lets callers spool element tables to disk while the build stays one
    pass.  Supplying a sink implies the unmaterialized mode.
    """
    if k != INF and (k < 0 or int(k) != k):
        raise UsageError("chain length must be a non-negative integer or infinity")
    if materialize_extents is None:
        materialize_extents = row_sink is None
    sd = SummaryDescriptor(collection, [_as_string(_pow("p", k))], sd_axes)
    if not materialize_extents:
        sd.extent_counts = {}
    cache = {}
    by_class = {}
    for doc_id in collection.ids():
        g = collection.graph(doc_id)
        keys = _chain_key(g, k, cache)
        local = {}
        for v in g.node_ids():
            ck = keys[v]
            sid = by_class.get(ck)
            if sid is None:
                # show the chain this class actually realizes, so the node's
                # expression answers containment probes the way a hand-built
                # partition of the same shape would
                n, p = 0, g.parent[v]
                while p and (k is INF or n < k):
                    n += 1
                    p = g.parent[p]
                shown = _as_string(concat(test(g.label(v)), _pow("p", n)))
                sid = sd.add_node(g.label(v), shown, ())
                by_class[ck] = sid
                if not materialize_extents:
                    sd.extent_counts[sid] = 0
            if materialize_extents:
                sd.nodes[sid].extent.add((doc_id, v))
                sd.sid_of[(doc_id, v)] = sid
            else:
                sd.extent_counts[sid] += 1
                if row_sink is not None:
                    start, end = g.span(v)
                    row_sink(doc_id, sid, v, start, end)
            if with_edges:
                local[v] = sid
        if with_edges:
            _doc_edges(sd, g, local)
    return sd


# ---------------------------------------------------------------------------
# presets


def _pow(axis_name, k):
    if k == 0:
        return eps()
    if k is INF:
        return star(axis(axis_name))
    return concat(*[axis(axis_name) for _ in range(int(k))])


def preset(name, k=None, k_in=None, k_out=None, td=None):
    """Expression sets of the classic summaries by family name."""
    norm = str(name).strip().lower().replace("&", "and").replace("+", "plus")
    if norm == "label":
        return (eps(),)
    if norm in ("dataguide-tree", "1-index"):
        return (star(axis("p")),)
    if norm == "a":
        if k is None:
            raise UsageError("preset A needs a chain length k")
        return (_pow("p", k),)
    if norm in ("fandb", "fb"):
        return (star(disj(axis("p"), axis("c"))),)
    if norm in ("fplusb",):
        return (disj(star(axis("p")), star(axis("c"))),)
    if norm == "bpci":
        if None in (k_in, k_out, td):
            raise UsageError("preset BPCI needs k_in, k_out and td")
        if td < 1:
            raise UsageError("BPCI repeat count must be at least 1")
        round_trip = disj(_pow("p", k_in), _pow("c", k_out))
        return (concat(*[round_trip for _ in range(int(td))]),)
    if norm == "skeleton":
        return (star(concat(axis("fc"), star(axis("ns")))),)
    raise UsageError("unknown summary preset %r" % (name,))
