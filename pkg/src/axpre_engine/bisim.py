"""Bisimilarity of neighbourhoods and the partitions it induces.

The workhorse is a coarsest-partition computation in the Paige-Tarjan
style: blocks are repeatedly split against (axis, block) pairs until every
block is stable.  On top of it sit neighbourhood bisimilarity, the
bisimulation contraction, and the per-expression partition of a document
collection.

The module also carries the classic index constructions (label buckets,
bounded backwards refinement, the alternating fixpoint, and the bounded
alternation with a repeat count), which serve as independent oracles for
the path-expression presets.
"""

import math
from collections import deque

from .automata import Neighbourhood, build_axpre_automaton, neighbourhood
from .errors import NotBisimilarError

INF = math.inf


def coarsest_partition(labels, edges):
    """Coarsest partition of ``labels`` stable under every axis relation.

    ``labels`` maps node to an initial colour; ``edges`` is an iterable of
    ``(src, axis, dst)``.  Returns a dict node -> block index.  Two nodes
    share a block exactly when they are bisimilar over the given edges.
    """
    preds = {}
    for a, axis, b in edges:
        preds.setdefault(axis, {}).setdefault(b, []).append(a)

    by_colour = {}
    for n, colour in labels.items():
        by_colour.setdefault(colour, set()).add(n)
    blocks = list(by_colour.values())
    block_of = {}
    for idx, blk in enumerate(blocks):
        for n in blk:
            block_of[n] = idx

    worklist = deque()
    for blk in blocks:
        frozen = frozenset(blk)
        for axis in preds:
            worklist.append((axis, frozen))

    while worklist:
        axis, splitter = worklist.popleft()
        pmap = preds[axis]
        pre = set()
        for w in splitter:
            pre.update(pmap.get(w, ()))
        if not pre:
            continue
        hits_by_block = {}
        for u in pre:
            hits_by_block.setdefault(block_of[u], set()).add(u)
        for bid, hits in hits_by_block.items():
            blk = blocks[bid]
            if len(hits) == len(blk):
                continue
            rest = blk - hits
            blocks[bid] = rest
            new_id = len(blocks)
            blocks.append(hits)
            for n in hits:
                block_of[n] = new_id
            frozen_hits = frozenset(hits)
            frozen_rest = frozenset(rest)
            for ax in preds:
                worklist.append((ax, frozen_hits))
                worklist.append((ax, frozen_rest))
    return block_of


def _union_refine(neighbourhoods):
    """Refine the disjoint union; returns node-key -> block id, with node
    keys ``(index, original node)``."""
    labels = {}
    edges = []
    for i, nb in enumerate(neighbourhoods):
        for v, label in nb.labels.items():
            labels[(i, v)] = label
        for a, axis, b in nb.edges:
            edges.append(((i, a), axis, (i, b)))
    return coarsest_partition(labels, edges)


def bisimilar(n1, n2):
    """Are two neighbourhoods bisimilar from their roots?

    Two empty neighbourhoods are bisimilar; an empty and a non-empty one
    never are.
    """
    if n1.is_empty or n2.is_empty:
        return n1.is_empty and n2.is_empty
    block_of = _union_refine([n1, n2])
    return block_of[(0, n1.root)] == block_of[(1, n2.root)]


def contraction(neighbourhoods):
    """Smallest neighbourhood bisimilar to the given ones.

    All inputs must be pairwise bisimilar.  The result's nodes are fresh
    ids 0..m-1 ordered by the smallest original node they contain, which
    keeps later traversals aligned with document order.
    """
    nbs = list(neighbourhoods)
    if not nbs:
        raise ValueError("contraction of nothing")
    if all(nb.is_empty for nb in nbs):
        return Neighbourhood(0, {}, frozenset())
    if any(nb.is_empty for nb in nbs):
        raise NotBisimilarError("cannot contract empty with non-empty neighbourhoods")
    block_of = _union_refine(nbs)
    root_blocks = {block_of[(i, nb.root)] for i, nb in enumerate(nbs)}
    if len(root_blocks) > 1:
        raise NotBisimilarError("neighbourhoods are not pairwise bisimilar")

    first = nbs[0]
    members = {}
    for v in first.labels:
        members.setdefault(block_of[(0, v)], []).append(v)
    order = sorted(members, key=lambda bid: min(members[bid]))
    qid = {bid: i for i, bid in enumerate(order)}
    labels = {qid[bid]: first.labels[min(members[bid])] for bid in order}
    edges = frozenset(
        (qid[block_of[(0, a)]], axis, qid[block_of[(0, b)]]) for a, axis, b in first.edges
    )
    return Neighbourhood(qid[block_of[(0, first.root)]], labels, edges)


def _root_signature(nb):
    sig = set()
    for a, axis, b in nb.edges:
        if a == nb.root:
            sig.add((axis, nb.labels[b]))
    return (nb.labels[nb.root], frozenset(sig))


def partition_by_bisimilarity(pairs):
    """Group ``(key, neighbourhood)`` pairs into bisimilarity classes.

    Returns ``(classes, empty)`` where ``classes`` is a list of lists of
    keys in first-seen order and ``empty`` collects the keys whose
    neighbourhood is empty.
    """
    pairs = list(pairs)
    empty = [key for key, nb in pairs if nb.is_empty]
    live = [(key, nb) for key, nb in pairs if not nb.is_empty]

    groups = {}
    group_order = []
    for idx, (key, nb) in enumerate(live):
        sig = _root_signature(nb)
        if sig not in groups:
            groups[sig] = []
            group_order.append(sig)
        groups[sig].append(idx)

    class_of = {}
    n_classes = 0
    for sig in group_order:
        indexes = groups[sig]
        block_of = _union_refine([live[i][1] for i in indexes])
        root_class = {}
        for local, idx in enumerate(indexes):
            bid = block_of[(local, live[idx][1].root)]
            if bid not in root_class:
                root_class[bid] = n_classes
                n_classes += 1
            class_of[idx] = root_class[bid]

    classes = [[] for _ in range(n_classes)]
    for idx, (key, _) in enumerate(live):
        classes[class_of[idx]].append(key)
    return classes, empty


def axpre_partition(graphs, expr):
    """Partition all nodes of ``graphs`` by expression bisimilarity.

    Returns ``(classes, empty)`` over ``(doc_id, node)`` keys; ``empty`` is
    the block of nodes whose neighbourhood is empty.
    """
    auto = build_axpre_automaton(expr) if not hasattr(expr, "fire_test") else expr
    pairs = []
    for g in graphs:
        for v in g.node_ids():
            pairs.append(((g.doc_id, v), neighbourhood(g, v, auto)))
    return partition_by_bisimilarity(pairs)


def as_block_sets(classes):
    return {frozenset(block) for block in classes if block}


# ---------------------------------------------------------------------------
# classic constructions, used as oracles for the presets


def label_partition(graphs):
    blocks = {}
    for g in graphs:
        for v in g.node_ids():
            blocks.setdefault(g.label(v), []).append((g.doc_id, v))
    return list(blocks.values())


def _incoming(graphs, mode):
    """mode 'parent': sources of edges into v are its parent (original
    child edges); mode 'children': edges reversed, sources are children."""
    sources = {}
    for g in graphs:
        for v in g.node_ids():
            key = (g.doc_id, v)
            if mode == "parent":
                p = g.parent[v]
                sources[key] = ((g.doc_id, p),) if p else ()
            else:
                sources[key] = tuple((g.doc_id, c) for c in g.children[v])
    return sources


def _stable_rounds(class_of, sources, k):
    """Refine ``class_of`` by incoming-class signatures, ``k`` rounds or to
    fixpoint when ``k`` is infinite."""
    rounds = 0
    while rounds < k:
        table = {}
        nxt = {}
        for key, cls in class_of.items():
            sig = (cls, frozenset(class_of[s] for s in sources[key]))
            if sig not in table:
                table[sig] = len(table)
            nxt[key] = table[sig]
        if len(table) == len(set(class_of.values())):
            class_of = nxt
            break
        class_of = nxt
        rounds += 1
    return class_of


def _initial_classes(graphs):
    class_of = {}
    table = {}
    for g in graphs:
        for v in g.node_ids():
            label = g.label(v)
            if label not in table:
                table[label] = len(table)
            class_of[(g.doc_id, v)] = table[label]
    return class_of


def _as_blocks(class_of):
    blocks = {}
    for key, cls in class_of.items():
        blocks.setdefault(cls, []).append(key)
    return [sorted(b) for b in blocks.values()]


def backwards_k_partition(graphs, k):
    """Equality of label plus the classes of up to ``k`` nearest ancestors."""
    graphs = list(graphs)
    class_of = _initial_classes(graphs)
    class_of = _stable_rounds(class_of, _incoming(graphs, "parent"), k)
    return _as_blocks(class_of)


def fb_fixpoint_partition(graphs):
    """Alternate full backwards refinement over original and reversed
    edges until nothing changes any more."""
    graphs = list(graphs)
    class_of = _initial_classes(graphs)
    by_parent = _incoming(graphs, "parent")
    by_children = _incoming(graphs, "children")
    while True:
        before = len(set(class_of.values()))
        class_of = _stable_rounds(class_of, by_parent, INF)
        class_of = _stable_rounds(class_of, by_children, INF)
        if len(set(class_of.values())) == before:
            return _as_blocks(class_of)


def bpci_partition(graphs, k_in, k_out, td):
    """``td`` repetitions of a ``k_in``-bounded backwards pass followed by
    a ``k_out``-bounded pass over reversed edges."""
    graphs = list(graphs)
    class_of = _initial_classes(graphs)
    by_parent = _incoming(graphs, "parent")
    by_children = _incoming(graphs, "children")
    for _ in range(td):
        class_of = _stable_rounds(class_of, by_parent, k_in)
        class_of = _stable_rounds(class_of, by_children, k_out)
    return _as_blocks(class_of)
