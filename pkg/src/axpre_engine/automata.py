"""Automata over axis steps and label tests.

An expression compiles to a nondeterministic automaton whose words
alternate label tests and axis symbols, starting with a test on the node
the expression is anchored at.  Because the semantics is prefix closed,
every live state accepts; acceptance questions therefore reduce to
readability of paths.

The neighbourhood of a node is extracted from the product of this
automaton with the document graph, walking both in lockstep: an axis
transition may only be taken when the label test on its target fires,
which keeps dangling edges out of the result.
"""

from collections import deque
from functools import lru_cache

from .axpre import ANY, AxisStep, Concat, Disj, Empty, LabelTest, Star, TestStep, parse_axpre

#: Stands for any label not mentioned by either automaton when comparing
#: languages over a finite alphabet.
OTHER = "\x00other"


class AxpreAutomaton:
    def __init__(self, initial, eps, axis_out, test_out, finals, expr):
        self.initial = initial
        self.eps = eps            # state -> tuple of states
        self.axis_out = axis_out  # state -> tuple of (axis, state)
        self.test_out = test_out  # state -> tuple of (LabelTest, state)
        self.finals = finals
        self.expr = expr
        self._closures = {}

    def closure(self, state):
        cached = self._closures.get(state)
        if cached is not None:
            return cached
        seen = {state}
        stack = [state]
        while stack:
            q = stack.pop()
            for nxt in self.eps.get(q, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        result = frozenset(seen)
        self._closures[state] = result
        return result

    def closure_of(self, states):
        out = set()
        for q in states:
            out |= self.closure(q)
        return out

    def fire_test(self, states, label):
        """Post-test states reachable by reading ``label`` from ``states``."""
        out = set()
        for q in self.closure_of(states):
            for guard, dst in self.test_out.get(q, ()):
                if guard.matches(label):
                    out.add(dst)
        return out

    def fire_axis(self, states, axis):
        out = set()
        for q in self.closure_of(states):
            for name, dst in self.axis_out.get(q, ()):
                if name == axis:
                    out.add(dst)
        return out

    def axis_alphabet(self):
        names = set()
        for moves in self.axis_out.values():
            names.update(name for name, _ in moves)
        return names

    def mentioned_labels(self):
        labels = set()
        for moves in self.test_out.values():
            for guard, _ in moves:
                if guard.label is not None:
                    labels.add(guard.label)
        return labels


class _Builder:
    def __init__(self):
        self.count = 0
        self.eps = {}
        self.axis_out = {}
        self.test_out = {}

    def state(self):
        q = self.count
        self.count += 1
        return q

    def add_eps(self, a, b):
        self.eps.setdefault(a, []).append(b)

    def add_axis(self, a, name, b):
        self.axis_out.setdefault(a, []).append((name, b))

    def add_test(self, a, guard, b):
        self.test_out.setdefault(a, []).append((guard, b))

    def fragment(self, expr):
        """Thompson construction; returns (start, accept)."""
        if isinstance(expr, Empty):
            s, f = self.state(), self.state()
            self.add_eps(s, f)
            return s, f
        if isinstance(expr, TestStep):
            s, f = self.state(), self.state()
            self.add_test(s, expr.test, f)
            return s, f
        if isinstance(expr, AxisStep):
            s, m, f = self.state(), self.state(), self.state()
            self.add_axis(s, expr.axis, m)
            self.add_test(m, expr.test or ANY, f)
            return s, f
        if isinstance(expr, Concat):
            first, last = None, None
            for part in expr.parts:
                ps, pf = self.fragment(part)
                if first is None:
                    first = ps
                else:
                    self.add_eps(last, ps)
                last = pf
            return first, last
        if isinstance(expr, Disj):
            s, f = self.state(), self.state()
            for part in expr.parts:
                ps, pf = self.fragment(part)
                self.add_eps(s, ps)
                self.add_eps(pf, f)
            return s, f
        if isinstance(expr, Star):
            s, f = self.state(), self.state()
            ps, pf = self.fragment(expr.inner)
            self.add_eps(s, f)
            self.add_eps(s, ps)
            self.add_eps(pf, f)
            self.add_eps(pf, ps)
            return s, f
        raise TypeError("not an expression: %r" % (expr,))


def _reaches_final(builder, accept):
    """States from which the accept state is reachable (prefix closure)."""
    back = {}
    for a, outs in builder.eps.items():
        for b in outs:
            back.setdefault(b, []).append(a)
    for a, outs in builder.axis_out.items():
        for _, b in outs:
            back.setdefault(b, []).append(a)
    for a, outs in builder.test_out.items():
        for _, b in outs:
            back.setdefault(b, []).append(a)
    seen = {accept}
    stack = [accept]
    while stack:
        q = stack.pop()
        for prev in back.get(q, ()):
            if prev not in seen:
                seen.add(prev)
                stack.append(prev)
    return seen


@lru_cache(maxsize=512)
def build_axpre_automaton(expr):
    """Compile ``expr`` (tree or text) into an :class:`AxpreAutomaton`.

    Expressions that open with an axis rather than a label test get an
    implicit wildcard test for the anchor node, so that every path through
    the automaton starts by reading the anchor's label.
    """
    if isinstance(expr, str):
        expr = parse_axpre(expr)
    b = _Builder()
    start, accept = b.fragment(expr)

    closure = {start}
    stack = [start]
    while stack:
        q = stack.pop()
        for nxt in b.eps.get(q, ()):
            if nxt not in closure:
                closure.add(nxt)
                stack.append(nxt)

    initial = b.state()
    has_axis_lead = any(b.axis_out.get(q) for q in closure)
    accepts_zero = accept in closure
    for q in closure:
        for guard, dst in b.test_out.get(q, ()):
            b.add_test(initial, guard, dst)
    if has_axis_lead or accepts_zero:
        mid = b.state()
        b.add_test(initial, ANY, mid)
        b.add_eps(mid, start)

    finals = frozenset(_reaches_final(b, accept) | {accept})
    return AxpreAutomaton(
        initial,
        {k: tuple(v) for k, v in b.eps.items()},
        {k: tuple(v) for k, v in b.axis_out.items()},
        {k: tuple(v) for k, v in b.test_out.items()},
        finals,
        expr,
    )


def accepts_path(auto, root_label, steps=()):
    """True when the automaton reads ``root_label`` then the given
    ``(axis, label)`` steps.  The empty step sequence asks whether the
    anchor alone matches."""
    if isinstance(auto, (str, Empty, TestStep, AxisStep, Concat, Disj, Star)):
        auto = build_axpre_automaton(auto)
    states = auto.fire_test({auto.initial}, root_label)
    if not states:
        return False
    for axis, label in steps:
        states = auto.fire_test(auto.fire_axis(states, axis), label)
        if not states:
            return False
    return True


class Neighbourhood:
    """A rooted subgraph: the part of a document an expression can see."""

    __slots__ = ("root", "labels", "edges")

    def __init__(self, root, labels, edges):
        self.root = root
        self.labels = labels
        self.edges = edges

    @property
    def is_empty(self):
        return not self.labels

    def nodes(self):
        return self.labels.keys()

    def out_map(self):
        """node -> axis -> set of successors."""
        out = {v: {} for v in self.labels}
        for src, axis, dst in self.edges:
            out[src].setdefault(axis, set()).add(dst)
        return out

    def relabel(self, mapping):
        return Neighbourhood(
            mapping[self.root] if self.labels else self.root,
            {mapping[v]: l for v, l in self.labels.items()},
            frozenset((mapping[a], ax, mapping[b]) for a, ax, b in self.edges),
        )

    def project(self):
        """Collapse roles: the graph-node-keyed view of a raw
        neighbourhood.  Use it when the neighbourhood acts as a lens over
        real nodes rather than as the structure bisimilarity compares."""
        root = self.root[0] if isinstance(self.root, tuple) else self.root
        labels = {}
        for v, l in self.labels.items():
            labels[v[0] if isinstance(v, tuple) else v] = l

        def bare(x):
            return x[0] if isinstance(x, tuple) else x

        edges = frozenset((bare(a), ax, bare(b)) for a, ax, b in self.edges)
        return Neighbourhood(root, labels, edges)

    def __eq__(self, other):
        return (
            isinstance(other, Neighbourhood)
            and self.root == other.root
            and self.labels == other.labels
            and self.edges == other.edges
        )

    def __repr__(self):
        return "Neighbourhood(root=%r, nodes=%d, edges=%d)" % (
            self.root,
            len(self.labels),
            len(self.edges),
        )


def neighbourhood(graph, root, expr):
    """Extract the neighbourhood of ``root`` described by ``expr``.

    ``graph`` needs ``label(v)`` and ``axis_step(v, axis)``.  The result is
    empty when the anchor's own label test fails; otherwise it always
    contains the anchor, since every expression matches the empty path.

    Vertices are ``(element, role)`` pairs.  The role numbers the set of
    automaton states the element was reached under, so an element seen
    both as the anchor and again through some detour appears once per
    role and its continuations never leak from one role into the other.
    Roles are assigned in discovery order with the anchor's role 0, which
    keeps traversals element-major and deterministic.
    """
    auto = expr if isinstance(expr, AxpreAutomaton) else build_axpre_automaton(expr)
    root_states = frozenset(auto.fire_test({auto.initial}, graph.label(root)))
    if not root_states:
        return Neighbourhood((root, 0), {}, frozenset())
    roles = {root_states: 0}
    start = (root, 0)
    labels = {start: graph.label(root)}
    edges = set()
    queue = deque([(start, root_states)])
    while queue:
        vert, states = queue.popleft()
        v = vert[0]
        per_axis = {}
        for state in auto.closure_of(states):
            for axis, q2 in auto.axis_out.get(state, ()):
                per_axis.setdefault(axis, set()).add(q2)
        for axis, q2set in per_axis.items():
            targets = graph.axis_step(v, axis)
            for w in targets:
                next_states = frozenset(auto.fire_test(q2set, graph.label(w)))
                if not next_states:
                    continue
                role = roles.setdefault(next_states, len(roles))
                tvert = (w, role)
                fresh = tvert not in labels
                labels.setdefault(tvert, graph.label(w))
                edges.add((vert, axis, tvert))
                if fresh:
                    queue.append((tvert, next_states))
    return Neighbourhood(start, labels, frozenset(edges))


def _label_symbols(auto_a, auto_b, label_universe):
    if label_universe is None:
        labels = auto_a.mentioned_labels() | auto_b.mentioned_labels()
    else:
        labels = set(label_universe)
    return labels


def _guard_fires(guard, symbol):
    if symbol == OTHER:
        return guard.op in ("any", "ne")
    return guard.matches(symbol)


def _fire_test_symbol(auto, states, symbol):
    out = set()
    for q in auto.closure_of(states):
        for guard, dst in auto.test_out.get(q, ()):
            if _guard_fires(guard, symbol):
                out.add(dst)
    return frozenset(out)


def axpre_contains(alpha, beta, label_universe=None):
    """True when every path of ``beta`` is also a path of ``alpha``.

    Both languages are prefix closed, so this is a readability check over
    a finite alphabet: the axis names of either side, and the mentioned
    labels (or a supplied label universe) plus a stand-in for any other
    label.
    """
    if isinstance(alpha, str):
        alpha = parse_axpre(alpha)
    if isinstance(beta, str):
        beta = parse_axpre(beta)
    a = build_axpre_automaton(alpha)
    b = build_axpre_automaton(beta)
    labels = _label_symbols(a, b, label_universe) | {OTHER}
    axes = a.axis_alphabet() | b.axis_alphabet()

    seen = set()
    queue = deque()
    for symbol in labels:
        sb = _fire_test_symbol(b, {b.initial}, symbol)
        if not sb:
            continue
        sa = _fire_test_symbol(a, {a.initial}, symbol)
        if not sa:
            return False
        pair = (sb, sa)
        if pair not in seen:
            seen.add(pair)
            queue.append(pair)
    while queue:
        sb, sa = queue.popleft()
        for axis in axes:
            mb = frozenset(b.fire_axis(sb, axis))
            if not mb:
                continue
            ma = frozenset(a.fire_axis(sa, axis))
            for symbol in labels:
                tb = _fire_test_symbol(b, mb, symbol)
                if not tb:
                    continue
                ta = _fire_test_symbol(a, ma, symbol) if ma else frozenset()
                if not ta:
                    return False
                pair = (tb, ta)
                if pair not in seen:
                    seen.add(pair)
                    queue.append(pair)
    return True


def axpre_equivalent(alpha, beta, label_universe=None):
    return axpre_contains(alpha, beta, label_universe) and axpre_contains(
        beta, alpha, label_universe
    )
