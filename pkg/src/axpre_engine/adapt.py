"""Query-driven summary adaptation.

A query names, through its axes and predicates, the neighbourhood shape
a summary must distinguish before it can answer from extents alone.
This module extracts that shape.  ``derive_axpre`` turns a query into a
refinement expression: the main path contributes inverse axes, walking
from the answer element back towards the root, and every predicate
contributes forward axes.  ``adapt_sd`` refines the summary nodes that
carry the answer label by that expression.  ``find_candidates`` pools
the documents of every answer-label node whose class invariant cannot
refute the query's shape, and ``evaluate_query`` runs the query over
that pool, or straight off the extents when the summary already decides
membership.

Only location structure takes part in any of this.  Predicates that
compare values or call functions carry no axis shape; they are dropped
by ``structural_subquery`` and contribute nothing to derivation.
"""

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .automata import axpre_contains, build_axpre_automaton
from .axpre import (
    ANY,
    AxisStep,
    Concat,
    Disj,
    Empty,
    LabelTest,
    TestStep,
    concat,
    disj,
    eps,
    parse_axpre,
    star,
)
from .errors import AdaptationError, ContractViolation, UsageError
from .refine import RefinementReport, refine_node, representative_neighbourhood
from .summary import Stability
from .xpath import (
    Binary,
    Call,
    Filter,
    Negate,
    Number,
    Path,
    Root,
    Step,
    eval_xpath,
    is_path,
    parse_xpath,
    render,
)

# Single-axis inverses.  The first-child and next-sibling inverses lose
# the position constraint (any child reaches its parent through p, not
# just the first), which widens the derived expression but never
# narrows it; certification below refuses them for exactly that reason.
_EXACT_INV = {
    "c": "p",
    "p": "c",
    "d": "a",
    "a": "d",
    "ds": "as",
    "as": "ds",
    "s": "s",
    "f": "pc",
    "pc": "f",
    "fs": "ps",
    "ps": "fs",
}
_APPROX_INV = {"fc": "p", "ns": "ps"}
_INV_AXIS = dict(_EXACT_INV, **_APPROX_INV)

# Recursive axes used forwards become closures of their one-step
# counterparts; the or-self variants need no self term because the
# semantics is prefix closed anyway.
_FWD_CLOSURE = {"d": "c", "ds": "c", "a": "p", "as": "p"}

_FORWARD = (Stability.FORWARD, Stability.BIDIRECTIONAL)


def _ast(q):
    return parse_xpath(q) if isinstance(q, str) else q


def _parts(e):
    if isinstance(e, Path):
        return list(e.parts)
    return [e]


# ---------------------------------------------------------------------------
# Structural subqueries


def _is_positional_atom(e):
    if isinstance(e, Number):
        return True
    return isinstance(e, Call) and e.name in ("position", "last") and not e.args


def is_structural_predicate(e):
    """A predicate kept by the structural subquery: location paths,
    ``and``/``|`` compositions of them, and positional tests."""
    if _is_positional_atom(e):
        return True
    if isinstance(e, Binary):
        if e.op in ("and", "|"):
            return is_structural_predicate(e.left) and is_structural_predicate(e.right)
        if e.op in ("=", "!=", "<", "<=", ">", ">="):
            return _is_positional_atom(e.left) and _is_positional_atom(e.right)
        return False
    if isinstance(e, Path):
        return all(is_structural_predicate(p) for p in e.parts)
    if isinstance(e, Root):
        return True
    if isinstance(e, Step):
        return all(is_structural_predicate(p) for p in e.preds)
    if isinstance(e, Filter):
        return is_structural_predicate(e.inner) and all(
            is_structural_predicate(p) for p in e.preds
        )
    return False


def structural_subquery(q):
    """The query with every non-structural predicate dropped.

    Returns an AST; ``render`` turns it back into query text.  The
    result selects a superset of the original answers, which makes it
    the right filter for candidate documents.
    """
    return _strip(_ast(q))


def _strip(e):
    if isinstance(e, Path):
        return Path(tuple(_strip(p) for p in e.parts))
    if isinstance(e, Step):
        keep = tuple(_strip(p) for p in e.preds if is_structural_predicate(p))
        return Step(e.axis, e.test, keep, e.surface, e.axis_text)
    if isinstance(e, Filter):
        keep = tuple(_strip(p) for p in e.preds if is_structural_predicate(p))
        return Filter(_strip(e.inner), keep)
    if isinstance(e, Binary) and e.op in ("|", "and"):
        return Binary(e.op, _strip(e.left), _strip(e.right))
    return e


def purely_structural(q):
    """True when the query equals its own structural subquery."""
    ast = _ast(q)
    return ast == structural_subquery(ast)


# ---------------------------------------------------------------------------
# Derivation


def derive_axpre(q):
    """Derive the refinement expression a query calls for.

    The expression is guarded by the answer element's label; the main
    path is walked backwards through single-step inverse axes, and each
    predicate forwards, with recursive axes becoming closures.  Labels
    other than the answer's do not survive derivation; the summary's
    node labels take over that role.
    """
    return _derive(_ast(q))


def _derive(e):
    if isinstance(e, Binary) and e.op == "|":
        return disj(_derive(e.left), _derive(e.right))
    if not is_path(e):
        raise UsageError(
            "cannot derive a refinement expression from %s" % render(e)
        )
    parts = _parts(e)
    guard = TestStep(_answer_test(parts))
    body = _main_path(parts)
    if body is None:
        return guard
    return concat(guard, body)


def _answer_test(parts):
    for part in reversed(parts):
        if isinstance(part, Step):
            if part.surface == "dslash":
                continue
            if part.axis == "s" and part.test.kind == "any":
                continue
            t = part.test
            if t.kind == "name":
                return LabelTest("eq", t.name)
            if t.kind == "attr":
                return LabelTest("eq", "@" + t.name)
            return ANY
        if isinstance(part, Filter) and is_path(part.inner):
            return _answer_test(_parts(part.inner))
    return ANY


def _main_path(parts):
    if not parts:
        return None
    last = parts[-1]
    rest = parts[:-1]
    if isinstance(last, Root):
        return None
    if isinstance(last, Step):
        spine = concat(AxisStep(_INV_AXIS[last.axis]), _main_path(rest) or eps())
        return _with_branches(spine, last.preds)
    if isinstance(last, Filter):
        inner = _union_main(last.inner)
        deeper = _main_path(rest)
        if inner is None:
            spine = deeper
        elif deeper is None:
            spine = inner
        else:
            spine = concat(inner, deeper)
        return _with_branches(spine, last.preds)
    return _main_path(rest)


def _union_main(e):
    if isinstance(e, Binary) and e.op == "|":
        left = _union_main(e.left)
        right = _union_main(e.right)
        if left is None or right is None:
            return left if right is None else right
        return disj(left, right)
    if is_path(e):
        return _main_path(_parts(e))
    return None


def _with_branches(spine, preds):
    branches = [] if spine is None else [spine]
    for p in preds:
        b = _pred_expr(p)
        if not isinstance(b, Empty) and b not in branches:
            branches.append(b)
    if not branches:
        return None
    return disj(*branches)


def _pred_expr(e):
    """Forward-axis expression of one predicate; empty when the
    predicate has no location structure."""
    if isinstance(e, Binary) and e.op in ("|", "and"):
        branches = []
        for side in (e.left, e.right):
            b = _pred_expr(side)
            if not isinstance(b, Empty) and b not in branches:
                branches.append(b)
        if not branches:
            return eps()
        return disj(*branches)
    if is_path(e):
        return _pred_path(_parts(e))
    return eps()


def _pred_path(parts):
    parts = [p for p in parts if not isinstance(p, Root)]
    if not parts:
        return eps()
    head, rest = parts[0], parts[1:]
    if isinstance(head, Filter):
        inner = _pred_expr(head.inner)
        tail = _fwd_branches(head.preds, rest)
        if tail is None:
            return inner
        return concat(inner, tail)
    closure = _FWD_CLOSURE.get(head.axis)
    fwd = star(AxisStep(closure)) if closure else AxisStep(head.axis)
    tail = _fwd_branches(head.preds, rest)
    if tail is None:
        return fwd
    return concat(fwd, tail)


def _fwd_branches(preds, rest):
    branches = []
    for p in preds:
        b = _pred_expr(p)
        if not isinstance(b, Empty) and b not in branches:
            branches.append(b)
    if rest:
        b = _pred_path(rest)
        if not isinstance(b, Empty) and b not in branches:
            branches.append(b)
    if not branches:
        return None
    return disj(*branches)


# ---------------------------------------------------------------------------
# Adaptation


def _alpha_guards(alpha):
    """The label guards a derived expression starts with, one per
    union branch."""
    if isinstance(alpha, Disj):
        out = []
        for p in alpha.parts:
            out.extend(_alpha_guards(p))
        return out
    if isinstance(alpha, Concat):
        return _alpha_guards(alpha.parts[0])
    if isinstance(alpha, TestStep):
        return [alpha.test]
    return [ANY]


def _matched_nodes(sd, alpha):
    """Summary nodes the derived expression can host, and the nodes
    that carry the answer label but sit elsewhere in the lattice."""
    guards = _alpha_guards(alpha)
    matched, rest = [], []
    for sid in sd.sids():
        node = sd.nodes[sid]
        if not any(g.matches(node.label) for g in guards):
            continue
        if axpre_contains(alpha, parse_axpre(node.axpre)):
            matched.append(sid)
        else:
            rest.append(sid)
    return matched, rest


def adapt_sd(sd, q):
    """Refine every summary node the query can be hosted on.

    Nodes are matched by answer label and by containment of their
    current expression in the derived one.  Nodes already equivalent to
    the derived expression are left alone, so adapting twice is a
    no-op.  Raises AdaptationError when nothing matches, naming the
    label-matching nodes so the caller can see where in the refinement
    lattice the query landed.
    """
    alpha = derive_axpre(q)
    matched, rest = _matched_nodes(sd, alpha)
    todo = []
    for sid in matched:
        current = parse_axpre(sd.axpre(sid))
        if not axpre_contains(current, alpha):
            todo.append(sid)
    if not matched:
        if rest:
            hint = "; ".join("s%d: %s" % (sid, sd.axpre(sid)) for sid in rest)
            raise AdaptationError(
                "no summary node hosts %s; label matches sit at %s" % (alpha, hint)
            )
        raise AdaptationError(
            "no summary node carries the answer label of %s" % (alpha,)
        )
    report = RefinementReport(noop=True)
    for sid in todo:
        report.merge(refine_node(sd, sid, alpha))
    return report


# ---------------------------------------------------------------------------
# Certification along forward-stable edges
#
# A summary edge (si, ax, sj) classified forward-stable promises an ax
# successor in sj for every member of si.  Chains of such promises
# compose, so a walk that only ever crosses forward-stable edges proves
# the corresponding document-level pattern for every extent member at
# once.  Composite axes are decomposed into the stored one-step axes
# (descendant into child chains, following into the sibling detour).


def _edge_class(sd, si, ax, sj):
    cls = sd.edges.get((si, ax, sj))
    if cls is Stability.UNCHECKED:
        cls = sd.classify_edge(si, sj, ax)
    return cls


def _forward_targets(sd, sid, ax):
    return [sj for sj in sd.axis_step(sid, ax) if _edge_class(sd, sid, ax, sj) in _FORWARD]


def _closure(sd, frontier, ax):
    """Classes reachable by one or more forward-stable ``ax`` steps."""
    seen = set()
    todo = list(frontier)
    while todo:
        s = todo.pop()
        for t in _forward_targets(sd, s, ax):
            if t not in seen:
                seen.add(t)
                todo.append(t)
    return seen


def _axis_frontier(sd, frontier, ax):
    if ax == "s":
        return set(frontier)
    if ax in ("d", "ds", "a", "as"):
        base = "c" if ax in ("d", "ds") else "p"
        seen = _closure(sd, frontier, base)
        if ax in ("ds", "as"):
            seen |= set(frontier)
        return seen
    if ax in ("f", "pc"):
        sib = "fs" if ax == "f" else "ps"
        anchors = set(frontier) | _closure(sd, frontier, "p")
        sibs = _closure(sd, anchors, sib)
        return sibs | _closure(sd, sibs, "c")
    out = set()
    for s in frontier:
        out.update(_forward_targets(sd, s, ax))
    return out


def _cert_pred(sd, sid, pred):
    if isinstance(pred, Number):
        # the first match exists whenever any match does; deeper ranks
        # need counting the summary cannot do
        return pred.value == 1
    if isinstance(pred, Binary):
        if pred.op == "and":
            return _cert_pred(sd, sid, pred.left) and _cert_pred(sd, sid, pred.right)
        if pred.op == "|":
            return _cert_pred(sd, sid, pred.left) or _cert_pred(sd, sid, pred.right)
        return False
    if is_path(pred):
        return _cert_fwd(sd, {sid}, _parts(pred))
    return False


def _cert_fwd(sd, frontier, parts):
    cur = set(frontier)
    for part in parts:
        if not isinstance(part, Step):
            return False
        cur = _axis_frontier(sd, cur, part.axis)
        cur = {t for t in cur if part.test.matches(sd.label(t))}
        cur = {t for t in cur if all(_cert_pred(sd, t, p) for p in part.preds)}
        if not cur:
            return False
    return True


def _all_roots(sd, sid):
    return "p" in sd.sd_axes and not sd.axis_step(sid, "p")


def _inv_candidates(sd, sid, inv):
    if inv == "s":
        return [sid]
    if inv in ("a", "as", "d", "ds"):
        base = "p" if inv in ("a", "as") else "c"
        out = _closure(sd, {sid}, base)
        if inv in ("as", "ds"):
            out |= {sid}
        return sorted(out)
    if inv in ("f", "pc"):
        return sorted(_axis_frontier(sd, {sid}, inv))
    return _forward_targets(sd, sid, inv)


def _cert_loc(sd, sid, parts, i):
    """Members of class ``sid`` hold results of step ``parts[i]``;
    prove the leftward context of the path along stable edges."""
    part = parts[i]
    if not isinstance(part, Step):
        return False
    if i == 0:
        return True
    prev = parts[i - 1]
    if isinstance(prev, Root):
        if part.axis in ("d", "ds"):
            return True
        if part.axis == "c":
            return _all_roots(sd, sid)
        return False
    if not isinstance(prev, Step):
        return False
    inv = _EXACT_INV.get(part.axis)
    if inv is None:
        return False
    for u in _inv_candidates(sd, sid, inv):
        if not prev.test.matches(sd.label(u)):
            continue
        if not all(_cert_pred(sd, u, p) for p in prev.preds):
            continue
        if _cert_loc(sd, u, parts, i - 1):
            return True
    return False


def _stable_match(sd, sid, ast):
    if isinstance(ast, Binary) and ast.op == "|":
        return _stable_match(sd, sid, ast.left) or _stable_match(sd, sid, ast.right)
    if not is_path(ast):
        return False
    parts = _parts(ast)
    if not parts or not isinstance(parts[-1], Step):
        return False
    last = parts[-1]
    if not last.test.matches(sd.label(sid)):
        return False
    if not all(_cert_pred(sd, sid, p) for p in last.preds):
        return False
    return _cert_loc(sd, sid, parts, len(parts) - 1)


def forward_stable_for(sd, sid, q):
    """True when forward-stable summary edges alone prove that every
    member of ``sid`` answers the structural part of ``q``."""
    return _stable_match(sd, sid, structural_subquery(_ast(q)))


# ---------------------------------------------------------------------------
# Class-invariant refutation
#
# Whether a class can host answers is decided on one member.  The
# node's expression bounds what the summary observed about the class;
# all members agree on exactly those observations, so a walk that only
# draws refuting evidence from inside the expression's view reaches the
# same verdict on every member.  Conditions that stray outside the view
# pass unrefuted, which keeps the verdict a safe overapproximation:
# "no" holds for the whole class, "yes" merely fails to rule it out.
#
# The walk mirrors the neighbourhood construction: automaton states ride
# along with each element, an axis is explored only while the automaton
# still offers it, and a label firing no guard drops its element out of
# view.  Positional tests are beyond any invariant built from existence
# and labels, so they are dropped, weakening conditions before any
# refutation is attempted.


@lru_cache(maxsize=512)
def _invariant_automaton(expr_string):
    return build_axpre_automaton(parse_axpre(expr_string))


def class_refutes(sd, sid, q):
    """True when the class invariant of ``sid`` rules out every member
    as an answer to the structural part of ``q``."""
    return _class_refutes(sd, sid, structural_subquery(_ast(q)))


def _class_refutes(sd, sid, ss):
    node = sd.node(sid)
    if not node.extent:
        return False
    doc, v = min(node.extent)
    g = sd.witness_graph(doc)
    auto = _invariant_automaton(node.axpre)
    states = frozenset(auto.fire_test({auto.initial}, g.label(v)))
    if not states:
        return False
    return not _adm_branch(g, auto, v, states, ss)


def _adm_branch(g, auto, v, states, ast):
    if isinstance(ast, Binary) and ast.op == "|":
        return _adm_branch(g, auto, v, states, ast.left) or _adm_branch(
            g, auto, v, states, ast.right
        )
    if not is_path(ast):
        return True
    parts = _parts(ast)
    if not parts or not isinstance(parts[-1], Step):
        return True
    last = parts[-1]
    if not last.test.matches(g.label(v)):
        # class labels are shared by construction, so this refutes
        return False
    if not all(_adm_pred(g, auto, v, states, p) for p in last.preds):
        return False
    return _adm_loc(g, auto, v, states, parts, len(parts) - 1)


def _adm_loc(g, auto, v, states, parts, i):
    """Upward walk over the main path's context; ``parts[i]`` brought
    us to ``v`` and everything to its left is still unverified."""
    if i == 0:
        return True
    step = parts[i]
    prev = parts[i - 1]
    if not isinstance(step, Step) or step.axis != "c" or step.surface == "dslash":
        return True
    q2 = auto.fire_axis(states, "p")
    if not q2:
        return True
    parent = g.axis_step(v, "p")
    if isinstance(prev, Root):
        # an in-view parent refutes the root anchor; a genuinely absent
        # one satisfies it
        return not parent
    if not isinstance(prev, Step) or prev.surface == "dslash":
        return True
    if not parent:
        return False
    w = parent[0]
    nxt = frozenset(auto.fire_test(q2, g.label(w)))
    if not nxt:
        return True
    if not prev.test.matches(g.label(w)):
        return False
    if not all(_adm_pred(g, auto, w, nxt, p) for p in prev.preds):
        return False
    return _adm_loc(g, auto, w, nxt, parts, i - 1)


def _adm_pred(g, auto, v, states, pred):
    if isinstance(pred, Binary):
        if pred.op == "and":
            return _adm_pred(g, auto, v, states, pred.left) and _adm_pred(
                g, auto, v, states, pred.right
            )
        if pred.op == "|":
            return _adm_pred(g, auto, v, states, pred.left) or _adm_pred(
                g, auto, v, states, pred.right
            )
        return True
    if is_path(pred):
        return _adm_exists(g, auto, {v: states}, _parts(pred))
    return True


def _full_view(auto, q2):
    """Every label is observable from ``q2``: some reachable guard
    accepts arbitrary labels."""
    return any(
        guard.op == "any"
        for q in auto.closure_of(q2)
        for guard, _ in auto.test_out.get(q, ())
    )


def _adm_exists(g, auto, frontier, parts):
    """Possibility of a forward path from any frontier element.

    The frontier maps elements to live automaton states; an element
    whose states ran dry is carried as an unknown, since nothing below
    it was ever observed.  Refutation needs the frontier to die with
    every alternative in view.
    """
    blurred = False
    for part in parts:
        if not isinstance(part, Step) or part.surface == "dslash":
            return True
        if part.axis == "s":
            nxt = {
                w: st
                for w, st in frontier.items()
                if not st or part.test.matches(g.label(w))
            }
        else:
            nxt = {}
            for w, st in frontier.items():
                if not st:
                    blurred = True
                    continue
                q2 = auto.fire_axis(st, part.axis)
                if not q2:
                    blurred = True
                    continue
                if part.test.kind in ("name", "attr"):
                    want = part.test.name
                    if part.test.kind == "attr":
                        want = "@" + want
                    if not auto.fire_test(q2, want):
                        blurred = True
                        continue
                elif not _full_view(auto, q2):
                    blurred = True
                for t in g.axis_step(w, part.axis):
                    ts = frozenset(auto.fire_test(q2, g.label(t)))
                    if ts and not part.test.matches(g.label(t)):
                        continue
                    if not ts and part.test.kind in ("name", "attr"):
                        continue
                    prev = nxt.get(t)
                    nxt[t] = ts if prev is None else prev | ts
        live = {
            t: ts
            for t, ts in nxt.items()
            if all(_adm_pred(g, auto, t, ts, p) for p in part.preds)
        }
        if not live:
            return blurred
        frontier = live
    return True


# ---------------------------------------------------------------------------
# Candidates and answers


@dataclass(frozen=True)
class CandidateSet:
    """Documents worth evaluating and, when complete, the answers.

    ``exact`` marks answer sets read off the summary without touching a
    single document.  ``evaluated_docs`` counts per-document expression
    evaluations, the cost the summary is there to avoid.
    """

    candidate_docs: frozenset
    answer_docs: frozenset = frozenset()
    answer_elems: frozenset = frozenset()
    matched_sids: tuple = ()
    evaluated_docs: int = 0
    exact: bool = False

    def to_json(self):
        return {
            "v": 1,
            "candidateDocs": sorted(self.candidate_docs),
            "answerDocs": sorted(self.answer_docs),
            "answerElems": [[d, v] for d, v in sorted(self.answer_elems)],
            "matchedSids": list(self.matched_sids),
            "evaluatedDocs": self.evaluated_docs,
            "exact": self.exact,
        }


def _extent_docs(sd, sid):
    return {doc for doc, _ in sd.node(sid).extent}


def find_candidates(sd, q):
    """Candidate documents read off the summary alone.

    Every node carrying the answer label contributes its extent's
    documents unless its class invariant refutes the structural part of
    the query.  Refutation only ever draws on what the node's
    expression observed, so the set stays complete at every refinement
    stage and shrinks as the summary learns more shape.  The first
    probe of a class parses one witness document, which the descriptor
    then holds; beyond that the collection is never touched.
    """
    ast = _ast(q)
    guards = _alpha_guards(derive_axpre(ast))
    ss = structural_subquery(ast)
    matched = []
    cand = set()
    for sid in sd.sids():
        node = sd.nodes[sid]
        if not any(g.matches(node.label) for g in guards):
            continue
        if _class_refutes(sd, sid, ss):
            continue
        matched.append(sid)
        cand |= _extent_docs(sd, sid)
    return CandidateSet(frozenset(cand), matched_sids=tuple(matched))


def evaluate_query(collection, sd, q):
    """Answers plus the candidate set that produced them.

    Purely structural queries whose summary nodes decide membership
    outright are answered from extents alone; otherwise the full query
    runs over the candidate documents only.  Answer documents are
    always a subset of candidate documents.
    """
    ast = _ast(q)
    ss = structural_subquery(ast)
    shortcut = _exact_answer(sd, ast, ss)
    if shortcut is not None:
        return shortcut
    cs = find_candidates(sd, ast)
    answers = set()
    answer_docs = set()
    evaluated = cs.evaluated_docs
    for doc in sorted(cs.candidate_docs):
        res = eval_xpath(ast, collection.graph(doc))
        evaluated += 1
        if not isinstance(res, list):
            raise UsageError(
                "query must select elements, got %s" % type(res).__name__
            )
        if res:
            answer_docs.add(doc)
            answers.update((doc, v) for v in res)
    return CandidateSet(
        cs.candidate_docs,
        frozenset(answer_docs),
        frozenset(answers),
        cs.matched_sids,
        evaluated,
        False,
    )


# The exact shortcut rests on one fact: extent classes are closed under
# the patterns a structural query tests.  All members of a class have
# bisimilar neighbourhoods under the node's expression, and a structural
# pattern within that expression's axes is part of what bisimilarity
# preserves, so either every member answers or none does.  Checking the
# pattern once against the representative neighbourhood therefore
# decides the whole class, with zero document evaluations.  The check
# refuses queries whose patterns leave the expression's view: positional
# tests, position-dependent axes without exact inverses, and root
# anchors a bounded expression cannot see the top of.


def _walk(e):
    yield e
    if isinstance(e, Path):
        for p in e.parts:
            yield from _walk(p)
    elif isinstance(e, Step):
        for p in e.preds:
            yield from _walk(p)
    elif isinstance(e, Filter):
        yield from _walk(e.inner)
        for p in e.preds:
            yield from _walk(p)
    elif isinstance(e, Binary):
        yield from _walk(e.left)
        yield from _walk(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _walk(a)
    elif isinstance(e, Negate):
        yield from _walk(e.operand)


def _has_positional(e):
    for sub in _walk(e):
        if isinstance(sub, Number):
            return True
        if isinstance(sub, Call) and sub.name in ("position", "last"):
            return True
    return False


def _decidable_branch(parts):
    if not parts or not isinstance(parts[-1], Step):
        return False
    for idx, part in enumerate(parts):
        if isinstance(part, Root):
            if idx != 0 or idx + 1 >= len(parts):
                return False
            nxt = parts[1]
            if not (isinstance(nxt, Step) and nxt.axis in ("d", "ds")):
                return False
        elif isinstance(part, Step):
            if part.axis not in _EXACT_INV:
                return False
            for p in part.preds:
                if not _decidable_pred(p):
                    return False
        else:
            return False
    return True


def _decidable_pred(e):
    if isinstance(e, Binary) and e.op in ("and", "|"):
        return _decidable_pred(e.left) and _decidable_pred(e.right)
    if is_path(e):
        parts = _parts(e)
        for part in parts:
            if not isinstance(part, Step):
                return False
            for p in part.preds:
                if not _decidable_pred(p):
                    return False
        return True
    return False


def _decidable(ss):
    if isinstance(ss, Binary) and ss.op == "|":
        return _decidable(ss.left) and _decidable(ss.right)
    if not is_path(ss):
        return False
    return _decidable_branch(_parts(ss))


def _exact_answer(sd, ast, ss):
    if ast != ss or _has_positional(ss) or not _decidable(ss):
        return None
    alpha = derive_axpre(ast)
    guards = _alpha_guards(alpha)
    winners = []
    for sid in sd.sids():
        node = sd.nodes[sid]
        if not any(g.matches(node.label) for g in guards):
            continue
        current = parse_axpre(node.axpre)
        if not (axpre_contains(alpha, current) and axpre_contains(current, alpha)):
            return None
        if _nb_match(sd, sid, ss):
            winners.append(sid)
    elems = set()
    for sid in winners:
        elems |= set(sd.node(sid).extent)
    docs = frozenset(doc for doc, _ in elems)
    return CandidateSet(docs, docs, frozenset(elems), tuple(winners), 0, True)


def _nb_match(sd, sid, ss):
    nb = representative_neighbourhood(sd, sid)
    out = nb.out_map()
    return _nb_branch(nb, out, ss)


def _nb_branch(nb, out, ast):
    if isinstance(ast, Binary) and ast.op == "|":
        return _nb_branch(nb, out, ast.left) or _nb_branch(nb, out, ast.right)
    parts = _parts(ast)
    last = parts[-1]
    root = nb.root
    if not last.test.matches(nb.labels[root]):
        return False
    if not all(_nb_pred(nb, out, root, p) for p in last.preds):
        return False
    return _nb_loc(nb, out, root, parts, len(parts) - 1)


def _nb_axis(out, frontier, ax):
    if ax == "s":
        return set(frontier)
    base = _FWD_CLOSURE.get(ax)
    if base:
        seen = set()
        todo = list(frontier)
        while todo:
            v = todo.pop()
            for t in out.get(v, {}).get(base, ()):
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        if ax in ("ds", "as"):
            seen |= set(frontier)
        return seen
    return {t for v in frontier for t in out.get(v, {}).get(ax, ())}


def _nb_pred(nb, out, v, pred):
    if isinstance(pred, Binary):
        if pred.op == "and":
            return _nb_pred(nb, out, v, pred.left) and _nb_pred(nb, out, v, pred.right)
        if pred.op == "|":
            return _nb_pred(nb, out, v, pred.left) or _nb_pred(nb, out, v, pred.right)
        return False
    if not is_path(pred):
        return False
    cur = {v}
    for part in _parts(pred):
        cur = _nb_axis(out, cur, part.axis)
        cur = {t for t in cur if part.test.matches(nb.labels[t])}
        cur = {t for t in cur if all(_nb_pred(nb, out, t, p) for p in part.preds)}
        if not cur:
            return False
    return True


def _nb_loc(nb, out, v, parts, i):
    part = parts[i]
    if i == 0:
        return True
    prev = parts[i - 1]
    if isinstance(prev, Root):
        return part.axis in ("d", "ds")
    inv = _EXACT_INV[part.axis]
    if inv == "s":
        cands = [v]
    else:
        cands = _nb_axis(out, {v}, inv)
    for u in cands:
        if not prev.test.matches(nb.labels[u]):
            continue
        if not all(_nb_pred(nb, out, u, p) for p in prev.preds):
            continue
        if _nb_loc(nb, out, u, parts, i - 1):
            return True
    return False


# ---------------------------------------------------------------------------
# Workloads


@dataclass
class WorkloadEntry:
    query_id: str
    text: str
    axpre: str
    target_sids: tuple = ()

    def to_json(self):
        return {
            "id": self.query_id,
            "xpath": self.text,
            "axpre": self.axpre,
            "targetSids": list(self.target_sids),
        }


class Workload:
    """An ordered list of queries with their derived expressions.

    The stored expression is redundant with the query text on purpose:
    ``verify`` re-derives and compares, so a workload file cannot drift
    away from the derivation it claims.
    """

    def __init__(self, entries=None):
        self.entries = list(entries or ())

    @classmethod
    def from_queries(cls, pairs):
        """Build from ``(query_id, xpath_text)`` pairs."""
        return cls(
            WorkloadEntry(qid, text, str(derive_axpre(text))) for qid, text in pairs
        )

    @classmethod
    def from_json(cls, payload):
        if isinstance(payload, dict) and "queries" not in payload:
            return cls.from_queries(payload.items())
        entries = []
        for row in payload["queries"]:
            entries.append(
                WorkloadEntry(
                    row["id"],
                    row["xpath"],
                    row.get("axpre") or str(derive_axpre(row["xpath"])),
                    tuple(row.get("targetSids", ())),
                )
            )
        return cls(entries)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    @classmethod
    def builtin(cls, name):
        """One of the benchmark workloads shipped with the package:
        ``rss``, ``psimi`` or ``wiki``."""
        ref = resources.files(__package__).joinpath("workloads").joinpath(name + ".json")
        try:
            payload = json.loads(ref.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(
                "no builtin workload %r; shipped: rss, psimi, wiki" % (name,)
            ) from None
        return cls.from_json(payload)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    def to_json(self):
        return {"v": 1, "queries": [e.to_json() for e in self.entries]}

    def verify(self):
        for e in self.entries:
            derived = str(derive_axpre(e.text))
            if derived != e.axpre:
                raise ContractViolation(
                    "workload %s records %s but %s derives to %s"
                    % (e.query_id, e.axpre, e.text, derived)
                )

    def adapt(self, sd):
        """Adapt the summary to every query in order; returns the
        reports keyed by query id and records the nodes each query maps
        to afterwards."""
        self.verify()
        reports = {}
        for e in self.entries:
            reports[e.query_id] = adapt_sd(sd, e.text)
            matched, _ = _matched_nodes(sd, parse_axpre(e.axpre))
            e.target_sids = tuple(matched)
        return reports

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)
