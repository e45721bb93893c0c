"""A rule-by-rule XPath evaluator used as the randomized agreement oracle.

Everything is computed by set comprehension over the parent array and
ordinal (document) order.  The only primitives taken from the engine's
data model are labels, the parent array and string values; no evaluation
code is shared, only the parsed AST.
"""

import math

from axpre_engine.xpath import (
    Binary,
    Call,
    Filter,
    Literal,
    Negate,
    Number,
    Path,
    Root,
    Step,
)

import xmlgen

REVERSE_AXES = frozenset({"p", "a", "as", "pc", "ps"})

_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}


class _Doc:
    """Axis relations of one document, derived from the parent array."""

    def __init__(self, g):
        self.g = g
        self.nodes = list(range(1, g.size + 1))
        self.anc = {}
        for v in self.nodes:
            chain = []
            u = g.parent[v]
            while u:
                chain.append(u)
                u = g.parent[u]
            self.anc[v] = chain
        self.kids = {v: [] for v in self.nodes}
        for v in self.nodes:
            p = g.parent[v]
            if p:
                self.kids[p].append(v)

    def axis(self, v, name):
        if v == 0:
            # the virtual document node sees the tree only downward
            if name == "c":
                return {1} if self.nodes else set()
            if name in ("d", "ds"):
                return set(self.nodes)
            return set()
        anc = self.anc[v]
        if name == "s":
            return {v}
        if name == "c":
            return set(self.kids[v])
        if name == "p":
            return {anc[0]} if anc else set()
        if name == "a":
            return set(anc)
        if name == "as":
            return set(anc) | {v}
        if name == "d":
            return {u for u in self.nodes if v in self.anc[u]}
        if name == "ds":
            return {u for u in self.nodes if v in self.anc[u]} | {v}
        if name == "fc":
            return {min(self.kids[v])} if self.kids[v] else set()
        if name == "f":
            return {u for u in self.nodes if u > v and v not in self.anc[u]}
        if name == "pc":
            return {u for u in self.nodes if u < v and u not in anc}
        sibs = set(self.kids[anc[0]]) if anc else set()
        if name == "fs":
            return {u for u in sibs if u > v}
        if name == "ps":
            return {u for u in sibs if u < v}
        if name == "ns":
            later = [u for u in sibs if u > v]
            return {min(later)} if later else set()
        raise AssertionError("axis %r not transcribed" % name)


def _strval(doc, v):
    if v == 0:
        return doc.g.strval(1) if doc.g.size else ""
    return doc.g.strval(v)


def _bool(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return value != 0 and not math.isnan(value)
    if isinstance(value, str):
        return value != ""
    return len(value) > 0


def _num(value, doc):
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, float):
        return value
    if isinstance(value, set):
        return _num(_str(value, doc), doc)
    # number syntax: optional minus, digits with at most one dot
    t = value.strip()
    neg = t.startswith("-")
    if neg:
        t = t[1:]
    digits = t.replace(".", "", 1)
    if not digits or not digits.isdigit():
        return float("nan")
    try:
        n = float(t)
    except ValueError:
        return float("nan")
    return -n if neg else n


def _str(value, doc):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        if value == int(value):
            return "%d" % int(value)
        return repr(value)
    if isinstance(value, str):
        return value
    if not value:
        return ""
    return _strval(doc, min(value))


def _raw(op, a, b):
    if isinstance(a, float) and math.isnan(a):
        return False
    if isinstance(b, float) and math.isnan(b):
        return False
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _compare(op, a, b, doc):
    if isinstance(b, set) and not isinstance(a, set):
        return _compare(_FLIP.get(op, op), b, a, doc)
    if isinstance(a, set):
        if isinstance(b, set):
            return any(_raw(op, _strval(doc, u), _strval(doc, w)) for u in a for w in b)
        if isinstance(b, bool):
            return _raw(op, _bool(a), b)
        if isinstance(b, float):
            return any(_raw(op, _num(_strval(doc, u), doc), b) for u in a)
        return any(_raw(op, _strval(doc, u), b) for u in a)
    if op in ("=", "!="):
        if isinstance(a, bool) or isinstance(b, bool):
            return _raw(op, _bool(a), _bool(b))
        if isinstance(a, float) or isinstance(b, float):
            return _raw(op, _num(a, doc), _num(b, doc))
        return _raw(op, a, b)
    return _raw(op, _num(a, doc), _num(b, doc))


def _arith(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "div":
        if b != 0:
            return a / b
        if a == 0 or math.isnan(a):
            return float("nan")
        same_sign = (a > 0) == (math.copysign(1.0, b) > 0)
        return math.inf if same_sign else -math.inf
    if b == 0 or math.isnan(a) or math.isinf(a):
        return float("nan")
    return math.fmod(a, b)


def _test_ok(test, label):
    if test.kind == "name":
        return label == test.name
    if test.kind == "any":
        return True
    if test.kind == "attr":
        return label == "@" + test.name
    return label.startswith("@")


def _truthy_pred(value, pos):
    # a number predicate is the positional shorthand
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return not math.isnan(value) and value == pos
    return _bool(value)


def _sift(ordered, preds, doc):
    size = len(ordered)
    out = set()
    for pos, w in enumerate(ordered, 1):
        if all(_truthy_pred(_e(p, (w, pos, size), doc), pos) for p in preds):
            out.add(w)
    return out


def _l(part, w, doc):
    if isinstance(part, Root):
        return {0}
    if isinstance(part, Filter):
        inner = _e(part.inner, (w, 1, 1), doc)
        assert isinstance(inner, set), "a parenthesized path must give a node-set"
        return _sift(sorted(inner), part.preds, doc)
    s = {u for u in doc.axis(w, part.axis) if _test_ok(part.test, doc.g.label(u))}
    ordered = sorted(s, reverse=part.axis in REVERSE_AXES)
    return _sift(ordered, part.preds, doc)


def _d(path, v, doc):
    current = {v}
    for part in path.parts if isinstance(path, Path) else (path,):
        current = set().union(*(_l(part, w, doc) for w in current))
    return current


def _call(expr, ctx, doc):
    name = expr.name
    if name == "position":
        return float(ctx[1])
    if name == "last":
        return float(ctx[2])
    args = [_e(a, ctx, doc) for a in expr.args]
    if name == "count":
        return float(len(args[0]))
    if name == "not":
        return not _bool(args[0])
    if name == "boolean":
        return _bool(args[0])
    if name == "number":
        return _num(args[0] if args else _strval(doc, ctx[0]), doc)
    if name == "string":
        return _str(args[0] if args else _strval(doc, ctx[0]), doc)
    if name == "sum":
        return float(sum(_num(_strval(doc, u), doc) for u in args[0]))
    if name == "contains":
        return _str(args[1], doc) in _str(args[0], doc)
    if name == "true":
        return True
    if name == "false":
        return False
    raise AssertionError("function %r not transcribed" % name)


def _binary(expr, ctx, doc):
    if expr.op == "or":
        return _bool(_e(expr.left, ctx, doc)) or _bool(_e(expr.right, ctx, doc))
    if expr.op == "and":
        return _bool(_e(expr.left, ctx, doc)) and _bool(_e(expr.right, ctx, doc))
    left = _e(expr.left, ctx, doc)
    right = _e(expr.right, ctx, doc)
    if expr.op in ("=", "!=", "<", "<=", ">", ">="):
        return _compare(expr.op, left, right, doc)
    if expr.op == "|":
        return left | right
    if expr.op == "intersect":
        return left & right
    return _arith(expr.op, _num(left, doc), _num(right, doc))


def _e(expr, ctx, doc):
    if isinstance(expr, (Path, Step, Filter, Root)):
        return _d(expr, ctx[0], doc)
    if isinstance(expr, Number):
        return float(expr.value)
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Negate):
        return -_num(_e(expr.operand, ctx, doc), doc)
    if isinstance(expr, Call):
        return _call(expr, ctx, doc)
    if isinstance(expr, Binary):
        return _binary(expr, ctx, doc)
    raise AssertionError("node %r not transcribed" % (expr,))


def naive_eval(expr, g, context=(0, 1, 1)):
    value = _e(expr, tuple(context), _Doc(g))
    if isinstance(value, set):
        return sorted(value)
    return value


def same_value(a, b):
    if type(a) is not type(b):
        return False
    if isinstance(a, float):
        return (math.isnan(a) and math.isnan(b)) or a == b
    return a == b


# ---------------------------------------------------------------------------
# grammar sampler

_AXES = [
    "child",
    "descendant",
    "parent",
    "ancestor",
    "self",
    "descendant-or-self",
    "ancestor-or-self",
    "following-sibling",
    "preceding-sibling",
    "following",
    "preceding",
    "fc",
    "ns",
]

_NUMS = ["0", "1", "2", "3", "0.5"]
_STRS = ['"x"', '"5"', '"ab"', '"zz"']


def _elem_test(rng):
    return "*" if rng.random() < 0.2 else rng.choice(xmlgen.LABELS)


def _step(rng, depth):
    r = rng.random()
    if r < 0.25:
        base = "%s::%s" % (rng.choice(_AXES), _elem_test(rng))
    elif r < 0.35:
        base = "@" + rng.choice(xmlgen.ATTRS) if rng.random() < 0.8 else "@*"
    elif r < 0.43:
        return rng.choice([".", ".."])
    else:
        base = _elem_test(rng)
    if depth > 0 and rng.random() < 0.45:
        base += "[%s]" % _pred(rng, depth - 1)
        if rng.random() < 0.2:
            base += "[%s]" % _pred(rng, depth - 1)
    return base


def _rel_path(rng, depth):
    steps = [_step(rng, depth) for _ in range(rng.randint(1, 1 + max(depth, 0)))]
    out = steps[0]
    for s in steps[1:]:
        out += ("//" if rng.random() < 0.15 else "/") + s
    return out


def _path(rng, depth):
    body = _rel_path(rng, depth)
    r = rng.random()
    if r < 0.3:
        body = "/" + body
    elif r < 0.4:
        body = "//" + body
    if depth > 0 and rng.random() < 0.15:
        return "(%s)[%d]" % (body, rng.randint(1, 3))
    return body


def _pred(rng, depth):
    r = rng.random()
    if r < 0.28:
        return str(rng.randint(1, 3))
    if r < 0.38:
        if rng.random() < 0.5:
            return "position()=last()"
        return "position()<%d" % rng.randint(1, 3)
    if r < 0.56:
        return _rel_path(rng, depth)
    if r < 0.72:
        op = rng.choice(["=", "!=", "<", ">", "<=", ">="])
        return "%s%s%s" % (_rel_path(rng, depth), op, rng.choice(_NUMS + _STRS))
    if r < 0.82:
        op = rng.choice(["=", ">", "<"])
        return "count(%s)%s%d" % (_rel_path(rng, depth), op, rng.randint(0, 2))
    if r < 0.92:
        inner = _pred(rng, depth - 1) if depth > 0 else _rel_path(rng, 0)
        return "not(%s)" % inner
    return "contains(%s,%s)" % (_rel_path(rng, depth), rng.choice(_STRS))


def random_expr(rng, depth=4):
    roll = rng.random()
    if roll < 0.5:
        return _path(rng, depth - 1)
    if roll < 0.62:
        op = rng.choice(["=", "!=", "<", ">", "<=", ">="])
        rhs = rng.choice(_NUMS + _STRS) if rng.random() < 0.6 else _path(rng, depth - 2)
        return "%s %s %s" % (_path(rng, depth - 2), op, rhs)
    if roll < 0.72:
        fn = rng.choice(["count", "not", "boolean", "sum", "string"])
        return "%s(%s)" % (fn, _path(rng, depth - 2))
    if roll < 0.82:
        op = rng.choice(["and", "or"])
        return "%s %s %s" % (_pred(rng, depth - 2), op, _pred(rng, depth - 2))
    if roll < 0.92:
        op = rng.choice(["+", "-", "*", "div", "mod"])
        return "count(%s) %s %s" % (_path(rng, depth - 2), op, rng.choice(_NUMS))
    op = rng.choice(["|", "intersect"])
    return "%s %s %s" % (_path(rng, depth - 2), op, _path(rng, depth - 2))
