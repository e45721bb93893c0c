"""XPath 1.0 subset: parser and evaluator over axis graphs.

Evaluation follows a context-triple semantics: every expression is
evaluated against ``(node, position, size)``.  Two position flavours
exist and they are not interchangeable: predicates attached to a step
rank the candidate set in the step axis' order, while predicates
attached to a parenthesized path rank it in document order.  That is
the whole difference between ``d::a/c::b[1]`` (one ``b`` per ``a``) and
``(d::a/c::b)[1]`` (one ``b`` overall), and tests pin both readings.

Within one step, every predicate sees the same candidate set and the
same positions; predicates are conjunctive, not sequential filters.

The surface syntax accepts abbreviated steps (``/a/b``, ``//``, ``.``,
``..``, ``@x``, ``[n]``), unabbreviated axes, the two-letter axis codes
(``c::``, ``fs::``, ...), and an ``intersect`` operator with the same
operand typing as ``|``.  Attributes are child nodes labelled ``@name``
here, so ``@x`` desugars to a child step testing that label and a bare
``*`` matches attribute children as well as elements.

The AST keeps the surface form of every step, so rendering a parsed
(or rewritten) expression reproduces the notation the caller used.
"""

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

from .errors import XPathEvalError, XPathSyntaxError


class Context(NamedTuple):
    node: int
    position: int
    size: int


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Number:
    value: float

    def render(self):
        if self.value == int(self.value) and not math.isinf(self.value):
            return "%d" % int(self.value)
        return repr(self.value)


@dataclass(frozen=True)
class Literal:
    value: str

    def render(self):
        if '"' not in self.value:
            return '"%s"' % self.value
        return "'%s'" % self.value


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple

    def render(self):
        return "%s(%s)" % (self.name, ", ".join(a.render() for a in self.args))


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object

    def render(self):
        sep = " %s " % self.op if self.op.isalpha() else self.op
        return "%s%s%s" % (self.left.render(), sep, self.right.render())


@dataclass(frozen=True)
class Negate:
    operand: object

    def render(self):
        return "-%s" % self.operand.render()


@dataclass(frozen=True)
class NodeTest:
    kind: str  # name | any | attr | attr-any
    name: Optional[str] = None

    def matches(self, label):
        if self.kind == "name":
            return label == self.name
        if self.kind == "any":
            return True
        if self.kind == "attr":
            return label == "@" + self.name
        return label.startswith("@")

    def render(self):
        if self.kind == "name":
            return self.name
        if self.kind == "any":
            return "*"
        if self.kind == "attr":
            return "@" + self.name
        return "@*"


@dataclass(frozen=True)
class Root:
    def render(self):
        return "/"


@dataclass(frozen=True)
class Step:
    axis: str
    test: NodeTest
    preds: Tuple = ()
    # surface: plain (bare test, child axis), at (@x), dot, dotdot,
    # axis (written with axis_text::), dslash (the // filler step)
    surface: str = "plain"
    axis_text: Optional[str] = None

    def render(self):
        preds = "".join("[%s]" % p.render() for p in self.preds)
        if self.surface == "dot":
            return "." + preds
        if self.surface == "dotdot":
            return ".." + preds
        if self.surface == "at":
            return "@%s%s" % (self.test.name if self.test.kind == "attr" else "*", preds)
        if self.surface == "axis":
            return "%s::%s%s" % (self.axis_text, self.test.render(), preds)
        return self.test.render() + preds


@dataclass(frozen=True)
class Filter:
    """A parenthesized path; its predicates rank results in document order."""

    inner: object
    preds: Tuple = ()

    def render(self):
        return "(%s)%s" % (
            self.inner.render(),
            "".join("[%s]" % p.render() for p in self.preds),
        )


@dataclass(frozen=True)
class Path:
    """A composition of parts, each a Root, Step or Filter."""

    parts: Tuple

    def render(self):
        out = []
        pending = ""
        first = True
        for part in self.parts:
            if isinstance(part, Root):
                pending = "/"
                first = True
                continue
            if isinstance(part, Step) and part.surface == "dslash":
                pending = pending + "/" if pending else "//"
                first = True
                continue
            if not first:
                pending = pending or "/"
            out.append(pending + part.render())
            pending = ""
            first = False
        return "".join(out) + pending


_PATH_TYPES = (Path, Step, Filter, Root)


def is_path(expr):
    return isinstance(expr, _PATH_TYPES)


def render(expr):
    return expr.render()


# ---------------------------------------------------------------------------
# Lexer

_AXIS_NAMES = {
    "self": "s",
    "child": "c",
    "parent": "p",
    "descendant": "d",
    "ancestor": "a",
    "descendant-or-self": "ds",
    "ancestor-or-self": "as",
    "following": "f",
    "preceding": "pc",
    "following-sibling": "fs",
    "preceding-sibling": "ps",
    "firstchild": "fc",
    "nextsibling": "ns",
    "s": "s",
    "c": "c",
    "p": "p",
    "d": "d",
    "a": "a",
    "ds": "ds",
    "as": "as",
    "f": "f",
    "pc": "pc",
    "fs": "fs",
    "ps": "ps",
    "fc": "fc",
    "ns": "ns",
}

_OPERATOR_NAMES = frozenset({"or", "and", "div", "mod", "intersect"})

_TWO_CHAR = {"//": "dslash", "::": "axsep", "!=": "neq", "<=": "le", ">=": "ge", "..": "dotdot"}
_ONE_CHAR = {
    "/": "slash",
    "|": "pipe",
    "+": "plus",
    "-": "minus",
    "=": "eq",
    "<": "lt",
    ">": "gt",
    "(": "lparen",
    ")": "rparen",
    "[": "lbrack",
    "]": "rbrack",
    ",": "comma",
    "@": "at",
    ".": "dot",
    "*": "star",
}

_NAME_RE = re.compile(r"(?:\{[^}]*\})?[A-Za-z_][A-Za-z0-9_.-]*")
_NUM_RE = re.compile(r"\d+(?:\.\d*)?|\.\d+")

# token kinds after which a name is a name and * is a wildcard, per the
# XPath 1.0 disambiguation rule (everything else makes them operators)
_OPERAND_EXPECTED_AFTER = frozenset(
    {
        None,
        "at",
        "axsep",
        "lparen",
        "lbrack",
        "comma",
        "slash",
        "dslash",
        "pipe",
        "plus",
        "minus",
        "eq",
        "neq",
        "lt",
        "le",
        "gt",
        "ge",
        "opname",
        "star_op",
    }
)


class _Token(NamedTuple):
    kind: str
    text: str
    pos: int


def _tokenize(text):
    tokens = []
    i = 0
    n = len(text)
    prev = None
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text[i : i + 2] in _TWO_CHAR:
            kind = _TWO_CHAR[text[i : i + 2]]
            tokens.append(_Token(kind, text[i : i + 2], i))
            prev = kind
            i += 2
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUM_RE.match(text, i)
            tokens.append(_Token("number", m.group(0), i))
            prev = "number"
            i = m.end()
            continue
        if ch in "'\"":
            j = text.find(ch, i + 1)
            if j < 0:
                raise XPathSyntaxError("unterminated string literal", i)
            tokens.append(_Token("string", text[i + 1 : j], i))
            prev = "string"
            i = j + 1
            continue
        if ch == "*":
            if prev in _OPERAND_EXPECTED_AFTER:
                tokens.append(_Token("star", "*", i))
                prev = "star"
            else:
                tokens.append(_Token("star_op", "*", i))
                prev = "star_op"
            i += 1
            continue
        m = _NAME_RE.match(text, i)
        if m:
            word = m.group(0)
            if word in _OPERATOR_NAMES and prev not in _OPERAND_EXPECTED_AFTER:
                tokens.append(_Token("opname", word, i))
                prev = "opname"
            else:
                tokens.append(_Token("name", word, i))
                prev = "name"
            i = m.end()
            continue
        if ch in _ONE_CHAR:
            kind = _ONE_CHAR[ch]
            tokens.append(_Token(kind, ch, i))
            prev = kind
            i += 1
            continue
        raise XPathSyntaxError("unexpected character %r" % ch, i)
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, ahead=0):
        j = self.i + ahead
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, *kinds):
        tok = self.peek()
        return tok is not None and tok.kind in kinds

    def take(self, kind):
        tok = self.peek()
        if tok is None or tok.kind != kind:
            self.fail("expected %s" % kind)
        self.i += 1
        return tok

    def fail(self, message):
        tok = self.peek()
        pos = tok.pos if tok else len(self.text)
        raise XPathSyntaxError(message, pos)

    def parse(self):
        expr = self.expr()
        if self.peek() is not None:
            self.fail("trailing input")
        return expr

    def expr(self):
        return self.or_expr()

    def _binary_chain(self, sub, kinds):
        node = sub()
        while self.peek() is not None and self._op_text(kinds) is not None:
            op = self._op_text(kinds)
            self.i += 1
            node = Binary(op, node, sub())
        return node

    def _op_text(self, kinds):
        tok = self.peek()
        if tok is None:
            return None
        if tok.kind == "opname":
            return tok.text if tok.text in kinds.get("opname", ()) else None
        val = kinds.get(tok.kind)
        return val if isinstance(val, str) else None

    def or_expr(self):
        return self._binary_chain(self.and_expr, {"opname": ("or",)})

    def and_expr(self):
        return self._binary_chain(self.equality_expr, {"opname": ("and",)})

    def equality_expr(self):
        return self._binary_chain(self.relational_expr, {"eq": "=", "neq": "!="})

    def relational_expr(self):
        return self._binary_chain(
            self.additive_expr, {"lt": "<", "le": "<=", "gt": ">", "ge": ">="}
        )

    def additive_expr(self):
        return self._binary_chain(self.mult_expr, {"plus": "+", "minus": "-"})

    def mult_expr(self):
        return self._binary_chain(
            self.unary_expr, {"star_op": "*", "opname": ("div", "mod")}
        )

    def unary_expr(self):
        if self.at("minus"):
            self.take("minus")
            return Negate(self.unary_expr())
        return self.union_expr()

    def union_expr(self):
        return self._binary_chain(self.intersect_expr, {"pipe": "|"})

    def intersect_expr(self):
        return self._binary_chain(self.path_expr, {"opname": ("intersect",)})

    def path_expr(self):
        tok = self.peek()
        if tok is None:
            self.fail("expected expression")
        if tok.kind in ("number", "string"):
            self.i += 1
            if tok.kind == "number":
                return Number(float(tok.text))
            return Literal(tok.text)
        if tok.kind == "name" and self.peek(1) is not None and self.peek(1).kind == "lparen":
            call = self.function_call()
            return self.path_continuation(call, allow_preds=True)
        if tok.kind == "lparen":
            self.take("lparen")
            inner = self.expr()
            self.take("rparen")
            if self.at("lbrack") or self.at("slash", "dslash"):
                node = Filter(inner, self.predicates())
                return self.path_continuation(node, allow_preds=False)
            return inner
        return self.location_path()

    def path_continuation(self, node, allow_preds):
        """Allow a slash to extend a filter expression into a path."""
        if allow_preds and self.at("lbrack"):
            node = Filter(node, self.predicates())
        if not self.at("slash", "dslash"):
            return node
        parts = [node if isinstance(node, Filter) else Filter(node, ())]
        while self.at("slash", "dslash"):
            if self.take(self.peek().kind).kind == "dslash":
                parts.append(_dslash_step())
            parts.append(self.path_part())
        return Path(tuple(parts))

    def function_call(self):
        name = self.take("name").text
        self.take("lparen")
        args = []
        if not self.at("rparen"):
            args.append(self.expr())
            while self.at("comma"):
                self.take("comma")
                args.append(self.expr())
        self.take("rparen")
        return Call(name, tuple(args))

    def location_path(self):
        parts = []
        if self.at("slash", "dslash"):
            tok = self.take(self.peek().kind)
            parts.append(Root())
            if tok.kind == "dslash":
                parts.append(_dslash_step())
                parts.append(self.path_part())
            elif self._at_part_start():
                parts.append(self.path_part())
        else:
            parts.append(self.path_part())
        while self.at("slash", "dslash"):
            if self.take(self.peek().kind).kind == "dslash":
                parts.append(_dslash_step())
            parts.append(self.path_part())
        if len(parts) == 1 and not isinstance(parts[0], Root):
            return parts[0]
        return Path(tuple(parts))

    def _at_part_start(self):
        return self.at("name", "star", "at", "dot", "dotdot", "lparen")

    def path_part(self):
        if self.at("lparen"):
            self.take("lparen")
            inner = self.expr()
            self.take("rparen")
            return Filter(inner, self.predicates())
        return self.step()

    def step(self):
        tok = self.peek()
        if tok is None:
            self.fail("expected a step")
        if tok.kind == "dot":
            self.take("dot")
            return Step("s", NodeTest("any"), self.predicates(), surface="dot")
        if tok.kind == "dotdot":
            self.take("dotdot")
            return Step("p", NodeTest("any"), self.predicates(), surface="dotdot")
        if tok.kind == "at":
            self.take("at")
            test = self.attr_test()
            return Step("c", test, self.predicates(), surface="at")
        if tok.kind == "name" and self.peek(1) is not None and self.peek(1).kind == "axsep":
            axis_text = self.take("name").text
            self.take("axsep")
            if axis_text == "attribute":
                axis = "c"
                test = self.attr_test()
            else:
                axis = _AXIS_NAMES.get(axis_text)
                if axis is None:
                    raise XPathSyntaxError("unknown axis %r" % axis_text, tok.pos)
                test = self.node_test()
            return Step(axis, test, self.predicates(), surface="axis", axis_text=axis_text)
        if tok.kind in ("name", "star"):
            test = self.node_test()
            return Step("c", test, self.predicates(), surface="plain")
        self.fail("expected a step")

    def node_test(self):
        if self.at("star"):
            self.take("star")
            return NodeTest("any")
        name = self.take("name").text
        return NodeTest("name", name)

    def attr_test(self):
        if self.at("star"):
            self.take("star")
            return NodeTest("attr-any")
        return NodeTest("attr", self.take("name").text)

    def predicates(self):
        preds = []
        while self.at("lbrack"):
            self.take("lbrack")
            preds.append(self.expr())
            self.take("rbrack")
        return tuple(preds)


def _dslash_step():
    return Step("ds", NodeTest("any"), (), surface="dslash")


def parse_xpath(text):
    """Parse an XPath expression into its AST.

    Raises :class:`XPathSyntaxError` with the failing offset.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Values and coercions

_NUMBER_STR = re.compile(r"\s*-?(?:\d+(?:\.\d*)?|\.\d+)\s*\Z")

NAN = float("nan")


def to_number(value, g=None):
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        if _NUMBER_STR.match(value):
            return float(value)
        return NAN
    return to_number(to_string(value, g), None)


def to_string(value, g=None):
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
    return _strval(g, min(value))


def to_boolean(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return value != 0 and not math.isnan(value)
    if isinstance(value, str):
        return value != ""
    return bool(value)


def _strval(g, v):
    if v == 0:
        return g.strval(1) if g.size else ""
    return g.strval(v)


def _flip(op):
    return {"<": ">", "<=": ">=", ">": "<", ">=": "<="}.get(op, op)


def _raw_compare(op, a, b):
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


def compare(op, a, b, g):
    """The comparison dispatch table, node-set cases existential."""
    if isinstance(b, (set, frozenset)) and not isinstance(a, (set, frozenset)):
        return compare(_flip(op), b, a, g)
    if isinstance(a, (set, frozenset)):
        if isinstance(b, (set, frozenset)):
            vals = [_strval(g, v2) for v2 in b]
            return any(
                _raw_compare(op, _strval(g, v1), v2) for v1 in a for v2 in vals
            )
        if isinstance(b, bool):
            return _raw_compare(op, to_boolean(a), b)
        if isinstance(b, float):
            return any(_raw_compare(op, to_number(_strval(g, v)), b) for v in a)
        return any(_raw_compare(op, _strval(g, v), b) for v in a)
    if op in ("=", "!="):
        if isinstance(a, bool) or isinstance(b, bool):
            return _raw_compare(op, to_boolean(a), to_boolean(b))
        if isinstance(a, float) or isinstance(b, float):
            return _raw_compare(op, to_number(a), to_number(b))
        return _raw_compare(op, a, b)
    return _raw_compare(op, to_number(a), to_number(b))


def _arith(op, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "div":
        if b == 0:
            if a == 0 or math.isnan(a):
                return NAN
            return math.copysign(math.inf, a) * math.copysign(1.0, b)
        return a / b
    # mod keeps the dividend's sign
    if b == 0 or math.isnan(a) or math.isinf(a):
        return NAN
    return math.fmod(a, b)


# ---------------------------------------------------------------------------
# Evaluator

_FUNCTION_ARITY = {
    "position": (0, 0),
    "last": (0, 0),
    "count": (1, 1),
    "not": (1, 1),
    "boolean": (1, 1),
    "number": (0, 1),
    "string": (0, 1),
    "sum": (1, 1),
    "contains": (2, 2),
    "true": (0, 0),
    "false": (0, 0),
    "id": (1, 1),
}


def _axis_from(g, v, axis):
    """Axis step including the virtual document node (ordinal 0)."""
    if v == 0:
        if axis == "c":
            return [1] if g.size else []
        if axis == "d":
            return list(range(1, g.size + 1))
        if axis == "ds":
            return list(range(1, g.size + 1))
        return []
    return g.axis_step(v, axis)


def eval_xpath(expr, g, context=None):
    """Evaluate ``expr`` over one document graph.

    The default context is the virtual document node, so absolute and
    relative paths both start at the root.  Node-set results come back
    as sorted lists of ordinals.
    """
    if isinstance(expr, str):
        expr = parse_xpath(expr)
    ctx = context if context is not None else Context(0, 1, 1)
    value = _eval(expr, ctx, g)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    return value


def _eval(expr, ctx, g):
    if is_path(expr):
        return _eval_path(expr, ctx.node, g)
    if isinstance(expr, Number):
        return expr.value
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Negate):
        return -to_number(_eval(expr.operand, ctx, g), g)
    if isinstance(expr, Binary):
        return _eval_binary(expr, ctx, g)
    if isinstance(expr, Call):
        return _eval_call(expr, ctx, g)
    raise XPathEvalError("cannot evaluate %r" % (expr,))


def _eval_binary(expr, ctx, g):
    op = expr.op
    if op == "or":
        return to_boolean(_eval(expr.left, ctx, g)) or to_boolean(_eval(expr.right, ctx, g))
    if op == "and":
        return to_boolean(_eval(expr.left, ctx, g)) and to_boolean(_eval(expr.right, ctx, g))
    left = _eval(expr.left, ctx, g)
    right = _eval(expr.right, ctx, g)
    if op in ("=", "!=", "<", "<=", ">", ">="):
        return compare(op, left, right, g)
    if op in ("|", "intersect"):
        if not isinstance(left, (set, frozenset)) or not isinstance(right, (set, frozenset)):
            raise XPathEvalError("'%s' needs node-set operands" % op)
        return set(left) | set(right) if op == "|" else set(left) & set(right)
    return _arith(op, to_number(left, g), to_number(right, g))


def _eval_call(expr, ctx, g):
    name = expr.name
    arity = _FUNCTION_ARITY.get(name)
    if arity is None:
        raise XPathEvalError("unknown function %s()" % name)
    lo, hi = arity
    if not lo <= len(expr.args) <= hi:
        raise XPathEvalError(
            "%s() takes %s argument%s, got %d"
            % (name, lo if lo == hi else "%d to %d" % (lo, hi), "" if hi == 1 else "s", len(expr.args))
        )
    args = [_eval(a, ctx, g) for a in expr.args]
    if name == "position":
        return float(ctx.position)
    if name == "last":
        return float(ctx.size)
    if name == "count":
        if not isinstance(args[0], (set, frozenset)):
            raise XPathEvalError("count() needs a node-set")
        return float(len(args[0]))
    if name == "not":
        return not to_boolean(args[0])
    if name == "boolean":
        return to_boolean(args[0])
    if name == "number":
        return to_number(args[0] if args else _strval(g, ctx.node), g)
    if name == "string":
        return to_string(args[0] if args else _strval(g, ctx.node), g)
    if name == "sum":
        if not isinstance(args[0], (set, frozenset)):
            raise XPathEvalError("sum() needs a node-set")
        return float(sum(to_number(_strval(g, v)) for v in args[0]))
    if name == "contains":
        return to_string(args[1], g) in to_string(args[0], g)
    if name == "true":
        return True
    if name == "false":
        return False
    # id(): reference graphs are out of scope
    warnings.warn("id() is accepted but always returns an empty node-set", stacklevel=2)
    return set()


def _eval_path(expr, v, g):
    current = {v}
    for part in expr.parts if isinstance(expr, Path) else (expr,):
        result = set()
        for w in current:
            result.update(_part_result(part, w, g))
        current = result
    return current


def _part_result(part, v, g):
    if isinstance(part, Root):
        return (0,)
    if isinstance(part, Filter):
        inner = _eval(part.inner, Context(v, 1, 1), g)
        if not isinstance(inner, (set, frozenset)):
            raise XPathEvalError("a parenthesized path must produce a node-set")
        ordered = sorted(inner)
        return _apply_predicates(part.preds, ordered, g)
    candidates = _axis_from(g, v, part.axis)
    matched = [w for w in candidates if part.test.matches(g.label(w))]
    return _apply_predicates(part.preds, matched, g)


def _apply_predicates(preds, ordered, g):
    """Filter an ordered candidate set; all predicates see the same positions."""
    if not preds:
        return ordered
    size = len(ordered)
    out = []
    for idx, w in enumerate(ordered):
        ctx = Context(w, idx + 1, size)
        if all(_pred_holds(p, ctx, g) for p in preds):
            out.append(w)
    return out


def _pred_holds(pred, ctx, g):
    value = _eval(pred, ctx, g)
    if isinstance(value, bool):
        return value
    # a numeric predicate is a position shorthand
    if isinstance(value, float):
        return not math.isnan(value) and value == ctx.position
    return to_boolean(value)
