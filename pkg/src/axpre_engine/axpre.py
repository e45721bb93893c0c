"""The axis path expression language.

Expressions are regular expressions over axis steps with optional label
tests::

    e                       the empty expression
    c  p  fc  ns  ...       an axis step
    c[item]  c[~item]       an axis step with an equality / inequality test
    [item]  [~item]         a bare label test on the current node
    a.b   a|b   a*   (a)    concatenation, disjunction, iteration

Concatenation binds tighter than disjunction; iteration binds tightest.
The semantics is prefix closed: an expression always describes all the
prefixes of its paths as well.
"""

from dataclasses import dataclass

from .errors import AxpreSyntaxError

AXIS_NAMES = frozenset(
    {"c", "p", "fc", "ns", "fs", "ps", "d", "a", "ds", "as", "f", "pc", "s"}
)


@dataclass(frozen=True)
class LabelTest:
    """A guard on node labels: equality, inequality, or anything."""

    op: str  # "eq" | "ne" | "any"
    label: str | None = None

    def matches(self, label):
        if self.op == "eq":
            return label == self.label
        if self.op == "ne":
            return label != self.label
        return True

    def render(self):
        if self.op == "eq":
            return "[%s]" % self.label
        if self.op == "ne":
            return "[~%s]" % self.label
        return "[*]"


ANY = LabelTest("any")


class AxpreExpr:
    def __str__(self):
        return canonical_string(self)


@dataclass(frozen=True)
class Empty(AxpreExpr):
    pass


@dataclass(frozen=True)
class TestStep(AxpreExpr):
    test: LabelTest


@dataclass(frozen=True)
class AxisStep(AxpreExpr):
    axis: str
    test: LabelTest | None = None


@dataclass(frozen=True)
class Concat(AxpreExpr):
    parts: tuple


@dataclass(frozen=True)
class Disj(AxpreExpr):
    parts: tuple


@dataclass(frozen=True)
class Star(AxpreExpr):
    inner: AxpreExpr


EPSILON = Empty()


def eps():
    return EPSILON


def test(label, negate=False):
    return TestStep(LabelTest("ne" if negate else "eq", label))


def axis(name, label=None, negate=False):
    if name not in AXIS_NAMES:
        raise AxpreSyntaxError("unknown axis %r" % name)
    t = None if label is None else LabelTest("ne" if negate else "eq", label)
    return AxisStep(name, t)


def concat(*parts):
    flat = []
    for p in parts:
        if isinstance(p, Empty):
            continue
        if isinstance(p, Concat):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if not flat:
        return EPSILON
    if len(flat) == 1:
        return flat[0]
    return Concat(tuple(flat))


def disj(*parts):
    flat = []
    for p in parts:
        if isinstance(p, Disj):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return Disj(tuple(flat))


def star(inner):
    if isinstance(inner, Empty):
        return EPSILON
    return Star(inner)


class _Lexer:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._run()
        self.index = 0

    def _run(self):
        text = self.text
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch in ".|*()":
                self.tokens.append((ch, ch, i))
                i += 1
                continue
            if ch == "[":
                j = text.find("]", i)
                if j < 0:
                    raise AxpreSyntaxError("unterminated label test", i)
                body = text[i + 1 : j]
                if not body or body == "~":
                    raise AxpreSyntaxError("empty label test", i)
                self.tokens.append(("test", body, i))
                i = j + 1
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("word", text[i:j], i))
                i = j
                continue
            raise AxpreSyntaxError("unexpected character %r" % ch, i)
        self.tokens.append(("end", "", len(text)))

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        if tok[0] != "end":
            self.index += 1
        return tok


def _make_test(body):
    if body.startswith("~"):
        return LabelTest("ne", body[1:])
    return LabelTest("eq", body)


class _Parser:
    def __init__(self, text):
        self.lex = _Lexer(text)

    def parse(self):
        expr = self.parse_disj()
        kind, value, pos = self.lex.peek()
        if kind != "end":
            raise AxpreSyntaxError("unexpected %r" % value, pos)
        return expr

    def parse_disj(self):
        parts = [self.parse_concat()]
        while self.lex.peek()[0] == "|":
            self.lex.next()
            parts.append(self.parse_concat())
        return disj(*parts) if len(parts) > 1 else parts[0]

    def parse_concat(self):
        parts = [self.parse_postfix()]
        while self.lex.peek()[0] == ".":
            self.lex.next()
            parts.append(self.parse_postfix())
        return concat(*parts) if len(parts) > 1 else parts[0]

    def parse_postfix(self):
        expr = self.parse_atom()
        while self.lex.peek()[0] == "*":
            self.lex.next()
            expr = star(expr)
        return expr

    def parse_atom(self):
        kind, value, pos = self.lex.next()
        if kind == "(":
            inner = self.parse_disj()
            closing = self.lex.next()
            if closing[0] != ")":
                raise AxpreSyntaxError("expected ')'", closing[2])
            return inner
        if kind == "test":
            return TestStep(_make_test(value))
        if kind == "word":
            if value == "e":
                return EPSILON
            if value not in AXIS_NAMES:
                raise AxpreSyntaxError("unknown axis %r" % value, pos)
            if self.lex.peek()[0] == "test":
                body = self.lex.next()[1]
                return AxisStep(value, _make_test(body))
            return AxisStep(value)
        raise AxpreSyntaxError("unexpected %r" % (value or "end of input"), pos)


def parse_axpre(text):
    """Parse ``text`` into an expression tree."""
    if not isinstance(text, str) or not text.strip():
        raise AxpreSyntaxError("empty expression")
    return _Parser(text).parse()


def canonical_string(expr):
    """Deterministic rendering; ``parse_axpre`` inverts it."""
    if isinstance(expr, Empty):
        return "e"
    if isinstance(expr, TestStep):
        return expr.test.render()
    if isinstance(expr, AxisStep):
        if expr.test is None or expr.test.op == "any":
            return expr.axis
        return expr.axis + expr.test.render()
    if isinstance(expr, Star):
        inner = canonical_string(expr.inner)
        if isinstance(expr.inner, Concat):
            inner = "(%s)" % inner
        return inner + "*"
    if isinstance(expr, Concat):
        return ".".join(canonical_string(p) for p in expr.parts)
    if isinstance(expr, Disj):
        return "(%s)" % "|".join(canonical_string(p) for p in expr.parts)
    raise TypeError("not an expression: %r" % (expr,))
