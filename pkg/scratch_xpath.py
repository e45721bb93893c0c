import math
import warnings

from axpre_engine.axisgraph import parse_document
from axpre_engine.errors import XPathEvalError, XPathSyntaxError
from axpre_engine.xpath import Context, eval_xpath, parse_xpath, render

psimi = parse_document(open("tests/fixtures/psimi-sample.xml", "rb").read())
witness = parse_document(open("tests/fixtures/lpath-witness.xml", "rb").read())
rss1 = parse_document(open("tests/fixtures/rss1.xml", "rb").read())

# --- the appendix discriminator ------------------------------------------
e1 = eval_xpath("descendant::expRole", psimi)
assert e1 == [9, 11, 21, 26, 31, 33], e1

e2 = eval_xpath("descendant::expRole[position()=last()]", psimi)
assert e2 == [33], e2

e3 = eval_xpath("descendant::expRoleList/child::expRole[1]", witness)
e4 = eval_xpath("(descendant::expRoleList/child::expRole)[1]", witness)
assert len(e3) == 2 and e3 == [3, 6], e3
assert len(e4) == 1 and e4 == [3], e4

# on psimi (4 lists) the same split holds
assert eval_xpath("descendant::expRoleList/child::expRole[1]", psimi) == [9, 21, 26, 31]
assert eval_xpath("(descendant::expRoleList/child::expRole)[1]", psimi) == [9]

# --- abbreviations -------------------------------------------------------
assert eval_xpath("/entrySet/interaction", psimi) == [2, 14]
assert eval_xpath("//expRole", psimi) == e1
assert eval_xpath("//expRoleList/expRole[2]", psimi) == [11, 33]
assert eval_xpath("//names/..", psimi) == [9, 11, 14, 21, 26, 31, 33]
assert eval_xpath("/", psimi) == [0]
assert eval_xpath(".", psimi, Context(5, 1, 1)) == [5]

# --- short axis names as real axes ---------------------------------------
assert eval_xpath("/ds::participant[c::expRoleList/fc::expRole/ns::expRole]", psimi) == [6, 28]
assert eval_xpath("/d::interaction[c::names]", psimi) == [14]
assert eval_xpath("//expRole/fs::expRole", psimi) == [11, 33]
assert eval_xpath("//expRole/ps::*", psimi) == [9, 31]

# --- the printed extent expressions --------------------------------------
ee41 = (
    "/ds::participant[c::interactorRef][not(c::expRoleList/c::*[1][s::expRole])]"
    "[not(c::expRoleList/c::*[1][s::expRole]/fs::*[1][expRole])]"
)
assert eval_xpath(ee41, psimi) == [4], eval_xpath(ee41, psimi)

ee42ish = "/ds::participant[child::expRoleList intersect /ds::expRoleList]"
assert eval_xpath(ee42ish, psimi) == [6, 18, 23, 28]

eecount = "ds::participant[c::interactorRef][count(d::*)=count(c::interactorRef)]"
assert eval_xpath(eecount, psimi) == [4]

# --- rendering round-trips ------------------------------------------------
for text in [
    "/rss/channel[item/following-sibling::item]/item[title][enclosure]",
    "//item",
    "a//b",
    "/ds::participant[c::interactorRef][not(c::expRoleList/c::*[1][s::expRole])]",
    "(descendant::expRoleList/child::expRole)[1]",
    "child::*[1][self::p]",
    "@id",
    "../item",
    "count(d::*)=count(c::interactorRef)",
    "a and b or c",
    "contains(title, \"news\")",
    "1+2*3",
    "item[2]",
    "a|b|c",
    "child::expRoleList intersect /ds::expRoleList",
]:
    assert render(parse_xpath(text)) == text, (text, render(parse_xpath(text)))

# --- predicates are conjunctive over one candidate set -------------------
# both predicates rank the same sibling set, so [2][1] can never hold
assert eval_xpath("//expRoleList/expRole[2][1]", psimi) == []
assert eval_xpath("//expRoleList/expRole[2][2]", psimi) == [11, 33]
assert eval_xpath("child::*[1][self::interaction]", psimi, Context(1, 1, 1)) == [2]

# --- reverse axis positions ----------------------------------------------
assert eval_xpath("ancestor::*[1]", psimi, Context(9, 1, 1)) == [8]
assert eval_xpath("ancestor::*[last()]", psimi, Context(9, 1, 1)) == [1]
assert eval_xpath("preceding-sibling::*[1]", psimi, Context(33, 1, 1)) == [31]

# --- value semantics ------------------------------------------------------
g = parse_document(b"<r><a>5</a><a>7</a><b>x</b></r>")
assert eval_xpath("/r/a[.=5]", g) == [2]
assert eval_xpath("/r/a[.>6]", g) == [3]
assert eval_xpath("/r[a=7]", g) == [1]
assert eval_xpath("/r[a!=a]", g) == [1]  # existential over two distinct values
assert eval_xpath("/r[b=0]", g) == []  # NaN compares false
assert eval_xpath("sum(/r/a)", g) == 12.0
assert eval_xpath("count(/r/a)", g) == 2.0
assert eval_xpath("string(/r/a)", g) == "5"
assert eval_xpath("number(/r/b)", g) != eval_xpath("number(/r/b)", g)  # NaN
assert eval_xpath("contains(/r/b, \"x\")", g) is True
assert eval_xpath("not(/r/c)", g) is True
assert eval_xpath("boolean(/r/a)", g) is True
assert eval_xpath("1 div 0", g) == math.inf
assert math.isnan(eval_xpath("0 div 0", g))
assert eval_xpath("5 mod 2", g) == 1.0
assert eval_xpath("/r/a[1] | /r/b", g) == [2, 4]
assert eval_xpath("/r/a intersect /r/*", g) == [2, 3]
assert eval_xpath("-count(/r/a)", g) == -2.0
assert eval_xpath("2 < /r/a", g) is True  # flipped node-set comparison

# attributes are child nodes labelled @name
ga = parse_document(b'<r id="7"><a class="x"/><a/></r>')
assert eval_xpath("/r/@id", ga) == [2]
assert eval_xpath("/r/a[@class]", ga) == [3]
assert eval_xpath("//@*", ga) == [2, 4]
assert eval_xpath("/r/@id/..", ga) == [1]
assert eval_xpath("/r[@id=7]", ga) == [1]
assert eval_xpath("/r/*[1]", ga) == [2]  # the attribute is the first child

# --- errors ---------------------------------------------------------------
try:
    eval_xpath("frobnicate(/r)", g)
    raise SystemExit("unknown function accepted")
except XPathEvalError:
    pass
try:
    eval_xpath("count(1)", g)
    raise SystemExit("count of number accepted")
except XPathEvalError:
    pass
try:
    parse_xpath("/rss/[oops")
    raise SystemExit("bad syntax accepted")
except XPathSyntaxError as exc:
    assert exc.position is not None
try:
    parse_xpath("foo::bar")
    raise SystemExit("unknown axis accepted")
except XPathSyntaxError:
    pass
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    assert eval_xpath("id(/r/a)", g) == []
    assert caught

# --- composition associativity -------------------------------------------
a1 = eval_xpath("/entrySet/interaction/participantList/participant", psimi)
a2 = eval_xpath("(/entrySet/interaction)/participantList/participant", psimi)
a3 = eval_xpath("(/entrySet/interaction/participantList)/participant", psimi)
assert a1 == a2 == a3 == [4, 6, 18, 23, 28]

print("xpath scratch: all checks passed")
