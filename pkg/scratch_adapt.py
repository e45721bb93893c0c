"""Scratch validation for adapt.py before formal tests."""

import json
import tempfile

from axpre_engine.adapt import (
    CandidateSet,
    Workload,
    adapt_sd,
    derive_axpre,
    evaluate_query,
    find_candidates,
    forward_stable_for,
    is_structural_predicate,
    purely_structural,
    structural_subquery,
)
from axpre_engine.axisgraph import Collection
from axpre_engine.axpre import parse_axpre
from axpre_engine.errors import AdaptationError, ContractViolation, UsageError
from axpre_engine.refine import refine_node
from axpre_engine.summary import create_sd, preset
from axpre_engine.xpath import eval_xpath, parse_xpath, render

Q1 = "/rss/channel[item[pubDate]]"
Q2 = "/rss/channel[item/following-sibling::item][not(pubDate=../item[1]/pubDate)]/item[title][enclosure]"
Q3 = '/ds::participant[c::expRoleList/fc::expRole/ns::expRole][not(ds::expRole/names="prey")]'
Q3_STRUCT = "/ds::participant[c::expRoleList/fc::expRole/ns::expRole]"

PSIMI_VARIANT = """<entrySet>
  <interaction>
    <participantList>
      <participant>
        <interactorRef>201</interactorRef>
        <expRoleList>
          <expRole>
            <names>bait</names>
          </expRole>
        </expRoleList>
      </participant>
    </participantList>
  </interaction>
</entrySet>
"""


def load(*paths_and_sources):
    coll = Collection()
    for name, data in paths_and_sources:
        if data is None:
            coll.add_path(name)
        else:
            coll.add_source(name, data)
    return coll


def brute_force(coll, q):
    ast = parse_xpath(q)
    elems = set()
    for doc_id in coll.ids():
        res = eval_xpath(ast, coll.graph(doc_id))
        elems |= {(doc_id, v) for v in res}
    return elems


# -- derivation goldens

assert str(derive_axpre(Q3)) == "[participant].(as|c.fc.ns)", str(derive_axpre(Q3))
assert str(derive_axpre(Q1)) == "[channel].(p.p|c.c)", str(derive_axpre(Q1))
assert str(derive_axpre(Q2)) == "[item].(p.(p.p|c.fs)|c)", str(derive_axpre(Q2))
assert str(derive_axpre("/child::a")) == "[a].p"
assert str(derive_axpre("/rss/channel")) == "[channel].p.p"
assert str(derive_axpre("//a")) == "[a].p.as"
assert str(derive_axpre("//a//b")) == "[b].p.as.p.as"
assert str(derive_axpre("a")) == "[a].p"
assert str(derive_axpre("/a | //b[c]")) == "([a].p|[b].(p.as|c))", str(
    derive_axpre("/a | //b[c]")
)
assert str(derive_axpre("//a[d::x][following::y]")) == "[a].(p.as|c*|f)", str(
    derive_axpre("//a[d::x][following::y]")
)
# predicates repeat: one branch each
assert str(derive_axpre("/a/b[c][d]")) == "[b].(p.p|c|c)".replace("|c|c", "|c"), str(
    derive_axpre("/a/b[c][d]")
)
for q in (Q1, Q2, Q3):
    d = derive_axpre(q)
    assert parse_axpre(str(d)) == d  # canonical round-trip
    assert derive_axpre(render(structural_subquery(q))) == d  # ss derives identically

# -- structural subqueries

assert render(structural_subquery(Q2)) == (
    "/rss/channel[item/following-sibling::item]/item[title][enclosure]"
)
assert render(structural_subquery(Q3)) == (
    "/ds::participant[c::expRoleList/fc::expRole/ns::expRole]"
)
assert render(structural_subquery(Q1)) == Q1
assert purely_structural(Q1)
assert not purely_structural(Q2)
assert not purely_structural(Q3)
assert purely_structural(Q3_STRUCT)
assert is_structural_predicate(parse_xpath("item[pubDate]"))
assert is_structural_predicate(parse_xpath("1"))
assert not is_structural_predicate(parse_xpath('names="prey"'))
assert not is_structural_predicate(parse_xpath("not(a)"))
assert not is_structural_predicate(parse_xpath("count(a)"))
# positional tests survive stripping but a value test inside a path kills it
assert render(structural_subquery("/a/b[2][c>3]")) == "/a/b[2]"
assert render(structural_subquery('/a[b[x="1"]]')) == "/a"
print("derivation and subquery goldens ok")

# -- psimi: adaptation

coll = load(
    ("tests/fixtures/psimi-sample.xml", None),
    ("variant.xml", PSIMI_VARIANT),
)
sd = create_sd(coll, preset("label"), with_edges=True)
part_sid = next(s for s in sd.sids() if sd.label(s) == "participant")
assert sd.extent(part_sid) == {(1, 4), (1, 6), (1, 18), (1, 23), (1, 28), (2, 4)}

# label summary cannot certify Q3's pattern: one participant has no role list
assert not forward_stable_for(sd, part_sid, Q3)

cs = find_candidates(sd, Q3)
# a label invariant observes nothing beyond the label, so it refutes
# nothing: every participant document stays in the pool, none opened
assert cs.candidate_docs == {1, 2}
assert cs.evaluated_docs == 0
assert cs.matched_sids == (part_sid,)
assert cs.answer_docs == frozenset() and cs.answer_elems == frozenset()

full = evaluate_query(coll, sd, Q3)
assert full.answer_elems == {(1, 28)}, full.answer_elems
assert full.answer_docs == {1}
assert full.answer_docs <= full.candidate_docs
assert full.answer_elems == brute_force(coll, Q3)
assert not full.exact

report = adapt_sd(sd, Q3)
assert not report.noop
created = report.created_sids()
partition = sorted(sorted(sd.extent(s)) for s in created)
assert partition == [
    [(1, 4)],
    [(1, 6), (1, 28)],
    [(1, 18), (1, 23), (2, 4)],
], partition
for s in created:
    assert sd.axpre(s) == "[participant].(as|c.fc.ns)"

again = adapt_sd(sd, Q3)
assert again.noop and not again.created

# the adapted classes carry enough shape to refute: no role list for one,
# no second role for another, leaving only the two-role class in the pool
after = find_candidates(sd, Q3)
assert after.candidate_docs == {1}
assert after.evaluated_docs == 0
s_two_roles = next(s for s in created if sd.extent(s) == {(1, 6), (1, 28)})
assert after.matched_sids == (s_two_roles,)
print("psimi adaptation ok")

# -- psimi: exact answers from the adapted summary

win = evaluate_query(coll, sd, Q3_STRUCT)
assert win.exact
assert win.evaluated_docs == 0
assert win.answer_elems == {(1, 6), (1, 28)}
assert win.answer_elems == brute_force(coll, Q3_STRUCT)
assert win.candidate_docs == win.answer_docs == {1}
s_two = next(s for s in created if sd.extent(s) == {(1, 6), (1, 28)})
assert win.matched_sids == (s_two,)

# the full query still evaluates (its value predicate is not structural),
# but only over the candidate documents
full2 = evaluate_query(coll, sd, Q3)
assert full2.answer_elems == {(1, 28)}
assert not full2.exact
assert full2.answer_elems == brute_force(coll, Q3)

# adapting a summary refined elsewhere in the lattice fails with a hint
sd_cc = create_sd(coll, preset("label"), with_edges=True)
p_cc = next(s for s in sd_cc.sids() if sd_cc.label(s) == "participant")
refine_node(sd_cc, p_cc, "[participant].c.c")
try:
    adapt_sd(sd_cc, Q3)
    raise SystemExit("expected AdaptationError")
except AdaptationError as exc:
    assert "label matches sit at" in str(exc), exc

try:
    adapt_sd(sd, "/nosuchlabel")
    raise SystemExit("expected AdaptationError")
except AdaptationError as exc:
    assert "answer label" in str(exc)
print("psimi exact path ok")

# -- rss: criterion 2 rehearsal

rss = load(
    ("tests/fixtures/rss1.xml", None),
    ("tests/fixtures/rss2.xml", None),
)
rsd = create_sd(rss, preset("label"), with_edges=True)
item_sid = next(s for s in rsd.sids() if rsd.label(s) == "item")
assert rsd.extent(item_sid) == {(1, 6), (2, 7), (2, 13)}

# /rss/channel certifies on the label summary alone: no document work
ch = find_candidates(rsd, "/rss/channel")
assert ch.candidate_docs == {1, 2}
assert ch.evaluated_docs == 0

# sibling patterns sit outside the label invariant's view too
two = find_candidates(rsd, "/rss/channel[item/following-sibling::item]")
assert two.candidate_docs == {1, 2}
assert two.evaluated_docs == 0

r1 = adapt_sd(rsd, Q1)
ch_sids = [s for s in rsd.sids() if rsd.label(s) == "channel"]
assert len(ch_sids) == 2, ch_sids
assert sorted(rsd.extent(s) for s in ch_sids) == [{(1, 2)}, {(2, 2)}]

r2 = adapt_sd(rsd, Q2)
item_sids = [s for s in rsd.sids() if rsd.label(s) == "item"]
ss2 = render(structural_subquery(Q2))
answers = brute_force(rss, ss2)
assert answers == {(2, 7), (2, 13)}
assert any(rsd.extent(s) == answers for s in item_sids), [
    rsd.extent(s) for s in item_sids
]

# completeness of candidates at every refinement level we produced,
# and the adapted pools beat the label pools
for q in (Q1, Q2):
    got = evaluate_query(rss, rsd, q)
    assert got.answer_elems == brute_force(rss, q), q
    assert got.answer_docs <= got.candidate_docs
assert find_candidates(rsd, Q1).candidate_docs == {1}
assert find_candidates(rsd, Q2).candidate_docs == {2}

# Q1 on the adapted summary: purely structural but root-anchored through
# child steps, so the exact shortcut stays out and evaluation decides
g1 = evaluate_query(rss, rsd, Q1)
assert g1.answer_elems == brute_force(rss, Q1) == {(1, 2)}
print("rss adaptation ok")

# -- workload round trip

w = Workload.from_queries([("Q1", Q1), ("Q2", Q2)])
w.verify()
payload = json.dumps(w.to_json())
w2 = Workload.from_json(json.loads(payload))
w2.verify()
assert [e.query_id for e in w2] == ["Q1", "Q2"]
assert w2.entries[0].axpre == "[channel].(p.p|c.c)"

w3 = Workload.from_json({"Q3": Q3})
assert w3.entries[0].axpre == "[participant].(as|c.fc.ns)"

fresh = create_sd(rss, preset("label"), with_edges=True)
reports = Workload.from_queries([("Q1", Q1), ("Q2", Q2)]).adapt(fresh)
assert set(reports) == {"Q1", "Q2"}
assert len([s for s in fresh.sids() if fresh.label(s) == "channel"]) == 2

broken = Workload([type(w.entries[0])("QX", Q1, "[channel].c")])
try:
    broken.verify()
    raise SystemExit("expected ContractViolation")
except ContractViolation:
    pass

with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
    json.dump({"Q1": Q1, "Q3": Q3}, fh)
    name = fh.name
w4 = Workload.load(name)
assert [e.query_id for e in w4] == ["Q1", "Q3"]
w4.verify()
print("workload ok")

# -- non-element queries are refused cleanly

try:
    derive_axpre("count(//a)")
    raise SystemExit("expected UsageError")
except UsageError:
    pass

print("adapt scratch green")
