"""Measure candidate pools and answer agreement on the benchmark corpora."""

import os
import time

from axpre_engine.adapt import Workload, evaluate_query, find_candidates
from axpre_engine.axisgraph import Collection
from axpre_engine.corpus import BENCHMARK, write_corpus
from axpre_engine.summary import INF, build_pk, create_sd, preset
from axpre_engine.xpath import eval_xpath, parse_xpath

ROOT = "/tmp/axpre-bench"

QUERIES = {
    "rss": [
        ("R1", "/rss/channel/image[title/following-sibling::url/following-sibling::link/following-sibling::width/following-sibling::height/following-sibling::description][width < height]"),
        ("R2", "/rss/channel/item[enclosure][enclosure/following-sibling::enclosure/following-sibling::enclosure][enclosure/@type='audio/mpeg']"),
        ("R3", "/rss/channel/item/body[child::*[1][self::p]/following-sibling::*[1][self::p]/following-sibling::*[1][self::img]][img[width=height]]"),
        ("R4", "/rss/channel/item/description[following-sibling::link][contains(.,'2005')]"),
    ],
    "psimi": [
        ("P1", "/entrySet/entry/interactorList/interactor/organism[names/following-sibling::cellType][contains(.,'Cercopithecus')]"),
        ("P2", "/entrySet/entry/experimentList/experimentDescription/bibref/xref[primaryRef/following-sibling::secondaryRef][secondaryRef/@refType='method reference']"),
        ("P3", "/entrySet/entry/experimentList/experimentDescription/hostOrganismList/hostOrganism[child::names/following-sibling::*[1][self::cellType]/following-sibling::*[1][self::tissue]][tissue[contains(.,'endothelium')]]"),
        ("P4", "/entrySet/entry/interactorList/interactor/organism/cellType[names/following-sibling::*[1][self::xref]][contains(.,'Cercopithecus')]"),
    ],
    "wiki": [
        ("W1", "/article/body/section/section/section/figure[caption/collectionlink/following-sibling::br/following-sibling::collectionlink][contains(.,'Loutherbourg')]"),
        ("W2", "/article/body/section/p/sub[child::sub/child::sub/following-sibling::sub][sub/sub='2']"),
        ("W3", "/article/body/section/section/section/section[child::title/following-sibling::p/following-sibling::p/following-sibling::p][contains(.,'extinction')]"),
        ("W4", "/article/body/template/template/wikipedialink[following-sibling::collectionlink][contains(.,'William de Longespee')]"),
    ],
}


def ensure_corpus():
    out = {}
    for family, count, seed in BENCHMARK:
        d = os.path.join(ROOT, family)
        if not (os.path.isdir(d) and len(os.listdir(d)) == count):
            print("generating", family)
            write_corpus(d, family, count, seed)
        out[family] = sorted(os.path.join(d, n) for n in os.listdir(d))
    return out


def brute(coll, asts):
    hits = {qid: set() for qid in asts}
    for doc in coll.ids():
        g = coll.graph(doc)
        for qid, ast in asts.items():
            for v in eval_xpath(ast, g):
                hits[qid].add((doc, v))
    return hits


def main():
    paths = ensure_corpus()
    strict = 0
    fast = 0
    rows = []
    for family, qs in QUERIES.items():
        coll, _ = Collection.from_paths(paths[family])
        t0 = time.time()
        label = create_sd(coll, preset("label"), with_edges=False)
        t1 = time.time()
        pstar = build_pk(coll, INF)
        t2 = time.time()
        fpb = create_sd(coll, preset("fplusb"), with_edges=False)
        t3 = time.time()
        adapted = create_sd(coll, preset("label"), with_edges=False)
        Workload.from_queries(qs).adapt(adapted)
        t4 = time.time()
        print(
            "%s: label %.1fs  p* %.1fs  fplusb %.1fs  adapt %.1fs"
            % (family, t1 - t0, t2 - t1, t3 - t2, t4 - t3)
        )
        asts = {qid: parse_xpath(q) for qid, q in qs}
        truth = brute(coll, asts)
        for qid, q in qs:
            pools = {}
            for name, sd in (("ad", adapted), ("fpb", fpb), ("p*", pstar), ("lab", label)):
                pools[name] = find_candidates(sd, q).candidate_docs
            sizes = [len(pools[k]) for k in ("ad", "fpb", "p*", "lab")]
            ordered = sizes[0] <= sizes[1] <= sizes[2] <= sizes[3]
            is_strict = len(set(sizes)) > 1
            strict += is_strict
            nested = pools["ad"] <= pools["fpb"] <= pools["p*"] <= pools["lab"]

            coll.drop_cache()
            t0 = time.time()
            a_lab = evaluate_query(coll, label, q)
            t_lab = time.time() - t0
            coll.drop_cache()
            t0 = time.time()
            a_ad = evaluate_query(coll, adapted, q)
            t_ad = time.time() - t0
            a_ps = evaluate_query(coll, pstar, q)
            same = (
                a_lab.answer_elems == a_ad.answer_elems == a_ps.answer_elems == truth[qid]
            )
            ratio = t_lab / t_ad if t_ad > 0 else float("inf")
            fast += ratio >= 10
            rows.append(
                "%s pools ad/fpb/p*/lab = %3d %3d %3d %3d  ordered=%s nested=%s "
                "strict=%s  answers=%d same=%s  lab %.3fs ad %.3fs ratio %.1fx"
                % (qid, *sizes, ordered, nested, is_strict, len(truth[qid]), same, t_lab, t_ad, ratio)
            )
            abk = a_ad.answer_docs <= a_ad.candidate_docs
            if not (ordered and nested and same and abk):
                rows[-1] = "!! " + rows[-1]
        del coll, label, pstar, fpb, adapted
    for r in rows:
        print(r)
    print("strict somewhere: %d/12   >=10x: %d/12" % (strict, fast))


if __name__ == "__main__":
    main()
