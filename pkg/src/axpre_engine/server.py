"""HTTP interface over one summary store.

Reads are served concurrently; mutations funnel through a single
writer lock and bump the summary's sequence number, which every
response echoes.  A request may carry the sequence it was computed
against, and is refused with 409 when the store has moved on.  Each
mutation is also recorded in an in-process job registry so slow
refinements can be polled by id.

Error mapping: malformed expressions are 400 and carry the parser
position when there is one; unknown sids and documents are 404; stale
sequence numbers are 409; internal invariant breaches surface as 500
with the violated contract named.
"""

import itertools
import threading
import time

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .adapt import adapt_sd, evaluate_query
from .errors import (
    ContractViolation,
    DataError,
    EngineError,
    NotDistinguishableError,
    StaleSequenceError,
    UsageError,
)
from .extent import annotate_node
from .refine import (
    refine_node,
    stabilize_axis,
    stabilize_edge,
    stabilize_neighbourhood,
)
from .store import VIRTUAL, EngineStore
from .xpath import parse_xpath


class RefineBody(BaseModel):
    sid: str | int
    axpre: str
    seq: int | None = None


class StabilizeBody(BaseModel):
    kind: str
    args: dict
    seq: int | None = None


class QueryBody(BaseModel):
    xpath: str
    adapt: bool = False
    seq: int | None = None


def _sid(value):
    text = str(value).strip()
    if text.lower().startswith("s"):
        text = text[1:]
    try:
        return int(text)
    except ValueError:
        raise UsageError("summary nodes are named s<number>, got %r" % (value,))


def create_app(store=None, index_dir=None, persist=True):
    """Build the application around an open store.

    ``persist`` controls whether mutations are synced back to the
    store's directory; stores without one are served from memory.
    """
    if store is None:
        if index_dir is None:
            raise UsageError("create_app needs a store or an index directory")
        store = EngineStore.load(index_dir)
    store.hydrate()

    app = FastAPI(title="axpre-engine", version="1")
    writer = threading.Lock()
    jobs = {}
    job_ids = itertools.count(1)

    def _error(status, exc, extra=None):
        body = {"v": 1, "error": str(exc), "kind": type(exc).__name__}
        if extra:
            body.update(extra)
        return JSONResponse(body, status_code=status)

    @app.exception_handler(UsageError)
    async def _usage(request, exc):
        return _error(400, exc, {"position": getattr(exc, "position", None)})

    @app.exception_handler(RequestValidationError)
    async def _badbody(request, exc):
        return _error(400, exc)

    @app.exception_handler(StaleSequenceError)
    async def _stale(request, exc):
        return _error(409, exc, {
            "expected": getattr(exc, "expected", None),
            "actual": getattr(exc, "actual", None),
        })

    @app.exception_handler(DataError)
    async def _data(request, exc):
        return _error(404, exc)

    @app.exception_handler(ContractViolation)
    async def _contract(request, exc):
        return _error(500, exc)

    @app.exception_handler(EngineError)
    async def _engine(request, exc):
        return _error(500, exc)

    def _check_seq(seq):
        if seq is not None and seq != store.sd.seq:
            raise StaleSequenceError(seq, store.sd.seq)

    def _annotate_created(report):
        for sid in report.created_sids():
            if store.sd.node(sid).ee is not None:
                continue
            try:
                store.ees[sid] = annotate_node(store.sd, sid)
            except NotDistinguishableError:
                if store.mode == VIRTUAL:
                    raise

    def _commit(report):
        _annotate_created(report)
        if persist and store.root is not None:
            store.sync_tables()
            store.save(store.root)
            store.hydrate()

    def _job(kind, report):
        job_id = next(job_ids)
        jobs[job_id] = {
            "v": 1,
            "id": job_id,
            "kind": kind,
            "state": "done",
            "seq": store.sd.seq,
            "report": report.to_json(),
        }
        return job_id

    # -- reads

    @app.get("/sd")
    def get_sd():
        return store.sd.to_json()

    @app.get("/sd/node/{sid}/extent")
    def get_extent(sid: str, limit: int = 50):
        nid = _sid(sid)
        store.sd.node(nid)
        members = sorted(store.extent_lookup(nid))
        items = []
        for d, v in members[: max(limit, 0)]:
            start, end = store.collection.graph(d).span(v)
            items.append({
                "doc": d,
                "name": store.collection.name(d),
                "node": v,
                "start": start,
                "end": end,
            })
        return {
            "v": 1,
            "sid": nid,
            "size": len(members),
            "items": items,
            "seq": store.sd.seq,
        }

    @app.get("/sd/node/{sid}/ee")
    def get_ee(sid: str):
        nid = _sid(sid)
        node = store.sd.node(nid)
        entry = store.ees.get(nid)
        if entry is None and node.ee is None:
            # generate on demand; distinguishability decides the 404
            with writer:
                if store.ees.get(nid) is None and node.ee is None:
                    try:
                        store.ees[nid] = annotate_node(store.sd, nid)
                    except NotDistinguishableError:
                        raise DataError(
                            "s%d has no extent expression and its members "
                            "cannot be told apart" % nid
                        ) from None
            entry = store.ees.get(nid)
        if entry is not None:
            body = entry.to_json()
        else:
            body = {"sid": nid, "text": node.ee, "kind": None}
        body["v"] = 1
        body["seq"] = store.sd.seq
        return body

    @app.get("/doc/{doc_id}")
    def get_doc(doc_id: int, highlight: str | None = None):
        g = store.collection.graph(doc_id)
        body = {
            "v": 1,
            "docId": doc_id,
            "name": store.collection.name(doc_id),
            "text": g.source,
            "seq": store.sd.seq,
        }
        if highlight is not None:
            nid = _sid(highlight)
            store.sd.node(nid)
            spans = []
            for d, v in sorted(store.extent_lookup(nid)):
                if d != doc_id:
                    continue
                start, end = g.span(v)
                spans.append({"node": v, "start": start, "end": end})
            body["highlight"] = nid
            body["spans"] = spans
        return body

    @app.get("/job/{job_id}")
    def get_job(job_id: int):
        entry = jobs.get(job_id)
        if entry is None:
            raise DataError("no job %d" % job_id)
        return entry

    # -- mutations

    @app.post("/sd/refine")
    def post_refine(body: RefineBody):
        with writer:
            _check_seq(body.seq)
            report = refine_node(store.sd, _sid(body.sid), body.axpre)
            _commit(report)
            job_id = _job("refine", report)
        return {
            "v": 1,
            "seq": store.sd.seq,
            "job": job_id,
            "report": report.to_json(),
        }

    @app.post("/sd/stabilize")
    def post_stabilize(body: StabilizeBody):
        with writer:
            _check_seq(body.seq)
            args = body.args
            if body.kind == "edge":
                report = stabilize_edge(
                    store.sd, _sid(args.get("from")), _sid(args.get("to")),
                    args.get("axis"),
                )
            elif body.kind == "axis":
                report = stabilize_axis(
                    store.sd, _sid(args.get("sid")), args.get("axis")
                )
            elif body.kind == "neighbourhood":
                report = stabilize_neighbourhood(
                    store.sd, args.get("axpre"), _sid(args.get("sid"))
                )
            else:
                raise UsageError(
                    "stabilize kind must be edge, axis or neighbourhood"
                )
            if not (report.noop and not report.created):
                _commit(report)
            job_id = _job("stabilize", report)
        return {
            "v": 1,
            "seq": store.sd.seq,
            "job": job_id,
            "report": report.to_json(),
        }

    @app.post("/query")
    def post_query(body: QueryBody):
        t0 = time.perf_counter()
        ast = parse_xpath(body.xpath)
        t1 = time.perf_counter()
        adapt_report = None
        if body.adapt:
            with writer:
                _check_seq(body.seq)
                adapt_report = adapt_sd(store.sd, ast)
                _commit(adapt_report)
        t2 = time.perf_counter()
        result = evaluate_query(store.collection, store.sd, ast)
        t3 = time.perf_counter()
        touched = sorted(set(result.matched_sids))
        if adapt_report is not None:
            touched = sorted(
                set(touched) | set(adapt_report.created_sids())
            )
        out = {
            "v": 1,
            "seq": store.sd.seq,
            "candidateDocs": sorted(result.candidate_docs),
            "answerDocs": sorted(result.answer_docs),
            "answerCount": len(result.answer_elems),
            "exact": result.exact,
            "touchedSids": touched,
            "timings": {
                "parse": round(t1 - t0, 6),
                "adapt": round(t2 - t1, 6),
                "evaluate": round(t3 - t2, 6),
                "total": round(t3 - t0, 6),
            },
        }
        if adapt_report is not None:
            out["report"] = adapt_report.to_json()
        return out

    app.state.store = store
    return app
