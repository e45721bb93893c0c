"""Command line front door for building, refining and querying indexes.

Every command works an index directory: ``--index`` names it, falling
back to the ``AXPRE_INDEX_DIR`` environment variable.  The directory is
exclusively locked while open, so one process works an index at a time.
Mutating commands append their normalized argument vector to
``journal.log`` inside the index; replaying the journal into a fresh
directory reproduces the index state byte for byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 contract
violation.
"""

import argparse
import json
import os
import sys
import time

from .adapt import adapt_sd, evaluate_query, forward_stable_for
from .axisgraph import AXIS_INVERSE, Collection, DEFAULT_SD_AXES
from .errors import (
    ContractViolation,
    DataError,
    EngineError,
    NotDistinguishableError,
    UsageError,
)
from .extent import annotate_node
from .refine import (
    refine_node,
    stabilize_axis,
    stabilize_edge,
    stabilize_neighbourhood,
)
from .store import (
    MATERIALIZED,
    VIRTUAL,
    EngineStore,
    IndexLock,
    ingest,
    store_from_sd,
)
from .summary import INF, build_pk, create_sd, preset, _compute_edges
from .xpath import parse_xpath

ENV_INDEX = "AXPRE_INDEX_DIR"
JOURNAL = "journal.log"


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code map
    instead of exiting on its own."""

    def error(self, message):
        raise UsageError(message)


def _common(nested):
    # Nested parsers suppress their defaults: the subcommand namespace
    # is copied over the top-level one wholesale, and suppressed
    # defaults keep flags given before the command name alive.
    default = argparse.SUPPRESS if nested else None
    common = _Parser(add_help=False)
    common.add_argument("--index", default=default,
                        help="index directory (default $%s)" % ENV_INDEX)
    common.add_argument("--json", action="store_true", dest="json_out",
                        default=argparse.SUPPRESS if nested else False,
                        help="machine readable output")
    common.add_argument("-q", "--quiet", action="store_true",
                        default=argparse.SUPPRESS if nested else False)
    common.add_argument("-v", "--verbose", action="count",
                        default=argparse.SUPPRESS if nested else 0)
    return common


def build_parser():
    common = _common(nested=True)
    top = _Parser(prog="axpre", description=__doc__, parents=[_common(nested=False)],
                  formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("build", parents=[common],
                       help="parse documents and build a summary index")
    p.add_argument("paths", nargs="+", metavar="file")
    p.add_argument("--axpre", action="append", default=[],
                   help="refinement expression; repeatable")
    p.add_argument("--preset", help="summary family: label, a, fb, fplusb, "
                                    "bpci, skeleton, dataguide-tree")
    p.add_argument("--k", type=_chain_len, help="chain length for preset a "
                                                "(a number or inf)")
    p.add_argument("--k-in", type=int, dest="k_in")
    p.add_argument("--k-out", type=int, dest="k_out")
    p.add_argument("--td", type=int)
    p.add_argument("--mode", choices=(MATERIALIZED, VIRTUAL), default=MATERIALIZED)
    p.add_argument("--sd-axes", default=",".join(DEFAULT_SD_AXES),
                   help="axes tracked as summary edges")
    p.add_argument("--classify", action="store_true",
                   help="classify edge stability before saving")
    p.add_argument("--stream", action="store_true",
                   help="spool element records to disk in one pass "
                        "(chain builds, materialized mode)")

    p = sub.add_parser("refine", parents=[common],
                       help="split a summary node by an expression")
    p.add_argument("--sid", required=True, type=_sid)
    p.add_argument("--axpre", required=True)

    p = sub.add_parser("stabilize", parents=[common],
                       help="refine until edges are forward stable")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--edge", nargs=2, metavar=("FROM", "TO"))
    group.add_argument("--axis", nargs=2, metavar=("SID", "AXIS"))
    group.add_argument("--neighbourhood", nargs=2, metavar=("SID", "AXPRE"))

    p = sub.add_parser("query", parents=[common],
                       help="evaluate a query through the summary")
    p.add_argument("--xpath", required=True)
    p.add_argument("--adapt", action="store_true",
                   help="refine the summary to host the query first")
    p.add_argument("--explain", action="store_true",
                   help="show how each matched node was handled")

    p = sub.add_parser("preset", parents=[common],
                       help="show the expression sets behind the preset names")
    p.add_argument("name", nargs="?")
    p.add_argument("--k", type=_chain_len)
    p.add_argument("--k-in", type=int, dest="k_in")
    p.add_argument("--k-out", type=int, dest="k_out")
    p.add_argument("--td", type=int)

    p = sub.add_parser("export", parents=[common], help="write the summary out")
    p.add_argument("--format", choices=("dot", "json"), required=True)
    p.add_argument("--classify", action="store_true")
    p.add_argument("--out", help="target file (default stdout)")

    p = sub.add_parser("compare", parents=[common],
                       help="tag element records with their sid in another index")
    p.add_argument("--other", required=True, metavar="INDEXDIR")

    p = sub.add_parser("serve", parents=[common], help="run the HTTP interface")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    p = sub.add_parser("replay", parents=[common],
                       help="re-run a command journal into an index directory")
    p.add_argument("--journal", required=True, metavar="FILE")

    return top


def _chain_len(text):
    if text.strip().lower() in ("inf", "infinity"):
        return INF
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("chain length must be a number or inf")


def _sid(value):
    text = str(value).strip()
    if text.lower().startswith("s"):
        text = text[1:]
    try:
        return int(text)
    except ValueError:
        raise UsageError("summary nodes are named s<number>, got %r" % (value,))


def _axes(text):
    axes = tuple(a for a in text.replace(",", " ").split() if a)
    for ax in axes:
        if ax not in AXIS_INVERSE:
            raise UsageError("unknown axis %r" % ax)
    if not axes:
        raise UsageError("at least one summary axis is needed")
    return axes


# ---------------------------------------------------------------------------
# index plumbing


def _index_dir(args, must_exist=False):
    directory = args.index or os.environ.get(ENV_INDEX)
    if not directory:
        raise UsageError("no index directory; pass --index or set $%s" % ENV_INDEX)
    if must_exist and not os.path.isdir(directory):
        raise DataError("index directory %s does not exist" % directory)
    return directory


def _journal_append(directory, argv, fresh=False):
    path = os.path.join(directory, JOURNAL)
    with open(path, "w" if fresh else "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"v": 1, "argv": list(argv)}) + "\n")


def _annotate_created(store, report):
    """Give freshly split nodes extent expressions where possible; a
    virtual store cannot live without them."""
    for sid in report.created_sids():
        if store.sd.node(sid).ee is not None:
            continue
        try:
            store.ees[sid] = annotate_node(store.sd, sid)
        except NotDistinguishableError:
            if store.mode == VIRTUAL:
                raise


def _persist(store, directory, argv):
    store.sync_tables()
    store.save(directory)
    _journal_append(directory, argv)


def _emit(args, payload, text):
    if args.json_out:
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif text and not args.quiet:
        print(text)


def _report_text(report, seq):
    lines = []
    for entry in report.removed:
        lines.append("removed: s%d %s (extent %d)"
                     % (entry["sid"], entry["axpre"], entry["extentSize"]))
    for entry in report.created:
        lines.append("created: s%d %s (extent %d)"
                     % (entry["sid"], entry["axpre"], entry["extentSize"]))
    if report.noop and not report.created:
        lines.append("nothing to do")
    lines.append("edges recomputed: %d" % report.edges_recomputed)
    lines.append("seq: %d" % seq)
    return "\n".join(lines)


def _report_payload(report, seq):
    payload = report.to_json()
    payload["seq"] = seq
    return payload


# ---------------------------------------------------------------------------
# commands


def _cmd_build(args):
    directory = _index_dir(args)
    axes = _axes(args.sd_axes)
    if args.axpre and args.preset:
        raise UsageError("pass either --axpre or --preset, not both")
    if not args.axpre and not args.preset:
        raise UsageError("build needs --axpre or --preset")

    chain = None
    exprs = None
    if args.preset:
        name = args.preset.strip().lower()
        if name == "a":
            if args.k is None:
                raise UsageError("preset a needs --k")
            chain = args.k
        else:
            exprs = list(preset(args.preset, k=args.k, k_in=args.k_in,
                                k_out=args.k_out, td=args.td))
    else:
        exprs = list(args.axpre)

    with IndexLock(directory):
        t0 = time.perf_counter()
        if args.stream:
            if chain is None or args.mode != MATERIALIZED:
                raise UsageError("--stream needs preset a and materialized mode")
            store = ingest(args.paths, args.mode, chain, axes,
                           store_dir=directory)
            total = time.perf_counter() - t0
            if not args.quiet and not args.json_out:
                print("stream: %d docs in %.3fs (%d skipped)"
                      % (len(store.collection.ids()), total, len(store.skipped)))
        else:
            coll = Collection()
            skipped = []
            for path in args.paths:
                try:
                    coll.add_path(path)
                except (OSError, DataError) as exc:
                    skipped.append((str(path), exc))
                    if args.verbose:
                        print("skipped: %s (%s)" % (path, exc), file=sys.stderr)
            t1 = time.perf_counter()
            if chain is not None:
                sd = build_pk(coll, chain, axes, with_edges=False)
            else:
                sd = create_sd(coll, exprs, axes, with_edges=False)
            t2 = time.perf_counter()
            _compute_edges(sd, coll)
            if args.classify:
                sd.classify_all()
            t3 = time.perf_counter()
            store = store_from_sd(coll, sd, args.mode, skipped=skipped)
            store.save(directory)
            total = time.perf_counter() - t0
            if not args.quiet and not args.json_out:
                print("parse: %d docs in %.3fs (%d skipped)"
                      % (len(coll.ids()), t1 - t0, len(skipped)))
                print("partition: %d nodes in %.3fs" % (len(sd.nodes), t2 - t1))
                print("edges: %d edges in %.3fs" % (len(sd.edges), t3 - t2))

        argv = ["build"] + [os.path.abspath(p) for p in args.paths]
        argv += ["--mode", args.mode, "--sd-axes", ",".join(axes)]
        if chain is not None:
            argv += ["--preset", "a", "--k",
                     "inf" if chain == INF else str(int(chain))]
        elif args.preset:
            argv += ["--preset", args.preset]
            for flag, val in (("--k", args.k), ("--k-in", args.k_in),
                              ("--k-out", args.k_out), ("--td", args.td)):
                if val is not None:
                    argv += [flag, "inf" if val == INF else str(int(val))]
        else:
            for e in exprs:
                argv += ["--axpre", e]
        if args.classify:
            argv.append("--classify")
        if args.stream:
            argv.append("--stream")
        _journal_append(directory, argv, fresh=True)

        stats = store.stats()
        payload = {"v": 1, "index": directory, "seconds": round(total, 6)}
        payload.update(stats)
        _emit(args, payload,
              "nodes: %d\nedges: %d\ntime: %.3fs\nsaved: %s"
              % (stats["nodes"], stats["edges"], total, directory))
    return 0


def _load(directory):
    store = EngineStore.load(directory)
    store.hydrate()
    return store


def _cmd_refine(args):
    directory = _index_dir(args, must_exist=True)
    with IndexLock(directory):
        store = _load(directory)
        report = refine_node(store.sd, args.sid, args.axpre)
        _annotate_created(store, report)
        _persist(store, directory,
                 ["refine", "--sid", "s%d" % args.sid, "--axpre", args.axpre])
        seq = store.sd.seq
        _emit(args, _report_payload(report, seq), _report_text(report, seq))
    return 0


def _cmd_stabilize(args):
    directory = _index_dir(args, must_exist=True)
    with IndexLock(directory):
        store = _load(directory)
        if args.edge:
            si, sj = (_sid(x) for x in args.edge)
            report = stabilize_edge(store.sd, si, sj)
            argv = ["stabilize", "--edge", "s%d" % si, "s%d" % sj]
        elif args.axis:
            sid, ax = _sid(args.axis[0]), args.axis[1]
            if ax not in AXIS_INVERSE:
                raise UsageError("unknown axis %r" % ax)
            report = stabilize_axis(store.sd, sid, ax)
            argv = ["stabilize", "--axis", "s%d" % sid, ax]
        else:
            sid, expr = _sid(args.neighbourhood[0]), args.neighbourhood[1]
            report = stabilize_neighbourhood(store.sd, expr, sid)
            argv = ["stabilize", "--neighbourhood", "s%d" % sid, expr]
        if report.noop and not report.created:
            seq = store.sd.seq
        else:
            _annotate_created(store, report)
            _persist(store, directory, argv)
            seq = store.sd.seq
        _emit(args, _report_payload(report, seq), _report_text(report, seq))
    return 0


def _cmd_query(args):
    directory = _index_dir(args, must_exist=True)
    with IndexLock(directory):
        store = _load(directory)
        t0 = time.perf_counter()
        ast = parse_xpath(args.xpath)
        t1 = time.perf_counter()
        adapt_report = None
        if args.adapt:
            adapt_report = adapt_sd(store.sd, ast)
            _annotate_created(store, adapt_report)
            _persist(store, directory,
                     ["query", "--xpath", args.xpath, "--adapt"])
            store.hydrate()
        t2 = time.perf_counter()
        result = evaluate_query(store.collection, store.sd, ast)
        t3 = time.perf_counter()

        touched = sorted(set(result.matched_sids))
        timings = {
            "parse": round(t1 - t0, 6),
            "adapt": round(t2 - t1, 6),
            "evaluate": round(t3 - t2, 6),
            "total": round(t3 - t0, 6),
        }
        payload = {
            "v": 1,
            "xpath": args.xpath,
            "candidateDocs": sorted(result.candidate_docs),
            "answerDocs": sorted(result.answer_docs),
            "answerCount": len(result.answer_elems),
            "exact": result.exact,
            "touchedSids": touched,
            "timings": timings,
            "seq": store.sd.seq,
        }
        if adapt_report is not None:
            payload["adapt"] = adapt_report.to_json()

        lines = []
        if adapt_report is not None and not args.quiet:
            lines.append(_report_text(adapt_report, store.sd.seq))
        lines.append("matched: %s" % (" ".join("s%d" % s for s in touched) or "-"))
        lines.append("candidates: %d docs%s"
                     % (len(result.candidate_docs),
                        _doc_list(result.candidate_docs)))
        lines.append("answers: %d docs, %d elements%s"
                     % (len(result.answer_docs), len(result.answer_elems),
                        _doc_list(result.answer_docs)))
        lines.append("exact: %s   evaluated: %d docs"
                     % ("yes" if result.exact else "no", result.evaluated_docs))
        lines.append("timings: parse %.3fs, evaluate %.3fs, total %.3fs"
                     % (timings["parse"], timings["evaluate"],
                        timings["total"]))
        if args.explain:
            explain = []
            for sid in touched:
                stable = forward_stable_for(store.sd, sid, ast)
                status = "certified" if stable else "filtered"
                explain.append({"sid": sid, "status": status})
                lines.append("  s%d: %s %s"
                             % (sid, store.sd.axpre(sid), status))
            payload["explain"] = explain
        _emit(args, payload, "\n".join(lines))
    return 0


def _doc_list(docs, cap=20):
    if not docs:
        return ""
    shown = sorted(docs)[:cap]
    tail = " ..." if len(docs) > cap else ""
    return ": " + " ".join(str(d) for d in shown) + tail


def _cmd_preset(args):
    from .axpre import canonical_string
    names = ("label", "a", "fb", "fplusb", "bpci", "skeleton", "dataguide-tree")
    if args.name:
        exprs = preset(args.name, k=args.k, k_in=args.k_in,
                       k_out=args.k_out, td=args.td)
        rendered = [canonical_string(e) for e in exprs]
        _emit(args, {"v": 1, "name": args.name, "axpres": rendered},
              "\n".join(rendered))
        return 0
    _emit(args, {"v": 1, "presets": list(names)}, "\n".join(names))
    return 0


def _cmd_export(args):
    directory = _index_dir(args, must_exist=True)
    with IndexLock(directory):
        store = EngineStore.load(directory)
        if args.classify:
            store.hydrate()
        if args.format == "dot":
            text = store.sd.to_dot(classify=args.classify)
        else:
            text = json.dumps(store.sd.to_json(classify=args.classify),
                              indent=2, sort_keys=True)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
            if not args.quiet and not args.json_out:
                print("wrote %s" % args.out)
        else:
            print(text)
    return 0


def _cmd_compare(args):
    directory = _index_dir(args, must_exist=True)
    other_dir = args.other
    with IndexLock(directory), IndexLock(other_dir):
        store = EngineStore.load(directory)
        other = EngineStore.load(other_dir)
        store.attach_secondary(other)
        store.save(directory)
        _journal_append(directory,
                        ["compare", "--other", os.path.abspath(other_dir)])
        rows = store.secondary_report()
        text = "\n".join(
            "s%d ~ %s: %d"
            % (r["sid"], "s%d" % r["sid2"] if r["sid2"] else "-", r["count"])
            for r in rows
        )
        _emit(args, {"v": 1, "rows": rows}, text)
    return 0


def _cmd_serve(args):
    directory = _index_dir(args, must_exist=True)
    import uvicorn

    from .server import create_app

    lock = IndexLock(directory).acquire()
    try:
        store = _load(directory)
        app = create_app(store=store, persist=True)
        if not args.quiet:
            print("serving %s on %s:%d" % (directory, args.host, args.port))
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        lock.release()
    return 0


def _cmd_replay(args):
    directory = _index_dir(args)
    try:
        with open(args.journal, "r", encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
    except OSError as exc:
        raise DataError("cannot read journal: %s" % exc) from None
    for line in lines:
        try:
            entry = json.loads(line)
        except ValueError as exc:
            raise DataError("journal line is not JSON: %s" % exc) from None
        if entry.get("v") != 1 or not isinstance(entry.get("argv"), list):
            raise DataError("journal line lacks an argument vector")
        code = main(["--index", directory, "--quiet"] + entry["argv"])
        if code != 0:
            raise ContractViolation(
                "replayed command %r exited %d" % (entry["argv"], code)
            )
    if not args.quiet and not args.json_out:
        print("replayed %d commands into %s" % (len(lines), directory))
    if args.json_out:
        print(json.dumps({"v": 1, "replayed": len(lines), "index": directory}))
    return 0


_COMMANDS = {
    "build": _cmd_build,
    "refine": _cmd_refine,
    "stabilize": _cmd_stabilize,
    "query": _cmd_query,
    "preset": _cmd_preset,
    "export": _cmd_export,
    "compare": _cmd_compare,
    "serve": _cmd_serve,
    "replay": _cmd_replay,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        pos = getattr(exc, "position", None)
        where = " at position %d" % pos if pos is not None else ""
        print("usage error: %s%s" % (exc, where), file=sys.stderr)
        return 1
    except DataError as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print("contract violation: %s" % exc, file=sys.stderr)
        return 3
    except EngineError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
