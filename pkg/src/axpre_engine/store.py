"""Summary persistence: element tables, document tables and snapshots.

A store directory holds four files.  ``manifest.json`` lists the
ingested documents (dense ids in ingestion order) and the files skipped
as unreadable or malformed.  ``elemdb.bin`` is the element table of a
materialized store: one fixed-width, length-prefixed, little-endian
record per graph node, laid out in key order (sid, doc, end position).
A virtual store writes ``docdb.bin`` instead, recording only which
documents contribute to each extent, and relies on ``ees.json`` to
recover the extents by evaluation.  ``sdgraph.json`` carries the
summary graph itself: nodes, edges with their stability marks, and the
sequence number.

The element record key (sid, doc, end) locates any node: within one
document the end offsets of distinct nodes never collide, so refining
operations can reassign records found through evaluated answers
instead of re-deriving extents.
"""

import fcntl
import json
import os
import shutil
import struct
from collections import OrderedDict
from dataclasses import dataclass

from .axisgraph import DEFAULT_SD_AXES, Collection
from .errors import (
    ContractViolation,
    CoverageError,
    DataError,
    IndexLockedError,
    MissingExtentExpressionError,
    NotDistinguishableError,
    StoreError,
    UsageError,
)
from .extent import (
    EeKind,
    ExtentExpression,
    annotate_all,
    compute_edge_by_merge,
    compute_edge_by_xpath,
)
from .refine import RefinementReport
from .summary import SdNode, Stability, SummaryDescriptor, build_pk, create_sd
from .xpath import eval_xpath, parse_xpath

MATERIALIZED = "materialized"
VIRTUAL = "virtual"

_PREFIX = struct.Struct("<I")
_ELEM = struct.Struct("<IIQQI")
_DOC = struct.Struct("<II")
_ELEM_MAGIC = b"AXELEMDB"
_DOC_MAGIC = b"AXDOCDB\x00"
_HEADER_SIZE = 16
_ELEM_REC_SIZE = _PREFIX.size + _ELEM.size


@dataclass(frozen=True)
class ElemRecord:
    """One graph node: where it sits and which summary node owns it.

    The key (sid, doc_id, end_pos) is unique across the table.  sid2
    carries the node's sid under a second summary once one is attached,
    and None until then.
    """

    sid: int
    doc_id: int
    end_pos: int
    start_pos: int
    sid2: int = None

    @property
    def key(self):
        return (self.sid, self.doc_id, self.end_pos)


@dataclass(frozen=True)
class DocRecord:
    """One document contributing to a summary node's extent."""

    sid: int
    doc_id: int

    @property
    def key(self):
        return (self.sid, self.doc_id)


def _elem_key(r):
    return (r.sid, r.doc_id, r.end_pos)


@dataclass
class SDMaps:
    """Main-memory edge view: one adjacency map per axis plus labels."""

    label_map: dict
    axis_maps: dict

    @classmethod
    def from_sd(cls, sd):
        labels = {sid: sd.label(sid) for sid in sd.sids()}
        axes = {}
        for (si, ax, sj) in sd.edges:
            axes.setdefault(ax, {}).setdefault(si, set()).add(sj)
        return cls(labels, axes)

    def verify(self, sd):
        if set(self.label_map) != set(sd.nodes):
            raise ContractViolation("label map does not cover the summary nodes")
        for sid, label in self.label_map.items():
            if sd.label(sid) != label:
                raise ContractViolation("label map disagrees on s%d" % sid)
        seen_axes = {ax for (_, ax, _) in sd.edges}
        if set(self.axis_maps) != seen_axes:
            raise ContractViolation("axis maps do not cover the edge axes")
        for ax, adj in self.axis_maps.items():
            for sid in sd.sids():
                if sorted(adj.get(sid, ())) != sd.axis_step(sid, ax):
                    raise ContractViolation(
                        "axis map %s disagrees with the summary on s%d" % (ax, sid)
                    )


# ---------------------------------------------------------------------------
# binary tables


def _write_table(path, magic, payload, rows):
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(_PREFIX.pack(1))
        fh.write(_PREFIX.pack(len(rows)))
        for row in rows:
            fh.write(_PREFIX.pack(payload.size))
            fh.write(payload.pack(*row))


def _read_table(path, magic, payload):
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise StoreError("cannot open table %s: %s" % (path, exc)) from None
    with fh:
        head = fh.read(_HEADER_SIZE)
        if len(head) != _HEADER_SIZE or head[:8] != magic:
            raise StoreError("%s is not the table it claims to be" % path)
        version = _PREFIX.unpack_from(head, 8)[0]
        count = _PREFIX.unpack_from(head, 12)[0]
        if version != 1:
            raise StoreError("%s has unsupported version %d" % (path, version))
        rows = []
        for _ in range(count):
            piece = fh.read(_PREFIX.size)
            if len(piece) != _PREFIX.size:
                raise StoreError("%s is truncated" % path)
            size = _PREFIX.unpack(piece)[0]
            if size != payload.size:
                raise StoreError("%s carries a record of size %d" % (path, size))
            piece = fh.read(size)
            if len(piece) != size:
                raise StoreError("%s is truncated" % path)
            rows.append(payload.unpack(piece))
        if fh.read(1):
            raise StoreError("%s has bytes past its record count" % path)
    return rows


def _write_elem(path, records):
    rows = [
        (r.sid, r.doc_id, r.end_pos, r.start_pos, r.sid2 or 0) for r in records
    ]
    _write_table(path, _ELEM_MAGIC, _ELEM, rows)


def _read_elem(path):
    return [
        ElemRecord(sid, doc, end, start, sid2 or None)
        for sid, doc, end, start, sid2 in _read_table(path, _ELEM_MAGIC, _ELEM)
    ]


def _table_count(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER_SIZE)
    if len(head) != _HEADER_SIZE:
        raise StoreError("%s is truncated" % path)
    return _PREFIX.unpack_from(head, 12)[0]


def _write_doc(path, records):
    _write_table(path, _DOC_MAGIC, _DOC, [(r.sid, r.doc_id) for r in records])


def _read_doc(path):
    return [DocRecord(sid, doc) for sid, doc in _read_table(path, _DOC_MAGIC, _DOC)]


class _ElemSpool:
    """Spools element rows doc by doc, then lays them out in key order.

    Rows arrive grouped by document, so the final (sid, doc, end) order
    falls out of bucketing: a counting sweep fixes each sid's region in
    the output file, and a second sweep over the spool scatters every
    document's rows, locally sorted, into those regions.  Memory stays
    at one document's rows plus one counter per summary node.
    """

    def __init__(self, directory):
        self.path = os.path.join(directory, "elemdb.spool")
        self.tmp = open(self.path, "wb")
        self.counts = {}
        self.doc_rows = []
        self._doc = None
        self._n = 0
        self.total = 0

    def add(self, doc_id, sid, v, start, end):
        if doc_id != self._doc:
            if self._doc is not None:
                self.doc_rows.append((self._doc, self._n))
            self._doc = doc_id
            self._n = 0
        self.tmp.write(_ELEM.pack(sid, doc_id, end, start, 0))
        self.counts[sid] = self.counts.get(sid, 0) + 1
        self._n += 1
        self.total += 1

    def finish(self, out_path):
        if self._doc is not None:
            self.doc_rows.append((self._doc, self._n))
        self.tmp.close()
        cursor = {}
        at = 0
        for sid in sorted(self.counts):
            cursor[sid] = at
            at += self.counts[sid]
        with open(out_path, "wb") as out:
            out.write(_ELEM_MAGIC)
            out.write(_PREFIX.pack(1))
            out.write(_PREFIX.pack(self.total))
            if self.total:
                out.seek(_HEADER_SIZE + self.total * _ELEM_REC_SIZE - 1)
                out.write(b"\x00")
            with open(self.path, "rb") as tmp:
                for _, n in self.doc_rows:
                    blob = tmp.read(n * _ELEM.size)
                    rows = sorted(
                        _ELEM.iter_unpack(blob), key=lambda r: (r[0], r[2])
                    )
                    i = 0
                    while i < len(rows):
                        sid = rows[i][0]
                        out.seek(_HEADER_SIZE + cursor[sid] * _ELEM_REC_SIZE)
                        j = i
                        while j < len(rows) and rows[j][0] == sid:
                            out.write(_PREFIX.pack(_ELEM.size))
                            out.write(_ELEM.pack(*rows[j]))
                            j += 1
                        cursor[sid] += j - i
                        i = j
        os.remove(self.path)
        return self.total


# ---------------------------------------------------------------------------
# the handle


def _as_refiner(r):
    if isinstance(r, ExtentExpression):
        return (r.text, r.kind)
    return (str(r), EeKind.COMPOSED)


class EngineStore:
    """A summary bound to its tables; the handle ingestion returns.

    Materialized stores keep one element record per graph node and
    resolve extents positionally.  Virtual stores keep only the
    documents behind each summary node and re-evaluate extent
    expressions on demand.  Loaded stores start lazy: extents are
    resolved from the tables when first asked for.
    """

    def __init__(self, collection, sd, mode, elem_records=None,
                 doc_records=None, ees=None, skipped=(), root=None,
                 elem_path=None):
        self.collection = collection
        self.sd = sd
        self.mode = mode
        self._elem_records = elem_records
        self._elem_path = elem_path
        self._elem_count = len(elem_records) if elem_records is not None else None
        self._elem_index = None
        self._doc_records = list(doc_records) if doc_records is not None else []
        self.ees = dict(ees or {})
        self.skipped = list(skipped)
        self.root = root
        self._end_maps = OrderedDict()

    # -- table access

    def records(self):
        """The element table as a list; loads it when it sits on disk."""
        if self._elem_records is None:
            if self._elem_path is None:
                return []
            self._elem_records = _read_elem(self._elem_path)
            self._elem_count = len(self._elem_records)
        return self._elem_records

    def doc_records(self):
        return list(self._doc_records)

    def elem_record(self, sid, doc_id, end_pos):
        if self._elem_index is None:
            self._elem_index = {r.key: r for r in self.records()}
        try:
            return self._elem_index[(sid, doc_id, end_pos)]
        except KeyError:
            raise DataError(
                "no element record with key (s%d, doc %d, end %d)"
                % (sid, doc_id, end_pos)
            ) from None

    @property
    def maps(self):
        return SDMaps.from_sd(self.sd)

    def _end_map(self, doc_id):
        m = self._end_maps.get(doc_id)
        if m is None:
            g = self.collection.graph(doc_id)
            m = {g.span(v)[1]: v for v in g.node_ids()}
            self._end_maps[doc_id] = m
            if len(self._end_maps) > 16:
                self._end_maps.popitem(last=False)
        else:
            self._end_maps.move_to_end(doc_id)
        return m

    def _resolve_end(self, record):
        v = self._end_map(record.doc_id).get(record.end_pos)
        if v is None:
            raise StoreError(
                "record (s%d, doc %d, end %d) matches no node span"
                % (record.sid, record.doc_id, record.end_pos)
            )
        return v

    # -- lookups

    def extent_lookup(self, sid):
        """Extent of ``sid`` as (doc, node) pairs, resolved from the
        tables; virtual stores evaluate the node's expression over its
        recorded documents."""
        node = self.sd.node(sid)
        if self.mode == MATERIALIZED:
            if node.extent or self.sd.extent_counts is None:
                return set(node.extent)
            out = set()
            for r in self.records():
                if r.sid == sid:
                    out.add((r.doc_id, self._resolve_end(r)))
            return out
        if node.ee is None:
            raise MissingExtentExpressionError(sid)
        ast = parse_xpath(node.ee)
        out = set()
        for d in sorted(self.docs_lookup(sid)):
            g = self.collection.graph(d)
            out.update((d, v) for v in eval_xpath(ast, g))
        return out

    def docs_lookup(self, sid):
        node = self.sd.node(sid)
        if self.mode == VIRTUAL:
            return {r.doc_id for r in self._doc_records if r.sid == sid}
        if node.extent:
            return {d for d, _ in node.extent}
        return {r.doc_id for r in self.records() if r.sid == sid}

    def materialize_extents(self):
        """Resolve every element record into its (doc, node) member and
        fill the summary's extents, after which the summary behaves like
        a freshly built one."""
        if self.mode != MATERIALIZED:
            raise UsageError("only materialized stores hold element records")
        if self.sd.extent_counts is None:
            return
        by_doc = {}
        for r in self.records():
            by_doc.setdefault(r.doc_id, []).append(r)
        for d in sorted(by_doc):
            for r in by_doc[d]:
                v = self._resolve_end(r)
                self.sd.nodes[r.sid].extent.add((d, v))
                self.sd.sid_of[(d, v)] = r.sid
        self.sd.extent_counts = None

    def annotate(self):
        """Generate and record extent expressions for every node that
        admits one; needs materialized extents."""
        out = annotate_all(self.sd)
        for sid, ee in out.items():
            self.ees[sid] = ee
        return out

    def hydrate(self):
        """Fill the summary's extents from the tables so operations that
        walk extents directly (bisimulation refinement, classification,
        query evaluation) can run on a loaded store."""
        if self.mode == MATERIALIZED:
            self.materialize_extents()
            return
        if self.sd.extent_counts is None:
            return
        for sid in self.sd.sids():
            for d, v in self.extent_lookup(sid):
                self.sd.nodes[sid].extent.add((d, v))
                self.sd.sid_of[(d, v)] = sid
        self.sd.extent_counts = None

    def sync_tables(self):
        """Rebuild the tables from the summary's extents after a direct
        summary mutation; the inverse of :meth:`hydrate`.

        Stale extent expressions of removed nodes are dropped.  A
        virtual store additionally requires every surviving node to
        carry an expression, and goes back to counted, unmaterialized
        extents afterwards.
        """
        self.ees = {s: ee for s, ee in self.ees.items() if s in self.sd.nodes}
        for sid in self.sd.sids():
            node = self.sd.node(sid)
            if node.ee is not None and sid not in self.ees:
                self.ees[sid] = ExtentExpression(sid, node.ee, EeKind.COMPOSED)
        if self.mode == MATERIALIZED:
            old = {(r.doc_id, r.end_pos): r.sid2 for r in self.records()}
            recs = []
            for sid in self.sd.sids():
                for d, v in self.sd.extent(sid):
                    start, end = self.collection.graph(d).span(v)
                    recs.append(ElemRecord(sid, d, end, start, old.get((d, end))))
            recs.sort(key=_elem_key)
            self._elem_records = recs
            self._elem_count = len(recs)
            self._elem_index = None
            self._elem_path = None
        else:
            missing = [s for s in self.sd.sids() if self.sd.node(s).ee is None]
            if missing:
                raise NotDistinguishableError(missing)
            self._doc_records = [
                DocRecord(s, d)
                for s, d in sorted(
                    {(s, d) for s in self.sd.sids() for d, _ in self.sd.extent(s)}
                )
            ]
            _virtualize(self.sd)

    # -- refinement

    def refine(self, sid, refiners, axpre=None):
        if self.mode == MATERIALIZED:
            return self.refine_materialized(sid, refiners, axpre)
        return self.refine_virtual(sid, refiners, axpre)

    def refine_materialized(self, sid, refiners, axpre=None):
        """Split ``sid`` into one node per refining expression.

        Each expression is evaluated over the documents holding the
        node's records; every answer element is located through its
        (sid, doc, end) key and reassigned.  Nothing is committed until
        the family is known to partition the extent, so any evaluation
        or coverage error leaves the store untouched.  Edges incident
        to the new nodes are recomputed by merging record spans.
        """
        if self.mode != MATERIALIZED:
            raise UsageError("store is virtual; use refine_virtual")
        old = self.sd.node(sid)
        refiners = [_as_refiner(r) for r in refiners]
        if not refiners:
            raise UsageError("refinement needs at least one extent expression")
        mine = [r for r in self.records() if r.sid == sid]
        key_index = {(r.doc_id, r.end_pos): r for r in mine}
        docs = sorted({r.doc_id for r in mine})
        taken = {}
        parts = []
        for idx, (text, _) in enumerate(refiners):
            ast = parse_xpath(text)
            extent = set()
            for d in docs:
                g = self.collection.graph(d)
                for v in eval_xpath(ast, g):
                    key = (d, g.span(v)[1])
                    if key not in key_index:
                        raise CoverageError(
                            "refining expression %s selected an element "
                            "outside the extent of s%d" % (text, sid)
                        )
                    if key in taken:
                        raise CoverageError(
                            "refining expressions %s and %s overlap"
                            % (refiners[taken[key]][0], text)
                        )
                    taken[key] = idx
                    extent.add((d, v))
            if not extent:
                raise CoverageError(
                    "refining expression %s selects nothing from s%d" % (text, sid)
                )
            parts.append(extent)
        if len(taken) != len(key_index):
            raise CoverageError(
                "refining expressions cover %d of %d extent members of s%d"
                % (len(taken), len(key_index), sid)
            )

        out_cands, in_cands = self._edge_candidates(sid)
        removed = [{"sid": sid, "axpre": old.axpre,
                    "extentSize": self.sd.extent_size(sid)}]
        self.sd.remove_node(sid)
        self.ees.pop(sid, None)
        shown = axpre if axpre is not None else old.axpre
        new_sids = []
        created = []
        for (text, kind), extent in zip(refiners, parts):
            ns = self.sd.add_node(old.label, shown, extent, ee=text)
            self.ees[ns] = ExtentExpression(ns, text, kind)
            new_sids.append(ns)
            created.append({"sid": ns, "axpre": shown, "extentSize": len(extent)})

        assign = {key: new_sids[idx] for key, idx in taken.items()}
        recs = []
        for r in self.records():
            ns = assign.get((r.doc_id, r.end_pos)) if r.sid == sid else None
            if ns is None:
                recs.append(r)
            else:
                recs.append(ElemRecord(ns, r.doc_id, r.end_pos, r.start_pos, r.sid2))
        recs.sort(key=_elem_key)
        self._elem_records = recs
        self._elem_count = len(recs)
        self._elem_index = None
        self._elem_path = None

        rows = [(r.doc_id, r.sid, r.start_pos, r.end_pos) for r in recs]
        decisions = 0
        for ax in self.sd.sd_axes:
            outs = [c for c in out_cands[ax] if c != sid]
            if sid in out_cands[ax]:
                outs.extend(new_sids)
            ins = [c for c in in_cands[ax] if c != sid]
            for ns in new_sids:
                for cj in outs:
                    res = compute_edge_by_merge(rows, ax, ns, cj)
                    decisions += 1
                    if res.exists:
                        self.sd.edges[(ns, ax, cj)] = res.stability
                for ci in ins:
                    res = compute_edge_by_merge(rows, ax, ci, ns)
                    decisions += 1
                    if res.exists:
                        self.sd.edges[(ci, ax, ns)] = res.stability
        self.sd._adj = None
        self.sd.seq += 1
        return RefinementReport(removed, created, decisions)

    def refine_virtual(self, sid, refiners, axpre=None):
        """Split ``sid`` like refine_materialized, but against the
        document table: extents are evaluated, never stored, and edges
        are recomputed by expression instead of by record merging, so
        they start unclassified."""
        if self.mode != VIRTUAL:
            raise UsageError("store is materialized; use refine_materialized")
        old = self.sd.node(sid)
        if old.ee is None:
            raise MissingExtentExpressionError(sid)
        refiners = [_as_refiner(r) for r in refiners]
        if not refiners:
            raise UsageError("refinement needs at least one extent expression")
        docs = sorted(self.docs_lookup(sid))
        base_extent = self._evaluate_over(parse_xpath(old.ee), docs)
        taken = {}
        parts = []
        for idx, (text, _) in enumerate(refiners):
            extent = self._evaluate_over(parse_xpath(text), docs)
            for m in extent:
                if m not in base_extent:
                    raise CoverageError(
                        "refining expression %s selected an element outside "
                        "the extent of s%d" % (text, sid)
                    )
                if m in taken:
                    raise CoverageError(
                        "refining expressions %s and %s overlap"
                        % (refiners[taken[m]][0], text)
                    )
                taken[m] = idx
            if not extent:
                raise CoverageError(
                    "refining expression %s selects nothing from s%d" % (text, sid)
                )
            parts.append(extent)
        if len(taken) != len(base_extent):
            raise CoverageError(
                "refining expressions cover %d of %d extent members of s%d"
                % (len(taken), len(base_extent), sid)
            )

        out_cands, in_cands = self._edge_candidates(sid)
        removed = [{"sid": sid, "axpre": old.axpre,
                    "extentSize": self.sd.extent_size(sid)}]
        self.sd.remove_node(sid)
        self.ees.pop(sid, None)
        shown = axpre if axpre is not None else old.axpre
        new_sids = []
        created = []
        for (text, kind), extent in zip(refiners, parts):
            ns = self.sd.add_node(old.label, shown, (), ee=text)
            if self.sd.extent_counts is not None:
                self.sd.extent_counts[ns] = len(extent)
            self.ees[ns] = ExtentExpression(ns, text, kind)
            new_sids.append(ns)
            created.append({"sid": ns, "axpre": shown, "extentSize": len(extent)})

        rows = [r for r in self._doc_records if r.sid != sid]
        for ns, extent in zip(new_sids, parts):
            rows.extend(DocRecord(ns, d) for d in sorted({d for d, _ in extent}))
        rows.sort(key=lambda r: r.key)
        self._doc_records = rows

        decisions = 0
        for ax in self.sd.sd_axes:
            outs = [c for c in out_cands[ax] if c != sid]
            if sid in out_cands[ax]:
                outs.extend(new_sids)
            ins = [c for c in in_cands[ax] if c != sid]
            for ns, extent in zip(new_sids, parts):
                added = compute_edge_by_xpath(
                    self.sd, ax, ns, extent, sid, candidates=outs
                )
                decisions += len(outs)
                for ci in ins:
                    decisions += 1
                    if self._incoming_by_xpath(ci, ax, extent):
                        self.sd.add_edge(ci, ax, ns)
        self.sd._adj = None
        self.sd.seq += 1
        return RefinementReport(removed, created, decisions)

    def _edge_candidates(self, sid):
        outs = {ax: [] for ax in self.sd.sd_axes}
        ins = {ax: [] for ax in self.sd.sd_axes}
        for (a, ax, b) in self.sd.edges:
            if a == sid and ax in outs:
                outs[ax].append(b)
            if b == sid and ax in ins:
                ins[ax].append(a)
        return (
            {ax: sorted(set(v)) for ax, v in outs.items()},
            {ax: sorted(set(v)) for ax, v in ins.items()},
        )

    def _evaluate_over(self, ast, docs):
        out = set()
        for d in docs:
            g = self.collection.graph(d)
            out.update((d, v) for v in eval_xpath(ast, g))
        return out

    def _incoming_by_xpath(self, src_sid, axis_name, target_extent):
        src = self.sd.nodes.get(src_sid)
        if src is None:
            return False
        if src.ee is None:
            raise MissingExtentExpressionError(src_sid)
        ast = parse_xpath(src.ee)
        target_docs = {d for d, _ in target_extent}
        for d in sorted(self.docs_lookup(src_sid) & target_docs):
            g = self.collection.graph(d)
            answer = {v for dd, v in target_extent if dd == d}
            for v in eval_xpath(ast, g):
                if set(g.axis_step(v, axis_name)) & answer:
                    return True
        return False

    # -- second summary

    def attach_secondary(self, other):
        """Tag every element record with the sid the same node has in
        ``other``, a second materialized store over the same documents."""
        if self.mode != MATERIALIZED or other.mode != MATERIALIZED:
            raise UsageError("both stores must be materialized to align records")
        if [self.collection.name(d) for d in self.collection.ids()] != [
            other.collection.name(d) for d in other.collection.ids()
        ]:
            raise UsageError("stores index different collections")
        theirs = {(r.doc_id, r.end_pos): r.sid for r in other.records()}
        self._elem_records = [
            ElemRecord(r.sid, r.doc_id, r.end_pos, r.start_pos,
                       theirs.get((r.doc_id, r.end_pos)))
            for r in self.records()
        ]
        self._elem_index = None
        self._elem_path = None

    def secondary_report(self):
        """Contingency rows (sid, sid2, count) over the element table."""
        counts = {}
        for r in self.records():
            key = (r.sid, r.sid2)
            counts[key] = counts.get(key, 0) + 1
        return [
            {"sid": sid, "sid2": sid2, "count": n}
            for (sid, sid2), n in sorted(
                counts.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)
            )
        ]

    # -- health

    def check(self, deep=False):
        """Verify table invariants, raising on the first violation.

        Shallow checks cover ordering, key uniqueness and agreement
        with the summary graph; ``deep`` additionally parses every
        document and compares records against the parsed spans.
        Returns the store's stats when everything holds.
        """
        self.maps.verify(self.sd)
        if self.mode == MATERIALIZED:
            self._check_elem(deep)
        else:
            self._check_doc(deep)
        return self.stats()

    def _check_elem(self, deep):
        recs = self.records()
        prev = None
        seen = set()
        per_sid = {}
        for r in recs:
            key = _elem_key(r)
            if prev is not None and key < prev:
                raise StoreError("element table is out of key order")
            prev = key
            if key in seen:
                raise StoreError("duplicate element key %r" % (key,))
            seen.add(key)
            if r.sid not in self.sd.nodes:
                raise StoreError("record sid s%d is not a summary node" % r.sid)
            per_sid[r.sid] = per_sid.get(r.sid, 0) + 1
        for sid in self.sd.sids():
            if per_sid.get(sid, 0) != self.sd.extent_size(sid):
                raise StoreError(
                    "s%d has %d records but extent size %d"
                    % (sid, per_sid.get(sid, 0), self.sd.extent_size(sid))
                )
        if not deep:
            return
        by_doc = {}
        for r in recs:
            by_doc.setdefault(r.doc_id, []).append(r)
        for d in self.collection.ids():
            g = self.collection.graph(d)
            nodes = list(g.node_ids())
            rows = by_doc.pop(d, [])
            if len(rows) != len(nodes):
                raise StoreError(
                    "document %d has %d records for %d nodes"
                    % (d, len(rows), len(nodes))
                )
            covered = set()
            for r in rows:
                v = self._resolve_end(r)
                if g.span(v)[0] != r.start_pos:
                    raise StoreError(
                        "record (s%d, doc %d, end %d) start offset disagrees "
                        "with the parse" % (r.sid, d, r.end_pos)
                    )
                if v in covered:
                    raise StoreError("node (%d, %d) is recorded twice" % (d, v))
                covered.add(v)
        if by_doc:
            raise StoreError(
                "records reference unknown documents %s" % sorted(by_doc)
            )

    def _check_doc(self, deep):
        prev = None
        for r in self._doc_records:
            if prev is not None and r.key <= prev:
                raise StoreError("document table is out of key order")
            prev = r.key
            if r.sid not in self.sd.nodes:
                raise StoreError("record sid s%d is not a summary node" % r.sid)
            if r.doc_id not in self.collection._names:
                raise StoreError("record references unknown document %d" % r.doc_id)
        if not deep:
            return
        owner = {}
        per_sid = {}
        for sid in self.sd.sids():
            for d, v in self.extent_lookup(sid):
                if (d, v) in owner:
                    raise StoreError(
                        "node (%d, %d) belongs to both s%d and s%d"
                        % (d, v, owner[(d, v)], sid)
                    )
                owner[(d, v)] = sid
                per_sid[sid] = per_sid.get(sid, 0) + 1
            if {d for d, _ in self.extent_lookup(sid)} != self.docs_lookup(sid):
                raise StoreError("document rows of s%d disagree with its extent" % sid)
            if per_sid.get(sid, 0) != self.sd.extent_size(sid):
                raise StoreError(
                    "s%d evaluates to %d members but records size %d"
                    % (sid, per_sid.get(sid, 0), self.sd.extent_size(sid))
                )
        for d in self.collection.ids():
            g = self.collection.graph(d)
            missing = [v for v in g.node_ids() if (d, v) not in owner]
            if missing:
                raise StoreError(
                    "document %d nodes %s are in no extent" % (d, missing[:5])
                )

    def stats(self):
        out = dict(self.sd.stats())
        out["mode"] = self.mode
        out["skippedFiles"] = len(self.skipped)
        if self.mode == MATERIALIZED:
            if self._elem_count is not None:
                out["elemRecords"] = self._elem_count
            elif self._elem_path is not None:
                out["elemRecords"] = _table_count(self._elem_path)
            else:
                out["elemRecords"] = 0
        else:
            out["docRecords"] = len(self._doc_records)
        return out

    def signature(self, include_stability=True):
        """Canonical structure for diffing two stores' summaries."""
        nodes = tuple(
            (sid, self.sd.label(sid), self.sd.axpre(sid),
             tuple(sorted(self.extent_lookup(sid))))
            for sid in self.sd.sids()
        )
        if include_stability:
            edges = tuple(
                (si, ax, sj, self.sd.edges[(si, ax, sj)].value)
                for si, ax, sj in sorted(self.sd.edges)
            )
        else:
            edges = tuple(sorted(self.sd.edges))
        return (nodes, edges)

    # -- snapshots

    def save(self, directory=None):
        directory = directory or self.root
        if directory is None:
            raise UsageError("no directory to save the store into")
        os.makedirs(directory, exist_ok=True)
        docs = []
        for doc_id in self.collection.ids():
            p = self.collection.path(doc_id)
            if p is None:
                raise UsageError(
                    "document %d was ingested from memory; snapshots need "
                    "path-backed collections" % doc_id
                )
            docs.append({
                "id": doc_id,
                "path": os.path.relpath(os.path.abspath(p), os.path.abspath(directory)),
            })
        manifest = {
            "v": 1,
            "mode": self.mode,
            "docs": docs,
            "skipped": [{"path": p, "error": str(e)} for p, e in self.skipped],
        }
        _dump_json(os.path.join(directory, "manifest.json"), manifest)
        payload = self.sd.to_json()
        payload["nextSid"] = self.sd.next_sid
        _dump_json(os.path.join(directory, "sdgraph.json"), payload)
        _dump_json(
            os.path.join(directory, "ees.json"),
            {"v": 1, "ees": [self.ees[s].to_json() for s in sorted(self.ees)]},
        )
        if self.mode == MATERIALIZED:
            target = os.path.join(directory, "elemdb.bin")
            if self._elem_records is not None:
                _write_elem(target, self._elem_records)
            elif self._elem_path is not None:
                if os.path.abspath(self._elem_path) != os.path.abspath(target):
                    shutil.copyfile(self._elem_path, target)
            else:
                _write_elem(target, [])
            self._elem_path = target
        else:
            _write_doc(os.path.join(directory, "docdb.bin"), self._doc_records)
        self.root = directory
        return directory

    @classmethod
    def load(cls, directory, cache_size=8):
        manifest = _read_json(os.path.join(directory, "manifest.json"))
        if manifest.get("v") != 1:
            raise StoreError("unsupported manifest version %r" % manifest.get("v"))
        mode = manifest.get("mode")
        if mode not in (MATERIALIZED, VIRTUAL):
            raise StoreError("manifest names unknown mode %r" % mode)
        coll = Collection(cache_size=cache_size)
        for entry in manifest["docs"]:
            path = entry["path"]
            if not os.path.isabs(path):
                path = os.path.normpath(os.path.join(directory, path))
            try:
                doc_id = coll.add_path(path, validate=False)
            except OSError as exc:
                raise StoreError("document file missing: %s" % exc) from None
            if doc_id != entry["id"]:
                raise StoreError("manifest ids are not dense in order")
        skipped = [(s["path"], s["error"]) for s in manifest.get("skipped", ())]

        sdg = _read_json(os.path.join(directory, "sdgraph.json"))
        sd = SummaryDescriptor(coll, sdg["axpres"], tuple(sdg["sdAxes"]))
        for n in sdg["nodes"]:
            sd.nodes[n["sid"]] = SdNode(n["sid"], n["label"], n["axpre"], set())
        sd.extent_counts = {n["sid"]: n["extentSize"] for n in sdg["nodes"]}
        for e in sdg["edges"]:
            sd.edges[(e["from"], e["axis"], e["to"])] = Stability(e["stability"])
        sd.seq = sdg["seq"]
        sd.next_sid = sdg["nextSid"]

        ees = {}
        for entry in _read_json(os.path.join(directory, "ees.json"))["ees"]:
            sid = entry["sid"]
            if sid not in sd.nodes:
                raise StoreError("expression recorded for unknown sid s%d" % sid)
            ees[sid] = ExtentExpression(sid, entry["text"], EeKind(entry["kind"]))
            sd.nodes[sid].ee = entry["text"]

        store = cls(coll, sd, mode, ees=ees, skipped=skipped, root=directory)
        if mode == MATERIALIZED:
            path = os.path.join(directory, "elemdb.bin")
            if not os.path.exists(path):
                raise StoreError("materialized store lacks %s" % path)
            store._elem_path = path
            store._elem_count = _table_count(path)
        else:
            store._doc_records = _read_doc(os.path.join(directory, "docdb.bin"))
        return store


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True))
        fh.write("\n")


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise StoreError("cannot open %s: %s" % (path, exc)) from None
    except ValueError as exc:
        raise StoreError("%s is not valid JSON: %s" % (path, exc)) from None


# ---------------------------------------------------------------------------
# ingestion


def _virtualize(sd):
    sd.extent_counts = {sid: len(sd.nodes[sid].extent) for sid in sd.nodes}
    for node in sd.nodes.values():
        node.extent.clear()
    sd.sid_of.clear()
    sd._adj = None


def ingest(paths, mode, axpres_or_k, sd_axes=DEFAULT_SD_AXES, store_dir=None,
           cache_size=8, with_edges=True, classify=False):
    """Parse the files, build the summary and fill the tables.

    ``axpres_or_k`` is either a chain length (a number, infinity for
    the unbounded ancestor summary) or a refinement expression set.
    Document ids are dense and follow ingestion order; files that
    cannot be read or parsed are skipped, flagged on the handle and
    consume no id.  Materialized mode fills the element table, virtual
    mode fills the document table and generates extent expressions.
    Given a ``store_dir``, chain builds spool records to disk instead
    of holding extents in memory, and the handle is saved there.
    """
    if mode not in (MATERIALIZED, VIRTUAL):
        raise UsageError("mode must be %r or %r" % (MATERIALIZED, VIRTUAL))
    numeric = isinstance(axpres_or_k, (int, float)) and not isinstance(
        axpres_or_k, bool
    )
    coll = Collection(cache_size=cache_size)
    skipped = []
    for path in paths:
        try:
            coll.add_path(path)
        except (OSError, DataError) as exc:
            skipped.append((str(path), exc))

    if numeric and mode == MATERIALIZED and store_dir is not None:
        os.makedirs(store_dir, exist_ok=True)
        spool = _ElemSpool(store_dir)
        sd = build_pk(coll, axpres_or_k, sd_axes, with_edges=with_edges,
                      row_sink=spool.add)
        target = os.path.join(store_dir, "elemdb.bin")
        total = spool.finish(target)
        store = EngineStore(coll, sd, MATERIALIZED, skipped=skipped,
                            elem_path=target, root=store_dir)
        store._elem_count = total
        store.save(store_dir)
        return store

    if numeric:
        sd = build_pk(coll, axpres_or_k, sd_axes, with_edges=with_edges)
    else:
        exprs = axpres_or_k
        if isinstance(exprs, str) or not hasattr(exprs, "__iter__"):
            exprs = [exprs]
        sd = create_sd(coll, list(exprs), sd_axes, with_edges=with_edges)
    if classify:
        sd.classify_all()
    store = store_from_sd(coll, sd, mode, skipped=skipped)
    if store_dir is not None:
        store.save(store_dir)
    return store


def store_from_sd(collection, sd, mode, skipped=()):
    """Wrap a built summary in a store handle, filling the tables from
    its materialized extents.

    Virtual mode generates extent expressions first and refuses nodes
    that admit none, then drops the extents in favour of counts.
    """
    if mode == MATERIALIZED:
        rows = []
        for d in collection.ids():
            g = collection.graph(d)
            for v in g.node_ids():
                sid = sd.sid_of.get((d, v))
                if sid is None:
                    raise ContractViolation(
                        "node (%d, %d) is in no summary extent" % (d, v)
                    )
                start, end = g.span(v)
                rows.append(ElemRecord(sid, d, end, start, None))
        rows.sort(key=_elem_key)
        return EngineStore(collection, sd, MATERIALIZED, elem_records=rows,
                           skipped=skipped)
    ees = annotate_all(sd)
    missing = [sid for sid in sd.sids() if sd.node(sid).ee is None]
    if missing:
        raise NotDistinguishableError(missing)
    rows = sorted({(sid, d) for sid in sd.sids() for d, _ in sd.extent(sid)})
    _virtualize(sd)
    return EngineStore(
        collection, sd, VIRTUAL,
        doc_records=[DocRecord(s, d) for s, d in rows],
        ees=ees, skipped=skipped,
    )


class IndexLock:
    """Advisory exclusive lock on an index directory.

    Held for the lifetime of whoever opens the directory, so only one
    process works an index at a time.
    """

    def __init__(self, directory):
        self.directory = directory
        self.path = os.path.join(directory, ".lock")
        self._fh = None

    def acquire(self):
        os.makedirs(self.directory, exist_ok=True)
        fh = open(self.path, "w")
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            fh.close()
            raise IndexLockedError(
                "index directory %s is held by another process" % self.directory
            ) from None
        self._fh = fh
        return self

    def release(self):
        if self._fh is not None:
            fcntl.flock(self._fh, fcntl.LOCK_UN)
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self.acquire()

    def __exit__(self, *exc):
        self.release()
