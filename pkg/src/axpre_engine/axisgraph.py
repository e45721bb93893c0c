"""XML documents as rooted, ordered graphs of labelled nodes.

A document is modelled as its elements plus its attributes; attributes
appear as children labelled ``@name`` placed before the element children,
in declaration order.  Node ids are preorder ordinals starting at 1, so
document order is ordinal order.  Text is never a node: string values are
re-read from the source bytes through the node spans.

The primitive relations are firstchild (``fc``) and nextsibling (``ns``)
together with their inverses; every other axis is derived from them but
implemented directly on the preorder arrays.
"""

import re
import sys
from collections import OrderedDict
from xml.parsers import expat

from .errors import DocumentParseError, UnknownAxisError, UsageError

#: Axes whose step results come back in document order.  The remaining
#: axes answer in reverse document order (nearest node first).
FORWARD_AXES = frozenset({"s", "c", "d", "ds", "f", "fs", "fc", "ns"})

AXIS_INVERSE = {
    "s": "s",
    "c": "p",
    "p": "c",
    "d": "a",
    "a": "d",
    "ds": "as",
    "as": "ds",
    "f": "pc",
    "pc": "f",
    "fs": "ps",
    "ps": "fs",
    "fc": "fc_inv",
    "fc_inv": "fc",
    "ns": "ns_inv",
    "ns_inv": "ns",
}

AXES = frozenset(AXIS_INVERSE)

#: Axes that may label summary graph edges by default.
DEFAULT_SD_AXES = ("c", "fc", "ns", "p", "fs", "ps")

_XML_NS = "http://www.w3.org/XML/1998/namespace"

_ENTITY = re.compile(rb"&(#[xX]?[0-9A-Fa-f]+|[A-Za-z][A-Za-z0-9]*);")
_NAMED_ENTITIES = {
    b"lt": b"<",
    b"gt": b">",
    b"amp": b"&",
    b"quot": b'"',
    b"apos": b"'",
}


def _decode_entities(chunk):
    def repl(m):
        name = m.group(1)
        if name[:2] in (b"#x", b"#X"):
            return chr(int(name[2:], 16)).encode("utf-8")
        if name[:1] == b"#":
            return chr(int(name[1:])).encode("utf-8")
        return _NAMED_ENTITIES.get(name, m.group(0))

    return _ENTITY.sub(repl, chunk)


def _tag_end(source, start):
    """Offset one past the ``>`` closing the tag that starts at ``start``."""
    quote = 0
    for i in range(start, len(source)):
        b = source[i]
        if quote:
            if b == quote:
                quote = 0
        elif b in (34, 39):
            quote = b
        elif b == 62:
            return i + 1
    raise DocumentParseError("<bytes>", "unterminated tag at offset %d" % start)


def text_within(source, span):
    """String value of the region ``span`` of ``source``.

    For attribute spans (which start at the opening quote) this is the
    decoded attribute value; for element spans it is the concatenation of
    all text content inside the span, entities decoded, tags skipped.
    """
    start, end = span
    if source[start] in (34, 39):  # quoted attribute value
        return _decode_entities(source[start + 1 : end - 1]).decode("utf-8", "replace")
    out = []
    i = start
    while i < end:
        if source[i] == 60:  # '<'
            if source.startswith(b"<!--", i):
                j = source.find(b"-->", i + 4)
                i = j + 3 if j >= 0 else end
            elif source.startswith(b"<![CDATA[", i):
                j = source.find(b"]]>", i + 9)
                out.append(source[i + 9 : j if j >= 0 else end])
                i = j + 3 if j >= 0 else end
            elif source.startswith(b"<?", i):
                j = source.find(b"?>", i + 2)
                i = j + 2 if j >= 0 else end
            else:
                i = _tag_end(source, i)
        else:
            j = source.find(b"<", i, end)
            if j < 0:
                j = end
            out.append(_decode_entities(source[i:j]))
            i = j
    return b"".join(out).decode("utf-8", "replace")


class AxisGraph:
    """One parsed document.  All per-node arrays are 1-based."""

    __slots__ = (
        "doc_id",
        "source",
        "labels",
        "parent",
        "first_child",
        "next_sibling",
        "prev_sibling",
        "children",
        "subtree_end",
        "spans",
        "size",
    )

    def __init__(self, doc_id, labels, parent, first_child, next_sibling, spans, source):
        self.doc_id = doc_id
        self.source = source
        self.labels = labels
        self.parent = parent
        self.first_child = first_child
        self.next_sibling = next_sibling
        self.spans = spans
        n = len(labels) - 1
        self.size = n
        prev = [0] * (n + 1)
        children = [None] * (n + 1)
        subtree_end = list(range(n + 1))
        for v in range(1, n + 1):
            children[v] = []
        for v in range(1, n + 1):
            p = parent[v]
            if p:
                children[p].append(v)
            s = next_sibling[v]
            if s:
                prev[s] = v
        for v in range(n, 0, -1):
            p = parent[v]
            if p and subtree_end[v] > subtree_end[p]:
                subtree_end[p] = subtree_end[v]
        self.prev_sibling = prev
        self.children = children
        self.subtree_end = subtree_end

    @property
    def root(self):
        return 1 if self.size else 0

    def node_ids(self):
        return range(1, self.size + 1)

    def label(self, v):
        return self.labels[v]

    def span(self, v):
        return self.spans[v]

    def strval(self, v):
        return text_within(self.source, self.spans[v])

    def is_attribute(self, v):
        return self.labels[v].startswith("@")

    def ancestors(self, v):
        out = []
        u = self.parent[v]
        while u:
            out.append(u)
            u = self.parent[u]
        return out

    def axis_step(self, v, axis):
        """Nodes related to ``v`` by ``axis``, in that axis' order."""
        if axis == "c":
            return list(self.children[v])
        if axis == "p":
            u = self.parent[v]
            return [u] if u else []
        if axis == "s":
            return [v]
        if axis == "fc":
            u = self.first_child[v]
            return [u] if u else []
        if axis == "ns":
            u = self.next_sibling[v]
            return [u] if u else []
        if axis == "fc_inv":
            u = self.parent[v]
            return [u] if u and self.first_child[u] == v else []
        if axis == "ns_inv":
            u = self.prev_sibling[v]
            return [u] if u else []
        if axis == "d":
            return list(range(v + 1, self.subtree_end[v] + 1))
        if axis == "ds":
            return list(range(v, self.subtree_end[v] + 1))
        if axis == "a":
            return self.ancestors(v)
        if axis == "as":
            return [v] + self.ancestors(v)
        if axis == "f":
            return list(range(self.subtree_end[v] + 1, self.size + 1))
        if axis == "pc":
            skip = set(self.ancestors(v))
            return [u for u in range(v - 1, 0, -1) if u not in skip]
        if axis == "fs":
            out = []
            u = self.next_sibling[v]
            while u:
                out.append(u)
                u = self.next_sibling[u]
            return out
        if axis == "ps":
            out = []
            u = self.prev_sibling[v]
            while u:
                out.append(u)
                u = self.prev_sibling[u]
            return out
        raise UnknownAxisError(axis)

    def primitive_edges(self):
        for v in range(1, self.size + 1):
            u = self.first_child[v]
            if u:
                yield (v, "fc", u)
            u = self.next_sibling[v]
            if u:
                yield (v, "ns", u)

    def export_debug(self):
        return {
            "nodes": [
                {
                    "id": v,
                    "label": self.labels[v],
                    "start": self.spans[v][0],
                    "end": self.spans[v][1],
                }
                for v in range(1, self.size + 1)
            ],
            "edges": [
                {"from": a, "axis": axis, "to": b}
                for (a, axis, b) in self.primitive_edges()
            ],
        }


def _attr_value_spans(source, tstart, tend):
    """Spans of the quoted attribute values inside one start tag."""
    spans = []
    i = tstart + 1
    # skip the element name
    while i < tend and source[i] not in b" \t\r\n/>":
        i += 1
    while i < tend:
        while i < tend and source[i] in b" \t\r\n":
            i += 1
        if i >= tend or source[i] in b"/>":
            break
        while i < tend and source[i] not in b"= \t\r\n":
            i += 1
        while i < tend and source[i] in b" \t\r\n":
            i += 1
        if i >= tend or source[i] != 61:  # '='
            break
        i += 1
        while i < tend and source[i] in b" \t\r\n":
            i += 1
        if i >= tend or source[i] not in (34, 39):
            break
        quote = source[i]
        j = source.find(bytes([quote]), i + 1, tend)
        if j < 0:
            break
        spans.append((i, j + 1))
        i = j + 1
    return spans


class _NsFrames:
    """Prefix to namespace-uri mappings, one frame per open element."""

    def __init__(self):
        self.frames = [{"xml": _XML_NS}]

    def push(self, decls):
        self.frames.append(decls)

    def pop(self):
        self.frames.pop()

    def lookup(self, prefix):
        for frame in reversed(self.frames):
            if prefix in frame:
                return frame[prefix]
        return None

    def expand(self, name, is_attr):
        if ":" in name:
            prefix, local = name.split(":", 1)
            if prefix == "xmlns":
                return name
            uri = self.lookup(prefix)
            return "{%s}%s" % (uri, local) if uri else name
        if is_attr or name == "xmlns":
            return name
        uri = self.lookup("")
        return "{%s}%s" % (uri, name) if uri else name


def parse_document(data, doc_id=0, name="<bytes>"):
    """Parse XML bytes into an :class:`AxisGraph`."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    labels = [None]
    parent = [0]
    first_child = [0]
    next_sibling = [0]
    spans = [(0, 0)]
    ns = _NsFrames()
    elem_stack = []  # [ordinal, tag_start, tag_end]
    last_child = [0]  # per open frame, 0 sentinel for the document

    parser = expat.ParserCreate()
    parser.ordered_attributes = True

    def add_node(label, parent_ord, span):
        v = len(labels)
        labels.append(sys.intern(label))
        parent.append(parent_ord)
        first_child.append(0)
        next_sibling.append(0)
        spans.append(span)
        prev = last_child[-1]
        if prev:
            next_sibling[prev] = v
        elif parent_ord:
            first_child[parent_ord] = v
        last_child[-1] = v
        return v

    def start_element(tag, attrs):
        tstart = parser.CurrentByteIndex
        tend = _tag_end(data, tstart)
        pairs = list(zip(attrs[0::2], attrs[1::2]))
        decls = {}
        for aname, avalue in pairs:
            if aname == "xmlns":
                decls[""] = avalue
            elif aname.startswith("xmlns:"):
                decls[aname[6:]] = avalue
        ns.push(decls)
        v = add_node(ns.expand(tag, False), elem_stack[-1][0] if elem_stack else 0, (tstart, tend))
        elem_stack.append([v, tstart, tend])
        last_child.append(0)
        if pairs:
            vspans = _attr_value_spans(data, tstart, tend)
            if len(vspans) != len(pairs):
                raise DocumentParseError(name, "cannot locate attribute values at offset %d" % tstart)
            for (aname, _), vspan in zip(pairs, vspans):
                add_node("@" + ns.expand(aname, True), v, vspan)

    def end_element(tag):
        v, tstart, tend = elem_stack.pop()
        last_child.pop()
        ns.pop()
        if data[tend - 2 : tend] == b"/>":
            # empty-element tag: the start tag is the whole element
            end = tend
        else:
            end = _tag_end(data, parser.CurrentByteIndex)
        spans[v] = (spans[v][0], end)

    parser.StartElementHandler = start_element
    parser.EndElementHandler = end_element
    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise DocumentParseError(
            name,
            expat.errors.messages[exc.code],
            line=exc.lineno,
            column=exc.offset,
        ) from exc
    return AxisGraph(
        doc_id,
        labels,
        parent,
        first_child,
        next_sibling,
        spans,
        data,
    )


class Collection:
    """An ordered set of documents, each carrying a dense integer id.

    Documents can be held as parsed graphs or as lazily parsed sources
    with a bounded cache, which keeps large collections affordable.
    """

    def __init__(self, cache_size=None):
        self._names = {}
        self._sources = {}
        self._paths = {}
        self._cache = OrderedDict()
        self._cache_size = cache_size
        self._order = []

    @classmethod
    def from_sources(cls, sources, cache_size=None):
        """Build from ``(name, bytes-or-str)`` pairs."""
        coll = cls(cache_size=cache_size)
        for item_name, data in sources:
            coll.add_source(item_name, data)
        return coll

    @classmethod
    def from_paths(cls, paths, cache_size=None, on_error="raise"):
        """Build from file paths; returns ``(collection, skipped)``.

        With ``on_error='skip'``, files that fail to parse are recorded in
        ``skipped`` as ``(path, error)`` pairs instead of aborting.
        """
        coll = cls(cache_size=cache_size)
        skipped = []
        for path in paths:
            try:
                coll.add_path(path)
            except DocumentParseError as exc:
                if on_error != "skip":
                    raise
                skipped.append((str(path), exc))
        return coll, skipped

    def add_source(self, name, data):
        doc_id = len(self._order) + 1
        if isinstance(data, str):
            data = data.encode("utf-8")
        parse_document(data, doc_id, name)  # validate eagerly
        self._names[doc_id] = name
        self._sources[doc_id] = data
        self._order.append(doc_id)
        return doc_id

    def add_path(self, path, validate=True):
        doc_id = len(self._order) + 1
        if validate:
            with open(path, "rb") as fh:
                data = fh.read()
            parse_document(data, doc_id, str(path))
        else:
            open(path, "rb").close()
        self._names[doc_id] = str(path)
        self._paths[doc_id] = str(path)
        self._order.append(doc_id)
        return doc_id

    def adopt(self, path, graph):
        """Register a document parsed by the caller; the graph must carry
        the id this collection would assign and it seeds the cache."""
        doc_id = len(self._order) + 1
        if graph.doc_id != doc_id:
            raise UsageError(
                "adopted graph carries doc id %r, expected %d"
                % (graph.doc_id, doc_id)
            )
        self._names[doc_id] = str(path)
        self._paths[doc_id] = str(path)
        self._order.append(doc_id)
        self._cache[doc_id] = graph
        if self._cache_size and len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return doc_id

    def __len__(self):
        return len(self._order)

    def ids(self):
        return list(self._order)

    def name(self, doc_id):
        return self._names[doc_id]

    def path(self, doc_id):
        """File behind a document, None when it came from memory."""
        return self._paths.get(doc_id)

    def source(self, doc_id):
        if doc_id in self._sources:
            return self._sources[doc_id]
        with open(self._paths[doc_id], "rb") as fh:
            return fh.read()

    def graph(self, doc_id):
        if doc_id not in self._names:
            from .errors import UnknownDocumentError

            raise UnknownDocumentError(doc_id)
        cached = self._cache.get(doc_id)
        if cached is not None:
            self._cache.move_to_end(doc_id)
            return cached
        g = parse_document(self.source(doc_id), doc_id, self._names[doc_id])
        self._cache[doc_id] = g
        if self._cache_size and len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return g

    def graphs(self):
        for doc_id in self._order:
            yield self.graph(doc_id)

    def drop_cache(self):
        """Forget parsed graphs; the next access re-parses each source."""
        self._cache.clear()

    def label_universe(self):
        labels = set()
        for g in self.graphs():
            labels.update(g.labels[1:])
        return labels
