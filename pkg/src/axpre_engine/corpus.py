"""Deterministic synthetic corpora in three familiar XML shapes.

A summary only shows its worth on a collection that mixes documents
which look alike from afar and differ up close.  Every generator here
therefore draws each document from weighted structural strata: the
answer label at the wrong chain, the right chain with the wrong child
composition, the right children in the wrong sibling order, and the
full pattern with or without the text a value predicate looks for.
Corpora are pure functions of (family, count, seed).
"""

import os
import random

_WORDS = (
    "archive board canvas cascade cavern cedar circuit cliff comet crater "
    "current delta drift dune echo ember estuary fathom fern flint fog "
    "gale glacier grove harbor hollow inlet iris juniper kestrel lagoon "
    "larch ledge lichen marsh meadow mesa mirror moraine moth night oak "
    "orchard outcrop oxbow pebble pine plain pollen quarry quartz reed "
    "ridge rill river saddle sandbar shale shoal sleet spruce summit "
    "swale tarn terrace thicket tide timber trail tundra vale willow"
).split()

_SURNAMES = (
    "Ainsworth Beaumont Carver Dunmore Ellery Farrow Graves Holloway "
    "Inglewood Jardine Kembleton Lockridge Marlowe Norcross Ostrander "
    "Pemberton Quill Ravenscroft Selwyn Thackeray Underhill Vance "
    "Wetherell Yarrow"
).split()


def _sent(rng, lo, hi):
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(lo, hi)))


def _para(rng, n, lo=6, hi=14):
    return ". ".join(_sent(rng, lo, hi) for _ in range(n)) + "."


def _pick(rng, table):
    r = rng.random() * sum(w for _, w in table)
    for name, w in table:
        r -= w
        if r < 0:
            return name
    return table[-1][0]


def _date(rng):
    return "%02d %s %d 0%d:%02d:00 GMT" % (
        rng.randint(1, 28),
        rng.choice(("Jan", "Feb", "Mar", "Apr", "Jun", "Sep", "Oct", "Nov")),
        rng.randint(1998, 2012),
        rng.randint(1, 9),
        rng.randint(0, 59),
    )


# ---------------------------------------------------------------------------
# RSS-like feeds

_IMAGE_KIND = (
    # where an image element sits and which children it carries
    ("none", 28),
    ("item-only", 30),     # image inside an item, not under the channel
    ("shuffled", 17),      # all six children, description before link
    ("partial", 11),       # title, url, link and nothing else
    ("untitled", 9),       # url and link only
    ("ordered", 5),        # the canonical six-child sequence
)

_ENCLOSURES = (
    ("zero", 54),
    ("single", 28),
    ("double", 13),        # two in a row is one short of a podcast set
    ("triple", 1),
    ("spread", 2),         # several enclosures separated by other children
)

_ITEM_DESC = (
    ("absent", 30),
    ("after-link", 62),
    ("before-link", 8),
)

_ITEM_BODY = (
    ("none", 40),
    ("one-p", 33),
    ("no-p", 24),
    ("p-p-img", 2),
)


def _rss_image(rng, kind):
    w, h = rng.randint(60, 200), rng.randint(60, 200)
    rows = {
        "title": "<title>%s</title>" % _sent(rng, 2, 4),
        "url": "<url>http://img.%s.example/logo.gif</url>" % rng.choice(_WORDS),
        "link": "<link>http://%s.example/</link>" % rng.choice(_WORDS),
        "width": "<width>%d</width>" % w,
        "height": "<height>%d</height>" % h,
        "description": "<description>%s</description>" % _sent(rng, 4, 9),
    }
    order = {
        "ordered": ("title", "url", "link", "width", "height", "description"),
        "shuffled": ("title", "url", "description", "link", "width", "height"),
        "partial": ("title", "url", "link"),
        "untitled": ("url", "link"),
    }[kind]
    return "<image>" + "".join(rows[k] for k in order) + "</image>"


def _rss_item(rng, flags, scale):
    desc_mode, enc_mode, body_mode, image_inside = flags
    out = ["<item>", "<title>%s</title>" % _sent(rng, 3, 7)]
    link = "<link>http://%s.example/%d</link>" % (
        rng.choice(_WORDS),
        rng.randint(100, 9999),
    )
    year = "2005" if rng.random() < 0.5 else str(rng.randint(1999, 2011))
    desc = "<description>%s Published in %s. %s</description>" % (
        _para(rng, max(1, int(4 * scale)), 10, 24),
        year,
        _sent(rng, 8, int(30 * scale) + 8),
    )
    if desc_mode == "before-link":
        out += [desc, link]
    elif desc_mode == "after-link":
        out += [link, desc]
    else:
        out.append(link)
    out.append("<pubDate>%s</pubDate>" % _date(rng))
    if rng.random() < 0.6:
        out.append("<guid>urn:feed:%d</guid>" % rng.randint(10**6, 10**7))
    if rng.random() < 0.4:
        out.append("<category>%s</category>" % rng.choice(_WORDS))
    if rng.random() < 0.5:
        out.append("<author>%s %s</author>" % (rng.choice(_WORDS), rng.choice(_SURNAMES)))
    if scale >= 0.5:
        out.append("<content>%s</content>" % _para(rng, rng.randint(3, 6), 12, 26))
    if body_mode != "none":
        ptext = lambda: "<p>%s</p>" % _sent(rng, 5, 12)
        img = "<img><width>%d</width><height>%d</height></img>" % (
            (64, 64) if rng.random() < 0.5 else (rng.randint(40, 90), 120)
        )
        if body_mode == "p-p-img":
            kids = ptext() + ptext() + img + ptext()
        elif body_mode == "one-p":
            kids = ptext() + (img if rng.random() < 0.5 else "<ul>%s</ul>" % _sent(rng, 3, 6))
        else:
            kids = "<ul>%s</ul>" % _sent(rng, 3, 6) + img
        out.append("<body>" + kids + "</body>")
    if image_inside:
        out.append(_rss_image(rng, "partial"))
    n_enc = {"zero": 0, "single": 1, "double": 2, "triple": rng.randint(3, 4), "spread": 3}[
        enc_mode
    ]
    for i in range(n_enc):
        enc = '<enclosure url="http://cdn.example/%d.mp3" length="%d" type="%s"/>' % (
            rng.randint(10**5, 10**6),
            rng.randint(2 * 10**6, 9 * 10**6),
            "audio/mpeg" if rng.random() < 0.55 else "audio/ogg",
        )
        out.append(enc)
        if enc_mode == "spread" and i < 2:
            out.append("<category>%s</category>" % rng.choice(_WORDS))
    out.append("</item>")
    return "".join(out)


def rss_doc(rng, scale=1.0, force=None):
    image_kind = _pick(rng, _IMAGE_KIND)
    desc_mode = _pick(rng, _ITEM_DESC)
    enc_mode = "triple" if force == "podcast" else _pick(rng, _ENCLOSURES)
    body_mode = "p-p-img" if force == "gallery" else _pick(rng, _ITEM_BODY)
    n_items = rng.randint(max(3, int(26 * scale)), max(5, int(42 * scale)))
    out = [
        "<rss version=\"2.0\"><channel>",
        "<title>%s</title>" % _sent(rng, 2, 5).title(),
        "<link>http://%s.example/feed</link>" % rng.choice(_WORDS),
        "<description>%s</description>" % _para(rng, 2),
        "<language>en-us</language>",
    ]
    if rng.random() < 0.8:
        out.append("<pubDate>%s</pubDate>" % _date(rng))
    if image_kind not in ("none", "item-only"):
        out.append(_rss_image(rng, image_kind))
    # the special shape lands in a couple of items, the rest stay plain
    marked = set(rng.sample(range(n_items), min(n_items, rng.randint(1, 3))))
    for i in range(n_items):
        flags = (
            desc_mode if desc_mode != "before-link" or i in marked else "after-link",
            enc_mode if i in marked else ("single" if rng.random() < 0.15 else "zero"),
            body_mode if i in marked else "none",
            image_kind == "item-only" and i in marked,
        )
        out.append(_rss_item(rng, flags, scale))
    out.append("</channel></rss>")
    return "".join(out)


# ---------------------------------------------------------------------------
# Protein-interaction records

_ORGANISM = (
    ("absent", 18),
    ("bare", 10),          # taxonomy attribute only, no child elements
    ("plain", 57),         # names, nothing about cell lines
    ("cell-after", 3),     # names first, a cellType somewhere after
    ("cell-before", 9),    # cellType ahead of names
    ("cell-gap", 3),       # names, then compartment, then cellType
)

_BIBREF = (
    ("absent", 47),
    ("primary-only", 48),
    ("with-secondary", 4),
)

_HOST = (
    ("none", 14),
    ("unwrapped", 24),     # hostOrganism directly under the description
    ("plain", 38),         # names and a cell line, nothing about tissue
    ("bare", 10),
    ("in-order", 4),       # names, cellType, tissue
    ("reversed", 9),       # names, tissue, cellType
)

_CELL_CONTENT = (
    ("names-xref", 25),
    ("names-only", 50),
    ("bare", 25),
)

_AA = "ACDEFGHIKLMNPQRSTVWY"


def _names(rng, label=None, full=None):
    return "<names><shortLabel>%s</shortLabel><fullName>%s</fullName></names>" % (
        label or rng.choice(_WORDS),
        full or _sent(rng, 4, 10),
    )


def _cell_type(rng, content, species=None):
    if content == "bare":
        return '<cellType db="cabri"/>'
    inner = _names(rng, full=species or _sent(rng, 3, 7))
    if content == "names-xref":
        inner += '<xref><primaryRef db="cabri" id="%d"/></xref>' % rng.randint(100, 999)
    return "<cellType>%s</cellType>" % inner


def _xref(rng, secondary, ref_type=None):
    out = ['<xref><primaryRef db="pubmed" id="%d"/>' % rng.randint(10**7, 10**8)]
    for _ in range(secondary):
        out.append(
            '<secondaryRef db="%s" id="%d" refType="%s"/>'
            % (
                rng.choice(("pubmed", "doi", "mint")),
                rng.randint(10**5, 10**6),
                ref_type or rng.choice(("identity", "see-also")),
            )
        )
    out.append("</xref>")
    return "".join(out)


def _host_organism(rng, mode, marked):
    attrs = ' ncbiTaxId="%d"' % rng.randint(4000, 12000)
    if mode == "bare":
        return "<hostOrganism%s/>" % attrs
    parts = [_names(rng)]
    tissue = "<tissue>%s</tissue>" % (
        "vascular endothelium lining" if marked else _sent(rng, 2, 4)
    )
    cell = _cell_type(rng, "names-only")
    if mode == "in-order":
        if rng.random() < 0.7:
            parts += [cell, tissue]
        else:
            parts += [cell, '<compartment>%s</compartment>' % rng.choice(_WORDS), tissue]
    elif mode == "reversed":
        parts += [tissue, cell]
    else:
        parts.append(cell)
    return "<hostOrganism%s>%s</hostOrganism>" % (attrs, "".join(parts))


def _experiment(rng, bib_mode, host_mode, marked_host, marked_bib=False):
    out = ['<experimentDescription id="%d">' % rng.randint(1, 9999)]
    out.append(_names(rng, full=_para(rng, rng.randint(3, 6), 10, 20)))
    if bib_mode != "absent":
        secondary = 0 if bib_mode == "primary-only" else rng.randint(1, 3)
        ref_type = None
        if bib_mode == "with-secondary" and (marked_bib or rng.random() < 0.4):
            ref_type = "method reference"
        out.append("<bibref>%s</bibref>" % _xref(rng, secondary, ref_type))
    if host_mode == "unwrapped":
        out.append(_host_organism(rng, "plain", False))
    elif host_mode != "none":
        hosts = [_host_organism(rng, host_mode, marked_host)]
        if rng.random() < 0.3:
            hosts.append(_host_organism(rng, "plain", False))
        out.append("<hostOrganismList>%s</hostOrganismList>" % "".join(hosts))
    out.append(
        "<interactionDetectionMethod>%s</interactionDetectionMethod>" % _names(rng)
    )
    out.append("</experimentDescription>")
    return "".join(out)


def _interactor(rng, org_mode, cell_content, marked):
    species = "Cercopithecus aethiops kidney line" if marked else None
    out = ['<interactor id="%d">' % rng.randint(1, 99999), _names(rng)]
    if rng.random() < 0.9:
        out.append(_xref(rng, rng.randint(0, 2)))
    if org_mode != "absent":
        attrs = ' ncbiTaxId="%d"' % rng.randint(4000, 12000)
        if org_mode == "bare":
            out.append("<organism%s/>" % attrs)
        else:
            kids = [_names(rng, full=species or _sent(rng, 3, 6))]
            cell = _cell_type(rng, cell_content, species)
            if org_mode == "cell-after":
                kids.append(cell)
            elif org_mode == "cell-before":
                kids.insert(0, cell)
            elif org_mode == "cell-gap":
                kids += ["<compartment>%s</compartment>" % rng.choice(_WORDS), cell]
            out.append("<organism%s>%s</organism>" % (attrs, "".join(kids)))
    out.append(
        "<sequence>%s</sequence>"
        % "".join(rng.choice(_AA) for _ in range(rng.randint(3200, 6400)))
    )
    out.append("</interactor>")
    return "".join(out)


def _interaction(rng, n_interactors):
    out = ["<interaction>", _names(rng), "<participantList>"]
    for _ in range(rng.randint(2, 4)):
        out.append(
            "<participant><interactorRef>%d</interactorRef>%s</participant>"
            % (
                rng.randint(1, max(1, n_interactors)),
                "<expRoleList><expRole>%s</expRole></expRoleList>" % rng.choice(("bait", "prey"))
                if rng.random() < 0.8
                else "",
            )
        )
    out.append("</participantList></interaction>")
    return "".join(out)


def psimi_doc(rng, force=None):
    org_mode = "cell-after" if force == "cell-line" else _pick(rng, _ORGANISM)
    bib_mode = "with-secondary" if force == "method-ref" else _pick(rng, _BIBREF)
    host_mode = "in-order" if force == "tissue-host" else _pick(rng, _HOST)
    cell_content = "names-xref" if force == "cell-line" else _pick(rng, _CELL_CONTENT)
    marked = force == "cell-line" or (
        org_mode in ("cell-after", "cell-before", "cell-gap") and rng.random() < 0.5
    )
    marked_host = force == "tissue-host" or (
        host_mode == "in-order" and rng.random() < 0.75
    )
    out = ['<entrySet level="2" version="5"><entry>']
    if rng.random() < 0.45:
        out.append(
            '<source releaseDate="%d-0%d-01">%s<organism ncbiTaxId="%d">%s</organism></source>'
            % (
                rng.randint(2003, 2011),
                rng.randint(1, 9),
                _names(rng),
                rng.randint(4000, 12000),
                _names(rng),
            )
        )
    out.append("<experimentList>")
    n_exp = rng.randint(2, 3)
    for i in range(n_exp):
        out.append(
            _experiment(
                rng,
                bib_mode,
                host_mode,
                marked_host and i == 0,
                force == "method-ref" and i == 0,
            )
        )
    out.append("</experimentList><interactorList>")
    n_int = rng.randint(7, 12)
    special = rng.randrange(n_int)
    for i in range(n_int):
        mode = org_mode if i == special else rng.choice(("plain", "plain", "absent"))
        out.append(_interactor(rng, mode, cell_content, marked and i == special))
    out.append("</interactorList><interactionList>")
    for _ in range(rng.randint(6, 11)):
        out.append(_interaction(rng, n_int))
    out.append("</interactionList></entry></entrySet>")
    return "".join(out)


# ---------------------------------------------------------------------------
# Encyclopedia articles

_FIG_DEEP = (
    ("none", 22),
    ("depth-two", 46),     # figure one level too shallow for the pattern
    ("no-break", 16),      # caption links without the br between them
    ("no-caption", 12),
    ("full", 2),
)

_FIG_SHALLOW = (("none", 55), ("depth-two", 45))

_SUBSCRIPT = (
    ("none", 28),
    ("misplaced", 39),     # subs in paragraphs outside the section chain
    ("flat", 15),          # subs with text only
    ("deep", 14),          # nested subs, no trailing sibling
    ("full", 3),
)

_DEPTH = (
    ("two", 25),
    ("three", 26),
    ("plain-four", 33),    # deep sections with broken paragraph runs
    ("untitled-four", 12),
    ("full-four", 3),
)

_TEMPLATE = (
    ("none", 15),
    ("flat", 69),          # links live in paragraphs, not templates
    ("nested-plain", 12),
    ("nested-full", 3),
)


def _wlink(rng, marked=False):
    name = "William de Longespee" if marked else "%s %s" % (
        rng.choice(_WORDS).title(),
        rng.choice(_SURNAMES),
    )
    return "<wikipedialink>%s</wikipedialink>" % name


def _clink(rng):
    return "<collectionlink>%s %s</collectionlink>" % (
        rng.choice(_WORDS).title(),
        rng.choice(_WORDS),
    )


def _wiki_p(rng, inline_wlink, sub_kind, mention=None):
    bits = [_para(rng, rng.randint(6, 10), 16, 30)]
    if mention:
        bits.append(" %s " % mention)
    if inline_wlink and rng.random() < 0.5:
        bits.append(_wlink(rng))
    if rng.random() < 0.3:
        bits.append(_clink(rng))
    if sub_kind == "flat":
        bits.append("<sub>%d</sub>" % rng.randint(2, 9))
    elif sub_kind == "deep":
        bits.append("<sub>x<sub><sub>%d</sub></sub></sub>" % rng.randint(2, 9))
    elif sub_kind == "full":
        bits.append("<sub>k<sub><sub>2</sub><sub>%d</sub></sub></sub>" % rng.randint(3, 9))
    bits.append(" " + _para(rng, rng.randint(4, 7), 16, 30))
    return "<p>%s</p>" % "".join(bits)


def _figure(rng, kind, marked):
    caption = ["caption "]
    if marked:
        caption.append("after Loutherbourg ")
    if kind == "no-caption":
        return "<figure><image>f%d.jpg</image><description>%s</description></figure>" % (
            rng.randint(1, 999),
            _sent(rng, 4, 8),
        )
    caption.append(_clink(rng))
    if kind == "full":
        caption.append("<br/>")
    caption.append(_clink(rng))
    caption.append(" " + _sent(rng, 3, 7))
    return "<figure><image>f%d.jpg</image><caption>%s</caption></figure>" % (
        rng.randint(1, 999),
        "".join(caption),
    )


def _w3_section(rng, kind, marked):
    out = ["<section>"]
    if kind != "untitled-four":
        out.append("<title>%s</title>" % _sent(rng, 2, 4).title())
    mention = "facing extinction" if marked else None
    if kind == "full-four":
        out.append(_wiki_p(rng, False, None, mention))
        out.append(_wiki_p(rng, False, None))
        out.append(_wiki_p(rng, False, None))
    else:
        out.append(_wiki_p(rng, False, None, mention))
        out.append("<ul>%s</ul>" % _sent(rng, 4, 8))
        out.append(_wiki_p(rng, False, None))
    out.append("</section>")
    return "".join(out)


def wiki_doc(rng, force=None):
    forced_depth = {"figure": "three", "chapter": "full-four"}.get(force)
    depth_mode = forced_depth or _pick(rng, _DEPTH)
    deep = depth_mode not in ("two", "three")
    fig_table = _FIG_DEEP if depth_mode != "two" else _FIG_SHALLOW
    fig_mode = "full" if force == "figure" else _pick(rng, fig_table)
    sub_mode = "full" if force == "formula" else _pick(rng, _SUBSCRIPT)
    tpl_mode = "nested-full" if force == "infobox" else _pick(rng, _TEMPLATE)
    inline = tpl_mode != "none"
    marked_fig = fig_mode == "full" and (force == "figure" or rng.random() < 0.7)
    marked_w3 = depth_mode == "full-four" and (force == "chapter" or rng.random() < 0.7)
    marked_w4 = tpl_mode == "nested-full" and (force == "infobox" or rng.random() < 0.7)
    out = [
        '<article id="%d"><title>%s</title><body>' % (
            rng.randint(10**4, 10**6),
            _sent(rng, 2, 4).title(),
        )
    ]
    out.append(_wiki_p(rng, inline, "misplaced" == sub_mode and "flat" or None))
    if tpl_mode in ("nested-plain", "nested-full"):
        rows = []
        for i in range(rng.randint(2, 4)):
            cell = _wlink(rng, marked_w4 and i == 0)
            if tpl_mode == "nested-full":
                cell += _clink(rng)
            rows.append('<template name="row">%s</template>' % cell)
        out.append('<template name="infobox">%s</template>' % "".join(rows))
    n_top = rng.randint(3, 4)
    sub_in = rng.randrange(n_top)
    for s in range(n_top):
        out.append("<section><title>%s</title>" % _sent(rng, 2, 4).title())
        k = sub_mode if (s == sub_in and sub_mode in ("flat", "deep", "full")) else None
        out.append(_wiki_p(rng, inline, k))
        for _ in range(rng.randint(1, 3)):
            out.append(_wiki_p(rng, inline, None))
        # depth two
        out.append("<section><title>%s</title>" % _sent(rng, 1, 3).title())
        out.append(_wiki_p(rng, inline, sub_mode == "misplaced" and "deep" or None))
        out.append(_wiki_p(rng, inline, None))
        if fig_mode == "depth-two" and s == 0:
            out.append(_figure(rng, "no-break", False))
        if deep or depth_mode == "three":
            # depth three
            out.append("<section><title>%s</title>" % _sent(rng, 1, 3).title())
            out.append(_wiki_p(rng, inline, None))
            if s == 0 and fig_mode in ("full", "no-break", "no-caption"):
                out.append(_figure(rng, fig_mode, marked_fig))
            if deep:
                out.append(_w3_section(rng, depth_mode, marked_w3 and s == 0))
            out.append("</section>")
        out.append("</section></section>")
    out.append("</body></article>")
    return "".join(out)


# ---------------------------------------------------------------------------
# Corpus assembly

_FAMILIES = {
    "rss": lambda rng, force: rss_doc(rng, force=force),
    "psimi": lambda rng, force: psimi_doc(rng, force=force),
    "wiki": lambda rng, force: wiki_doc(rng, force=force),
}

# The rarest strata get a deterministic floor at fixed positions, so a
# small collection always carries a few full-pattern documents no
# matter how the weighted draws fall.
_FLOOR = {
    "rss": {11: "podcast", 47: "gallery", 83: "podcast", 139: "gallery"},
    "psimi": {
        13: "cell-line",
        41: "method-ref",
        79: "tissue-host",
        107: "cell-line",
        149: "method-ref",
        163: "tissue-host",
    },
    "wiki": {
        7: "figure",
        19: "formula",
        31: "chapter",
        43: "infobox",
        89: "figure",
        101: "formula",
        113: "chapter",
        127: "infobox",
    },
}


def corpus(family, count, seed):
    """Yield ``(filename, text)`` pairs; a pure function of its args."""
    try:
        make = _FAMILIES[family]
    except KeyError:
        raise ValueError("unknown corpus family %r" % (family,)) from None
    floor = _FLOOR[family]
    rng = random.Random(seed)
    for i in range(count):
        yield "%s-%05d.xml" % (family, i + 1), make(rng, floor.get(i))


def write_corpus(directory, family, count, seed):
    """Write a corpus to ``directory`` one file at a time; returns the
    paths in generation order."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, text in corpus(family, count, seed):
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        paths.append(path)
    return paths


#: Collection sizes and seeds for the query benchmarks; fixed so pool
#: measurements are repeatable.
BENCHMARK = (("rss", 200, 11), ("psimi", 170, 23), ("wiki", 170, 37))


def benchmark_corpus(root):
    """The three standard collections under ``root``, one directory per
    family; returns ``{family: [paths]}``."""
    out = {}
    for family, count, seed in BENCHMARK:
        out[family] = write_corpus(os.path.join(root, family), family, count, seed)
    return out


def bulk_corpus(directory, count=20000, seed=5, scale=0.5):
    """A single large feed collection sized for ingestion runs: many
    small documents, written straight to disk."""
    os.makedirs(directory, exist_ok=True)
    rng = random.Random(seed)
    paths = []
    for i in range(count):
        path = os.path.join(directory, "rss-%05d.xml" % (i + 1))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(rss_doc(rng, scale=scale))
        paths.append(path)
    return paths
