"""Random small XML documents for randomized agreement and partition tests."""

LABELS = ["a", "b", "c", "d", "e"]
ATTRS = ["x", "y"]
TEXTS = ["5", "7", "x", "ab", "2005"]


def random_doc(rng, max_nodes=10, attr_p=0.2, text_p=0.4):
    """One well-formed document with at most ``max_nodes`` nodes.

    Attributes count as nodes, matching the engine's data model.
    """
    budget = [rng.randint(1, max_nodes)]

    def element(depth):
        budget[0] -= 1
        label = rng.choice(LABELS)
        attrs = ""
        unused = list(ATTRS)
        while unused and budget[0] > 0 and rng.random() < attr_p:
            budget[0] -= 1
            attrs += ' %s="%s"' % (unused.pop(rng.randrange(len(unused))), rng.choice(TEXTS))
        kids = []
        while budget[0] > 0 and depth < 5 and rng.random() < 0.6:
            kids.append(element(depth + 1))
        if not kids and rng.random() < text_p:
            return "<%s%s>%s</%s>" % (label, attrs, rng.choice(TEXTS), label)
        if not kids:
            return "<%s%s/>" % (label, attrs)
        return "<%s%s>%s</%s>" % (label, attrs, "".join(kids), label)

    return element(0).encode()
