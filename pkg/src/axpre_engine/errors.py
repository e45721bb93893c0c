"""Exception hierarchy for the engine.

Three families matter to callers: usage errors (bad expressions or
arguments), data errors (broken documents, unknown identifiers), and
contract violations (operation preconditions that do not hold).  The CLI
maps them to exit codes 1, 2 and 3; the HTTP layer maps them to 400, 404
and 500.
"""


class EngineError(Exception):
    """Base class for every error raised by this package."""


class UsageError(EngineError):
    """The caller supplied an expression or argument we cannot accept."""


class AxpreSyntaxError(UsageError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = "%s (at offset %d)" % (message, position)
        super().__init__(message)


class XPathSyntaxError(UsageError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = "%s (at offset %d)" % (message, position)
        super().__init__(message)


class UnknownAxisError(UsageError):
    def __init__(self, axis):
        self.axis = axis
        super().__init__("unknown axis %r" % (axis,))


class XPathEvalError(UsageError):
    """An expression used a function or form outside the supported core."""


class DataError(EngineError):
    """A document or an identifier could not be resolved."""


class DocumentParseError(DataError):
    def __init__(self, path, message, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = str(path)
        if line is not None:
            where = "%s:%s:%s" % (path, line, column)
        super().__init__("%s: %s" % (where, message))


class UnknownSidError(DataError):
    def __init__(self, sid):
        self.sid = sid
        super().__init__("no summary node with sid %s" % (sid,))


class UnknownDocumentError(DataError):
    def __init__(self, doc_id):
        self.doc_id = doc_id
        super().__init__("no document with id %r" % (doc_id,))


class MissingExtentExpressionError(DataError):
    def __init__(self, sid):
        self.sid = sid
        super().__init__("no extent expression recorded for sid %s" % (sid,))


class StoreError(DataError):
    """An on-disk store file is missing, truncated or mislabeled."""


class ContractViolation(EngineError):
    """A precondition of a summary operation does not hold."""


class ContainmentError(ContractViolation):
    """The refining expression does not refine the node it targets."""


class NotBisimilarError(ContractViolation):
    """Contraction was asked for neighbourhoods that are not pairwise bisimilar."""


class InclusionError(ContractViolation):
    """Representative neighbourhoods are in an inclusion relationship."""

    def __init__(self, sids):
        self.sids = tuple(sids)
        super().__init__(
            "representative neighbourhoods of %s are in an inclusion relationship"
            % (", ".join("s%d" % s for s in self.sids),)
        )


class NotDistinguishableError(ContractViolation):
    """Two classes share one label-path set, so no extent expression exists."""

    def __init__(self, sids):
        self.sids = tuple(sids)
        super().__init__(
            "classes %s are not label-path distinguishable"
            % (", ".join("s%d" % s for s in self.sids),)
        )


class CoverageError(ContractViolation):
    """Refining expressions failed to cover the extent they partition."""


class PartitionError(ContractViolation):
    """A set of expressions does not induce a partition of the collection."""


class AdaptationError(ContractViolation):
    """No summary node can host the refinement a query asks for."""


class StaleSequenceError(ContractViolation):
    """A mutation was submitted against an outdated summary sequence number."""

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(
            "summary changed underneath the request (sequence %s, got %s)"
            % (actual, expected)
        )


class IndexLockedError(DataError):
    def __init__(self, path):
        self.path = path
        super().__init__("index directory %s is locked by another process" % (path,))
