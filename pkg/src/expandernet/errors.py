"""Exception hierarchy shared by all expandernet modules."""


class ExpanderNetError(Exception):
    """Base class for all package errors."""


class ParseError(ExpanderNetError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class JunctionDegreeError(ExpanderNetError):
    """A vertex joins an inadmissible number of triple-curve germs."""


class RefinementOverflow(ExpanderNetError):
    pass


class TemplateMismatch(ExpanderNetError):
    pass


class DegenerateFace(ExpanderNetError):
    pass


class NotManifoldVertex(ExpanderNetError):
    pass


class NotGraphical(ExpanderNetError):
    pass


class GridTooSmall(ExpanderNetError):
    pass


class LineSearchFailure(ExpanderNetError):
    """No energy decrease was found; ``state`` holds the last accepted iterate."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class TopologyBroken(ExpanderNetError):
    pass


class NotOnHyperboloid(ExpanderNetError, ValueError):
    pass


class OnIdealBoundary(ExpanderNetError, ValueError):
    pass


class OpenLink(ExpanderNetError):
    pass


class EmptyShell(ExpanderNetError):
    pass


class InvalidComplex(ExpanderNetError):
    """Raised when an operation requires a valid complex and gets an invalid one."""

    def __init__(self, outcome):
        self.outcome = outcome
        super().__init__("invalid complex: " + "; ".join(outcome.messages()[:5]))
