"""Exception hierarchy. Everything raised on purpose derives from SpinLabError."""


class SpinLabError(Exception):
    """Base class for all domain errors."""


class InvalidParametersError(SpinLabError):
    """Model or operation parameters outside their admissible range."""


class NonBipartiteError(SpinLabError):
    """An edge or terminal layout violates the two-sided structure."""


class UnknownVertexError(SpinLabError):
    """A vertex id was referenced but never declared."""


class TerminalOverlapError(SpinLabError):
    """The positive and negative terminal sets intersect."""


class DegreeBoundViolatedError(SpinLabError):
    """A vertex exceeds the supplied degree bound (terminals: bound - 1)."""


class TooLargeError(SpinLabError):
    """Exact enumeration would exceed the configured cap."""


class ZeroPartitionFunctionError(SpinLabError):
    """A conditional quantity was requested but the total weight is zero."""


class DomainError(SpinLabError):
    """Function argument outside the mathematical domain."""


class NotAntiferromagneticError(SpinLabError):
    """Operation requires beta * gamma < 1."""


class NoConvergenceError(SpinLabError):
    """An iterative solve did not reach the requested tolerance."""


class InfeasibleTransportError(SpinLabError):
    """No transportation plan matches the marginals on the support."""


class InfeasibleSizesError(SpinLabError):
    """Gadget size parameters are mutually inconsistent."""


class RejectionLimitExceededError(SpinLabError):
    """Rejection sampling failed to produce a simple graph within the cap."""


class NotEnoughTerminalsError(SpinLabError):
    """A construction needs more unoccupied terminals than are available."""


class DegenerateInstanceError(SpinLabError):
    """Instance is degenerate for the requested construction (e.g. no edges)."""


class DegenerateParametersError(SpinLabError):
    """Derived parameters collapse (singular interaction or unit field)."""
