"""Exception hierarchy shared by all modules."""


class NWLError(Exception):
    """Base class for all package errors."""


class DomainError(NWLError, ValueError):
    """An operation was called outside its mathematical domain."""


class CapabilityError(NWLError):
    """The request exceeds what the numerics can deliver reliably."""


class ConvergenceError(NWLError):
    """An iteration did not converge.

    The last iterate (if any) is kept on ``last`` so callers can inspect it.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class HighestWaveError(ConvergenceError):
    """The fixed-point radicand B + c^2/4 - L(phi) reached zero."""

    def __init__(self, message, last=None, point=None):
        super().__init__(message, last)
        self.point = point


class FoldError(ConvergenceError):
    """Newton Jacobian became singular (fold or bifurcation point)."""


class ResolutionError(NWLError):
    """Two discretisations that should agree do not; refine n or M."""


class InstabilityError(NWLError):
    """Time integration blew up."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
