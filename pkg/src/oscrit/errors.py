"""Exception hierarchy shared by all oscrit modules."""


class OscritError(Exception):
    """Base class for every error raised by this package."""


class PiecewiseError(OscritError, ValueError):
    """A piecewise specification has gaps, overlaps or bad degrees."""


class OutOfDomain(OscritError, ValueError):
    """A function was evaluated before the start of its domain."""


class UnsupportedPieceDegree(OscritError):
    """An exact algorithm is only available for affine pieces."""


class IncommensuratePeriods(OscritError):
    """Periodic patterns have no common period of reasonable size."""


class ToleranceNotMet(OscritError):
    """Adaptive quadrature ran out of its evaluation budget.

    The best available result is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CacheMiss(OscritError):
    """A cumulative-table query fell outside the tabulated range."""


class InsufficientSamples(OscritError):
    """Too few samples in the tail window for a limit estimate."""


class NoRealRoot(OscritError, ValueError):
    """``exp(p*lam) = lam`` has no real root (``p > 1/e``)."""


class StepTooLarge(OscritError, ValueError):
    """Simulation step exceeds a quarter of the minimum delay."""


class BreakpointDensityExceeded(OscritError):
    """Breakpoint alignment would require too many simulation steps."""


class SchemaError(OscritError, ValueError):
    """A configuration document is malformed.

    ``path`` locates the offending node (dot separated).
    """

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class SemanticError(OscritError, ValueError):
    """A configuration parses but describes an invalid problem."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


class EvaluationFailed(OscritError):
    """A sampled functional could not be evaluated at time ``t``."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t
