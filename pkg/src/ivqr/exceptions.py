"""Errors raised during estimation.

Input and configuration problems raise plain ``ValueError``; anything that
goes wrong numerically once estimation has started derives from
``EstimationError`` so callers (and the CLI exit-code mapping) can tell the
two apart.
"""


class EstimationError(RuntimeError):
    """Numerical failure during estimation."""


class RankDeficientError(EstimationError):
    """A design or instrument matrix does not have full column rank."""


class SingularMatrixError(EstimationError):
    """A matrix that must be inverted is singular at working precision."""


class ConvergenceError(EstimationError):
    """The equation solver gave up.

    Carries the solver diagnostics collected up to the failure so callers
    can inspect iteration and escalation counts.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
