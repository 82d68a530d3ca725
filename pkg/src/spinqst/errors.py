"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or malformed configuration (CLI exit status 2)."""


class CalibrationError(RuntimeError):
    """The pulse-amplitude root search failed on the configured bracket.

    Carries the residual at both bracket ends so the caller can decide
    whether a different phase-winding integer would bring a root in range.
    """

    def __init__(self, message: str, residual_lo: float | None = None,
                 residual_hi: float | None = None):
        super().__init__(message)
        self.residual_lo = residual_lo
        self.residual_hi = residual_hi


class ResolutionError(RuntimeError):
    """A numerical-resolution gate failed (step size, quadrature, norm drift).

    ``required_steps``, when set, is the smallest uniform step count that
    would satisfy the violated gate.
    """

    def __init__(self, message: str, required_steps: int | None = None):
        super().__init__(message)
        self.required_steps = required_steps
