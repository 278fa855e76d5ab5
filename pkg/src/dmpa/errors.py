"""Exception hierarchy shared by the analytic and simulation layers."""


class DMPAError(Exception):
    """Base class for every error raised by :mod:`dmpa`."""


# -- parameters ---------------------------------------------------------------


class RangeError(DMPAError):
    def __init__(self, field, value, interval):
        self.field = field
        self.value = value
        self.interval = interval
        super().__init__(f"{field}={value!r} outside {interval}")


class ConstraintError(DMPAError):
    def __init__(self, constraint, detail=""):
        self.constraint = constraint
        self.detail = detail
        msg = f"constraint violated: {constraint}"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class ParamValidationError(DMPAError):
    """Raised with *all* violated constraints, not only the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} invalid parameter(s): {lines}")


class ConfigError(DMPAError):
    """Malformed configuration file or override."""


class NotAnalytic(DMPAError):
    """Parameters fall outside the shared-matrix / shared-delta regime."""


# -- analytics ----------------------------------------------------------------


class DegenerateDenominator(DMPAError):
    def __init__(self, term, value):
        self.term = term
        self.value = value
        super().__init__(f"denominator of {term} is {value!r} (must be > 0)")


class NoConvergence(DMPAError):
    def __init__(self, max_iter, residual, result=None):
        self.max_iter = max_iter
        self.residual = residual
        self.result = result
        super().__init__(
            f"fixed-point iteration did not converge in {max_iter} steps "
            f"(residual {residual:.3e}); delta may be below the contraction threshold"
        )


class Indeterminate(DMPAError):
    """Both glass-ceiling scores are infinite with the same sign."""


class ClosedFormMismatch(DMPAError):
    """Fixed-point values disagree with a matching closed form."""


# -- simulation ---------------------------------------------------------------


class InvalidInitialGraph(DMPAError):
    pass


class SimulationDegenerate(DMPAError):
    """Every event draw keeps failing; the parameters cannot grow the graph."""


class RejectionLimitExceeded(SimulationDegenerate):
    def __init__(self, event, attempts, detail=""):
        self.event = event
        self.attempts = attempts
        msg = f"event {event}: no link accepted after {attempts} attempts"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class GraphFormatError(DMPAError):
    """Malformed edge-list file."""


# -- estimation ---------------------------------------------------------------


class EmptyGraph(DMPAError):
    pass


class InsufficientTail(DMPAError):
    pass


class DegenerateSupport(DMPAError):
    pass
