"""Exception hierarchy shared by all plaplab modules."""


class PlapLabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PlapLabError):
    """An argument violates a mathematical precondition (e.g. p >= N)."""


class FitError(PlapLabError):
    """A quadrature, tail extrapolation, or regression cannot produce a finite answer."""


class GridError(PlapLabError):
    """Profiles live on incompatible grids, or a ball exits the grid coverage."""


class ConvergenceError(PlapLabError):
    """A computation that requires a converged solve was handed a non-converged one."""


class ConfigError(PlapLabError):
    """Scenario configuration text is invalid; message lists every violation."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
