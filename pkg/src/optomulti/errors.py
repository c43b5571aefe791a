"""Exception hierarchy shared by all engines.

The CLI maps these onto exit codes: configuration problems -> 2,
physics aborts (truncation leak, norm collapse) -> 3, numerical
failures (non-convergence, stiffness) -> 4.
"""


class SimulationError(Exception):
    """Base class for everything raised deliberately by this package."""


class ConfigError(SimulationError):
    """Invalid or inconsistent run configuration."""


class TruncationLeakError(SimulationError):
    """Occupation of the top Fock level exceeded the leak budget."""

    def __init__(self, message, tau=None, occupation=None):
        super().__init__(message)
        self.tau = tau
        self.occupation = occupation


class NormCollapseError(SimulationError):
    """State norm fell below the recoverable threshold before renormalization."""


class ConvergenceError(SimulationError):
    """An iterative procedure failed to converge within its budget."""
