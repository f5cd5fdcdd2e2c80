"""Exception hierarchy.

Every error carries the process exit code the CLI uses for it, so library
callers and the command line agree on what kind of failure happened.
"""


class LabError(Exception):
    exit_code = 1


class ConfigurationError(LabError):
    """Invalid run configuration or discretisation parameters."""

    exit_code = 4


class DomainError(LabError):
    """The linear operator is outside the regime the theory needs (e.g. not positive)."""

    exit_code = 4


class PreconditionError(LabError, ValueError):
    exit_code = 1


class HypothesisViolation(LabError):
    """One of the spectral or nondegeneracy hypotheses fails.

    ``hypothesis`` names the violated condition ("H3", "H4", "H5", "H7", ...)
    and ``witness`` holds the offending multi-index when there is one.
    """

    exit_code = 2

    def __init__(self, message, hypothesis=None, witness=None):
        super().__init__(message)
        self.hypothesis = hypothesis
        self.witness = witness


class DegenerateNonlinearity(HypothesisViolation):
    """All Fermi-golden-rule couplings vanish (H7 fails because beta is too degenerate)."""


class ResolutionError(LabError):
    """Two independent numerical estimates disagree: the grid is too coarse or too small."""

    exit_code = 3


class InstabilityError(LabError):
    exit_code = 3
