"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`MoliaError`.
:class:`InfeasibleError` and its subclasses mark bad *inputs* (the CLI maps
them to exit code 2); anything else is treated as an internal failure.
"""


class MoliaError(Exception):
    """Base class for all package errors."""


class InfeasibleError(MoliaError, ValueError):
    """Input violates a model constraint."""


class ScenarioError(InfeasibleError):
    """Scenario violates one of its invariants or could not be parsed."""


class InfeasibleScheduleError(InfeasibleError):
    """A releasing/sampling schedule violates a timing constraint."""


class InfeasiblePointError(InfeasibleError):
    """A point lies outside a feasible region; ``constraint`` names why."""

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint


class InfeasibleRegionError(InfeasibleError):
    """A feasible region turned out to be empty."""


class InvalidReactionCoefficientError(InfeasibleError):
    """Reaction coefficient gives a non-positive time scale."""


class DegenerateChannelError(InfeasibleError):
    """A gain that must be strictly positive is zero (or not finite)."""


class AlignmentDegenerateError(DegenerateChannelError):
    """Desired and interference directions are (numerically) parallel."""


class SingularChannelError(DegenerateChannelError):
    """A diagonal channel matrix has a zero entry and cannot be inverted."""


class DomainError(MoliaError, ValueError):
    """Argument outside the mathematical domain of a function."""
