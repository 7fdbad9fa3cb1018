"""Exception hierarchy shared by all fracsys modules."""


class FracsysError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(FracsysError, ValueError):
    """Invalid or inconsistent numerical parameters."""


class GridMismatchError(ParameterError):
    """Two fields that must share a grid do not."""


class DomainError(FracsysError, ValueError):
    """A functional was evaluated outside its domain (e.g. a zero denominator)."""


class BoundaryDecayError(FracsysError, ValueError):
    """A profile does not decay enough at the box boundary to be trusted."""


class MuOutOfRangeError(FracsysError, ValueError):
    """The perturbation parameter is too large for the minimizer selection."""


class RegionEscapeError(FracsysError, RuntimeError):
    """The first-solution descent left the region where Psi is positive."""


class ConvergenceError(FracsysError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""


class DegenerateDirectionError(FracsysError, RuntimeError):
    """The coupling integral collapsed during quotient minimization."""


class BoxTooSmallError(FracsysError, RuntimeError):
    """The dilation parameter would exceed what the periodic box can hold."""


class PathCollapseError(FracsysError, RuntimeError):
    """All interior path nodes collapsed onto an endpoint."""


class ConcentrationWarning(FracsysError, RuntimeError):
    """The mountain-pass level violated its strict upper bound."""


class NoBubbleError(FracsysError, ValueError):
    """The fitted template correlates too poorly with the data."""


class ConfigError(FracsysError, ValueError):
    """Invalid run configuration."""


class DecompositionIncompleteWarning(FracsysError, UserWarning):
    """The energy ledger of a decomposition does not close to tolerance."""
