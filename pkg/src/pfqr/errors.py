"""Exception hierarchy shared across the package."""


class PfqrError(Exception):
    """Base class for all package-specific errors."""


class GridMismatch(PfqrError):
    """Two grid-based objects do not share the same sampling grid."""


class DimensionMismatch(PfqrError):
    """Array shapes are inconsistent (curves vs scalars vs responses)."""


class DegenerateColumn(PfqrError):
    """A curve coordinate has (near-)zero variance and cannot be scaled."""


class DegenerateProbe(PfqrError):
    """The probe variable of a covariance request has (near-)zero variance."""


class DegenerateScore(PfqrError):
    """A score column has (near-)zero variance; deflation is undefined."""


class AllZeroDirection(PfqrError):
    """Every column covariance vanished: the curves carry no signal left."""


class SolverDiverged(PfqrError):
    """The check-loss solver failed to reach its tolerance within the cap."""


class RankDeficientDesign(PfqrError):
    """The design matrix does not have full column rank."""


class InsufficientRank(PfqrError):
    """Source curves have fewer positive eigenvalues than requested."""


class ConfigError(PfqrError):
    """A configuration document failed validation."""
