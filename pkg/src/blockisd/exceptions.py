"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Raised for inconsistent system dimensions or channel profiles."""


class DimensionError(ValueError):
    """Raised when a vector or matrix does not match the declared N_T x L layout."""


class RankDeficiencyError(ValueError):
    """Raised when a least-squares subproblem is not uniquely solvable."""
