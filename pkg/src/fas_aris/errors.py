"""Exception types shared across the package."""


class FasArisError(Exception):
    """Base class for all package errors."""


class ConfigError(FasArisError, ValueError):
    """Invalid configuration value, unknown key or malformed config file."""


class DimensionError(FasArisError, ValueError):
    """Array shapes do not agree with the scenario dimensions."""


class ArisBudgetExhausted(FasArisError, ValueError):
    """The reflection matrix alone already consumes the ARIS power budget."""

    code = "aris_budget_exhausted"


class InfeasibleError(FasArisError):
    """A sub-problem has an empty feasible set."""


class PackingError(InfeasibleError):
    """The initial antenna grid does not fit inside the movable region."""


class SolverError(FasArisError):
    """A convex sub-problem did not return an optimal solution."""

    def __init__(self, status: str, what: str = "conic solve"):
        super().__init__(f"{what} failed: {status}")
        self.status = status
