"""Exception types raised by the library.

Every error message names the first violated condition so callers
(and the CLI) can surface a single-line diagnostic without digging
through tracebacks.
"""


class WanebifError(Exception):
    """Base class for all library errors."""


class ParamError(WanebifError, ValueError):
    """A parameter set violates one of its invariants."""


class ThresholdError(WanebifError, ValueError):
    """A threshold quantity is requested outside its domain of definition."""


class FeasibilityError(WanebifError, ValueError):
    """A requested force-of-infection value lies outside the feasible range."""


class QuadratureError(WanebifError, RuntimeError):
    """An adaptive quadrature failed to reach its tolerance."""


class GridError(WanebifError, ValueError):
    """A discretisation grid is too coarse for the requested operation."""


class ContinuationError(WanebifError, RuntimeError):
    """Branch assembly or fold refinement could not be completed."""


class SimulationError(WanebifError, RuntimeError):
    """A time-domain run violated a conserved bound or positivity."""


class ConfigError(WanebifError, ValueError):
    """A run configuration file is malformed or incomplete."""
