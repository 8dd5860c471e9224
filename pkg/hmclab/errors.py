"""Exception hierarchy for the sampler laboratory."""


class LabError(Exception):
    """Base class for errors raised by hmclab."""


class ConfigError(LabError, ValueError):
    """Invalid, missing or unreadable configuration."""


class DimensionError(LabError, ValueError):
    """Array shapes do not match the target dimension."""


class StabilityError(LabError, ValueError):
    """Stepsize outside the stability region of an integrator."""


class ParameterError(LabError, ValueError):
    """A sampler, integrator or analysis parameter is out of range."""


class UndefinedStatisticError(LabError, ValueError):
    """A diagnostic is undefined for the given data."""
