"""Exception types shared across the package."""


class GridMismatch(ValueError):
    """Two objects live on different grids."""


class NonPositiveHeight(ValueError):
    """The fluid height (or lambda) is not bounded away from zero."""


class NonPositiveLambda(NonPositiveHeight):
    pass


class NonFinite(FloatingPointError):
    """A state acquired NaN or inf samples."""


class NotContracting(RuntimeError):
    """The Duhamel iteration failed to contract on the requested window."""


class BlowupSuspected(RuntimeError):
    """The H2-type norm exceeded the configured ceiling during continuation."""


class ConfigError(ValueError):
    pass


class MissingKey(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class ConfigTypeError(ConfigError, TypeError):
    pass
