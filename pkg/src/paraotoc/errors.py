"""Exception types shared across the package."""


class ParaotocError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ParaotocError):
    """Invalid user-supplied configuration, arguments, or parameter combinations."""


class NumericalError(ParaotocError):
    """A computation cannot meet its accuracy or applicability contract."""
