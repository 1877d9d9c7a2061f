"""Exception types raised by the library."""


class DPQuantilesError(Exception):
    """Base class for library errors."""


class EmptyDatasetError(DPQuantilesError, ValueError):
    """A dataset (or a column being loaded) has no values."""


class GapTooSmallError(DPQuantilesError, ValueError):
    """Target ranks are too close together for the calibrated parameters.

    The check depends only on ``n``, the quantiles and the parameters, never on
    the data values, so raising it leaks nothing.
    """


class ConfigError(DPQuantilesError, ValueError):
    """Invalid run configuration."""
