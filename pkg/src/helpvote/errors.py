"""Exception types raised across the pipeline."""


class HelpvoteError(Exception):
    """Base class; the CLI turns any of these into a one-line diagnostic."""


class MalformedRecord(HelpvoteError, ValueError):
    pass


class DatasetIOError(HelpvoteError, OSError):
    pass


class EmptyDataset(HelpvoteError, ValueError):
    pass


class LengthMismatch(HelpvoteError, ValueError):
    pass


class ZeroVariance(HelpvoteError, ValueError):
    pass


class UnknownWhitelistName(HelpvoteError, KeyError):
    pass


class DimensionMismatch(HelpvoteError, ValueError):
    pass


class ShapeMismatch(HelpvoteError, ValueError):
    pass


class TooFewRows(HelpvoteError, ValueError):
    pass


class NonFiniteLoss(HelpvoteError, FloatingPointError):
    pass


class ConfigError(HelpvoteError, ValueError):
    pass
