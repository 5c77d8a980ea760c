"""Exception hierarchy. Everything derives from ``G2FitError``."""


class G2FitError(Exception):
    pass


class ValidationError(G2FitError, ValueError):
    """Invalid parameter value or input array."""


class LayoutError(ValidationError):
    """Flat parameter vector does not match a model layout."""


class TruncationError(ValidationError):
    """Side-pulse truncation does not cover the delay grid."""


class ConfigurationError(ValidationError):
    """Inconsistent objective or optimizer configuration."""


class BracketError(G2FitError, ValueError):
    """Line-search bracket does not enclose a minimum."""


class FormatError(G2FitError, ValueError):
    """Malformed input file."""


class AlignmentError(G2FitError, ValueError):
    """Two curves are defined on different delay grids."""


class NormalizationError(G2FitError, ValueError):
    """Reference curve has zero range so NRMSE is undefined."""
