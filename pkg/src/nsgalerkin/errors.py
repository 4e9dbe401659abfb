"""Exception types raised by the solver."""


class NSGalerkinError(Exception):
    """Base class for all package errors."""


class SpecMismatchError(NSGalerkinError, ValueError):
    """Two fields or objects live on incompatible tori / bases."""


class ResolutionError(NSGalerkinError):
    """A band limit or mode-set cap was exceeded."""


class ConfigError(NSGalerkinError, ValueError):
    """Invalid run configuration; message names the offending field."""


class DimensionError(NSGalerkinError, ValueError):
    """State vector does not match the assembled system."""
