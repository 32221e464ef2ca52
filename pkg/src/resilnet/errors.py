"""Exception hierarchy shared across the package."""


class ResilnetError(Exception):
    """Base class for every error raised by resilnet."""


class DomainError(ResilnetError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class TraceRangeError(ResilnetError, ValueError):
    """A requested time window is not covered by a sampled trace."""


class StateError(ResilnetError, RuntimeError):
    """An object is missing state that the operation requires."""


class ConfigError(ResilnetError, ValueError):
    """A scenario or run configuration failed validation."""


class RouteError(ResilnetError, ValueError):
    """A policy routes traffic over an element that cannot carry it."""


class EnactmentError(ResilnetError, RuntimeError):
    """A policy could not be installed; the network state is unchanged."""


class StreamError(ResilnetError, KeyError):
    """Telemetry arrived for a stream that was never declared."""


class WarmupError(ResilnetError, RuntimeError):
    """A detector was asked to score before it was fitted."""
