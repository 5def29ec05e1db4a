"""Exception hierarchy shared by every simulator module."""


class SimError(Exception):
    """Base class for all simulator errors."""


class SnapshotError(SimError):
    """A topology document could not be parsed."""


class UnknownChannelError(SimError, KeyError):
    pass


class UnknownNodeError(SimError, KeyError):
    pass


class InsufficientFundsError(SimError):
    pass


class PolicyError(SimError):
    """A request violates a configured channel policy (e.g. capacity floor)."""


class ChannelClosedError(SimError):
    pass


class NoRouteError(SimError):
    def __init__(self, message, bottleneck=None):
        super().__init__(message)
        self.bottleneck = bottleneck


class RouteConstraintError(NoRouteError):
    pass


class PayloadTooLargeError(SimError):
    def __init__(self, size, limit=1300):
        super().__init__(f"payload of {size} bytes exceeds the {limit}-byte onion")
        self.size = size
        self.limit = limit


class KeysendRejectedError(SimError):
    pass


class AuthenticationError(SimError):
    pass


class EncodingError(SimError, ValueError):
    pass


class AbandonedCommandError(SimError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SchedulingError(SimError):
    pass


class ConfigError(SimError):
    pass


class FormationError(SimError):
    pass


class StageError(SimError):
    """Wraps a module error with the scenario stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
