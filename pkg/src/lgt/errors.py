"""Exception types shared across the package."""


class LgtError(Exception):
    """Base class for every error raised by this package."""


class MalformedInputError(LgtError, ValueError):
    """A layer revelation or instance file violates its contract."""


class ContractError(LgtError, ValueError):
    """An operation was invoked outside its stated preconditions."""


class TraversalTerminated(LgtError):
    """No active leaf remains, so the traversal cannot continue."""


class GenerationFailed(LgtError):
    """An instance generator exhausted its retry budget."""


class InstanceParseError(LgtError, ValueError):
    """An instance file could not be parsed; the message names the field."""


class ConvergenceError(LgtError):
    """An iterative solver stopped before reaching the requested tolerance."""


class CheckFailed(LgtError):
    """A numerical checker measured a value outside its bound."""


class MonitorViolation(LgtError):
    """A runtime invariant monitor detected a violation during a run."""


class UsageError(LgtError):
    """Bad command-line arguments."""
