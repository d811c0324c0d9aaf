"""Exception taxonomy shared across the package."""


class ForgeError(Exception):
    """Base class for all library errors."""


class WindowTooSmall(ForgeError):
    pass


class BallEscapesWindow(ForgeError):
    pass


class BallEscapesCore(ForgeError):
    pass


class ElementOutsideWindow(ForgeError):
    pass


class BudgetExhausted(ForgeError):
    pass


class BackendCannotCount(ForgeError):
    pass


class Infeasible(ForgeError):
    """A schedule inequality failed; the message names it."""


class CapacityExceeded(ForgeError):
    pass


class LevelMismatch(ForgeError):
    pass


class DepthMismatch(ForgeError):
    pass


class PreconditionViolated(ForgeError):
    pass


class CoreExhausted(ForgeError):
    pass


class CoreTooSmall(ForgeError):
    pass


class ColoringStuck(ForgeError):
    """Internal error: greedy recoloring ran out of colors despite Rule 3."""


class OverlapViolation(ForgeError):
    pass


class CascadeDiverged(ForgeError):
    pass


class NoMarkerInCore(ForgeError):
    pass


class SearchExhausted(ForgeError):
    pass


class NothingStabilized(ForgeError):
    pass


class NotSeparated(ForgeError):
    pass
