# app/core/errors.py

from typing import Optional


class MTLabError(Exception):
    """Base class for every error raised by the library."""


class NegativeWeight(MTLabError, ValueError):
    pass


class UnequalMass(MTLabError, ValueError):
    """Wasserstein-1 asked for measures of different total mass."""


class NeedsGrid(MTLabError, ValueError):
    """The measure-transmission metric was asked for without breakpoints."""


class TooLarge(MTLabError, ValueError):
    pass


class OutOfRange(MTLabError, ValueError):
    pass


class BranchBeforeArrival(MTLabError, ValueError):
    pass


class HorizonExceeded(MTLabError, ValueError):
    pass


class InvalidStep(MTLabError, ValueError):
    pass


class InvalidInitialMeasure(MTLabError, ValueError):
    """Initial support lies outside [x_0, x_N]."""


class NonPositiveSpeed(MTLabError, ValueError):
    pass


class DenominatorNonpositive(MTLabError, ValueError):
    """The local estimate is vacuous for this pair and horizon."""


class LPUnbounded(MTLabError):
    pass


class AssumptionViolated(MTLabError, ValueError):
    """A model coefficient breaks one of the standing assumptions.

    `item` names the violated condition, e.g. "g1>0" or "c_N=0".
    """

    def __init__(self, item: str, detail: Optional[str] = None):
        self.item = item
        self.detail = detail
        message = item if detail is None else f"{item}: {detail}"
        super().__init__(message)


class ConfigInvalid(MTLabError, ValueError):
    def __init__(self, field_path: str, detail: str):
        self.field_path = field_path
        self.detail = detail
        super().__init__(f"{field_path}: {detail}")
