"""Stage-by-stage construction of free minimal subshift labelings on finite
Cayley-graph windows, with freeness and minimality certificates."""

__version__ = "0.1.0"

from .groups import (
    CayleyWindow,
    DirectSumZ2,
    FreeGroup,
    INFINITE,
    TableGroup,
    ZLattice,
    make_group,
)
from .schedule import ScaledConfig, Schedule, StageFeedback, exact_schedule, scaled_schedule

__all__ = [
    "CayleyWindow",
    "DirectSumZ2",
    "FreeGroup",
    "INFINITE",
    "TableGroup",
    "ZLattice",
    "make_group",
    "ScaledConfig",
    "Schedule",
    "StageFeedback",
    "exact_schedule",
    "scaled_schedule",
]
