# Result types shared by the services
from .channel import Transmittances
from .statistics import Tally, ObservedStats, Z_COMBINATIONS, X_COMBINATIONS
from .breakdown import KeyRateBreakdown
from .rounds import RoundDraw

__all__ = [
    "Transmittances",
    "Tally",
    "ObservedStats",
    "Z_COMBINATIONS",
    "X_COMBINATIONS",
    "KeyRateBreakdown",
    "RoundDraw",
]
