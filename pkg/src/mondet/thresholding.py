"""Working-point decision thresholds and the binary decision rule.

Six closed-form cuts are derived from the calibration vectors: with
D1 = calibration d_max and D2 = calibration d_mean,

    threshold1 = max(D1)            threshold4 = max(D2)
    threshold2 = max(D1) - std(D1)  threshold5 = max(D2) - std(D2)
    threshold3 = mean(D1) + std(D1) threshold6 = mean(D2) + std(D2)

std is the population standard deviation (divide by N): calibration treats
the pool as the full normal population, not a sample. Thresholds 1-3 gate
an image's d_max, 4-6 its d_mean. Negative cuts clamp to zero. An image is
flagged anomalous only when its statistic strictly exceeds the cut, so the
calibration images themselves are never flagged by threshold1/threshold4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnknownThreshold
from .normality import CalibrationVectors, ImageScore

STAT_MAX = "max"
STAT_MEAN = "mean"

THRESHOLD_NAMES = (
    "threshold1",
    "threshold2",
    "threshold3",
    "threshold4",
    "threshold5",
    "threshold6",
)

STATISTIC_FOR = {
    "threshold1": STAT_MAX,
    "threshold2": STAT_MAX,
    "threshold3": STAT_MAX,
    "threshold4": STAT_MEAN,
    "threshold5": STAT_MEAN,
    "threshold6": STAT_MEAN,
}

VERDICT_NORMAL = "normal"
VERDICT_ANOMALOUS = "anomalous"


@dataclass(frozen=True)
class ThresholdSet:
    threshold1: float
    threshold2: float
    threshold3: float
    threshold4: float
    threshold5: float
    threshold6: float

    def __post_init__(self) -> None:
        values = [getattr(self, name) for name in THRESHOLD_NAMES]
        if not all(math.isfinite(v) and v >= 0.0 for v in values):
            raise ValueError(f"threshold values must be finite and non-negative: {values}")
        if self.threshold2 > self.threshold1 or self.threshold5 > self.threshold4:
            raise ValueError(
                "margined max-thresholds cannot exceed their base: "
                f"t2={self.threshold2} vs t1={self.threshold1}, "
                f"t5={self.threshold5} vs t4={self.threshold4}"
            )

    def value(self, name: str) -> float:
        if name not in STATISTIC_FOR:
            raise UnknownThreshold(f"unknown threshold {name!r}")
        return getattr(self, name)

    def statistic(self, name: str) -> str:
        if name not in STATISTIC_FOR:
            raise UnknownThreshold(f"unknown threshold {name!r}")
        return STATISTIC_FOR[name]

    def items(self) -> list[tuple[str, str, float]]:
        """(name, statistic, value) triples in threshold order."""
        return [(name, STATISTIC_FOR[name], getattr(self, name)) for name in THRESHOLD_NAMES]


@dataclass(frozen=True)
class Decision:
    verdict: str
    threshold_name: str
    score_used: float
    threshold_value: float


def compute_thresholds(calib: CalibrationVectors) -> ThresholdSet:
    """Derive the six working-point cuts from non-empty calibration vectors."""

    def cuts(d: np.ndarray) -> tuple[float, float, float]:
        top = float(d.max())
        center = float(d.mean())
        spread = float(d.std())  # population convention, ddof=0
        return (top, max(top - spread, 0.0), max(center + spread, 0.0))

    t1, t2, t3 = cuts(calib.d_max)
    t4, t5, t6 = cuts(calib.d_mean)
    return ThresholdSet(t1, t2, t3, t4, t5, t6)


def classify(score: ImageScore, thresholds: ThresholdSet, which: str) -> Decision:
    """Gate one image score with one named threshold; ties stay normal."""
    statistic = thresholds.statistic(which)
    cut = thresholds.value(which)
    used = score.d_max if statistic == STAT_MAX else score.d_mean
    verdict = VERDICT_ANOMALOUS if used > cut else VERDICT_NORMAL
    return Decision(verdict=verdict, threshold_name=which, score_used=used, threshold_value=cut)
