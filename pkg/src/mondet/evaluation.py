"""Detection-quality evaluation: confusion metrics, AUC scores, scatter export.

Two AUC notions are reported side by side:

* per-threshold "operating-point AUC": the area under the one-point ROC
  polygon through (0,0), (FPR,TPR), (1,1), which equals (TPR + TNR) / 2 --
  one number per fixed threshold;
* "sweep AUC": the threshold-free Mann-Whitney rank statistic,
  P(anomalous score > normal score) + 0.5 * P(tie), per score statistic.

Anomalous is the positive class everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateEvaluation
from .normality import ImageScore
from .thresholding import (
    STAT_MAX,
    STAT_MEAN,
    THRESHOLD_NAMES,
    Decision,
    ThresholdSet,
    VERDICT_ANOMALOUS,
    classify,
)
from .tensorio import LABEL_ANOMALOUS, LABELS


@dataclass(frozen=True)
class LabeledScore:
    score: ImageScore
    label: str
    source: str

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")

    def statistic(self, which: str) -> float:
        if which == STAT_MAX:
            return self.score.d_max
        if which == STAT_MEAN:
            return self.score.d_mean
        raise ValueError(f"unknown statistic {which!r}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    per_threshold: dict[str, tuple[ConfusionCounts, float]]  # name -> (confusion, auc)
    max_auc: float
    sweep_auc_max_stat: float
    sweep_auc_mean_stat: float


@dataclass(frozen=True)
class ScatterPoint:
    source: str
    label: str
    norm_mean: float
    norm_max: float


def confusion(decisions: Sequence[tuple[Decision, str]]) -> ConfusionCounts:
    """Tally decisions against truth labels."""
    if len(decisions) == 0:
        raise ValueError("cannot tally an empty decision sequence")
    tp = fp = tn = fn = 0
    for decision, label in decisions:
        flagged = decision.verdict == VERDICT_ANOMALOUS
        if label == LABEL_ANOMALOUS:
            tp += flagged
            fn += not flagged
        else:
            fp += flagged
            tn += not flagged
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def operating_point_auc(c: ConfusionCounts) -> float:
    """(TPR + TNR) / 2: area under the one-point ROC polygon."""
    if c.positives == 0 or c.negatives == 0:
        raise DegenerateEvaluation(
            f"operating-point AUC needs both classes, got {c.positives} positives "
            f"and {c.negatives} negatives"
        )
    tpr = c.tp / c.positives
    tnr = c.tn / c.negatives
    return (tpr + tnr) / 2.0


def sweep_auc(items: Sequence[LabeledScore], statistic: str) -> float:
    """Full-ROC AUC over the chosen statistic, ties half-credited.

    Computed with average ranks; exactly equal to the pairwise
    comparison count P(pos > neg) + 0.5 * P(pos == neg).
    """
    scores = np.array([it.statistic(statistic) for it in items], dtype=np.float64)
    positive = np.array([it.label == LABEL_ANOMALOUS for it in items], dtype=bool)
    n_pos = int(positive.sum())
    n_neg = int(scores.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateEvaluation(
            f"sweep AUC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )
    ranks = rankdata(scores, method="average")
    u = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def evaluate_all(items: Sequence[LabeledScore], thresholds: ThresholdSet) -> EvaluationReport:
    """Classify every item under all six thresholds and assemble the report."""
    per_threshold = {}
    for name in THRESHOLD_NAMES:
        decisions = [(classify(it.score, thresholds, name), it.label) for it in items]
        counts = confusion(decisions)
        per_threshold[name] = (counts, operating_point_auc(counts))
    return EvaluationReport(
        per_threshold=per_threshold,
        max_auc=max(auc for _, auc in per_threshold.values()),
        sweep_auc_max_stat=sweep_auc(items, STAT_MAX),
        sweep_auc_mean_stat=sweep_auc(items, STAT_MEAN),
    )


def scatter_export(items: Sequence[LabeledScore]) -> list[ScatterPoint]:
    """Min-max normalize (d_mean, d_max) over the item set to the unit box.

    A constant axis has no spread to normalize; it maps to all-zeros.
    """
    if len(items) == 0:
        raise ValueError("cannot export an empty scatter set")
    means = np.array([it.score.d_mean for it in items], dtype=np.float64)
    peaks = np.array([it.score.d_max for it in items], dtype=np.float64)

    def normalized(v: np.ndarray) -> np.ndarray:
        lo, hi = float(v.min()), float(v.max())
        if hi == lo:
            return np.zeros_like(v)
        return (v - lo) / (hi - lo)

    norm_means = normalized(means)
    norm_peaks = normalized(peaks)
    return [
        ScatterPoint(it.source, it.label, float(nm), float(nx))
        for it, nm, nx in zip(items, norm_means, norm_peaks)
    ]
