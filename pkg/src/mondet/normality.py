"""Model-of-normality math.

A model of normality (MoN) is the element-wise mean of the feature tensors
of N anomaly-free images. A test image is compared to the MoN position by
position: the Euclidean norm of the channel-vector difference at each
spatial location gives an H x W distance heatmap, summarized per image by
its (mean, max) pair. Running the N source images back through the same
measurement yields per-image calibration vectors, the basis for all
decision thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyPool, NonFiniteValues
from .tensorio import FeatureTensor


@dataclass(frozen=True, eq=False)
class ModelOfNormality:
    """Element-wise mean tensor over a pool of normal images."""

    tensor: FeatureTensor
    n_source: int

    def __post_init__(self) -> None:
        if self.n_source < 1:
            raise EmptyPool("a model of normality needs at least one source image")


@dataclass(frozen=True, eq=False)
class DistanceHeatmap:
    """Per-position Euclidean distances between an image and the MoN."""

    values: np.ndarray  # (H, W) float64

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValueError(f"expected a non-empty (h, w) array, got shape {arr.shape}")
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise NonFiniteValues("heatmap values must be finite and non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ImageScore:
    """(mean, max) distance summary of one image's heatmap."""

    d_mean: float
    d_max: float

    def __post_init__(self) -> None:
        ok = (
            np.isfinite(self.d_mean)
            and np.isfinite(self.d_max)
            and 0.0 <= self.d_mean <= self.d_max
        )
        if not ok:
            raise ValueError(
                f"image score needs 0 <= d_mean <= d_max, finite; got ({self.d_mean}, {self.d_max})"
            )


@dataclass(frozen=True, eq=False)
class CalibrationVectors:
    """Per-image (mean, max) distances of the normal pool to its own MoN.

    Index i follows the pool order. These are the empirical upper bounds
    on anomaly-free deviation that the thresholds are cut from.
    """

    d_mean: np.ndarray  # (N,)
    d_max: np.ndarray  # (N,)

    def __post_init__(self) -> None:
        mean = np.array(self.d_mean, dtype=np.float64, copy=True)
        peak = np.array(self.d_max, dtype=np.float64, copy=True)
        if mean.ndim != 1 or mean.shape != peak.shape or mean.size < 1:
            raise ValueError("calibration vectors must be equal-length, non-empty 1-d arrays")
        if not (np.isfinite(mean).all() and np.isfinite(peak).all()):
            raise NonFiniteValues("calibration vectors must be finite")
        if (mean < 0).any() or (peak < 0).any() or (mean > peak).any():
            raise ValueError("calibration vectors need 0 <= d_mean[i] <= d_max[i] for every i")
        mean.flags.writeable = False
        peak.flags.writeable = False
        object.__setattr__(self, "d_mean", mean)
        object.__setattr__(self, "d_max", peak)

    @property
    def n(self) -> int:
        return int(self.d_max.size)


def build_mon(features: Sequence[FeatureTensor]) -> ModelOfNormality:
    """Average a non-empty pool of same-shaped feature tensors.

    Accumulates in float64, sequentially in input order, then stores the
    mean as float32: deterministic for a fixed order, and every element of
    the result stays within the [min, max] of its inputs.
    """
    if len(features) == 0:
        raise EmptyPool("cannot build a model of normality from zero images")
    dims = features[0].dims
    acc = np.zeros(dims, dtype=np.float64)
    for i, t in enumerate(features):
        if t.dims != dims:
            raise DimensionMismatch(f"feature tensor {i} has dims {t.dims}, expected {dims}")
        acc += t.values
    mean = (acc / len(features)).astype(np.float32)
    return ModelOfNormality(tensor=FeatureTensor(mean), n_source=len(features))


def distance_heatmap(image_features: FeatureTensor, mon: ModelOfNormality) -> DistanceHeatmap:
    """Euclidean distance to the MoN over the channel axis, per position."""
    if image_features.dims != mon.tensor.dims:
        raise DimensionMismatch(
            f"image dims {image_features.dims} do not match MoN dims {mon.tensor.dims}"
        )
    diff = image_features.values.astype(np.float64) - mon.tensor.values
    return DistanceHeatmap(np.sqrt(np.einsum("hwc,hwc->hw", diff, diff)))


def image_score(heatmap: DistanceHeatmap) -> ImageScore:
    """Reduce a heatmap to its (mean, max) pair."""
    d_max = float(heatmap.values.max())
    # the float mean of a constant map can land one ulp above the max
    d_mean = min(float(heatmap.values.mean()), d_max)
    return ImageScore(d_mean=d_mean, d_max=d_max)


def calibration_vectors(
    mon: ModelOfNormality, normal_features: Sequence[FeatureTensor]
) -> CalibrationVectors:
    """Score every pool image against the MoN, in pool order."""
    if len(normal_features) == 0:
        raise EmptyPool("calibration needs at least one normal image")
    scores = [image_score(distance_heatmap(t, mon)) for t in normal_features]
    return CalibrationVectors(
        d_mean=np.array([s.d_mean for s in scores]),
        d_max=np.array([s.d_max for s in scores]),
    )
