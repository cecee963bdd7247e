"""Persisted model artifacts.

An artifact is a directory of four human-inspectable files:

    mon.mnt          the model-of-normality tensor (binary container)
    calibration.csv  header d_mean,d_max; one row per pool image, pool order
    thresholds.csv   header name,statistic,value; six rows
    meta.txt         key=value provenance lines

Threshold values are written rounded upward at the 9th significant digit:
the stored cut never parses below the in-memory value, so calibration
images still tie (and pass) after a round-trip through disk.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArtifactError
from .normality import CalibrationVectors, ModelOfNormality
from .tensorio import (
    FeatureTensor,
    format_real,
    format_real_ceiling,
    iter_csv_rows,
    read_tensor,
    write_tensor,
)
from .thresholding import STATISTIC_FOR, THRESHOLD_NAMES, ThresholdSet

MON_FILENAME = "mon.mnt"
CALIBRATION_FILENAME = "calibration.csv"
THRESHOLDS_FILENAME = "thresholds.csv"
META_FILENAME = "meta.txt"
FILENAMES = (MON_FILENAME, CALIBRATION_FILENAME, THRESHOLDS_FILENAME, META_FILENAME)


@dataclass(frozen=True, eq=False)
class ModelArtifact:
    mon: ModelOfNormality
    calibration: CalibrationVectors
    thresholds: ThresholdSet
    meta: dict[str, str]

    def __post_init__(self) -> None:
        n = _meta_int(self.meta, "n")
        n_calibration = _meta_int(self.meta, "n_calibration")
        dims = tuple(_meta_int(self.meta, key) for key in ("height", "width", "channels"))
        if self.mon.n_source != n:
            raise ArtifactError(f"meta n={n} does not match MoN pool size {self.mon.n_source}")
        if self.mon.tensor.dims != dims:
            raise ArtifactError(
                f"meta dims {dims} do not match MoN tensor dims {self.mon.tensor.dims}"
            )
        if self.calibration.n != n_calibration:
            raise ArtifactError(
                f"meta n_calibration={n_calibration} does not match calibration "
                f"vector length {self.calibration.n}"
            )


def _meta_int(meta: dict[str, str], key: str) -> int:
    if key not in meta:
        raise ArtifactError(f"meta is missing required key {key!r}")
    try:
        return int(meta[key])
    except ValueError:
        raise ArtifactError(f"meta key {key!r} is not an integer: {meta[key]!r}") from None


def save_artifact(artifact: ModelArtifact, directory: str | Path) -> None:
    """Write all four artifact files; partial output is removed on failure."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        write_tensor(artifact.mon.tensor, out / MON_FILENAME)
        written.append(out / MON_FILENAME)

        rows = ["d_mean,d_max"]
        rows += [
            f"{format_real(m)},{format_real(x)}"
            for m, x in zip(artifact.calibration.d_mean, artifact.calibration.d_max)
        ]
        (out / CALIBRATION_FILENAME).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
        written.append(out / CALIBRATION_FILENAME)

        rows = ["name,statistic,value"]
        rows += [
            f"{name},{stat},{format_real_ceiling(value)}"
            for name, stat, value in artifact.thresholds.items()
        ]
        (out / THRESHOLDS_FILENAME).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
        written.append(out / THRESHOLDS_FILENAME)

        lines = [f"{key}={value}" for key, value in artifact.meta.items()]
        (out / META_FILENAME).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        written.append(out / META_FILENAME)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def load_artifact(directory: str | Path) -> ModelArtifact:
    """Load and re-validate a persisted artifact."""
    root = Path(directory)
    for name in FILENAMES:
        if not (root / name).is_file():
            raise ArtifactError(f"artifact at {root} is missing {name}")

    meta: dict[str, str] = {}
    for lineno, line in enumerate(
        (root / META_FILENAME).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        if "=" not in line:
            raise ArtifactError(f"{root / META_FILENAME}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()

    mon_tensor: FeatureTensor = read_tensor(root / MON_FILENAME)
    mon = ModelOfNormality(tensor=mon_tensor, n_source=_meta_int(meta, "n"))

    calibration = _read_calibration(root / CALIBRATION_FILENAME)
    thresholds = _read_thresholds(root / THRESHOLDS_FILENAME)
    return ModelArtifact(mon=mon, calibration=calibration, thresholds=thresholds, meta=meta)


def _read_calibration(path: Path) -> CalibrationVectors:
    rows = list(iter_csv_rows(path))
    if not rows or rows[0] != ["d_mean", "d_max"]:
        raise ArtifactError(f"{path}: expected header d_mean,d_max")
    try:
        means = np.array([float(r[0]) for r in rows[1:]])
        peaks = np.array([float(r[1]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ArtifactError(f"{path}: malformed calibration row: {exc}") from None
    try:
        return CalibrationVectors(d_mean=means, d_max=peaks)
    except ValueError as exc:
        raise ArtifactError(f"{path}: {exc}") from None


def _read_thresholds(path: Path) -> ThresholdSet:
    rows = list(iter_csv_rows(path))
    if not rows or rows[0] != ["name", "statistic", "value"]:
        raise ArtifactError(f"{path}: expected header name,statistic,value")
    seen: dict[str, float] = {}
    for row in rows[1:]:
        if len(row) != 3:
            raise ArtifactError(f"{path}: malformed threshold row {row!r}")
        name, stat, raw = row
        if name not in STATISTIC_FOR or stat != STATISTIC_FOR[name]:
            raise ArtifactError(f"{path}: unknown threshold row {name!r}/{stat!r}")
        try:
            seen[name] = float(raw)
        except ValueError:
            raise ArtifactError(f"{path}: non-numeric threshold value {raw!r}") from None
    if set(seen) != set(THRESHOLD_NAMES):
        raise ArtifactError(f"{path}: expected all six thresholds, got {sorted(seen)}")
    try:
        return ThresholdSet(**seen)
    except ValueError as exc:
        raise ArtifactError(f"{path}: {exc}") from None
