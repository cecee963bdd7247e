"""Binary tensor container format and dataset manifests.

The I/O substrate that decouples the scoring pipeline from any particular
feature extractor: feature maps travel as ``.mnt`` files, datasets as CSV
manifests. All reads are side-effect free; all returned objects are
immutable after construction.

``.mnt`` layout (little-endian throughout):

    bytes  0-3   magic ``MONT``
    bytes  4-7   format version, uint32 (currently 1)
    bytes  8-19  height, width, channels, three uint32
    bytes 20-23  dtype code, uint32 (1 = float32)
    bytes 24-    height*width*channels float32 values, row-major (h, w, c)
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from decimal import ROUND_CEILING, Decimal
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import (
    BadMagic,
    InvalidDims,
    InvalidManifestRow,
    ManifestError,
    MissingManifestFile,
    MissingTensorFile,
    NonFiniteValues,
    PayloadSizeMismatch,
    TensorFormatError,
    UnknownLabel,
    UnknownRole,
    UnsupportedDtype,
    UnsupportedVersion,
)

MAGIC = b"MONT"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1
HEADER = struct.Struct("<4sIIIII")  # magic, version, h, w, c, dtype code

LABEL_NORMAL = "normal"
LABEL_ANOMALOUS = "anomalous"
LABELS = (LABEL_NORMAL, LABEL_ANOMALOUS)

ROLE_MON_BUILD = "mon-build"
ROLE_EVALUATE = "evaluate"
# `calibrate` extends the base format: it marks a held-out normal pool used
# for threshold calibration instead of the MoN-building images.
ROLE_CALIBRATE = "calibrate"
ROLES = (ROLE_MON_BUILD, ROLE_EVALUATE, ROLE_CALIBRATE)

MANIFEST_HEADER = ("path", "label", "role")


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """Dense H x W x C feature map for one image.

    Stored as float32 in row-major (h, w, c) order; values must be finite.
    The backing array is copied on construction and marked read-only.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float32, order="C", copy=True)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise InvalidDims(
                f"expected a (h, w, c) array with positive dims, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all():
            raise NonFiniteValues("feature tensor contains NaN or Inf values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        h, w, c = self.values.shape
        return (h, w, c)


def write_tensor(tensor: FeatureTensor, path: str | Path) -> None:
    """Write ``tensor`` to ``path`` in the ``.mnt`` container format.

    The write is atomic (temp file + rename) so readers never observe a
    truncated file.
    """
    if not np.isfinite(tensor.values).all():
        raise NonFiniteValues("refusing to write non-finite tensor values")
    h, w, c = tensor.dims
    blob = HEADER.pack(MAGIC, FORMAT_VERSION, h, w, c, DTYPE_FLOAT32)
    blob += tensor.values.astype("<f4", copy=False).tobytes()
    _atomic_write_bytes(Path(path), blob)


def read_tensor(path: str | Path) -> FeatureTensor:
    """Read a ``.mnt`` file, validating every field of the container."""
    path = Path(path)
    if not path.is_file():
        raise MissingTensorFile(f"no tensor file at {path}")
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise TensorFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, h, w, c, dtype_code = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if dtype_code != DTYPE_FLOAT32:
        raise UnsupportedDtype(f"{path}: dtype code {dtype_code}, expected {DTYPE_FLOAT32}")
    if min(h, w, c) < 1:
        raise InvalidDims(f"{path}: non-positive dims {h}x{w}x{c}")
    payload = data[HEADER.size:]
    expected = h * w * c * 4
    if len(payload) != expected:
        raise PayloadSizeMismatch(
            f"{path}: dims {h}x{w}x{c} need {expected} payload bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
    if not np.isfinite(values).all():
        raise NonFiniteValues(f"{path}: payload contains NaN or Inf values")
    return FeatureTensor(values)


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # relative to the manifest's directory
    label: str
    role: str


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """Ordered dataset listing; entry order is significant and preserved."""

    entries: tuple[ManifestEntry, ...]
    directory: Path  # base directory for resolving entry paths

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.directory / entry.path

    @property
    def mon_build(self) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.role == ROLE_MON_BUILD)

    @property
    def calibrate(self) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.role == ROLE_CALIBRATE)

    @property
    def evaluate(self) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.role == ROLE_EVALUATE)


def _validated_entry(path: str, label: str, role: str, where: str) -> ManifestEntry:
    if label not in LABELS:
        raise UnknownLabel(f"{where}: unknown label {label!r}")
    if role not in ROLES:
        raise UnknownRole(f"{where}: unknown role {role!r}")
    if role in (ROLE_MON_BUILD, ROLE_CALIBRATE) and label != LABEL_NORMAL:
        raise InvalidManifestRow(f"{where}: {role} rows must be labeled {LABEL_NORMAL}")
    if not path:
        raise InvalidManifestRow(f"{where}: empty path")
    return ManifestEntry(path=path, label=label, role=role)


def read_manifest(path: str | Path) -> DatasetManifest:
    """Parse a manifest CSV; entries come back in file order.

    An empty manifest (header only) is valid at parse time; consumers that
    need at least one row reject it at use time.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingManifestFile(f"no manifest file at {path}")
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(s.strip() for s in header) != MANIFEST_HEADER:
            raise ManifestError(
                f"{path}: expected header {','.join(MANIFEST_HEADER)!r}, got {header!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InvalidManifestRow(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            entries.append(_validated_entry(*(s.strip() for s in row), where=f"{path}:{lineno}"))
    return DatasetManifest(entries=tuple(entries), directory=path.parent)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    out = [",".join(MANIFEST_HEADER)]
    out += [f"{e.path},{e.label},{e.role}" for e in manifest.entries]
    _atomic_write_bytes(Path(path), ("\n".join(out) + "\n").encode("utf-8"))


def _atomic_write_bytes(path: Path, blob: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


# ---------------------------------------------------------------------------
# CSV real-number formatting


def format_real(x: float) -> str:
    """CSV convention: 9 significant digits, round-to-nearest."""
    return f"{x:.9g}"


def format_real_ceiling(x: float) -> str:
    """9 significant digits, rounded toward +inf.

    Used for persisted threshold values: the decimal written back never
    parses below the in-memory value, so a score exactly at a calibrated
    bound still compares as a tie after an artifact round-trip.
    """
    if x == 0.0:
        return "0"
    d = Decimal(x)
    q = d.quantize(Decimal(1).scaleb(d.adjusted() - 8), rounding=ROUND_CEILING)
    return str(q)


def iter_csv_rows(path: str | Path) -> Iterator[list[str]]:
    """Yield rows of a CSV file, skipping blank lines."""
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row:
                yield row
