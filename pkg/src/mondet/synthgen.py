"""Deterministic synthetic feature-tensor datasets.

Desk-scale end-to-end verification without any real images or backbone:
normal tensors are a fixed lattice base plus seeded Gaussian noise,
anomalous tensors additionally get a constant-amplitude rectangular bump
across all channels. Dataset bytes are a pure function of the config.

Randomness contract (kept simple enough to re-implement anywhere):

* generator: counter-based Philox4x64-10; image k in manifest order uses
  key = (seed + k) mod 2**64, counter starting at zero;
* uniforms: 53-bit doubles in [0, 1), the generator's native stream;
* gaussians for n values: draw m = ceil(n/2) uniforms u1, then m uniforms
  u2; with r = sqrt(-2 ln(1 - u1)) and a = 2 pi u2, the stream is
  [r cos(a)] ++ [r sin(a)], truncated to n;
* bump placement: two further uniforms (u_top, u_left), mapped to
  floor(u * (dim - extent + 1)).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensorio import (
    DatasetManifest,
    FeatureTensor,
    LABEL_ANOMALOUS,
    LABEL_NORMAL,
    ManifestEntry,
    ROLE_EVALUATE,
    ROLE_MON_BUILD,
    write_manifest,
    write_tensor,
)

GENERATOR_SPEC = (
    "philox4x64-10; image key = (seed + image_index) mod 2**64; "
    "gaussian = box-muller on blocked uniform pairs"
)

MANIFEST_FILENAME = "manifest.csv"
META_FILENAME = "synth_meta.txt"


@dataclass(frozen=True)
class SynthConfig:
    height: int = 14
    width: int = 14
    channels: int = 192
    n_normal_mon: int = 64
    n_normal_eval: int = 64
    n_anomalous: int = 32
    noise_sigma: float = 1.0
    bump_amplitude: float = 3.0
    bump_height: int = 3
    bump_width: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.height, self.width, self.channels) < 1:
            raise ValueError("tensor dims must be positive")
        if min(self.n_normal_mon, self.n_normal_eval, self.n_anomalous) < 0:
            raise ValueError("image counts must be non-negative")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not (1 <= self.bump_height <= self.height and 1 <= self.bump_width <= self.width):
            raise ValueError(
                f"bump extent {self.bump_height}x{self.bump_width} must fit within "
                f"{self.height}x{self.width}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)

    @classmethod
    def from_mapping(cls, raw: Mapping[str, str]) -> "SynthConfig":
        """Build a config from string key-value pairs (config file / flags)."""
        known = {field.name for field in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            name = key.strip().replace("-", "_")
            if name not in known:
                raise ValueError(f"unknown synth config key {key!r}")
            kwargs[name] = float(value) if name in ("noise_sigma", "bump_amplitude") else int(value)
        return cls(**kwargs)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value text file; '#' starts a comment, blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def image_seed(config_seed: int, image_index: int) -> int:
    return (config_seed + image_index) % 2**64


def _gaussian(rng: np.random.Generator, n: int) -> np.ndarray:
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], so finite
    angle = 2.0 * np.pi * u2
    return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]


def lattice_base(height: int, width: int, channels: int) -> FeatureTensor:
    """Fixed quasi-random base tensor in [-1, 1], nonzero and position-dependent."""
    hh = np.arange(height)[:, None, None]
    ww = np.arange(width)[None, :, None]
    cc = np.arange(channels)[None, None, :]
    grid = (31 * hh + 17 * ww + 7 * cc) % 101
    return FeatureTensor(grid.astype(np.float64) / 50.5 - 1.0)


def generate_normal(base: FeatureTensor, noise_sigma: float, seed: int) -> FeatureTensor:
    """base + i.i.d. zero-mean Gaussian noise; same seed, same output."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = _generator(seed)
    noise = _gaussian(rng, base.values.size).reshape(base.dims)
    return FeatureTensor(base.values + noise_sigma * noise)


def generate_anomalous(
    base: FeatureTensor,
    noise_sigma: float,
    bump_amplitude: float,
    bump_extent: tuple[int, int],
    seed: int,
) -> FeatureTensor:
    """Noisy tensor plus a constant bump over a seeded random rectangle.

    The bump adds the amplitude to every channel of the chosen region. The
    noise stream is drawn before the placement uniforms, so amplitude 0 with
    an equal seed reproduces generate_normal exactly.
    """
    bump_h, bump_w = bump_extent
    height, width, _ = base.dims
    if not (1 <= bump_h <= height and 1 <= bump_w <= width):
        raise ValueError(f"bump extent {bump_h}x{bump_w} exceeds tensor dims {height}x{width}")
    rng = _generator(seed)
    noise = _gaussian(rng, base.values.size).reshape(base.dims)
    u_top, u_left = rng.random(2)
    top = int(u_top * (height - bump_h + 1))
    left = int(u_left * (width - bump_w + 1))
    values = base.values + noise_sigma * noise
    values[top : top + bump_h, left : left + bump_w, :] += bump_amplitude
    return FeatureTensor(values)


def generate_dataset(config: SynthConfig, out_dir: str | Path) -> DatasetManifest:
    """Write the full synthetic dataset plus manifest and generator meta.

    Image order (and the per-image seed index) is: MoN pool, then normal
    evaluation images, then anomalous evaluation images. Partially written
    files are removed if generation fails.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = lattice_base(*config.dims)
    entries: list[ManifestEntry] = []
    written: list[Path] = []
    try:
        index = 0
        for i in range(config.n_normal_mon):
            name = f"mon_{i:04d}.mnt"
            tensor = generate_normal(base, config.noise_sigma, image_seed(config.seed, index))
            write_tensor(tensor, out / name)
            written.append(out / name)
            entries.append(ManifestEntry(name, LABEL_NORMAL, ROLE_MON_BUILD))
            index += 1
        for i in range(config.n_normal_eval):
            name = f"eval_normal_{i:04d}.mnt"
            tensor = generate_normal(base, config.noise_sigma, image_seed(config.seed, index))
            write_tensor(tensor, out / name)
            written.append(out / name)
            entries.append(ManifestEntry(name, LABEL_NORMAL, ROLE_EVALUATE))
            index += 1
        for i in range(config.n_anomalous):
            name = f"eval_anomalous_{i:04d}.mnt"
            tensor = generate_anomalous(
                base,
                config.noise_sigma,
                config.bump_amplitude,
                (config.bump_height, config.bump_width),
                image_seed(config.seed, index),
            )
            write_tensor(tensor, out / name)
            written.append(out / name)
            entries.append(ManifestEntry(name, LABEL_ANOMALOUS, ROLE_EVALUATE))
            index += 1
        manifest = DatasetManifest(entries=tuple(entries), directory=out)
        write_manifest(manifest, out / MANIFEST_FILENAME)
        written.append(out / MANIFEST_FILENAME)
        _write_meta(config, out / META_FILENAME)
        written.append(out / META_FILENAME)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return manifest


def _write_meta(config: SynthConfig, path: Path) -> None:
    lines = [
        f"generator={GENERATOR_SPEC}",
        "base=lattice (31h + 17w + 7c) mod 101, scaled to [-1, 1]",
    ]
    lines += [f"{field.name}={getattr(config, field.name)}" for field in fields(SynthConfig)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def default_config(**overrides) -> SynthConfig:
    return replace(SynthConfig(), **overrides)
