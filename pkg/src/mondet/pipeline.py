"""Batch pipeline runners: synth, build-mon, score, evaluate.

These are the operations the service endpoints (and through them the CLI)
execute. Each runner is deterministic given its inputs, writes only the
declared outputs, and removes partial outputs when it fails. Heavy data
stays on the filesystem; runners exchange paths and small summaries.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .artifacts import ModelArtifact, load_artifact, save_artifact
from .errors import PipelineError
from .evaluation import (
    ConfusionCounts,
    EvaluationReport,
    LabeledScore,
    operating_point_auc,
    scatter_export,
    sweep_auc,
)
from .normality import ImageScore, build_mon, calibration_vectors, distance_heatmap, image_score
from .synthgen import MANIFEST_FILENAME, SynthConfig, generate_dataset
from .tensorio import (
    DatasetManifest,
    LABEL_ANOMALOUS,
    LABELS,
    ManifestEntry,
    format_real,
    iter_csv_rows,
    read_manifest,
    read_tensor,
)
from .thresholding import (
    THRESHOLD_NAMES,
    VERDICT_ANOMALOUS,
    VERDICT_NORMAL,
    classify,
    compute_thresholds,
)

SCORE_CSV_HEADER = ("source", "label", "d_mean", "d_max") + tuple(
    f"verdict_t{i}" for i in range(1, 7)
)

STD_CONVENTION = "population"
TIE_RULE = "strict-greater"


@dataclass(frozen=True)
class BuildSummary:
    artifact_dir: str
    n: int
    n_calibration: int
    height: int
    width: int
    channels: int
    thresholds: dict[str, float]


@dataclass(frozen=True)
class ScoreSummary:
    out_csv: str
    n_scored: int
    seconds_per_image_mean: float
    seconds_per_image_std: float


@dataclass(frozen=True)
class EvaluateSummary:
    report_csv: str
    scatter_csv: str
    per_threshold_auc: dict[str, float]
    max_auc: float
    sweep_auc_max: float
    sweep_auc_mean: float


@dataclass(frozen=True)
class SynthSummary:
    out_dir: str
    manifest_csv: str
    n_tensors: int


# ---------------------------------------------------------------------------
# build


def run_build(manifest_path: str | Path, artifact_dir: str | Path) -> BuildSummary:
    """Average the mon-build pool, calibrate, cut thresholds, persist."""
    manifest = read_manifest(manifest_path)
    pool_entries = manifest.mon_build
    if not pool_entries:
        raise PipelineError(f"{manifest_path}: manifest has no mon-build rows")
    pool = [read_tensor(manifest.resolve(e)) for e in pool_entries]
    mon = build_mon(pool)

    # default: calibrate on the MoN pool itself; a held-out pool may be
    # supplied through `calibrate` manifest rows
    calibrate_entries = manifest.calibrate
    if calibrate_entries:
        calibration_pool = [read_tensor(manifest.resolve(e)) for e in calibrate_entries]
    else:
        calibration_pool = pool
    calibration = calibration_vectors(mon, calibration_pool)
    thresholds = compute_thresholds(calibration)

    height, width, channels = mon.tensor.dims
    meta = {
        "n": str(mon.n_source),
        "n_calibration": str(calibration.n),
        "height": str(height),
        "width": str(width),
        "channels": str(channels),
        "backbone": "unspecified",
        "stage": "unspecified",
        "std_convention": STD_CONVENTION,
        "tie_rule": TIE_RULE,
        "source_manifest": str(manifest_path),
        "created_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    artifact = ModelArtifact(mon=mon, calibration=calibration, thresholds=thresholds, meta=meta)
    save_artifact(artifact, artifact_dir)
    load_artifact(artifact_dir)  # validate what actually landed on disk

    return BuildSummary(
        artifact_dir=str(artifact_dir),
        n=mon.n_source,
        n_calibration=calibration.n,
        height=height,
        width=width,
        channels=channels,
        thresholds={name: value for name, _, value in thresholds.items()},
    )


# ---------------------------------------------------------------------------
# score


@dataclass(frozen=True)
class ScoredRow:
    source: str
    label: str
    score: ImageScore
    verdicts: dict[str, str]  # threshold name -> verdict
    seconds: float


def _score_entry(manifest: DatasetManifest, entry: ManifestEntry, artifact: ModelArtifact) -> ScoredRow:
    started = time.perf_counter()
    tensor = read_tensor(manifest.resolve(entry))
    score = image_score(distance_heatmap(tensor, artifact.mon))
    verdicts = {
        name: classify(score, artifact.thresholds, name).verdict for name in THRESHOLD_NAMES
    }
    return ScoredRow(
        source=entry.path,
        label=entry.label,
        score=score,
        verdicts=verdicts,
        seconds=time.perf_counter() - started,
    )


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise PipelineError(f"threads must be >= 1 or auto, got {threads}")
    return threads


def run_score(
    artifact_dir: str | Path,
    manifest_path: str | Path,
    out_csv: str | Path,
    threads: int | None = 1,
) -> ScoreSummary:
    """Score every evaluate row against the artifact, in manifest order.

    Rows are emitted in manifest order regardless of worker completion
    order. `threads=None` means one worker per CPU.
    """
    artifact = load_artifact(artifact_dir)
    manifest = read_manifest(manifest_path)
    entries = manifest.evaluate
    if not entries:
        raise PipelineError(f"{manifest_path}: manifest has no evaluate rows")

    n_workers = _resolve_threads(threads)
    if n_workers == 1:
        rows = [_score_entry(manifest, e, artifact) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(lambda e: _score_entry(manifest, e, artifact), entries))

    lines = [",".join(SCORE_CSV_HEADER)]
    for row in rows:
        cells = [row.source, row.label, format_real(row.score.d_mean), format_real(row.score.d_max)]
        cells += [row.verdicts[name] for name in THRESHOLD_NAMES]
        lines.append(",".join(cells))
    _write_text_output(Path(out_csv), "\n".join(lines) + "\n")
    parse_score_csv(out_csv)  # validate the declared output

    times = np.array([row.seconds for row in rows])
    return ScoreSummary(
        out_csv=str(out_csv),
        n_scored=len(rows),
        seconds_per_image_mean=float(times.mean()),
        seconds_per_image_std=float(times.std()),
    )


def parse_score_csv(path: str | Path) -> list[ScoredRow]:
    """Read back a score CSV into rows (seconds are not persisted)."""
    rows = list(iter_csv_rows(path))
    if not rows or tuple(rows[0]) != SCORE_CSV_HEADER:
        raise PipelineError(f"{path}: expected header {','.join(SCORE_CSV_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(SCORE_CSV_HEADER):
            raise PipelineError(f"{path}:{lineno}: expected {len(SCORE_CSV_HEADER)} columns")
        source, label, d_mean_raw, d_max_raw, *verdicts = row
        if label not in LABELS:
            raise PipelineError(f"{path}:{lineno}: unknown label {label!r}")
        if any(v not in (VERDICT_NORMAL, VERDICT_ANOMALOUS) for v in verdicts):
            raise PipelineError(f"{path}:{lineno}: unknown verdict token")
        try:
            score = ImageScore(d_mean=float(d_mean_raw), d_max=float(d_max_raw))
        except ValueError as exc:
            raise PipelineError(f"{path}:{lineno}: bad score: {exc}") from None
        out.append(
            ScoredRow(
                source=source,
                label=label,
                score=score,
                verdicts=dict(zip(THRESHOLD_NAMES, verdicts)),
                seconds=0.0,
            )
        )
    return out


# ---------------------------------------------------------------------------
# evaluate


def run_evaluate(
    report_csv: str | Path,
    scatter_csv: str | Path,
    scores_csv: str | Path | None = None,
    artifact_dir: str | Path | None = None,
    manifest_path: str | Path | None = None,
) -> EvaluateSummary:
    """Write the evaluation report and scatter export.

    Input is either a score CSV produced by run_score, or an artifact plus
    manifest to score in memory; exactly one of the two forms.
    """
    from_csv = scores_csv is not None
    from_artifact = artifact_dir is not None and manifest_path is not None
    if from_csv == from_artifact:
        raise PipelineError("provide either a score CSV or an artifact with a manifest")

    if from_csv:
        rows = parse_score_csv(scores_csv)
        if not rows:
            raise PipelineError(f"{scores_csv}: no scored rows")
    else:
        artifact = load_artifact(artifact_dir)
        manifest = read_manifest(manifest_path)
        entries = manifest.evaluate
        if not entries:
            raise PipelineError(f"{manifest_path}: manifest has no evaluate rows")
        rows = [_score_entry(manifest, e, artifact) for e in entries]

    items = [LabeledScore(score=r.score, label=r.label, source=r.source) for r in rows]
    report = _report_from_rows(rows, items)
    points = scatter_export(items)

    report_lines = ["threshold,tp,fp,tn,fn,auc"]
    for name in THRESHOLD_NAMES:
        counts, auc = report.per_threshold[name]
        report_lines.append(
            f"{name},{counts.tp},{counts.fp},{counts.tn},{counts.fn},{format_real(auc)}"
        )
    report_lines.append(f"max_auc,{format_real(report.max_auc)}")
    report_lines.append(f"sweep_auc_max,{format_real(report.sweep_auc_max_stat)}")
    report_lines.append(f"sweep_auc_mean,{format_real(report.sweep_auc_mean_stat)}")

    scatter_lines = ["source,label,norm_mean,norm_max"]
    scatter_lines += [
        f"{p.source},{p.label},{format_real(p.norm_mean)},{format_real(p.norm_max)}"
        for p in points
    ]

    written: list[Path] = []
    try:
        _write_text_output(Path(report_csv), "\n".join(report_lines) + "\n")
        written.append(Path(report_csv))
        _write_text_output(Path(scatter_csv), "\n".join(scatter_lines) + "\n")
        written.append(Path(scatter_csv))
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise

    return EvaluateSummary(
        report_csv=str(report_csv),
        scatter_csv=str(scatter_csv),
        per_threshold_auc={name: report.per_threshold[name][1] for name in THRESHOLD_NAMES},
        max_auc=report.max_auc,
        sweep_auc_max=report.sweep_auc_max_stat,
        sweep_auc_mean=report.sweep_auc_mean_stat,
    )


def _report_from_rows(rows: Sequence[ScoredRow], items: Sequence[LabeledScore]) -> EvaluationReport:
    """Assemble the report from already-decided verdicts.

    Uses the stored verdict columns rather than re-deriving thresholds, so
    a report built from a score CSV matches the one built from the artifact.
    """
    per_threshold: dict[str, tuple[ConfusionCounts, float]] = {}
    for name in THRESHOLD_NAMES:
        tp = fp = tn = fn = 0
        for row in rows:
            flagged = row.verdicts[name] == VERDICT_ANOMALOUS
            if row.label == LABEL_ANOMALOUS:
                tp += flagged
                fn += not flagged
            else:
                fp += flagged
                tn += not flagged
        counts = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
        per_threshold[name] = (counts, operating_point_auc(counts))
    return EvaluationReport(
        per_threshold=per_threshold,
        max_auc=max(auc for _, auc in per_threshold.values()),
        sweep_auc_max_stat=sweep_auc(items, "max"),
        sweep_auc_mean_stat=sweep_auc(items, "mean"),
    )


# ---------------------------------------------------------------------------
# synth


def run_synth(config: SynthConfig, out_dir: str | Path) -> SynthSummary:
    manifest = generate_dataset(config, out_dir)
    return SynthSummary(
        out_dir=str(out_dir),
        manifest_csv=str(Path(out_dir) / MANIFEST_FILENAME),
        n_tensors=len(manifest.entries),
    )


def _write_text_output(path: Path, text: str) -> None:
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    tmp.replace(path)
