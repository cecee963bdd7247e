"""Feature-space anomaly detection against a mean model of normality."""

__version__ = "0.1.0"

from .artifacts import ModelArtifact, load_artifact, save_artifact
from .errors import MondetError
from .evaluation import (
    ConfusionCounts,
    EvaluationReport,
    LabeledScore,
    confusion,
    evaluate_all,
    operating_point_auc,
    scatter_export,
    sweep_auc,
)
from .normality import (
    CalibrationVectors,
    DistanceHeatmap,
    ImageScore,
    ModelOfNormality,
    build_mon,
    calibration_vectors,
    distance_heatmap,
    image_score,
)
from .synthgen import SynthConfig, generate_anomalous, generate_dataset, generate_normal
from .tensorio import (
    DatasetManifest,
    FeatureTensor,
    ManifestEntry,
    read_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)
from .thresholding import Decision, ThresholdSet, classify, compute_thresholds

__all__ = [
    "__version__",
    "CalibrationVectors",
    "ConfusionCounts",
    "DatasetManifest",
    "Decision",
    "DistanceHeatmap",
    "EvaluationReport",
    "FeatureTensor",
    "ImageScore",
    "LabeledScore",
    "ManifestEntry",
    "ModelArtifact",
    "ModelOfNormality",
    "MondetError",
    "SynthConfig",
    "ThresholdSet",
    "build_mon",
    "calibration_vectors",
    "classify",
    "compute_thresholds",
    "confusion",
    "distance_heatmap",
    "evaluate_all",
    "generate_anomalous",
    "generate_dataset",
    "generate_normal",
    "image_score",
    "load_artifact",
    "operating_point_auc",
    "read_manifest",
    "read_tensor",
    "save_artifact",
    "scatter_export",
    "sweep_auc",
    "write_manifest",
    "write_tensor",
]
