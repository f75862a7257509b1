"""Data models for corpora, run configuration and reports."""

from src.models.corpus import CorpusSpec, Utterance
from src.models.metrics import (
    METRICS_COLUMNS,
    AblationSummaryRow,
    DiagnosticsSummary,
    ErrorReport,
    EvalReport,
    GradcheckReport,
    GradcheckResult,
    MetricsRow,
    RepresentationStats,
)
from src.models.run_config import (
    ABLATION_TABLE,
    AblationConfig,
    AblationMode,
    DiagnoseConfig,
    EvalConfig,
    Modality,
    ModelConfig,
    NoiseType,
    PathsConfig,
    RunConfig,
    TrainConfig,
    load_run_config,
    parse_run_config,
)

__all__ = [
    "ABLATION_TABLE",
    "METRICS_COLUMNS",
    "AblationConfig",
    "AblationMode",
    "AblationSummaryRow",
    "CorpusSpec",
    "DiagnoseConfig",
    "DiagnosticsSummary",
    "ErrorReport",
    "EvalConfig",
    "EvalReport",
    "GradcheckReport",
    "GradcheckResult",
    "MetricsRow",
    "Modality",
    "ModelConfig",
    "NoiseType",
    "PathsConfig",
    "RunConfig",
    "TrainConfig",
    "Utterance",
    "load_run_config",
    "parse_run_config",
]
