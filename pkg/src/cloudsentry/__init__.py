"""cloudsentry: streaming anomaly detection and early warning for
multi-cloud telemetry.

The pipeline fuses a multi-scale 1-D CNN branch and a stacked bidirectional
LSTM branch over metric windows with a pooled log-context vector, weights
the fused features with self-attention, classifies windows with a
hinge-loss SVM (linear or random-Fourier-feature RBF), and calibrates raw
scores into posterior anomaly confidences that drive a persistence-based
alerting rule.
"""

__version__ = "0.1.0"

from .telemetry import (
    ChannelStats,
    TelemetryRecord,
    WindowTensor,
    build_windows,
    fit_stats,
    normalize,
    validate_record,
)
from .ingest import (
    FaultSpec,
    LabeledStream,
    ProviderProfile,
    SyntheticScenario,
    generate,
    parse_csv,
    parse_jsonl,
)
from .pipeline import (
    HybridModel,
    PipelineConfig,
    detect_stream,
    evaluate_stream,
    train_pipeline,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ChannelStats",
    "FaultSpec",
    "HybridModel",
    "LabeledStream",
    "PipelineConfig",
    "ProviderProfile",
    "SyntheticScenario",
    "TelemetryRecord",
    "WindowTensor",
    "__version__",
    "build_windows",
    "detect_stream",
    "evaluate_stream",
    "fit_stats",
    "generate",
    "load_checkpoint",
    "normalize",
    "parse_csv",
    "parse_jsonl",
    "save_checkpoint",
    "train_pipeline",
    "validate_record",
]
