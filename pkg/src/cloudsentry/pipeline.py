"""End-to-end orchestration: configuration, training, detection, evaluation.

The pipeline shards a record stream by provider, mines log templates in
stream order, builds sliding windows per provider, normalizes them against
training-split statistics, attaches pooled log-context vectors, trains the
extractor+SVM stack (jointly by default, or with the extractor frozen),
calibrates the Bayesian warning stage on validation scores, and finally
scores streams into alert decisions and evaluation reports.

Determinism: every random choice flows from the single training seed
(parameter init, epoch shuffling, RFF sampling), the fallback encoder is
hash-based, and reports contain no wall-clock values, so a fixed
(data, config, seed) triple reproduces byte-identical outputs.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .detector import (
    FeatureScaler,
    RffMap,
    SvmParams,
    SvmTrainConfig,
    TrainReport,
    build_rff_map,
    check_two_classes,
    decision,
    fit_feature_scaler,
    rff_backward,
    rff_transform,
    train_svm,
    transform_features,
)
from .errors import NonFiniteLossError, SingleClassDataError
from .evaluation import (
    DEFAULT_GRACE_STEPS,
    DEFAULT_SIGMA_K,
    detection_latency,
    intervals_from_flags,
    metrics,
    threshold_baseline,
)
from .extractor import (
    ExtractorConfig,
    ExtractorParams,
    accumulate_grads,
    apply_sgd_update,
    extract_features,
    extractor_backward,
    init_extractor,
)
from .logsem import (
    ContextConfig,
    EmbedServiceConfig,
    SemanticContext,
    StructuredLine,
    TemplateMiner,
    embed_structured_lines,
    pool_context,
    structure_lines,
)
from .telemetry import (
    LABEL_ANOMALOUS,
    ChannelStats,
    TelemetryRecord,
    WindowTensor,
    build_windows,
    fit_stats,
    normalize,
)
from .warning import (
    AlertDecision,
    LikelihoodModel,
    ScoredWindow,
    calibrate,
    decide,
    posterior,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WarningConfig:
    bins: int = 20
    pseudo_count: float = 1.0
    threshold: float = 0.9
    persistence: int = 1


@dataclass(frozen=True)
class ExtractorSettings:
    """Extractor architecture minus the data-dependent channel count."""

    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    branch_channels: int = 32
    cnn_dim: int = 64
    lstm_hidden: int = 128
    lstm_layers: int = 2
    key_dim: int = 64
    value_dim: int = 128
    bn_epsilon: float = 1e-5


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the pipeline; serializes to/from the config file."""

    channels: int | None = None  # None: inferred from the data
    window_len: int = 10
    train_stride: int = 5
    detect_stride: int = 1
    std_floor: float = 1e-6
    train_frac: float = 0.7
    context: ContextConfig = field(default_factory=ContextConfig)
    extractor: ExtractorSettings = field(default_factory=ExtractorSettings)
    svm: SvmTrainConfig = field(default_factory=SvmTrainConfig)
    train_extractor: bool = True
    extractor_learning_rate: float = 0.005
    extractor_grad_clip: float = 5.0
    warning: WarningConfig = field(default_factory=WarningConfig)
    grace_steps: int = DEFAULT_GRACE_STEPS
    sigma_k: float = DEFAULT_SIGMA_K

    def extractor_config(self, channels: int) -> ExtractorConfig:
        s = self.extractor
        return ExtractorConfig(
            channels=channels,
            window_len=self.window_len,
            kernel_sizes=s.kernel_sizes,
            branch_channels=s.branch_channels,
            cnn_dim=s.cnn_dim,
            lstm_hidden=s.lstm_hidden,
            lstm_layers=s.lstm_layers,
            context_dim=self.context.k,
            key_dim=s.key_dim,
            value_dim=s.value_dim,
            bn_epsilon=s.bn_epsilon,
        )

    def to_dict(self) -> dict:
        service = self.context.service
        return {
            "channels": self.channels,
            "window_len": self.window_len,
            "train_stride": self.train_stride,
            "detect_stride": self.detect_stride,
            "std_floor": self.std_floor,
            "train_frac": self.train_frac,
            "context": {
                "k": self.context.k,
                "fallback_dim": self.context.fallback_dim,
                "mode": self.context.mode,
                "similarity_threshold": self.context.similarity_threshold,
                "service": None
                if service is None
                else {
                    "url": service.url,
                    "dim": service.dim,
                    "batch_size": service.batch_size,
                    "max_attempts": service.max_attempts,
                    "backoff_base_s": service.backoff_base_s,
                    "connect_timeout_s": service.connect_timeout_s,
                    "read_timeout_s": service.read_timeout_s,
                    "concurrency": service.concurrency,
                },
            },
            "extractor": {
                "kernel_sizes": list(self.extractor.kernel_sizes),
                "branch_channels": self.extractor.branch_channels,
                "cnn_dim": self.extractor.cnn_dim,
                "lstm_hidden": self.extractor.lstm_hidden,
                "lstm_layers": self.extractor.lstm_layers,
                "key_dim": self.extractor.key_dim,
                "value_dim": self.extractor.value_dim,
                "bn_epsilon": self.extractor.bn_epsilon,
            },
            "svm": {
                "c": self.svm.c,
                "learning_rate": self.svm.learning_rate,
                "epochs": self.svm.epochs,
                "batch_size": self.svm.batch_size,
                "use_rff": self.svm.use_rff,
                "rff_dim": self.svm.rff_dim,
                "rff_gamma": self.svm.rff_gamma,
            },
            "train_extractor": self.train_extractor,
            "extractor_learning_rate": self.extractor_learning_rate,
            "extractor_grad_clip": self.extractor_grad_clip,
            "warning": {
                "bins": self.warning.bins,
                "pseudo_count": self.warning.pseudo_count,
                "threshold": self.warning.threshold,
                "persistence": self.warning.persistence,
            },
            "grace_steps": self.grace_steps,
            "sigma_k": self.sigma_k,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        defaults = cls()
        ctx = data.get("context", {})
        service_data = ctx.get("service")
        service = None
        if service_data is not None:
            service = EmbedServiceConfig(
                url=service_data["url"],
                dim=int(service_data.get("dim", 64)),
                batch_size=int(service_data.get("batch_size", 32)),
                max_attempts=int(service_data.get("max_attempts", 3)),
                backoff_base_s=float(service_data.get("backoff_base_s", 0.05)),
                connect_timeout_s=float(service_data.get("connect_timeout_s", 2.0)),
                read_timeout_s=float(service_data.get("read_timeout_s", 10.0)),
                concurrency=int(service_data.get("concurrency", 4)),
            )
        ext = data.get("extractor", {})
        svm = data.get("svm", {})
        warn = data.get("warning", {})
        return cls(
            channels=data.get("channels"),
            window_len=int(data.get("window_len", defaults.window_len)),
            train_stride=int(data.get("train_stride", defaults.train_stride)),
            detect_stride=int(data.get("detect_stride", defaults.detect_stride)),
            std_floor=float(data.get("std_floor", defaults.std_floor)),
            train_frac=float(data.get("train_frac", defaults.train_frac)),
            context=ContextConfig(
                k=int(ctx.get("k", 64)),
                fallback_dim=int(ctx.get("fallback_dim", 64)),
                mode=ctx.get("mode", "fallback_only"),
                service=service,
                similarity_threshold=float(ctx.get("similarity_threshold", 0.5)),
            ),
            extractor=ExtractorSettings(
                kernel_sizes=tuple(ext.get("kernel_sizes", (3, 5, 7))),
                branch_channels=int(ext.get("branch_channels", 32)),
                cnn_dim=int(ext.get("cnn_dim", 64)),
                lstm_hidden=int(ext.get("lstm_hidden", 128)),
                lstm_layers=int(ext.get("lstm_layers", 2)),
                key_dim=int(ext.get("key_dim", 64)),
                value_dim=int(ext.get("value_dim", 128)),
                bn_epsilon=float(ext.get("bn_epsilon", 1e-5)),
            ),
            svm=SvmTrainConfig(
                c=float(svm.get("c", 1.0)),
                learning_rate=float(svm.get("learning_rate", 0.01)),
                epochs=int(svm.get("epochs", 100)),
                batch_size=int(svm.get("batch_size", 32)),
                use_rff=bool(svm.get("use_rff", False)),
                rff_dim=int(svm.get("rff_dim", 1024)),
                rff_gamma=svm.get("rff_gamma"),
            ),
            train_extractor=bool(data.get("train_extractor", True)),
            extractor_learning_rate=float(
                data.get("extractor_learning_rate", defaults.extractor_learning_rate)
            ),
            extractor_grad_clip=float(
                data.get("extractor_grad_clip", defaults.extractor_grad_clip)
            ),
            warning=WarningConfig(
                bins=int(warn.get("bins", 20)),
                pseudo_count=float(warn.get("pseudo_count", 1.0)),
                threshold=float(warn.get("threshold", 0.9)),
                persistence=int(warn.get("persistence", 1)),
            ),
            grace_steps=int(data.get("grace_steps", defaults.grace_steps)),
            sigma_k=float(data.get("sigma_k", defaults.sigma_k)),
        )


@dataclass(frozen=True)
class HybridModel:
    """Trained pipeline state: everything needed to score new streams."""

    config: PipelineConfig
    channels: int
    extractor: ExtractorParams
    svm: SvmParams
    scaler: FeatureScaler
    rff: RffMap | None
    calibration: LikelihoodModel
    stats: dict[str, ChannelStats]
    miner: TemplateMiner
    train_seed: int


@dataclass(frozen=True)
class PipelineTrainReport:
    svm_report: TrainReport
    train_windows: int
    val_windows: int
    anomalous_windows: int
    providers: tuple[str, ...]


@dataclass(frozen=True)
class ScoredWindowResult:
    """One scored detection window, in stream order."""

    provider_id: str
    origin: int
    end_step: int
    timestamp: int
    label: str | None
    score: float
    posterior: float
    alert: bool
    consecutive_count: int


# --- stream preparation -----------------------------------------------------


def shard_by_provider(records: list[TelemetryRecord]) -> dict[str, list[TelemetryRecord]]:
    """Group records per provider, preserving stream order within each."""
    shards: dict[str, list[TelemetryRecord]] = {}
    for record in records:
        shards.setdefault(record.provider_id, []).append(record)
    return shards


def infer_channels(records: list[TelemetryRecord]) -> int:
    if not records:
        raise ValueError("record stream is empty")
    return len(records[0].metrics)


@dataclass
class PreparedStream:
    """Per-provider windows with contexts, ready for scoring."""

    provider_order: tuple[str, ...]
    windows: dict[str, list[WindowTensor]]
    contexts: dict[str, list[SemanticContext]]
    step_counts: dict[str, int]


def _window_structured_lines(
    provider_records: list[TelemetryRecord],
    structured_per_record: list[list[StructuredLine]],
    origin: int,
    window_len: int,
) -> list[StructuredLine]:
    lines: list[StructuredLine] = []
    for idx in range(origin, origin + window_len):
        lines.extend(structured_per_record[idx])
    return lines


def prepare_stream(
    records: list[TelemetryRecord],
    config: PipelineConfig,
    miner: TemplateMiner,
    stats: dict[str, ChannelStats],
    stride: int,
) -> PreparedStream:
    """Shard, window, normalize, and attach contexts for detection/eval.

    The miner keeps learning on unseen lines during this pass, but the
    caller's instance is what mutates; pass a copy to keep a model frozen.
    """
    shards = shard_by_provider(records)
    provider_order = tuple(sorted(shards))
    windows: dict[str, list[WindowTensor]] = {}
    contexts: dict[str, list[SemanticContext]] = {}
    step_counts: dict[str, int] = {}

    structured: dict[str, list[list[StructuredLine]]] = {}
    for record in records:  # global stream order keeps mining deterministic
        structured.setdefault(record.provider_id, []).append(
            structure_lines(record.log_lines, miner)
        )

    for provider in provider_order:
        provider_records = shards[provider]
        if provider not in stats:
            raise KeyError(f"no channel statistics for provider {provider!r}")
        step_counts[provider] = len(provider_records)
        raw_windows = build_windows(provider_records, config.window_len, stride)
        normalized = [normalize(w, stats[provider]) for w in raw_windows]
        windows[provider] = normalized
        provider_structured = structured[provider]
        provider_contexts = []
        for window in raw_windows:
            lines = _window_structured_lines(
                provider_records, provider_structured, window.stride_origin, config.window_len
            )
            matrix, source = embed_structured_lines(lines, miner, config.context)
            provider_contexts.append(pool_context(matrix, config.context.k, source))
        contexts[provider] = provider_contexts
    return PreparedStream(
        provider_order=provider_order,
        windows=windows,
        contexts=contexts,
        step_counts=step_counts,
    )


# --- scoring ------------------------------------------------------------------


def score_window(
    window: WindowTensor,
    context: SemanticContext,
    model: HybridModel,
) -> float:
    """Raw SVM score of one normalized window (negative leans anomalous)."""
    config = model.config.extractor_config(model.channels)
    forward = extract_features(window.values, context.values, model.extractor, config)
    features = model.scaler.transform(forward.pooled)
    if model.rff is not None:
        features = rff_transform(features, model.rff)
    return decision(features, model.svm)


# --- training -------------------------------------------------------------------


def _labels_to_signs(windows: list[WindowTensor]) -> np.ndarray:
    signs = []
    for window in windows:
        if window.label is None:
            raise ValueError("training windows must be labeled")
        signs.append(-1 if window.label == LABEL_ANOMALOUS else 1)
    return np.asarray(signs, dtype=np.int64)


def _pooled_features(
    windows: list[WindowTensor],
    contexts: list[SemanticContext],
    params: ExtractorParams,
    config: ExtractorConfig,
) -> np.ndarray:
    rows = [
        extract_features(w.values, c.values, params, config).pooled
        for w, c in zip(windows, contexts)
    ]
    return np.asarray(rows)


def _clip_grads(grads: dict[str, np.ndarray], max_norm: float) -> None:
    """Global-norm gradient clipping, in place."""
    if max_norm <= 0:
        return
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def _train_joint(
    windows: list[WindowTensor],
    contexts: list[SemanticContext],
    labels: np.ndarray,
    params: ExtractorParams,
    ext_config: ExtractorConfig,
    config: PipelineConfig,
    scaler: FeatureScaler,
    seed: int,
) -> tuple[SvmParams, RffMap | None, TrainReport]:
    """Minibatch subgradient descent jointly over SVM and extractor params.

    The per-epoch objective is the regularizer at epoch end plus the hinge
    values observed as each batch was visited (standard training loss).
    """
    svm_cfg = config.svm
    rng = np.random.default_rng(seed)
    rff = None
    feature_dim = ext_config.value_dim
    if svm_cfg.use_rff:
        gamma = svm_cfg.rff_gamma if svm_cfg.rff_gamma is not None else 1.0 / feature_dim
        rff = build_rff_map(feature_dim, svm_cfg.rff_dim, gamma, rng)
        feature_dim = svm_cfg.rff_dim

    w = np.zeros(feature_dim)
    # Start at the all-normal margin: with b=+1 only anomalous windows violate
    # initially, so the first subgradients are purely discriminative instead
    # of an imbalance-driven bias overshoot.
    b = 1.0
    n = len(windows)
    trace: list[float] = []
    for _ in range(svm_cfg.epochs):
        order = rng.permutation(n)
        hinge_sum = 0.0
        for start in range(0, n, svm_cfg.batch_size):
            batch = order[start : start + svm_cfg.batch_size]
            grad_w = np.zeros_like(w)
            grad_b = 0.0
            ext_grads: dict[str, np.ndarray] = {}
            for idx in batch:
                window = windows[idx]
                forward = extract_features(
                    window.values, contexts[idx].values, params, ext_config
                )
                scaled = scaler.transform(forward.pooled)
                phi = rff_transform(scaled, rff) if rff is not None else scaled
                y = labels[idx]
                score = float(w @ phi + b)
                margin = y * score
                hinge_sum += max(0.0, 1.0 - margin)
                if margin < 1.0:
                    grad_w += -y * phi
                    grad_b += -y
                    if config.train_extractor:
                        grad_scaled = (
                            rff_backward(scaled, rff, w) if rff is not None else w
                        )
                        upstream = svm_cfg.c * (-y) * scaler.backward(grad_scaled)
                        accumulate_grads(
                            ext_grads,
                            extractor_backward(
                                window.values,
                                contexts[idx].values,
                                params,
                                ext_config,
                                upstream,
                                forward=forward,
                            ),
                        )
            if svm_cfg.learning_rate > 0:
                # Batch-fraction scaling on the regularizer: the objective's
                # 0.5*||w||^2 term enters once per pass over the data.
                frac = len(batch) / n
                w -= svm_cfg.learning_rate * (frac * w + svm_cfg.c * grad_w)
                b -= svm_cfg.learning_rate * svm_cfg.c * grad_b
            if config.train_extractor and ext_grads and config.extractor_learning_rate > 0:
                _clip_grads(ext_grads, config.extractor_grad_clip)
                apply_sgd_update(params, ext_grads, config.extractor_learning_rate)
        value = 0.5 * float(w @ w) + svm_cfg.c * hinge_sum
        if not math.isfinite(value) or not np.all(np.isfinite(w)):
            raise NonFiniteLossError(f"joint training objective diverged to {value!r}")
        trace.append(value)
    svm = SvmParams(w=w, b=b, c=svm_cfg.c, learning_rate=svm_cfg.learning_rate)
    report = TrainReport(
        objective_per_epoch=tuple(trace),
        final_objective=trace[-1] if trace else 0.0,
        epochs_run=svm_cfg.epochs,
        seed=seed,
    )
    return svm, rff, report


def train_pipeline(
    records: list[TelemetryRecord],
    config: PipelineConfig,
    seed: int,
) -> tuple[HybridModel, PipelineTrainReport]:
    """Train the full hybrid model from a labeled record stream."""
    channels = config.channels or infer_channels(records)
    config = replace(config, channels=channels)
    ext_config = config.extractor_config(channels)

    miner = TemplateMiner(similarity_threshold=config.context.similarity_threshold)
    shards = shard_by_provider(records)
    provider_order = tuple(sorted(shards))

    structured: dict[str, list[list[StructuredLine]]] = {}
    for record in records:
        structured.setdefault(record.provider_id, []).append(
            structure_lines(record.log_lines, miner)
        )

    # Time-ordered train/validation split per provider at the record level.
    # Training windows use the decorrelating train stride; validation windows
    # use the detect stride so calibration sees the same score stream that
    # detection will produce.
    train_windows: list[WindowTensor] = []
    train_contexts_raw: list[list[StructuredLine]] = []
    val_windows: list[WindowTensor] = []
    val_contexts_raw: list[list[StructuredLine]] = []
    stats: dict[str, ChannelStats] = {}
    for provider in provider_order:
        provider_records = shards[provider]
        split = max(config.window_len, int(len(provider_records) * config.train_frac))
        train_raw = build_windows(
            provider_records[:split], config.window_len, config.train_stride
        )
        if not train_raw:
            continue
        val_raw = build_windows(
            provider_records[split:], config.window_len, config.detect_stride
        )
        stats[provider] = fit_stats(train_raw, config.std_floor)
        struct_p = structured[provider]
        for w in train_raw:
            train_windows.append(normalize(w, stats[provider]))
            train_contexts_raw.append(
                _window_structured_lines(
                    provider_records, struct_p, w.stride_origin, config.window_len
                )
            )
        for w in val_raw:
            val_windows.append(normalize(w, stats[provider]))
            val_contexts_raw.append(
                _window_structured_lines(
                    provider_records, struct_p, split + w.stride_origin, config.window_len
                )
            )

    if not train_windows:
        raise ValueError("not enough records to build any training window")

    def pool_all(raw_lines: list[list[StructuredLine]]) -> list[SemanticContext]:
        out = []
        for lines in raw_lines:
            matrix, source = embed_structured_lines(lines, miner, config.context)
            out.append(pool_context(matrix, config.context.k, source))
        return out

    train_contexts = pool_all(train_contexts_raw)
    val_contexts = pool_all(val_contexts_raw)

    labels = _labels_to_signs(train_windows)
    check_two_classes(labels)

    params = init_extractor(ext_config, seed)
    # The scaler is fit once on the initial features and kept fixed; joint
    # updates drift the feature distribution only mildly over a few epochs.
    initial_features = _pooled_features(train_windows, train_contexts, params, ext_config)
    scaler = fit_feature_scaler(initial_features, config.std_floor)
    if config.train_extractor:
        svm, rff, report = _train_joint(
            train_windows, train_contexts, labels, params, ext_config, config, scaler, seed
        )
    else:
        svm, rff, report = train_svm(
            scaler.transform(initial_features), labels, config.svm, seed
        )

    # Calibrate on validation scores; widen to train+val if one-sided.
    def scores_of(ws, cs):
        feats = scaler.transform(_pooled_features(ws, cs, params, ext_config))
        return transform_features(feats, rff) @ svm.w + svm.b

    val_labels = _labels_to_signs(val_windows) if val_windows else np.empty(0, dtype=np.int64)
    try:
        if len(val_windows) == 0:
            raise SingleClassDataError("empty validation split")
        calibration = calibrate(
            scores_of(val_windows, val_contexts),
            val_labels == -1,
            bins=config.warning.bins,
            pseudo_count=config.warning.pseudo_count,
        )
    except SingleClassDataError:
        logger.info("validation split is one-sided; calibrating on train+validation")
        all_windows = train_windows + val_windows
        all_contexts = train_contexts + val_contexts
        all_labels = np.concatenate([labels, val_labels])
        calibration = calibrate(
            scores_of(all_windows, all_contexts),
            all_labels == -1,
            bins=config.warning.bins,
            pseudo_count=config.warning.pseudo_count,
        )

    model = HybridModel(
        config=config,
        channels=channels,
        extractor=params,
        svm=svm,
        scaler=scaler,
        rff=rff,
        calibration=calibration,
        stats=stats,
        miner=miner,
        train_seed=seed,
    )
    anomalous = int((labels == -1).sum() + (val_labels == -1).sum())
    train_report = PipelineTrainReport(
        svm_report=report,
        train_windows=len(train_windows),
        val_windows=len(val_windows),
        anomalous_windows=anomalous,
        providers=provider_order,
    )
    return model, train_report


# --- detection -------------------------------------------------------------------


def detect_stream(records: list[TelemetryRecord], model: HybridModel) -> list[ScoredWindowResult]:
    """Score a stream into per-window alert decisions, in stream order.

    Uses a copy of the checkpointed miner so the model object stays frozen.
    """
    config = model.config
    prepared = prepare_stream(
        records, config, model.miner.copy(), model.stats, config.detect_stride
    )
    results: list[ScoredWindowResult] = []
    for provider in prepared.provider_order:
        windows = prepared.windows[provider]
        contexts = prepared.contexts[provider]
        scored = []
        for window, context in zip(windows, contexts):
            raw = score_window(window, context, model)
            post = posterior(raw, model.calibration)
            end_idx = window.stride_origin + config.window_len - 1
            scored.append(
                ScoredWindow(
                    window_id=f"{provider}:{window.stride_origin}",
                    timestamp=int(window.start_timestamp),
                    score=raw,
                    posterior=post,
                )
            )
        decisions = list(
            decide(
                scored,
                threshold=config.warning.threshold,
                persistence=config.warning.persistence,
            )
        )
        for window, dec in zip(windows, decisions):
            results.append(
                ScoredWindowResult(
                    provider_id=provider,
                    origin=window.stride_origin,
                    end_step=window.stride_origin + config.window_len - 1,
                    timestamp=dec.timestamp,
                    label=window.label,
                    score=dec.score,
                    posterior=dec.posterior,
                    alert=dec.alert,
                    consecutive_count=dec.consecutive_count,
                )
            )
    results.sort(key=lambda r: (r.timestamp, r.provider_id, r.origin))
    return results


def results_to_decisions(results: list[ScoredWindowResult]) -> list[AlertDecision]:
    return [
        AlertDecision(
            window_id=f"{r.provider_id}:{r.origin}",
            timestamp=r.timestamp,
            score=r.score,
            posterior=r.posterior,
            alert=r.alert,
            consecutive_count=r.consecutive_count,
        )
        for r in results
    ]


# --- evaluation --------------------------------------------------------------------


def _metrics_dict(report) -> dict:
    return {
        "precision": report.anomalous.precision,
        "recall": report.anomalous.recall,
        "f1": report.anomalous.f1,
        "normal_class": {
            "precision": report.normal.precision,
            "recall": report.normal.recall,
            "f1": report.normal.f1,
        },
        "confusion": {
            "tp": report.counts.tp,
            "fp": report.counts.fp,
            "tn": report.counts.tn,
            "fn": report.counts.fn,
        },
    }


def evaluate_stream(
    records: list[TelemetryRecord],
    model: HybridModel,
    with_baseline: bool = False,
    grace: int | None = None,
) -> dict:
    """Window-level evaluation report over a labeled stream (JSON-ready)."""
    grace = model.config.grace_steps if grace is None else grace
    results = detect_stream(records, model)
    if any(r.label is None for r in results):
        raise ValueError("evaluation requires labeled records")
    predicted = [r.alert for r in results]
    truth = [r.label == LABEL_ANOMALOUS for r in results]
    model_metrics = metrics(predicted, truth)

    shards = shard_by_provider(records)
    provider_order = tuple(sorted(shards))
    per_fault_entries: list[dict] = []
    missed = 0
    false_alarms = 0
    all_latencies: list[int] = []
    for provider in provider_order:
        flags = [bool(rec.label) for rec in shards[provider]]
        intervals = intervals_from_flags(flags)
        alert_steps = [
            r.end_step for r in results if r.provider_id == provider and r.alert
        ]
        latency = detection_latency(alert_steps, intervals, grace)
        for (start, length), value in zip(intervals, latency.per_fault):
            per_fault_entries.append(
                {
                    "provider": provider,
                    "start_step": start,
                    "length": length,
                    "latency_steps": value,
                }
            )
            if value is None:
                missed += 1
            else:
                all_latencies.append(value)
        false_alarms += latency.false_alarms

    report: dict = {
        "channels": model.channels,
        "config": model.config.to_dict(),
        "train_seed": model.train_seed,
        "windows": {
            "count": len(results),
            "anomalous": int(sum(truth)),
            "alerts": int(sum(predicted)),
        },
        "model": _metrics_dict(model_metrics),
        "latency": {
            "grace_steps": grace,
            "per_fault": per_fault_entries,
            "missed": missed,
            "false_alarms": false_alarms,
            "mean_steps": float(np.mean(all_latencies)) if all_latencies else None,
            "median_steps": float(np.median(all_latencies)) if all_latencies else None,
        },
    }
    if with_baseline:
        base_predicted: list[bool] = []
        base_truth: list[bool] = []
        for provider in provider_order:
            provider_records = shards[provider]
            values = np.array([rec.metrics for rec in provider_records])
            step_flags = threshold_baseline(values, model.stats[provider], model.config.sigma_k)
            for window in build_windows(provider_records, model.config.window_len,
                                        model.config.detect_stride):
                window_steps = step_flags[
                    window.stride_origin : window.stride_origin + model.config.window_len
                ]
                base_predicted.append(any(window_steps))
                base_truth.append(window.label == LABEL_ANOMALOUS)
        baseline_metrics = metrics(base_predicted, base_truth)
        report["baseline"] = {
            "sigma_k": model.config.sigma_k,
            **_metrics_dict(baseline_metrics),
        }
    return report


# --- scoring-time sweep ---------------------------------------------------------------


def sweep_scoring_time(
    records: list[TelemetryRecord],
    config: PipelineConfig,
    hidden_sizes: list[int],
    seed: int,
    sample_windows: int = 300,
    repeats: int = 5,
) -> list[dict]:
    """Per-window scoring wall-clock at several LSTM hidden sizes.

    Models are freshly initialized (scoring cost does not depend on the
    trained values); each timing is the best of ``repeats`` passes over the
    same window sample to suppress scheduler noise.
    """
    channels = config.channels or infer_channels(records)
    shards = shard_by_provider(records)
    provider = sorted(shards)[0]
    provider_records = shards[provider]
    raw = build_windows(provider_records, config.window_len, 1)[:sample_windows]
    if not raw:
        raise ValueError("not enough records for a timing sample")
    stats = fit_stats(raw, config.std_floor)
    windows = [normalize(w, stats) for w in raw]
    context = np.zeros(config.context.k)

    entries = []
    for hidden in hidden_sizes:
        swept = replace(config, extractor=replace(config.extractor, lstm_hidden=hidden))
        ext_config = swept.extractor_config(channels)
        params = init_extractor(ext_config, seed)
        w = np.zeros(ext_config.value_dim)
        best = math.inf
        for _ in range(repeats):
            start = time.perf_counter()
            for window in windows:
                forward = extract_features(window.values, context, params, ext_config)
                float(w @ forward.pooled)
            elapsed = time.perf_counter() - start
            best = min(best, elapsed)
        entries.append(
            {
                "lstm_hidden": hidden,
                "windows": len(windows),
                "ms_per_window": best / len(windows) * 1000.0,
            }
        )
    return entries
