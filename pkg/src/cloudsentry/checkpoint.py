"""Versioned model checkpointing.

A checkpoint is a single canonical JSON document: configuration echo, named
parameter blocks (shape plus row-major float64 data), miner state, channel
statistics, calibration, and metadata. Field order is canonical (sorted
keys, fixed block ordering), so loading a checkpoint and saving it again is
byte-identical, and floats round-trip exactly through JSON's shortest-repr
encoding.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .detector import FeatureScaler, RffMap, SvmParams
from .errors import CheckpointIOError, CorruptCheckpointError, UnknownVersionError
from .extractor import init_extractor, named_parameters
from .logsem import TemplateMiner
from .pipeline import HybridModel, PipelineConfig
from .telemetry import ChannelStats
from .warning import LikelihoodModel

FORMAT_VERSION = 1
_TOOL = "cloudsentry"
_TOOL_VERSION = "0.1.0"


def _parameter_blocks(model: HybridModel) -> list[dict]:
    blocks = []
    for name, array in named_parameters(model.extractor):
        blocks.append(
            {"name": name, "shape": list(array.shape), "data": array.ravel().tolist()}
        )
    blocks.append({"name": "svm.w", "shape": list(model.svm.w.shape), "data": model.svm.w.tolist()})
    blocks.append(
        {
            "name": "scaler.mean",
            "shape": list(model.scaler.mean.shape),
            "data": model.scaler.mean.tolist(),
        }
    )
    blocks.append(
        {
            "name": "scaler.std",
            "shape": list(model.scaler.std.shape),
            "data": model.scaler.std.tolist(),
        }
    )
    if model.rff is not None:
        blocks.append(
            {
                "name": "rff.omega",
                "shape": list(model.rff.omega.shape),
                "data": model.rff.omega.ravel().tolist(),
            }
        )
        blocks.append(
            {
                "name": "rff.phase",
                "shape": list(model.rff.phase.shape),
                "data": model.rff.phase.tolist(),
            }
        )
    return blocks


def checkpoint_document(model: HybridModel) -> dict:
    """The checkpoint as a JSON-ready dict with deterministic content."""
    return {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "channels": model.channels,
        "train_seed": model.train_seed,
        "parameters": _parameter_blocks(model),
        "svm": {
            "b": model.svm.b,
            "c": model.svm.c,
            "learning_rate": model.svm.learning_rate,
        },
        "rff": None if model.rff is None else {"gamma": model.rff.gamma, "dim": model.rff.dim},
        "calibration": {
            "bin_edges": model.calibration.bin_edges.tolist(),
            "p_score_anomalous": model.calibration.p_score_anomalous.tolist(),
            "p_score_normal": model.calibration.p_score_normal.tolist(),
            "prior_anomalous": model.calibration.prior_anomalous,
            "prior_normal": model.calibration.prior_normal,
            "pseudo_count": model.calibration.pseudo_count,
        },
        "stats": {
            provider: {
                "mean": stats.mean.tolist(),
                "std": stats.std.tolist(),
            }
            for provider, stats in sorted(model.stats.items())
        },
        "miner": model.miner.to_dict(),
        "metadata": {"tool": _TOOL, "tool_version": _TOOL_VERSION},
    }


def save_checkpoint(model: HybridModel, path: str | Path) -> None:
    document = checkpoint_document(model)
    text = json.dumps(document, sort_keys=True, separators=(",", ":")) + "\n"
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CheckpointIOError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str | Path) -> HybridModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CheckpointIOError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptCheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(document, dict) or "format_version" not in document:
        raise CorruptCheckpointError("checkpoint lacks a format_version field")
    version = document["format_version"]
    if version != FORMAT_VERSION:
        raise UnknownVersionError(f"unsupported checkpoint format_version {version!r}")
    try:
        return _model_from_document(document)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptCheckpointError(f"malformed checkpoint: {exc}") from exc


def _block_array(blocks: dict[str, dict], name: str) -> np.ndarray:
    if name not in blocks:
        raise CorruptCheckpointError(f"missing parameter block {name!r}")
    block = blocks[name]
    shape = tuple(block["shape"])
    data = np.asarray(block["data"], dtype=np.float64)
    expected = int(np.prod(shape)) if shape else 1
    if data.size != expected:
        raise CorruptCheckpointError(
            f"parameter block {name!r}: shape {shape} expects {expected} values, "
            f"got {data.size}"
        )
    return data.reshape(shape)


def _model_from_document(document: dict) -> HybridModel:
    config = PipelineConfig.from_dict(document["config"])
    channels = int(document["channels"])
    blocks = {block["name"]: block for block in document["parameters"]}

    params = init_extractor(config.extractor_config(channels), seed=0)
    for name, array in named_parameters(params):
        array[...] = _block_array(blocks, name)

    svm_meta = document["svm"]
    svm = SvmParams(
        w=_block_array(blocks, "svm.w"),
        b=float(svm_meta["b"]),
        c=float(svm_meta["c"]),
        learning_rate=float(svm_meta["learning_rate"]),
    )
    scaler = FeatureScaler(
        mean=_block_array(blocks, "scaler.mean"),
        std=_block_array(blocks, "scaler.std"),
    )
    rff = None
    if document.get("rff") is not None:
        rff = RffMap(
            omega=_block_array(blocks, "rff.omega"),
            phase=_block_array(blocks, "rff.phase"),
            gamma=float(document["rff"]["gamma"]),
        )
    cal = document["calibration"]
    calibration = LikelihoodModel(
        bin_edges=np.asarray(cal["bin_edges"], dtype=np.float64),
        p_score_anomalous=np.asarray(cal["p_score_anomalous"], dtype=np.float64),
        p_score_normal=np.asarray(cal["p_score_normal"], dtype=np.float64),
        prior_anomalous=float(cal["prior_anomalous"]),
        prior_normal=float(cal["prior_normal"]),
        pseudo_count=float(cal["pseudo_count"]),
    )
    stats = {
        provider: ChannelStats(
            mean=np.asarray(entry["mean"], dtype=np.float64),
            std=np.asarray(entry["std"], dtype=np.float64),
            channel_count=len(entry["mean"]),
        )
        for provider, entry in document["stats"].items()
    }
    miner = TemplateMiner.from_dict(document["miner"])
    return HybridModel(
        config=config,
        channels=channels,
        extractor=params,
        svm=svm,
        scaler=scaler,
        rff=rff,
        calibration=calibration,
        stats=stats,
        miner=miner,
        train_seed=int(document["train_seed"]),
    )
