"""Hybrid feature extraction: multi-scale CNN branch, stacked BiLSTM branch,
per-timestamp fusion with the log-context vector, and self-attention over
timestamps pooled into one descriptor per window.

Layout of the fused matrix, per row (timestamp):

    [ cnn features (cnn_dim) | bilstm features (2*lstm_hidden) | context (k) ]

The attention projections consume this matrix with timestamps as tokens, so
attention weights can condition on the context columns. The attended rows
are mean-pooled into the window descriptor consumed by the classifier.

Backward passes chain the numkit kernel gradients by hand;
``extractor_backward`` returns exact gradients of the pooled descriptor's
scalar downstream loss with respect to every extractor parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .numkit import (
    AttnSpec,
    BiLstmLayerParams,
    ConvSpec,
    attention_backward,
    attention_forward,
    batchnorm_backward,
    batchnorm_forward,
    bilstm_backward,
    bilstm_forward_cached,
    conv1d_backward,
    conv1d_forward,
    init_lstm_spec,
    linear_backward,
    linear_forward,
    relu,
    relu_backward,
)

DEFAULT_KERNEL_SIZES = (3, 5, 7)


@dataclass(frozen=True)
class ExtractorConfig:
    """Architecture constants for the feature pipeline.

    Defaults realize the reference architecture: kernel sizes 3/5/7 on raw
    channels, CNN features projected to 64, a 2-layer bidirectional LSTM
    with 128 hidden units per direction (256 out), and a window of 10 steps.
    """

    channels: int
    window_len: int = 10
    kernel_sizes: tuple[int, ...] = DEFAULT_KERNEL_SIZES
    branch_channels: int = 32
    cnn_dim: int = 64
    lstm_hidden: int = 128
    lstm_layers: int = 2
    context_dim: int = 64
    key_dim: int = 64
    value_dim: int = 128
    bn_epsilon: float = 1e-5

    @property
    def rnn_dim(self) -> int:
        return 2 * self.lstm_hidden

    @property
    def fused_dim(self) -> int:
        return self.cnn_dim + self.rnn_dim + self.context_dim


@dataclass(frozen=True)
class ExtractorParams:
    """All trainable arrays of the extractor. Arrays are mutated in place
    by the training loop; the container itself is immutable."""

    conv_specs: tuple[ConvSpec, ...]
    bn_gammas: tuple[np.ndarray, ...]
    bn_betas: tuple[np.ndarray, ...]
    proj_weights: np.ndarray
    proj_bias: np.ndarray
    lstm_stack: tuple[BiLstmLayerParams, ...]
    attn: AttnSpec


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def init_extractor(config: ExtractorConfig, seed: int) -> ExtractorParams:
    """Seeded parameter initialization; draw order follows named_parameters."""
    rng = np.random.default_rng(seed)
    conv_specs = []
    bn_gammas = []
    bn_betas = []
    for k in config.kernel_sizes:
        fan_in = config.channels * k
        fan_out = config.branch_channels * k
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(
            -limit, limit, size=(config.branch_channels, config.channels, k)
        )
        conv_specs.append(ConvSpec(weights=weights, bias=np.zeros(config.branch_channels)))
        bn_gammas.append(np.ones(config.branch_channels))
        bn_betas.append(np.zeros(config.branch_channels))
    concat_dim = config.branch_channels * len(config.kernel_sizes)
    proj_weights = _glorot(rng, concat_dim, config.cnn_dim)
    proj_bias = np.zeros(config.cnn_dim)

    layers = []
    in_dim = config.channels
    for _ in range(config.lstm_layers):
        fwd = init_lstm_spec(in_dim, config.lstm_hidden, rng)
        rev = init_lstm_spec(in_dim, config.lstm_hidden, rng)
        layers.append(BiLstmLayerParams(forward=fwd, backward=rev))
        in_dim = 2 * config.lstm_hidden

    attn = AttnSpec(
        w_query=_glorot(rng, config.fused_dim, config.key_dim),
        w_key=_glorot(rng, config.fused_dim, config.key_dim),
        w_value=_glorot(rng, config.fused_dim, config.value_dim),
    )
    return ExtractorParams(
        conv_specs=tuple(conv_specs),
        bn_gammas=tuple(bn_gammas),
        bn_betas=tuple(bn_betas),
        proj_weights=proj_weights,
        proj_bias=proj_bias,
        lstm_stack=tuple(layers),
        attn=attn,
    )


def named_parameters(params: ExtractorParams) -> list[tuple[str, np.ndarray]]:
    """Canonical (name, array) pairs; the order is the serialization order."""
    pairs: list[tuple[str, np.ndarray]] = []
    for i, spec in enumerate(params.conv_specs):
        pairs.append((f"conv{i}.weights", spec.weights))
        pairs.append((f"conv{i}.bias", spec.bias))
        pairs.append((f"bn{i}.gamma", params.bn_gammas[i]))
        pairs.append((f"bn{i}.beta", params.bn_betas[i]))
    pairs.append(("proj.weights", params.proj_weights))
    pairs.append(("proj.bias", params.proj_bias))
    for i, layer in enumerate(params.lstm_stack):
        for tag, spec in (("fwd", layer.forward), ("rev", layer.backward)):
            pairs.append((f"lstm{i}.{tag}.w_input", spec.w_input))
            pairs.append((f"lstm{i}.{tag}.w_hidden", spec.w_hidden))
            pairs.append((f"lstm{i}.{tag}.bias", spec.bias))
    pairs.append(("attn.w_query", params.attn.w_query))
    pairs.append(("attn.w_key", params.attn.w_key))
    pairs.append(("attn.w_value", params.attn.w_value))
    return pairs


def params_vector(params: ExtractorParams) -> np.ndarray:
    return np.concatenate([arr.ravel() for _, arr in named_parameters(params)])


def set_params_vector(params: ExtractorParams, vector: np.ndarray) -> None:
    """Write a flat vector back into the parameter arrays, in place."""
    offset = 0
    for _, arr in named_parameters(params):
        size = arr.size
        arr.ravel()[:] = vector[offset : offset + size]
        offset += size
    if offset != vector.size:
        raise ShapeMismatchError("parameter vector length mismatch")


def grads_vector(grads: dict[str, np.ndarray], params: ExtractorParams) -> np.ndarray:
    """Flatten a gradient dict into the canonical parameter order."""
    parts = []
    for name, arr in named_parameters(params):
        grad = grads.get(name)
        parts.append(np.zeros(arr.size) if grad is None else grad.ravel())
    return np.concatenate(parts)


# --- forward -----------------------------------------------------------------


@dataclass
class ExtractorForward:
    """Forward activations; cache holds intermediates for the backward pass."""

    cnn: np.ndarray
    rnn: np.ndarray
    fused: np.ndarray
    attended: np.ndarray
    pooled: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)


def _cnn_branch_cached(
    values: np.ndarray,
    params: ExtractorParams,
    config: ExtractorConfig,
    use_batchnorm: bool,
) -> tuple[np.ndarray, dict]:
    conv_outs = []
    branch_outs = []
    bn_caches = []
    # Single-row windows skip batch norm (no row statistics to standardize).
    apply_bn = use_batchnorm and values.shape[0] >= 2
    for i, spec in enumerate(params.conv_specs):
        conv_out = conv1d_forward(values, spec)
        act = relu(conv_out)
        if apply_bn:
            out, bn_cache = batchnorm_forward(
                act, params.bn_gammas[i], params.bn_betas[i], config.bn_epsilon
            )
        else:
            out, bn_cache = act, None
        conv_outs.append(conv_out)
        branch_outs.append(out)
        bn_caches.append(bn_cache)
    concat = np.hstack(branch_outs)
    projected = linear_forward(concat, params.proj_weights, params.proj_bias)
    cache = {"conv_outs": conv_outs, "bn_caches": bn_caches, "concat": concat, "apply_bn": apply_bn}
    return projected, cache


def cnn_branch(
    values: np.ndarray,
    params: ExtractorParams,
    config: ExtractorConfig,
    use_batchnorm: bool = True,
) -> np.ndarray:
    """Multi-scale convolution branch: (T, m) -> (T, cnn_dim)."""
    out, _ = _cnn_branch_cached(values, params, config, use_batchnorm)
    return out


def rnn_branch(values: np.ndarray, params: ExtractorParams) -> np.ndarray:
    """Stacked BiLSTM branch: (T, m) -> (T, 2*lstm_hidden)."""
    out, _ = bilstm_forward_cached(values, list(params.lstm_stack))
    return out


def fuse(cnn_out: np.ndarray, rnn_out: np.ndarray, context: np.ndarray) -> np.ndarray:
    """Concatenate branch features per timestamp, broadcasting the context."""
    if cnn_out.shape[0] != rnn_out.shape[0]:
        raise ShapeMismatchError("branch outputs must share the row count")
    context = np.asarray(context, dtype=np.float64)
    if context.ndim != 1:
        raise ShapeMismatchError("context must be a vector")
    tiled = np.tile(context, (cnn_out.shape[0], 1))
    return np.hstack([cnn_out, rnn_out, tiled])


def attend(fused: np.ndarray, attn: AttnSpec) -> tuple[np.ndarray, np.ndarray]:
    """Self-attention over timestamps, then mean-pool rows to one descriptor."""
    attended = attention_forward(fused, attn)
    return attended, attended.mean(axis=0)


def extract_features(
    values: np.ndarray,
    context: np.ndarray,
    params: ExtractorParams,
    config: ExtractorConfig,
    use_batchnorm: bool = True,
) -> ExtractorForward:
    """Full forward pass for one normalized window."""
    cnn_out, cnn_cache = _cnn_branch_cached(values, params, config, use_batchnorm)
    rnn_out, rnn_caches = bilstm_forward_cached(values, list(params.lstm_stack))
    fused = fuse(cnn_out, rnn_out, context)
    attended, pooled = attend(fused, params.attn)
    return ExtractorForward(
        cnn=cnn_out,
        rnn=rnn_out,
        fused=fused,
        attended=attended,
        pooled=pooled,
        cache={"cnn": cnn_cache, "rnn": rnn_caches, "values": values},
    )


# --- backward ----------------------------------------------------------------


def extractor_backward(
    values: np.ndarray,
    context: np.ndarray,
    params: ExtractorParams,
    config: ExtractorConfig,
    grad_pooled: np.ndarray,
    use_batchnorm: bool = True,
    forward: ExtractorForward | None = None,
) -> dict[str, np.ndarray]:
    """Exact gradients of <grad_pooled, pooled(window)> w.r.t. all parameters.

    ``forward`` may pass a cached forward pass to avoid recomputation; it
    must come from the same (values, context, params) triple.
    """
    if forward is None:
        forward = extract_features(values, context, params, config, use_batchnorm)
    grad_pooled = np.asarray(grad_pooled, dtype=np.float64)
    if grad_pooled.shape != (config.value_dim,):
        raise ShapeMismatchError("grad_pooled must match the attention value dim")
    steps = forward.fused.shape[0]
    grads: dict[str, np.ndarray] = {}

    # Mean pool: every attended row receives grad_pooled / T.
    grad_attended = np.tile(grad_pooled / steps, (steps, 1))
    grad_fused, g_wq, g_wk, g_wv = attention_backward(forward.fused, params.attn, grad_attended)
    grads["attn.w_query"] = g_wq
    grads["attn.w_key"] = g_wk
    grads["attn.w_value"] = g_wv

    grad_cnn = grad_fused[:, : config.cnn_dim]
    grad_rnn = grad_fused[:, config.cnn_dim : config.cnn_dim + config.rnn_dim]
    # Context columns are not trainable inputs; their gradient is dropped.

    cnn_cache = forward.cache["cnn"]
    grad_concat, g_proj_w, g_proj_b = linear_backward(
        cnn_cache["concat"], params.proj_weights, grad_cnn
    )
    grads["proj.weights"] = g_proj_w
    grads["proj.bias"] = g_proj_b
    width = config.branch_channels
    for i, spec in enumerate(params.conv_specs):
        grad_branch = grad_concat[:, i * width : (i + 1) * width]
        if cnn_cache["apply_bn"]:
            grad_act, g_gamma, g_beta = batchnorm_backward(
                cnn_cache["bn_caches"][i], grad_branch
            )
        else:
            grad_act = grad_branch
            g_gamma = np.zeros_like(params.bn_gammas[i])
            g_beta = np.zeros_like(params.bn_betas[i])
        grads[f"bn{i}.gamma"] = g_gamma
        grads[f"bn{i}.beta"] = g_beta
        grad_conv = relu_backward(cnn_cache["conv_outs"][i], grad_act)
        _, g_w, g_b = conv1d_backward(values, spec, grad_conv)
        grads[f"conv{i}.weights"] = g_w
        grads[f"conv{i}.bias"] = g_b

    _, layer_grads = bilstm_backward(forward.cache["rnn"], grad_rnn)
    for i, layer in enumerate(layer_grads):
        for tag, key in (("fwd", "forward"), ("rev", "backward")):
            for part in ("w_input", "w_hidden", "bias"):
                grads[f"lstm{i}.{tag}.{part}"] = layer[key][part]
    return grads


def accumulate_grads(
    total: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """Sum gradient dicts (in place on ``total``)."""
    for name, grad in grads.items():
        if name in total:
            total[name] += grad
        else:
            total[name] = grad.copy()
    return total


def apply_sgd_update(
    params: ExtractorParams, grads: dict[str, np.ndarray], learning_rate: float
) -> None:
    """In-place SGD step over all extractor parameters present in ``grads``."""
    for name, arr in named_parameters(params):
        grad = grads.get(name)
        if grad is not None:
            arr -= learning_rate * grad
