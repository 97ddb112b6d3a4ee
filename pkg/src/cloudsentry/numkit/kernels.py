"""Dense kernels: 1-D convolution, ReLU, batch norm, linear maps, softmax,
and scaled dot-product self-attention, each with an exact backward pass.

Shape conventions: sequence inputs are (T, channels) matrices, one row per
time step. Convolution uses zero same-padding so outputs keep T rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import as_matrix, require


# --- 1-D convolution ----------------------------------------------------------


@dataclass(frozen=True)
class ConvSpec:
    """Weights for one 1-D convolution: weights (out, in, k), bias (out,).

    The kernel size must be odd so zero same-padding is symmetric.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        require(self.weights.ndim == 3, "conv weights must be (out, in, kernel)")
        require(self.bias.ndim == 1, "conv bias must be 1-D")
        require(self.bias.shape[0] == self.weights.shape[0], "bias length != out channels")
        require(self.weights.shape[2] % 2 == 1, "kernel size must be odd")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]


def _conv_columns(x: np.ndarray, kernel_size: int) -> np.ndarray:
    """im2col for same-padded 1-D convolution: (T, in*k) with k fastest."""
    steps, channels = x.shape
    pad = (kernel_size - 1) // 2
    padded = np.zeros((steps + 2 * pad, channels))
    padded[pad : pad + steps] = x
    cols = np.empty((steps, channels * kernel_size))
    for j in range(kernel_size):
        cols[:, j::kernel_size] = padded[j : j + steps]
    return cols


def conv1d_forward(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Same-padded 1-D convolution over time: (T, in) -> (T, out)."""
    x = as_matrix(x, "conv input")
    require(x.shape[1] == spec.in_channels, "conv input channels mismatch")
    cols = _conv_columns(x, spec.kernel_size)
    flat = spec.weights.reshape(spec.out_channels, -1)
    return cols @ flat.T + spec.bias


def conv1d_backward(
    x: np.ndarray, spec: ConvSpec, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv1d_forward: returns (grad_x, grad_weights, grad_bias)."""
    x = as_matrix(x, "conv input")
    grad_out = as_matrix(grad_out, "conv upstream")
    require(x.shape[1] == spec.in_channels, "conv input channels mismatch")
    require(grad_out.shape == (x.shape[0], spec.out_channels), "conv upstream shape mismatch")
    steps = x.shape[0]
    k = spec.kernel_size
    pad = (k - 1) // 2
    cols = _conv_columns(x, k)
    flat = spec.weights.reshape(spec.out_channels, -1)

    grad_bias = grad_out.sum(axis=0)
    grad_flat = grad_out.T @ cols
    grad_weights = grad_flat.reshape(spec.weights.shape)

    grad_cols = grad_out @ flat
    grad_padded = np.zeros((steps + 2 * pad, spec.in_channels))
    for j in range(k):
        grad_padded[j : j + steps] += grad_cols[:, j::k]
    grad_x = grad_padded[pad : pad + steps]
    return grad_x, grad_weights, grad_bias


# --- elementwise --------------------------------------------------------------


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pass upstream gradient where x > 0; subgradient 0 at x == 0."""
    require(np.shape(x) == np.shape(grad_out), "relu upstream shape mismatch")
    return np.where(np.asarray(x) > 0.0, grad_out, 0.0)


# --- batch normalization --------------------------------------------------------


def batchnorm_forward(
    x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, epsilon: float = 1e-5
) -> tuple[np.ndarray, dict]:
    """Training-mode batch norm: standardize each column over rows.

    Returns (y, cache). Requires at least 2 rows; inference against stored
    running statistics is batchnorm_inference.
    """
    x = as_matrix(x, "batchnorm input")
    require(x.shape[0] >= 2, "training-mode batchnorm needs >= 2 rows")
    require(gamma.shape == (x.shape[1],), "gamma shape mismatch")
    require(beta.shape == (x.shape[1],), "beta shape mismatch")
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + epsilon)
    x_hat = (x - mean) * inv_std
    y = gamma * x_hat + beta
    cache = {"x_hat": x_hat, "inv_std": inv_std, "gamma": gamma, "rows": x.shape[0]}
    return y, cache


def batchnorm_backward(
    cache: dict, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of batchnorm_forward: (grad_x, grad_gamma, grad_beta)."""
    x_hat = cache["x_hat"]
    inv_std = cache["inv_std"]
    gamma = cache["gamma"]
    rows = cache["rows"]
    require(grad_out.shape == x_hat.shape, "batchnorm upstream shape mismatch")
    grad_beta = grad_out.sum(axis=0)
    grad_gamma = (grad_out * x_hat).sum(axis=0)
    grad_x_hat = grad_out * gamma
    grad_x = (
        inv_std
        / rows
        * (rows * grad_x_hat - grad_x_hat.sum(axis=0) - x_hat * (grad_x_hat * x_hat).sum(axis=0))
    )
    return grad_x, grad_gamma, grad_beta


def batchnorm_inference(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    epsilon: float = 1e-5,
) -> np.ndarray:
    """Inference-mode batch norm against stored running statistics."""
    x = as_matrix(x, "batchnorm input")
    return gamma * (x - running_mean) / np.sqrt(running_var + epsilon) + beta


# --- linear ---------------------------------------------------------------------


def linear_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map per row: (T, in) @ (in, out) + (out,)."""
    x = as_matrix(x, "linear input")
    require(x.shape[1] == weights.shape[0], "linear input dim mismatch")
    require(bias.shape == (weights.shape[1],), "linear bias shape mismatch")
    return x @ weights + bias


def linear_backward(
    x: np.ndarray, weights: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of linear_forward: (grad_x, grad_weights, grad_bias)."""
    require(grad_out.shape == (x.shape[0], weights.shape[1]), "linear upstream shape mismatch")
    grad_x = grad_out @ weights.T
    grad_weights = x.T @ grad_out
    grad_bias = grad_out.sum(axis=0)
    return grad_x, grad_weights, grad_bias


# --- softmax --------------------------------------------------------------------


def softmax(v: np.ndarray) -> np.ndarray:
    """Overflow-safe softmax of a vector (max-subtracted exponentiation)."""
    v = np.asarray(v, dtype=np.float64)
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise overflow-safe softmax of a matrix."""
    m = np.asarray(m, dtype=np.float64)
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


# --- scaled dot-product self-attention ---------------------------------------------


@dataclass(frozen=True)
class AttnSpec:
    """Query/key/value projection weights for single-head self-attention.

    w_query and w_key must share their column count (the key dimension used
    in the 1/sqrt(d_k) score scaling).
    """

    w_query: np.ndarray
    w_key: np.ndarray
    w_value: np.ndarray

    def __post_init__(self):
        require(self.w_query.ndim == 2, "w_query must be 2-D")
        require(self.w_key.ndim == 2, "w_key must be 2-D")
        require(self.w_value.ndim == 2, "w_value must be 2-D")
        require(
            self.w_query.shape[1] == self.w_key.shape[1],
            "w_query and w_key must share the key dimension",
        )
        require(
            self.w_query.shape[0] == self.w_key.shape[0] == self.w_value.shape[0],
            "projection input dims must agree",
        )

    @property
    def input_dim(self) -> int:
        return self.w_query.shape[0]

    @property
    def key_dim(self) -> int:
        return self.w_query.shape[1]

    @property
    def value_dim(self) -> int:
        return self.w_value.shape[1]


def _attention_parts(z: np.ndarray, spec: AttnSpec):
    q = z @ spec.w_query
    k = z @ spec.w_key
    v = z @ spec.w_value
    scores = q @ k.T / math.sqrt(spec.key_dim)
    weights = softmax_rows(scores)
    return q, k, v, weights


def attention_forward(z: np.ndarray, spec: AttnSpec) -> np.ndarray:
    """softmax(Q K^T / sqrt(d_k)) V with Q, K, V projected from the rows of z."""
    z = as_matrix(z, "attention input")
    require(z.shape[1] == spec.input_dim, "attention input dim mismatch")
    _, _, v, weights = _attention_parts(z, spec)
    return weights @ v


def attention_backward(
    z: np.ndarray, spec: AttnSpec, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of attention_forward: (grad_z, grad_wq, grad_wk, grad_wv)."""
    z = as_matrix(z, "attention input")
    grad_out = as_matrix(grad_out, "attention upstream")
    require(z.shape[1] == spec.input_dim, "attention input dim mismatch")
    require(grad_out.shape == (z.shape[0], spec.value_dim), "attention upstream shape mismatch")
    q, k, v, weights = _attention_parts(z, spec)
    scale = 1.0 / math.sqrt(spec.key_dim)

    grad_v = weights.T @ grad_out
    grad_weights = grad_out @ v.T
    # Row-wise softmax backward: dS_i = A_i * (dA_i - <dA_i, A_i>).
    dot = (grad_weights * weights).sum(axis=1, keepdims=True)
    grad_scores = weights * (grad_weights - dot)
    grad_q = grad_scores @ k * scale
    grad_k = grad_scores.T @ q * scale

    grad_wq = z.T @ grad_q
    grad_wk = z.T @ grad_k
    grad_wv = z.T @ grad_v
    grad_z = grad_q @ spec.w_query.T + grad_k @ spec.w_key.T + grad_v @ spec.w_value.T
    return grad_z, grad_wq, grad_wk, grad_wv
