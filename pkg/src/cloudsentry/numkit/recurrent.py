"""LSTM cell, sequence LSTM with backpropagation through time, and the
stacked bidirectional LSTM used by the temporal branch.

Gate layout: the stacked pre-activation z = x W + h U + b is split into
four equal blocks in the order input | forget | output | candidate, so the
three sigmoid gates occupy one contiguous slice and the tanh candidate the
remainder. Initial hidden and cell states are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import as_matrix, require


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh identity: exact, overflow-free, and a single saturating ufunc.
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


@dataclass(frozen=True)
class LstmSpec:
    """One direction's LSTM weights: w_input (in, 4h), w_hidden (h, 4h), bias (4h,)."""

    w_input: np.ndarray
    w_hidden: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        require(self.w_input.ndim == 2 and self.w_hidden.ndim == 2, "LSTM weights must be 2-D")
        hidden = self.w_hidden.shape[0]
        require(self.w_hidden.shape[1] == 4 * hidden, "w_hidden must be (h, 4h)")
        require(self.w_input.shape[1] == 4 * hidden, "w_input must be (in, 4h)")
        require(self.bias.shape == (4 * hidden,), "bias must be (4h,)")

    @property
    def input_dim(self) -> int:
        return self.w_input.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_hidden.shape[0]


def init_lstm_spec(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmSpec:
    """Glorot-uniform weights, zero biases, forget-gate bias +1."""
    def glorot(rows: int, cols: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-limit, limit, size=(rows, cols))

    bias = np.zeros(4 * hidden_dim)
    bias[hidden_dim : 2 * hidden_dim] = 1.0
    return LstmSpec(
        w_input=glorot(input_dim, 4 * hidden_dim),
        w_hidden=glorot(hidden_dim, 4 * hidden_dim),
        bias=bias,
    )


def lstm_cell(
    x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, spec: LstmSpec
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step: returns (h_t, c_t)."""
    h = spec.hidden_dim
    require(x_t.shape == (spec.input_dim,), "lstm_cell input dim mismatch")
    require(h_prev.shape == (h,) and c_prev.shape == (h,), "lstm_cell state dim mismatch")
    z = x_t @ spec.w_input + h_prev @ spec.w_hidden + spec.bias
    gates = _sigmoid(z[: 3 * h])
    i, f, o = gates[:h], gates[h : 2 * h], gates[2 * h :]
    g = np.tanh(z[3 * h :])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


def lstm_forward(x: np.ndarray, spec: LstmSpec) -> tuple[np.ndarray, dict]:
    """Run the cell over all rows of x; returns (H of shape (T, h), cache)."""
    x = as_matrix(x, "lstm input")
    require(x.shape[1] == spec.input_dim, "lstm input dim mismatch")
    steps = x.shape[0]
    h = spec.hidden_dim
    gates = np.empty((steps, 4 * h))  # sigmoid(i|f|o) and tanh(g), post-activation
    cells = np.empty((steps, h))
    tanh_c = np.empty((steps, h))
    hidden = np.empty((steps, h))

    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    z_all = x @ spec.w_input + spec.bias
    for t in range(steps):
        z = z_all[t] + h_prev @ spec.w_hidden
        row = gates[t]
        row[: 3 * h] = _sigmoid(z[: 3 * h])
        row[3 * h :] = np.tanh(z[3 * h :])
        c = row[h : 2 * h] * c_prev + row[:h] * row[3 * h :]
        tc = np.tanh(c)
        ht = row[2 * h : 3 * h] * tc
        cells[t], tanh_c[t], hidden[t] = c, tc, ht
        h_prev, c_prev = ht, c
    cache = {"x": x, "gates": gates, "c": cells, "tanh_c": tanh_c, "h": hidden, "spec": spec}
    return hidden, cache


def lstm_backward(cache: dict, grad_h: np.ndarray) -> tuple[np.ndarray, dict]:
    """BPTT through lstm_forward.

    Returns (grad_x, grads) with grads keyed w_input / w_hidden / bias.
    The sequential recurrence runs per step; weight gradients are batched
    into three matmuls at the end.
    """
    spec: LstmSpec = cache["spec"]
    x = cache["x"]
    gates, cells, tanh_c, hidden = cache["gates"], cache["c"], cache["tanh_c"], cache["h"]
    steps, h = hidden.shape
    require(grad_h.shape == (steps, h), "lstm upstream shape mismatch")

    # Activation derivatives for all steps at once: s(1-s) blocks, 1-g^2 block.
    deriv = np.empty_like(gates)
    sig = gates[:, : 3 * h]
    deriv[:, : 3 * h] = sig * (1.0 - sig)
    deriv[:, 3 * h :] = 1.0 - gates[:, 3 * h :] ** 2

    dz_all = np.empty((steps, 4 * h))
    w_hidden_t = spec.w_hidden.T
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(steps - 1, -1, -1):
        row = gates[t]
        i, f, o, g = row[:h], row[h : 2 * h], row[2 * h : 3 * h], row[3 * h :]
        dh = grad_h[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c[t] ** 2)
        c_prev = cells[t - 1] if t > 0 else 0.0
        dz = dz_all[t]
        dz[:h] = dc * g
        dz[h : 2 * h] = dc * c_prev
        dz[2 * h : 3 * h] = dh * tanh_c[t]
        dz[3 * h :] = dc * i
        dz *= deriv[t]
        dc_next = dc * f
        dh_next = dz @ w_hidden_t
    h_prev_all = np.vstack([np.zeros((1, h)), hidden[:-1]])
    grads = {
        "w_input": x.T @ dz_all,
        "w_hidden": h_prev_all.T @ dz_all,
        "bias": dz_all.sum(axis=0),
    }
    grad_x = dz_all @ spec.w_input.T
    return grad_x, grads


# --- bidirectional stack ---------------------------------------------------------


@dataclass(frozen=True)
class BiLstmLayerParams:
    """One bidirectional layer: a forward-direction and a reversed-direction spec."""

    forward: LstmSpec
    backward: LstmSpec

    def __post_init__(self):
        require(
            self.forward.hidden_dim == self.backward.hidden_dim,
            "both directions must share the hidden size",
        )
        require(
            self.forward.input_dim == self.backward.input_dim,
            "both directions must share the input size",
        )

    @property
    def output_dim(self) -> int:
        return 2 * self.forward.hidden_dim


def bilstm_forward_cached(
    x: np.ndarray, layers: list[BiLstmLayerParams]
) -> tuple[np.ndarray, list[dict]]:
    """Stacked BiLSTM; each layer concatenates forward and time-reversed passes."""
    require(len(layers) >= 1, "at least one BiLSTM layer required")
    caches: list[dict] = []
    out = as_matrix(x, "bilstm input")
    for layer in layers:
        require(out.shape[1] == layer.forward.input_dim, "bilstm layer input dim mismatch")
        fwd_out, fwd_cache = lstm_forward(out, layer.forward)
        rev_out, rev_cache = lstm_forward(out[::-1], layer.backward)
        out = np.hstack([fwd_out, rev_out[::-1]])
        caches.append({"fwd": fwd_cache, "rev": rev_cache, "hidden": layer.forward.hidden_dim})
    return out, caches


def bilstm_forward(x: np.ndarray, layers: list[BiLstmLayerParams]) -> np.ndarray:
    """Stacked BiLSTM output of shape (T, 2*hidden)."""
    out, _ = bilstm_forward_cached(x, layers)
    return out


def bilstm_backward(caches: list[dict], grad_out: np.ndarray) -> tuple[np.ndarray, list[dict]]:
    """Backward through the stack; returns (grad_x, per-layer grads).

    Per-layer grads mirror layer order and hold {"forward": ..., "backward": ...}
    dicts matching lstm_backward's gradient keys.
    """
    grad = grad_out
    layer_grads: list[dict] = [None] * len(caches)  # type: ignore[list-item]
    for idx in range(len(caches) - 1, -1, -1):
        cache = caches[idx]
        h = cache["hidden"]
        require(grad.shape[1] == 2 * h, "bilstm upstream dim mismatch")
        grad_fwd = np.ascontiguousarray(grad[:, :h])
        grad_rev = np.ascontiguousarray(grad[:, h:][::-1])
        dx_fwd, grads_fwd = lstm_backward(cache["fwd"], grad_fwd)
        dx_rev, grads_rev = lstm_backward(cache["rev"], grad_rev)
        grad = dx_fwd + dx_rev[::-1]
        layer_grads[idx] = {"forward": grads_fwd, "backward": grads_rev}
    return grad, layer_grads
