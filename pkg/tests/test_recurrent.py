import math

import numpy as np
import pytest

from cloudsentry.errors import ShapeMismatchError
from cloudsentry.numkit import (
    BiLstmLayerParams,
    LstmSpec,
    bilstm_backward,
    bilstm_forward,
    bilstm_forward_cached,
    finite_difference_check,
    init_lstm_spec,
    lstm_backward,
    lstm_cell,
    lstm_forward,
)


def scalar_cell_oracle(x_t, h_prev, c_prev, spec):
    """Pure scalar reimplementation of the gate equations."""
    h = spec.hidden_dim

    def sigmoid(v):
        return 1.0 / (1.0 + math.exp(-v))

    z = [0.0] * (4 * h)
    for j in range(4 * h):
        acc = spec.bias[j]
        for i in range(len(x_t)):
            acc += x_t[i] * spec.w_input[i, j]
        for i in range(h):
            acc += h_prev[i] * spec.w_hidden[i, j]
        z[j] = acc
    h_out = [0.0] * h
    c_out = [0.0] * h
    for j in range(h):
        i_g = sigmoid(z[j])
        f_g = sigmoid(z[h + j])
        o_g = sigmoid(z[2 * h + j])
        g = math.tanh(z[3 * h + j])
        c_out[j] = f_g * c_prev[j] + i_g * g
        h_out[j] = o_g * math.tanh(c_out[j])
    return np.array(h_out), np.array(c_out)


class TestLstmCell:
    def test_zero_everything(self):
        spec = LstmSpec(
            w_input=np.zeros((2, 12)), w_hidden=np.zeros((3, 12)), bias=np.zeros(12)
        )
        h, c = lstm_cell(np.zeros(2), np.zeros(3), np.zeros(3), spec)
        assert np.all(h == 0.0) and np.all(c == 0.0)

    def test_forget_gate_saturation(self):
        bias = np.zeros(12)
        bias[3:6] = 50.0  # forget-gate block
        spec = LstmSpec(w_input=np.zeros((2, 12)), w_hidden=np.zeros((3, 12)), bias=bias)
        c_prev = np.array([0.3, -0.2, 0.9])
        _, c = lstm_cell(np.zeros(2), np.zeros(3), c_prev, spec)
        assert np.max(np.abs(c - c_prev)) < 1e-9

    def test_matches_scalar_oracle(self, rng):
        spec = init_lstm_spec(4, 3, rng)
        x = rng.normal(size=4)
        h_prev = rng.normal(size=3)
        c_prev = rng.normal(size=3)
        h, c = lstm_cell(x, h_prev, c_prev, spec)
        h_ref, c_ref = scalar_cell_oracle(x, h_prev, c_prev, spec)
        assert np.max(np.abs(h - h_ref)) < 1e-10
        assert np.max(np.abs(c - c_ref)) < 1e-10

    def test_dim_mismatch(self, rng):
        spec = init_lstm_spec(4, 3, rng)
        with pytest.raises(ShapeMismatchError):
            lstm_cell(np.zeros(5), np.zeros(3), np.zeros(3), spec)


class TestLstmSequence:
    def test_matches_cell_chaining(self, rng):
        spec = init_lstm_spec(3, 4, rng)
        x = rng.normal(size=(6, 3))
        out, _ = lstm_forward(x, spec)
        h = np.zeros(4)
        c = np.zeros(4)
        for t in range(6):
            h, c = lstm_cell(x[t], h, c, spec)
            assert np.max(np.abs(out[t] - h)) < 1e-12

    def test_backward_matches_finite_differences(self, rng):
        spec = init_lstm_spec(2, 3, rng)
        x = rng.normal(size=(5, 2))
        upstream = rng.normal(size=(5, 3))
        _, cache = lstm_forward(x, spec)
        gx, grads = lstm_backward(cache, upstream)

        def loss_of_x(xv):
            out, _ = lstm_forward(xv, spec)
            return float((out * upstream).sum())

        assert finite_difference_check(loss_of_x, x, gx, step=1e-5).max_rel_error < 1e-4

        for name in ("w_input", "w_hidden", "bias"):
            def loss_of_param(value, _name=name):
                parts = {
                    "w_input": spec.w_input, "w_hidden": spec.w_hidden, "bias": spec.bias,
                }
                parts[_name] = value
                out, _ = lstm_forward(x, LstmSpec(**parts))
                return float((out * upstream).sum())

            point = getattr(spec, name)
            report = finite_difference_check(loss_of_param, point, grads[name], step=1e-5)
            assert report.max_rel_error < 1e-4, name


class TestBiLstm:
    def test_output_dimension(self, rng):
        layers = [
            BiLstmLayerParams(
                forward=init_lstm_spec(4, 128, rng), backward=init_lstm_spec(4, 128, rng)
            ),
            BiLstmLayerParams(
                forward=init_lstm_spec(256, 128, rng), backward=init_lstm_spec(256, 128, rng)
            ),
        ]
        out = bilstm_forward(rng.normal(size=(10, 4)), layers)
        assert out.shape == (10, 256)

    def test_output_dim_independent_of_length(self, rng):
        layers = [
            BiLstmLayerParams(
                forward=init_lstm_spec(2, 5, rng), backward=init_lstm_spec(2, 5, rng)
            )
        ]
        for steps in (1, 3, 17):
            assert bilstm_forward(rng.normal(size=(steps, 2)), layers).shape == (steps, 10)

    def test_time_reversal_symmetry_with_shared_weights(self, rng):
        # With identical specs in both directions, reversing the input swaps
        # the forward/backward halves of the output, row-reversed.
        spec = init_lstm_spec(3, 4, rng)
        layers = [BiLstmLayerParams(forward=spec, backward=spec)]
        x = rng.normal(size=(7, 3))
        out = bilstm_forward(x, layers)
        out_rev = bilstm_forward(x[::-1], layers)
        swapped = np.hstack([out_rev[::-1, 4:], out_rev[::-1, :4]])
        assert np.max(np.abs(out - swapped)) < 1e-12

    def test_matches_per_step_chaining_oracle(self, rng):
        fwd = init_lstm_spec(3, 4, rng)
        rev = init_lstm_spec(3, 4, rng)
        layers = [BiLstmLayerParams(forward=fwd, backward=rev)]
        x = rng.normal(size=(5, 3))
        out = bilstm_forward(x, layers)

        h = np.zeros(4); c = np.zeros(4)
        fwd_states = []
        for t in range(5):
            h, c = lstm_cell(x[t], h, c, fwd)
            fwd_states.append(h)
        h = np.zeros(4); c = np.zeros(4)
        rev_states = []
        for t in range(4, -1, -1):
            h, c = lstm_cell(x[t], h, c, rev)
            rev_states.append(h)
        rev_states.reverse()
        expected = np.hstack([np.vstack(fwd_states), np.vstack(rev_states)])
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_stacked_backward_matches_finite_differences(self, rng):
        layers = [
            BiLstmLayerParams(
                forward=init_lstm_spec(2, 3, rng), backward=init_lstm_spec(2, 3, rng)
            ),
            BiLstmLayerParams(
                forward=init_lstm_spec(6, 3, rng), backward=init_lstm_spec(6, 3, rng)
            ),
        ]
        x = rng.normal(size=(4, 2))
        upstream = rng.normal(size=(4, 6))
        _, caches = bilstm_forward_cached(x, layers)
        gx, layer_grads = bilstm_backward(caches, upstream)

        def loss_of_x(xv):
            out, _ = bilstm_forward_cached(xv, layers)
            return float((out * upstream).sum())

        assert finite_difference_check(loss_of_x, x, gx, step=1e-5).max_rel_error < 1e-4

        spec = layers[1].forward
        grad = layer_grads[1]["forward"]["w_hidden"]

        def loss_of_w(value):
            trial = LstmSpec(w_input=spec.w_input, w_hidden=value, bias=spec.bias)
            trial_layers = [
                layers[0], BiLstmLayerParams(forward=trial, backward=layers[1].backward)
            ]
            out, _ = bilstm_forward_cached(x, trial_layers)
            return float((out * upstream).sum())

        report = finite_difference_check(loss_of_w, spec.w_hidden, grad, step=1e-5)
        assert report.max_rel_error < 1e-4
