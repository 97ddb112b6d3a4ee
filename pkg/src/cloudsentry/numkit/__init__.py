"""Minimal numeric kernels with hand-chained forward and backward passes.

Everything operates on float64 numpy arrays validated at kernel boundaries;
no autograd graph, no GPU. Backward passes are exact gradients of their
forward maps and are verified against central finite differences in the
test suite.
"""

from .tensor import as_matrix, as_vector
from .kernels import (
    AttnSpec,
    ConvSpec,
    attention_backward,
    attention_forward,
    batchnorm_backward,
    batchnorm_forward,
    batchnorm_inference,
    conv1d_backward,
    conv1d_forward,
    linear_backward,
    linear_forward,
    relu,
    relu_backward,
    softmax,
    softmax_rows,
)
from .recurrent import (
    BiLstmLayerParams,
    LstmSpec,
    bilstm_backward,
    bilstm_forward,
    bilstm_forward_cached,
    init_lstm_spec,
    lstm_backward,
    lstm_cell,
    lstm_forward,
)
from .gradcheck import FiniteDifferenceReport, finite_difference_check

__all__ = [
    "AttnSpec",
    "BiLstmLayerParams",
    "ConvSpec",
    "FiniteDifferenceReport",
    "LstmSpec",
    "as_matrix",
    "as_vector",
    "attention_backward",
    "attention_forward",
    "batchnorm_backward",
    "batchnorm_forward",
    "batchnorm_inference",
    "bilstm_backward",
    "bilstm_forward",
    "bilstm_forward_cached",
    "conv1d_backward",
    "conv1d_forward",
    "finite_difference_check",
    "init_lstm_spec",
    "linear_backward",
    "linear_forward",
    "lstm_backward",
    "lstm_cell",
    "lstm_forward",
    "relu",
    "relu_backward",
    "softmax",
    "softmax_rows",
]
