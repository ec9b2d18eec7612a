"""Minimal differentiable numeric core: tensors, ops, gradients."""

from .gradcheck import grad_check
from .nn import (
    Adam,
    DegenerateRowError,
    Parameter,
    ParamStore,
    apply_mask,
    conv1d,
    embedding,
    glorot,
    l2_normalize,
    layer_norm,
    linear,
    masked_mean,
    normal_init,
    scaled_dot_attention,
    sinusoidal_embedding,
    softmax_rows,
)
from .tensor import (
    NumericError,
    ShapeError,
    Tensor,
    add,
    avg_pool_rows,
    concat_cols,
    exp,
    log,
    matmul,
    mul,
    no_grad,
    relu,
    repeat_rows,
    reshape,
    slice_cols,
    slice_rows,
    tanh,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "Adam",
    "DegenerateRowError",
    "NumericError",
    "Parameter",
    "ParamStore",
    "ShapeError",
    "Tensor",
    "add",
    "apply_mask",
    "avg_pool_rows",
    "concat_cols",
    "conv1d",
    "embedding",
    "exp",
    "glorot",
    "grad_check",
    "l2_normalize",
    "layer_norm",
    "linear",
    "log",
    "masked_mean",
    "matmul",
    "mul",
    "no_grad",
    "normal_init",
    "relu",
    "repeat_rows",
    "reshape",
    "scaled_dot_attention",
    "sinusoidal_embedding",
    "slice_cols",
    "slice_rows",
    "softmax_rows",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
]
