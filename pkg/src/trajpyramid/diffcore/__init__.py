"""Small float64 autodiff engine plus the layers and optimizer the model needs."""
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    cumsum,
    getitem,
    is_grad_enabled,
    linear,
    log,
    lstm_cell,
    matmul,
    mean,
    mean_sq_error,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    segment_max,
    sigmoid,
    stack,
    sub,
    sum_sq,
    take,
    tanh,
    transpose,
    tsum,
)
from .nn import MLP, ChannelMix, Linear, LSTMCell, Module, channel_mix_forward, lstm_step
from .optim import Adam

__all__ = [
    "Tensor", "add", "as_tensor", "backward", "concat", "cumsum", "getitem", "is_grad_enabled",
    "linear", "log", "lstm_cell", "matmul", "mean", "mean_sq_error", "mul", "no_grad", "relu",
    "reshape", "scale", "segment_max", "sigmoid", "stack", "sub", "sum_sq", "take", "tanh",
    "transpose", "tsum", "MLP", "ChannelMix", "Linear", "LSTMCell", "Module",
    "channel_mix_forward", "lstm_step", "Adam",
]
