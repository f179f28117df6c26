"""Small float64 autodiff engine and the layers built on it."""

from stimex.nn.tensor import Parameter, Tensor, as_tensor, concat, stack, take_pairs
from stimex.nn.layers import (
    BiLstm,
    Linear,
    Lstm,
    attention,
    cross_entropy,
    dropout,
    glorot_uniform,
)
from stimex.nn.optim import Adam

__all__ = [
    "Adam",
    "BiLstm",
    "Linear",
    "Lstm",
    "Parameter",
    "Tensor",
    "as_tensor",
    "attention",
    "concat",
    "cross_entropy",
    "dropout",
    "glorot_uniform",
    "stack",
    "take_pairs",
]
