from .core import Tensor, graph_nodes, no_grad
from .ops import (
    add,
    concat,
    conv2d,
    cross_entropy,
    dropout,
    embedding_lookup,
    gelu,
    layer_norm,
    masked_fill,
    matmul,
    mse,
    mul,
    neg,
    permute,
    reduce_mean,
    reduce_sum,
    reshape,
    softmax,
    square,
    straight_through,
    sub,
)
from .optim import Adam
from .checkpoint import load_arrays, load_params_into, save_arrays, save_params

__all__ = [
    "Tensor",
    "graph_nodes",
    "no_grad",
    "add",
    "concat",
    "conv2d",
    "cross_entropy",
    "dropout",
    "embedding_lookup",
    "gelu",
    "layer_norm",
    "masked_fill",
    "matmul",
    "mse",
    "mul",
    "neg",
    "permute",
    "reduce_mean",
    "reduce_sum",
    "reshape",
    "softmax",
    "square",
    "straight_through",
    "sub",
    "Adam",
    "load_arrays",
    "load_params_into",
    "save_arrays",
    "save_params",
]
