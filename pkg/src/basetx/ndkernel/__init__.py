"""Tensor substrate: autodiff ops, SGD, and the checkpoint container."""

from .checkpoint import (
    CheckpointError,
    deserialize,
    fingerprint,
    fingerprint_file,
    load_checkpoint,
    save_checkpoint,
    serialize,
)
from .nnops import batchnorm2d, conv2d, maxpool2d
from .optim import SGD, sgd_step
from .tensor import (
    GradTape,
    NonFiniteError,
    ShapeError,
    Tensor,
    active_tape,
    add,
    backward,
    concat,
    default_dtype,
    div,
    log_softmax,
    matmul,
    mul,
    neg,
    power,
    relu,
    reshape,
    set_default_dtype,
    softmax,
    sqdist,
    stack,
    sub,
    take,
    texp,
    tlog,
    tmean,
    transpose,
    tsum,
)

__all__ = [
    "CheckpointError",
    "GradTape",
    "NonFiniteError",
    "SGD",
    "ShapeError",
    "Tensor",
    "active_tape",
    "add",
    "backward",
    "batchnorm2d",
    "concat",
    "conv2d",
    "default_dtype",
    "deserialize",
    "div",
    "fingerprint",
    "fingerprint_file",
    "load_checkpoint",
    "log_softmax",
    "matmul",
    "maxpool2d",
    "mul",
    "neg",
    "power",
    "relu",
    "reshape",
    "save_checkpoint",
    "serialize",
    "set_default_dtype",
    "sgd_step",
    "softmax",
    "sqdist",
    "stack",
    "sub",
    "take",
    "texp",
    "tlog",
    "tmean",
    "transpose",
    "tsum",
]
