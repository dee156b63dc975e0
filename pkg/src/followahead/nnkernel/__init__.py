"""Minimal differentiable-computation kernel (numpy, float64)."""

from .gradcheck import gradient_check, relative_error
from .layers import MLP, Conv2d, GRUCell, Linear, Module
from .optim import SGD, Adam, StepDecay, optimizer_step
from .tensor import (
    ComputationTape,
    Tensor,
    abs_,
    add,
    as_tensor,
    backward,
    clip,
    concat,
    conv2d,
    exp,
    log,
    log_sigmoid,
    make_op,
    matmul,
    mean,
    mul,
    no_grad,
    norm,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
    upsample2x,
)
from .weights import dumps_weights, load_weights, loads_weights, save_weights
