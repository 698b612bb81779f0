from .checkpoint import load_arrays, save_arrays
from .init import make_rng, ones_init, xavier_bound, xavier_init, zeros_init
from .optim import AdamState, adam_step, zero_grads
from .tensor import (
    ShapeError,
    Tensor,
    add,
    concat,
    cross_entropy,
    dropout,
    embedding,
    grad_enabled,
    layer_norm,
    log_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    softmax,
    sub,
    sum_,
    transpose,
)
