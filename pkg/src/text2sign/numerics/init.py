"""Parameter initialisers.

All randomness flows through ``numpy.random.Generator`` backed by PCG64,
so a given seed yields the same draws on every platform.
"""
from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def xavier_init(shape, seed, dtype=np.float32) -> Tensor:
    """Glorot-uniform weights for a 2-D ``(fan_in, fan_out)`` matrix."""
    shape = tuple(shape)
    if len(shape) != 2:
        raise ValueError(f"xavier_init expects a 2-D shape, got {shape}")
    bound = xavier_bound(*shape)
    data = make_rng(seed).uniform(-bound, bound, size=shape)
    return Tensor(data.astype(dtype), requires_grad=True)


def zeros_init(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=dtype), requires_grad=True)


def ones_init(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.ones(tuple(shape), dtype=dtype), requires_grad=True)
