"""Parameterized building blocks on top of the tensor primitives."""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .tensor import Tensor


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Module:
    """Ordered collection of named parameters and sub-modules."""

    def named_parameters(self, prefix: str = ""):
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(prefix + key + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in params.items():
            if state[k].shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {state[k].shape} vs {p.data.shape}")
            p.data = np.array(state[k], dtype=np.float64)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.weight = uniform_init(rng, (n_in, n_out), n_in)
        self.bias = uniform_init(rng, (n_out,), n_in)

    def __call__(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.weight) + self.bias


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, kernel: int = 3, stride: int = 1,
                 padding: int = 1):
        fan_in = c_in * kernel * kernel
        self.weight = uniform_init(rng, (c_out, c_in, kernel, kernel), fan_in)
        self.bias = uniform_init(rng, (c_out,), fan_in)
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class MLP(Module):
    """Two-layer perceptron with a ReLU hidden layer."""

    def __init__(self, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator):
        self.fc1 = Linear(n_in, n_hidden, rng)
        self.fc2 = Linear(n_hidden, n_out, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(T.relu(self.fc1(x)))


class GRUCell(Module):
    """Single GRU step: h' = (1 - z) * n + z * h."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_x = uniform_init(rng, (n_in, 3 * hidden), n_in)
        self.w_h = uniform_init(rng, (hidden, 3 * hidden), hidden)
        self.b_x = uniform_init(rng, (3 * hidden,), hidden)
        self.b_h = uniform_init(rng, (3 * hidden,), hidden)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        H = self.hidden
        gx = T.matmul(x, self.w_x) + self.b_x
        gh = T.matmul(h, self.w_h) + self.b_h
        r = T.sigmoid(gx[..., :H] + gh[..., :H])
        z = T.sigmoid(gx[..., H : 2 * H] + gh[..., H : 2 * H])
        n = T.tanh(gx[..., 2 * H :] + r * gh[..., 2 * H :])
        return (1.0 - z) * n + z * h
