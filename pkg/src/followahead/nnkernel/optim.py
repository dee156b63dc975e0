"""Gradient-descent and Adam updates with step-decay learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from .tensor import Tensor


@dataclass(frozen=True)
class StepDecay:
    """lr(epoch) = base * gamma ** (epoch // step_size)."""

    gamma: float = 0.1
    step_size: int = 600

    def lr_at(self, base_lr: float, epoch: int) -> float:
        return base_lr * self.gamma ** (epoch // self.step_size)


class SGD:
    def __init__(self, params: list[Tensor], lr: float):
        if lr < 0:
            raise InvalidArgument("learning rate must be non-negative")
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is not None:
                p.data = p.data - self.lr * p.grad

    def state(self) -> dict[str, np.ndarray]:
        return {}

    def load_state(self, state) -> None:
        pass


class Adam:
    def __init__(self, params: list[Tensor], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if lr < 0:
            raise InvalidArgument("learning rate must be non-negative")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            if self.lr == 0.0:
                continue
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)

    def state(self) -> dict[str, np.ndarray]:
        out = {"adam.t": np.array([float(self.t)])}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"adam.m.{i}"] = m.copy()
            out[f"adam.v.{i}"] = v.copy()
        return out

    def load_state(self, state) -> None:
        self.t = int(state["adam.t"][0])
        self.m = [np.array(state[f"adam.m.{i}"]) for i in range(len(self.params))]
        self.v = [np.array(state[f"adam.v.{i}"]) for i in range(len(self.params))]


def optimizer_step(params: list[Tensor], grads, lr: float, schedule: StepDecay | None = None,
                   epoch: int = 0) -> None:
    """Plain gradient descent in place: p -= lr(epoch) * g."""
    if not lr > 0:
        raise InvalidArgument("lr must be positive")
    rate = schedule.lr_at(lr, epoch) if schedule is not None else lr
    for p, g in zip(params, grads):
        if g is not None:
            p.data = p.data - rate * np.asarray(g)
