"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidArgument
from .tensor import Tensor, backward


def relative_error(a, n) -> np.ndarray:
    a = np.asarray(a)
    n = np.asarray(n)
    return np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))


def gradient_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    max_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between backprop and (f(x+h) - f(x-h)) / 2h over checked entries.

    ``f`` rebuilds the graph from ``params`` on every call. With ``max_per_param``
    only that many randomly chosen entries of each parameter are perturbed.
    """
    if not h > 0:
        raise InvalidArgument("h must be positive")
    for p in params:
        p.grad = None
    out = f()
    backward(out)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            idx = rng.choice(flat.size, size=max_per_param, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            worst = max(worst, float(relative_error(ga.reshape(-1)[i], num)))
    return worst
