"""Finite-difference verification of every kernel primitive and the two model loss graphs.

Each case is checked twice: once as recorded, and once with the backward
function of its output node doubled, which the check must flag.
"""

from __future__ import annotations

import numpy as np

from . import nnkernel as nk
from . import pathnet as pn
from . import posenet as ps
from .data import WindowDataset

TOLERANCE = 1e-4
CORRUPT_MIN = 0.1


def _param(rng, *shape, lo=-1.0, hi=1.0):
    return nk.Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


def _signed(rng, *shape):
    # magnitudes in [0.2, 1] keep kinks out of the stencil
    x = rng.uniform(0.2, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return nk.Tensor(x, requires_grad=True)


PRIMITIVES = {
    "add": lambda r: ([_param(r, 3, 4), _param(r, 4)], nk.add),
    "sub": lambda r: ([_param(r, 2, 3), _param(r, 2, 1)], nk.sub),
    "mul": lambda r: ([_param(r, 3, 4), _param(r, 3, 4)], nk.mul),
    "matmul": lambda r: ([_param(r, 2, 3, 4), _param(r, 4, 5)], nk.matmul),
    "relu": lambda r: ([_signed(r, 3, 5)], nk.relu),
    "tanh": lambda r: ([_param(r, 4, 3, lo=-2, hi=2)], nk.tanh),
    "sigmoid": lambda r: ([_param(r, 4, 3, lo=-4, hi=4)], nk.sigmoid),
    "log_sigmoid": lambda r: ([_param(r, 4, 3, lo=-6, hi=6)], nk.log_sigmoid),
    "exp": lambda r: ([_param(r, 3, 3)], nk.exp),
    "log": lambda r: ([_param(r, 3, 3, lo=0.5, hi=2.0)], nk.log),
    "abs": lambda r: ([_signed(r, 3, 3)], nk.abs_),
    "clip": lambda r: ([_signed(r, 4, 4)], lambda x: nk.clip(x, -0.6, 0.6)),
    "softmax": lambda r: ([_param(r, 3, 5, lo=-2, hi=2)], lambda x: nk.softmax(x, axis=-1)),
    "concat": lambda r: ([_param(r, 2, 3), _param(r, 2, 4)], lambda a, b: nk.concat([a, b], axis=1)),
    "slice": lambda r: ([_param(r, 4, 5)], lambda x: nk.slice_(x, (slice(1, 3), slice(None, None, 2)))),
    "sum": lambda r: ([_param(r, 3, 4, 2)], lambda x: nk.sum_(x, axis=(0, 2))),
    "mean": lambda r: ([_param(r, 3, 4)], lambda x: nk.mean(x, axis=1)),
    "norm": lambda r: ([_param(r, 3, 2, lo=0.3, hi=1.0)], nk.norm),
    "reshape": lambda r: ([_param(r, 2, 6)], lambda x: nk.reshape(x, (3, 4))),
    "transpose": lambda r: ([_param(r, 2, 3, 4)], lambda x: nk.transpose(x, (2, 0, 1))),
    "conv2d": lambda r: ([_param(r, 2, 2, 5, 5), _param(r, 3, 2, 3, 3), _param(r, 3)],
                         lambda x, w, b: nk.conv2d(x, w, b, stride=1, padding=1)),
    "conv2d_strided": lambda r: ([_param(r, 1, 2, 6, 6), _param(r, 2, 2, 3, 3)],
                                 lambda x, w: nk.conv2d(x, w, None, stride=2, padding=1)),
    "upsample2x": lambda r: ([_param(r, 1, 2, 3, 3)], nk.upsample2x),
}


def _doubled(out: nk.Tensor) -> nk.Tensor:
    fn = out.backward_fn
    out.backward_fn = lambda g: tuple(None if x is None else 2.0 * x for x in fn(g))
    return out


def check_primitive(name: str, seed: int = 0) -> tuple[float, float]:
    """(error, error with a corrupted backward) for one primitive."""
    rng = np.random.default_rng(seed)
    params, op = PRIMITIVES[name](rng)
    wts = rng.normal(size=op(*params).shape)
    good = nk.gradient_check(lambda: nk.sum_(nk.mul(op(*params), wts)), params)
    bad = nk.gradient_check(lambda: nk.sum_(nk.mul(_doubled(op(*params)), wts)), params)
    return good, bad


def _toy_windows(n: int, H: int, N: int, T: int, J: int, res: float, seed: int) -> WindowDataset:
    rng = np.random.default_rng(seed)
    occ = np.zeros((n, H, H))
    occ[:, -2:, :] = 1.0
    speed = rng.uniform(0.1, 0.2, size=(n, 1))
    p_hist = np.stack([speed * np.arange(-N + 1, 1), 0.02 * rng.normal(size=(n, N))], axis=-1)
    p_fut = np.stack([speed * np.arange(1, T + 1), 0.02 * rng.normal(size=(n, T))], axis=-1)
    pose_hist = rng.normal(scale=0.3, size=(n, N, J, 3))
    pose_fut = rng.normal(scale=0.3, size=(n, T, J, 3))
    pose_hist[:, :, 0] = 0.0
    pose_fut[:, :, 0] = 0.0
    return WindowDataset(occ, p_hist, p_fut, pose_hist, pose_fut, np.full(n, 0.9), np.zeros((n, 3)),
                         np.arange(n), res)


def check_pathnet(seed: int = 0, max_per_param: int = 6) -> tuple[float, float]:
    """Total PathNet-lite loss on 16 x 16 maps with a small network."""
    cfg = pn.PathNetConfig(H=16, W=16, N=3, T=3, channels=(4, 4, 8), bottleneck=16)
    model = pn.PathNetModel(cfg, seed)
    batch = pn.make_batch(_toy_windows(2, 16, 3, 3, 5, 0.125, seed), [0, 1], cfg)
    params = model.parameters()

    def loss():
        return pn.pathnet_losses(model, batch)["total"]

    def corrupted():
        return _doubled(loss())

    good = nk.gradient_check(loss, params, max_per_param=max_per_param, rng=np.random.default_rng(seed))
    bad = nk.gradient_check(corrupted, params, max_per_param=max_per_param, rng=np.random.default_rng(seed))
    return good, bad


def check_posenet(seed: int = 0, max_per_param: int = 8) -> tuple[float, float]:
    """PoseNet-lite pose loss with hidden size 16."""
    cfg = ps.PoseNetConfig(N=3, T=3, J=5, hidden=16, width=16)
    model = ps.PoseNetModel(cfg, seed)
    ds = _toy_windows(2, 8, 3, 3, 5, 0.125, seed)
    params = model.parameters()

    def loss():
        return ps._batch_loss(model, ds, np.arange(2))

    def corrupted():
        return _doubled(loss())

    good = nk.gradient_check(loss, params, max_per_param=max_per_param, rng=np.random.default_rng(seed))
    bad = nk.gradient_check(corrupted, params, max_per_param=max_per_param, rng=np.random.default_rng(seed))
    return good, bad


def run_suite(seed: int = 0) -> list[dict]:
    """One row per case: error, corrupted-gradient error and whether both checks behaved."""
    cases = [(name, lambda n=name: check_primitive(n, seed)) for name in PRIMITIVES]
    cases += [("pathnet_loss", lambda: check_pathnet(seed)), ("posenet_loss", lambda: check_posenet(seed))]
    rows = []
    for name, run in cases:
        good, bad = run()
        rows.append({"case": name, "error": good, "corrupted": bad,
                     "passed": bool(good <= TOLERANCE and bad > CORRUPT_MIN)})
    return rows
