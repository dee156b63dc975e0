"""GRU pose completion conditioned on a future hip trajectory.

The history local poses and the conditioning path are embedded by separate
MLPs; one GRU step over their concatenation yields the initial hidden state.
A second GRU cell then unrolls one step per future point, fed with that point
(relative to the first one) and its displacement, and a linear head reads the
hip-relative joints. The network only
sees path shape (points relative to the first one), so translating the path
translates the output rigidly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nnkernel as nk
from .data import WindowDataset
from .encoding import HIP, LocalPoseSequence, SkeletonSequence, Trajectory2D
from .errors import InvalidArgument
from .nnkernel import Tensor
from .pathnet import TrainConfig, TrainingReport, epoch_order


@dataclass
class PoseNetConfig:
    N: int = 15
    T: int = 15
    J: int = 13
    hidden: int = 64
    width: int = 64
    hip_index: int = HIP


class PoseNetModel(nk.Module):
    def __init__(self, config: PoseNetConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c = config
        self.hist_enc = nk.MLP(c.N * c.J * 3, c.width, c.width, rng)
        self.traj_enc = nk.MLP(2 * c.T, c.width, c.width, rng)
        self.theta = nk.GRUCell(2 * c.width, c.hidden, rng)
        self.gamma = nk.GRUCell(4, c.hidden, rng)
        self.head = nk.Linear(c.hidden, c.J * 3, rng)
        mask = np.ones((c.J, 3))
        mask[c.hip_index] = 0.0
        self._hip_mask = mask.reshape(-1)

    def zero_head(self) -> None:
        self.head.weight.data[:] = 0.0
        self.head.bias.data[:] = 0.0

    def __call__(self, pose_hist: Tensor, path: Tensor) -> Tensor:
        """pose_hist (B, N, J, 3) hip-relative; path (B, T, 2) meters -> (B, T, J, 3) local poses."""
        c = self.config
        B = pose_hist.shape[0]
        rel = path.data - path.data[:, :1, :]
        steps = np.diff(path.data, axis=1, prepend=path.data[:, :1, :])
        per_step = np.concatenate([rel, steps * 5.0], axis=-1)
        a = self.hist_enc(pose_hist.reshape(B, c.N * c.J * 3))
        b = self.traj_enc(Tensor(rel.reshape(B, 2 * c.T)))
        h = self.theta(nk.concat([a, b], axis=1), Tensor(np.zeros((B, c.hidden))))
        mask = Tensor(self._hip_mask)
        outs = []
        for t in range(c.T):
            h = self.gamma(Tensor(per_step[:, t, :]), h)
            outs.append(nk.mul(self.head(h), mask).reshape(B, 1, c.J, 3))
        return nk.concat(outs, axis=1)


def compose(local: np.ndarray, path: np.ndarray, hip_z) -> np.ndarray:
    """Global joints: local (..., T, J, 3) plus the path lifted to hip height."""
    hip_z = np.asarray(hip_z, dtype=np.float64)
    z = np.broadcast_to(hip_z[..., None], path.shape[:-1])
    lifted = np.concatenate([path, z[..., None]], axis=-1)
    return local + lifted[..., None, :]


def loss_pose(x_hat, x_gt) -> Tensor:
    """Mean over steps and joints of the per-joint Euclidean error."""
    x_hat, x_gt = nk.as_tensor(x_hat), nk.as_tensor(x_gt)
    if x_hat.shape != x_gt.shape:
        raise InvalidArgument(f"pose shapes differ: {x_hat.shape} vs {x_gt.shape}")
    return nk.mean(nk.norm(x_hat - x_gt, axis=-1))


def forward(model: PoseNetModel, X_hist_local: LocalPoseSequence, P_hat: Trajectory2D, hip_z: float,
            dt: float | None = None) -> SkeletonSequence:
    """Predict T future poses; hip xy of each output frame equals ``P_hat`` exactly."""
    c = model.config
    if len(X_hist_local) != c.N or len(P_hat) != c.T:
        raise InvalidArgument(f"expected {c.N} history frames and {c.T} path points")
    with nk.no_grad():
        local = model(Tensor(X_hist_local.frames[None]), Tensor(P_hat.points[None])).data[0]
    return SkeletonSequence(compose(local, P_hat.points, hip_z), c.hip_index, dt or P_hat.dt)


def predict_batch(model: PoseNetModel, pose_hist: np.ndarray, path: np.ndarray) -> np.ndarray:
    with nk.no_grad():
        return model(Tensor(pose_hist), Tensor(path)).data


def _batch_loss(model: PoseNetModel, ds: WindowDataset, idx) -> Tensor:
    # local + path on both sides, so the error equals the hip-relative joint error
    pred = model(Tensor(ds.pose_hist[idx]), Tensor(ds.p_fut[idx]))
    return loss_pose(pred, ds.pose_fut[idx])


def evaluate(model: PoseNetModel, ds: WindowDataset, batch_size: int = 128) -> float:
    total = 0.0
    with nk.no_grad():
        for start in range(0, len(ds), batch_size):
            idx = np.arange(start, min(start + batch_size, len(ds)))
            total += _batch_loss(model, ds, idx).item() * len(idx)
    return total / len(ds)


def train(model: PoseNetModel, dataset: WindowDataset, config: TrainConfig, val: WindowDataset | None = None,
          optimizer: nk.Adam | None = None, start_epoch: int = 0, log=None) -> TrainingReport:
    """Teacher-forced on the ground-truth future path."""
    if len(dataset) == 0:
        raise InvalidArgument("empty dataset")
    opt = optimizer if optimizer is not None else nk.Adam(model.parameters(), lr=config.lr)
    schedule = nk.StepDecay(config.gamma, config.step_size)
    report = TrainingReport()
    val = val if val is not None and len(val) else dataset
    for epoch in range(start_epoch, start_epoch + config.epochs):
        opt.lr = schedule.lr_at(config.lr, epoch)
        order = epoch_order(len(dataset), config.seed, epoch)
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            model.zero_grad()
            loss = _batch_loss(model, dataset, idx)
            nk.backward(loss)
            opt.step()
            total += loss.item() * len(idx)
        rec = {"epoch": epoch, "loss_pose": total / len(dataset), "val_loss_pose": evaluate(model, val)}
        report.records.append(rec)
        if rec["val_loss_pose"] < report.best_val:
            report.best_val = rec["val_loss_pose"]
            report.best_epoch = epoch
            report.best_state = model.state_dict()
        if log is not None:
            log(rec)
    return report
