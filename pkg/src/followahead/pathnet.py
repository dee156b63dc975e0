"""Map-conditioned trajectory predictor.

A small U-Net reads the last local occupancy map stacked with the Gaussian
history trajectory maps, mixes in the raw history path at the bottleneck, and
emits one sigmoid heatmap per future step. Positions are read out with a
differentiable soft-argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nnkernel as nk
from .data import WindowDataset
from .encoding import Georef, HeatmapStack, Trajectory2D, encode_pixels
from .errors import InvalidArgument
from .gridworld import OccupancyGrid
from .nnkernel import Tensor

BCE_CLAMP = 1e-7


@dataclass
class PathNetConfig:
    H: int = 40
    W: int = 40
    N: int = 15
    T: int = 15
    resolution: float = 0.125
    channels: tuple[int, int, int] = (8, 16, 32)
    bottleneck: int = 64
    lambdas: tuple[float, float, float, float] = (1.0, 1.0, 2.0, 1.0)
    w: float = 40.0
    beta: float = 10.0
    sigma: float = 1.5

    def __post_init__(self):
        if self.H % 8 or self.W % 8:
            raise InvalidArgument("map size must be divisible by 8")
        if any(l < 0 for l in self.lambdas) or not self.w > 0:
            raise InvalidArgument("loss weights must be non-negative and w positive")
        self.channels = tuple(int(c) for c in self.channels)
        self.lambdas = tuple(float(l) for l in self.lambdas)

    @property
    def d_x(self) -> float:
        return self.W * self.resolution / 2

    @property
    def d_y(self) -> float:
        return self.H * self.resolution / 2

    @property
    def origin(self) -> tuple[float, float]:
        return (-self.d_x, -self.d_y)

    def georef(self, frame=None) -> Georef:
        return Georef(self.W, self.H, self.resolution, self.origin, frame)


class PathNetModel(nk.Module):
    def __init__(self, config: PathNetConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        c1, c2, c3 = config.channels
        n_in = config.N + 1
        self.enc1 = nk.Conv2d(n_in, c1, rng, stride=2)
        self.enc2 = nk.Conv2d(c1, c2, rng, stride=2)
        self.enc3 = nk.Conv2d(c2, c3, rng, stride=2)
        self.h8, self.w8 = config.H // 8, config.W // 8
        flat = c3 * self.h8 * self.w8
        self.fc_enc = nk.Linear(flat, config.bottleneck, rng)
        self.fc_cond = nk.Linear(config.bottleneck + 2 * config.N, config.bottleneck, rng)
        self.fc_dec = nk.Linear(config.bottleneck, flat, rng)
        self.dec3 = nk.Conv2d(c3 + c2, c2, rng)
        self.dec2 = nk.Conv2d(c2 + c1, c1, rng)
        self.head = nk.Conv2d(c1 + 1, config.T, rng)

    def logits(self, maps_in: Tensor, p_hist: Tensor) -> Tensor:
        """maps_in (B, N+1, H, W) with the occupancy map last; p_hist (B, N, 2) meters."""
        cfg = self.config
        B = maps_in.shape[0]
        e1 = nk.relu(self.enc1(maps_in))
        e2 = nk.relu(self.enc2(e1))
        e3 = nk.relu(self.enc3(e2))
        z_traj = nk.relu(self.fc_enc(e3.reshape(B, -1)))
        cond = p_hist.reshape(B, 2 * cfg.N) * (1.0 / cfg.d_x)
        z = nk.relu(self.fc_cond(nk.concat([z_traj, cond], axis=1)))
        d = nk.relu(self.fc_dec(z)).reshape(B, cfg.channels[2], self.h8, self.w8)
        d = nk.relu(self.dec3(nk.concat([nk.upsample2x(d), e2], axis=1)))
        d = nk.relu(self.dec2(nk.concat([nk.upsample2x(d), e1], axis=1)))
        occ = maps_in[:, cfg.N :, :, :]
        return self.head(nk.concat([nk.upsample2x(d), occ], axis=1))

    def __call__(self, maps_in: Tensor, p_hist: Tensor) -> tuple[Tensor, Tensor]:
        """Returns (M_hat (B, T, H, W) probabilities, P_hat (B, T, 2) meters)."""
        m_hat, p_hat, _ = self.outputs(maps_in, p_hist)
        return m_hat, p_hat

    def outputs(self, maps_in: Tensor, p_hist: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """(M_hat, P_hat, logits)."""
        logits = self.logits(maps_in, p_hist)
        m_hat = nk.sigmoid(logits)
        return m_hat, soft_argmax_t(m_hat, self.config), logits


def pixel_grid(H: int, W: int) -> np.ndarray:
    """(H*W, 2) array of (u, v) for each pixel in row-major order."""
    v, u = np.mgrid[0:H, 0:W]
    return np.stack([u.reshape(-1), v.reshape(-1)], axis=1).astype(np.float64)


def soft_argmax_t(m: Tensor, cfg: PathNetConfig) -> Tensor:
    """Differentiable soft-argmax of (..., H, W) maps, returned in frame meters."""
    lead = m.shape[:-2]
    H, W = m.shape[-2:]
    prob = nk.softmax(m.reshape(lead + (H * W,)) * cfg.beta, axis=-1)
    uv = nk.matmul(prob, Tensor(pixel_grid(H, W)))
    return uv * cfg.resolution + Tensor(np.asarray(cfg.origin))


# losses -----------------------------------------------------------------------------


def _t(x) -> Tensor:
    return nk.as_tensor(x)


def loss_traj(p_hat, p_gt) -> Tensor:
    """Mean over steps (and any leading batch axes) of the Euclidean position error."""
    p_hat, p_gt = _t(p_hat), _t(p_gt)
    if p_hat.shape != p_gt.shape:
        raise InvalidArgument(f"trajectory shapes differ: {p_hat.shape} vs {p_gt.shape}")
    return nk.mean(nk.norm(p_hat - p_gt, axis=-1))


def loss_final(p_hat, p_gt) -> Tensor:
    p_hat, p_gt = _t(p_hat), _t(p_gt)
    if p_hat.shape != p_gt.shape:
        raise InvalidArgument(f"trajectory shapes differ: {p_hat.shape} vs {p_gt.shape}")
    return nk.mean(nk.norm(p_hat[..., -1, :] - p_gt[..., -1, :], axis=-1))


def loss_map(m_hat, m_gt, w: float = 40.0) -> Tensor:
    """Positive-weighted BCE, averaged over pixels, steps and batch."""
    m_hat, m_gt = _t(m_hat), _t(m_gt)
    if m_hat.shape != m_gt.shape:
        raise InvalidArgument(f"map shapes differ: {m_hat.shape} vs {m_gt.shape}")
    p = nk.clip(m_hat, BCE_CLAMP, 1.0 - BCE_CLAMP)
    y = m_gt.data
    pos = nk.mul(nk.log(p), Tensor(w * y))
    neg = nk.mul(nk.log(1.0 - p), Tensor(1.0 - y))
    return -nk.mean(pos + neg)


def loss_map_logits(logits, m_gt, w: float = 40.0) -> Tensor:
    """:func:`loss_map` evaluated from pre-sigmoid logits.

    Equal to the clamped form whenever sigmoid(logits) lies inside the clamp
    range, but its gradient never vanishes at the clamp, so training cannot get
    stuck on saturated maps.
    """
    logits, m_gt = _t(logits), _t(m_gt)
    if logits.shape != m_gt.shape:
        raise InvalidArgument(f"map shapes differ: {logits.shape} vs {m_gt.shape}")
    y = m_gt.data
    ls = nk.log_sigmoid(logits)
    # w*y*log(s) + (1-y)*log(1-s), with log(1-s) = log(s) - logit
    return nk.mean(nk.mul(logits, Tensor(1.0 - y)) - nk.mul(ls, Tensor(w * y + 1.0 - y)))


def loss_col(m_hat, occ) -> Tensor:
    """Mean over steps of the heatmap mass sitting on occupied (and half on unknown) cells.

    m_hat (..., T, H, W); occ (..., H, W).
    """
    m_hat = _t(m_hat)
    s = np.abs(np.asarray(occ.data if isinstance(occ, Tensor) else occ, dtype=np.float64))
    if m_hat.shape[-2:] != s.shape[-2:]:
        raise InvalidArgument("heatmap and occupancy sizes differ")
    weighted = nk.mul(m_hat, Tensor(s[..., None, :, :]))
    return nk.mean(nk.sum_(weighted, axis=(-2, -1)))


def loss_total(components, lambdas=(1.0, 1.0, 2.0, 1.0)):
    """lambda-weighted sum of (traj, final, map, col); accepts floats or Tensors."""
    lambdas = tuple(lambdas)
    if len(components) != 4 or len(lambdas) != 4:
        raise InvalidArgument("need four loss components and four weights")
    total = 0.0
    for lam, comp in zip(lambdas, components):
        if lam != 0.0:
            total = total + comp * lam
    return total


def pathnet_losses(model: PathNetModel, batch: dict) -> dict[str, Tensor]:
    cfg = model.config
    m_hat, p_hat, logits = model.outputs(Tensor(batch["maps_in"]), Tensor(batch["p_hist"]))
    parts = {
        "loss_traj": loss_traj(p_hat, batch["p_fut"]),
        "loss_final": loss_final(p_hat, batch["p_fut"]),
        "loss_map": loss_map_logits(logits, batch["m_fut"], cfg.w),
        "loss_col": loss_col(m_hat, batch["occ"]),
    }
    comps = [parts[k] for k in ("loss_traj", "loss_final", "loss_map", "loss_col")]
    parts["total"] = loss_total(comps, cfg.lambdas)
    if not isinstance(parts["total"], Tensor):
        parts["total"] = Tensor(0.0)
    return parts


# batching ---------------------------------------------------------------------------


def make_batch(ds: WindowDataset, idx, cfg: PathNetConfig) -> dict[str, np.ndarray]:
    idx = np.asarray(idx)
    if ds.map_size != (cfg.H, cfg.W) or ds.N != cfg.N or ds.T != cfg.T:
        raise InvalidArgument("dataset shape does not match the PathNet config")
    p_hist = ds.p_hist[idx]
    p_fut = ds.p_fut[idx]
    occ = ds.occ[idx]
    origin = np.asarray(cfg.origin)
    hist_uv = (p_hist - origin) / cfg.resolution
    fut_uv = (p_fut - origin) / cfg.resolution
    m_hist = encode_pixels(hist_uv, cfg.H, cfg.W, "gaussian", cfg.sigma)
    m_fut = encode_pixels(fut_uv, cfg.H, cfg.W, "binary")
    maps_in = np.concatenate([m_hist, occ[:, None]], axis=1)
    return {"maps_in": maps_in, "p_hist": p_hist, "p_fut": p_fut, "m_fut": m_fut, "occ": occ}


def forward(model: PathNetModel, S_N: OccupancyGrid, M_hist: HeatmapStack, P_hist: Trajectory2D):
    """Single-sample prediction. ``P_hist`` is in actor-frame meters.

    Returns (M_hat HeatmapStack(T), P_hat Trajectory2D(T) in world meters).
    """
    cfg = model.config
    if S_N.shape != (cfg.H, cfg.W) or M_hist.values.shape != (cfg.N, cfg.H, cfg.W) or len(P_hist) != cfg.N:
        raise InvalidArgument("inputs do not match the PathNet config")
    maps_in = np.concatenate([M_hist.values, S_N.cells[None]], axis=0)[None]
    with nk.no_grad():
        m_hat, p_hat = model(Tensor(maps_in), Tensor(P_hist.points[None]))
    geo = cfg.georef(S_N.frame)
    pts = p_hat.data[0]
    if S_N.frame is not None:
        pts = S_N.frame.to_world(pts)
    return HeatmapStack(m_hat.data[0], geo), Trajectory2D(pts, P_hist.dt)


def predict_batch(model: PathNetModel, maps_in: np.ndarray, p_hist: np.ndarray):
    with nk.no_grad():
        m_hat, p_hat = model(Tensor(maps_in), Tensor(p_hist))
    return m_hat.data, p_hat.data


# training -----------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    lr: float = 1e-3
    gamma: float = 0.1
    step_size: int = 600
    seed: int = 0


@dataclass
class TrainingReport:
    records: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf
    best_state: dict | None = None

    def curve(self, key: str = "total") -> list[float]:
        return [r[key] for r in self.records]


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def evaluate(model: PathNetModel, ds: WindowDataset, batch_size: int = 64) -> dict[str, float]:
    sums: dict[str, float] = {}
    with nk.no_grad():
        for start in range(0, len(ds), batch_size):
            idx = np.arange(start, min(start + batch_size, len(ds)))
            parts = pathnet_losses(model, make_batch(ds, idx, model.config))
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v.item() * len(idx)
    return {k: v / len(ds) for k, v in sums.items()}


def train(model: PathNetModel, dataset: WindowDataset, config: TrainConfig, val: WindowDataset | None = None,
          optimizer: nk.Adam | None = None, start_epoch: int = 0, log=None) -> TrainingReport:
    """Adam with step decay; keeps the state with the best validation L_traj."""
    if len(dataset) == 0:
        raise InvalidArgument("empty dataset")
    params = model.parameters()
    opt = optimizer if optimizer is not None else nk.Adam(params, lr=config.lr)
    schedule = nk.StepDecay(config.gamma, config.step_size)
    report = TrainingReport()
    val = val if val is not None and len(val) else dataset
    for epoch in range(start_epoch, start_epoch + config.epochs):
        opt.lr = schedule.lr_at(config.lr, epoch)
        order = epoch_order(len(dataset), config.seed, epoch)
        sums: dict[str, float] = {}
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = make_batch(dataset, idx, model.config)
            model.zero_grad()
            parts = pathnet_losses(model, batch)
            nk.backward(parts["total"])
            opt.step()
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v.item() * len(idx)
        rec = {"epoch": epoch, **{k: v / len(dataset) for k, v in sums.items()}}
        rec["val_loss_traj"] = evaluate(model, val)["loss_traj"]
        report.records.append(rec)
        if rec["val_loss_traj"] < report.best_val:
            report.best_val = rec["val_loss_traj"]
            report.best_epoch = epoch
            report.best_state = model.state_dict()
        if log is not None:
            log(rec)
    return report


def config_to_dict(cfg: PathNetConfig) -> dict:
    return asdict(cfg)
