"""Desk-scale experiment protocols shared by the CLI and the acceptance suite.

Scenario seeds are partitioned into train, validation and test blocks so no
scenario contributes windows to more than one split.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import pathnet as pn
from . import posenet as ps
from .data import WindowDataset
from .errors import InvalidArgument
from .predictor import FullPredictor
from .sim.dataset import apply_visibility, synthesize_dataset
from .sim.metrics import eval_prediction
from .sim.rollout import (DPController, GreedyEKFController, GroundTruthPredictor, ModelPredictor, NoPredictor,
                          RolloutConfig, rollout, summarize)
from .sim.walker import make_scenario


@dataclass
class ExperimentConfig:
    kinds: tuple[str, ...] = ("L-turn", "T-junction")
    seed_base: int = 0
    train_scenarios: int = 40
    val_scenarios: int = 10
    test_scenarios: int = 20
    H: int = 24
    resolution: float = 0.2
    N: int = 15
    T: int = 15
    rate: float = 5.0
    stride: int = 4
    epochs: int = 20
    batch_size: int = 16
    lr: float = 1e-3
    pose_epochs: int = 30
    pose_lr: float = 1e-3
    lambdas: tuple[float, float, float, float] = (1.0, 1.0, 2.0, 1.0)

    @property
    def d(self) -> float:
        return self.H * self.resolution / 2

    def pathnet_config(self, lambdas=None) -> pn.PathNetConfig:
        return pn.PathNetConfig(H=self.H, W=self.H, N=self.N, T=self.T, resolution=self.resolution,
                                lambdas=tuple(lambdas if lambdas is not None else self.lambdas))

    def posenet_config(self) -> ps.PoseNetConfig:
        return ps.PoseNetConfig(N=self.N, T=self.T)


def scenario_seeds(cfg: ExperimentConfig) -> dict[str, list[int]]:
    a = cfg.seed_base
    b = a + cfg.train_scenarios
    c = b + cfg.val_scenarios
    return {"train": list(range(a, b)), "val": list(range(b, c)), "test": list(range(c, c + cfg.test_scenarios))}


def scenarios_for(cfg: ExperimentConfig, seeds):
    return [make_scenario(cfg.kinds[s % len(cfg.kinds)], s) for s in seeds]


def build_splits(cfg: ExperimentConfig) -> dict[str, WindowDataset]:
    out = {}
    for split, seeds in scenario_seeds(cfg).items():
        out[split] = synthesize_dataset(scenarios_for(cfg, seeds), cfg.N, cfg.T, cfg.rate, cfg.d, cfg.d,
                                        cfg.resolution, stride=cfg.stride)
    return out


def train_pathnet(cfg: ExperimentConfig, splits, seed: int, lambdas=None, visibility: str = "full", log=None):
    """Train one PathNet and restore its best-validation weights."""
    train = apply_visibility(splits["train"], visibility)
    val = apply_visibility(splits["val"], visibility)
    model = pn.PathNetModel(cfg.pathnet_config(lambdas), seed)
    report = pn.train(model, train, pn.TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
                                                   seed=seed), val=val, log=log)
    if report.best_state is not None:
        model.load_state_dict(report.best_state)
    return model, report


def train_posenet(cfg: ExperimentConfig, splits, seed: int, log=None):
    model = ps.PoseNetModel(cfg.posenet_config(), seed)
    report = ps.train(model, splits["train"], pn.TrainConfig(epochs=cfg.pose_epochs, batch_size=32, lr=cfg.pose_lr,
                                                              seed=seed), val=splits["val"], log=log)
    if report.best_state is not None:
        model.load_state_dict(report.best_state)
    return model, report


def predict_paths(model: pn.PathNetModel, ds: WindowDataset, batch_size: int = 128) -> np.ndarray:
    out = []
    for start in range(0, len(ds), batch_size):
        idx = np.arange(start, min(start + batch_size, len(ds)))
        batch = pn.make_batch(ds, idx, model.config)
        out.append(pn.predict_batch(model, batch["maps_in"], batch["p_hist"])[1])
    return np.concatenate(out)


def path_errors(model: pn.PathNetModel, ds: WindowDataset) -> dict:
    """Mean displacement over all steps and at the final step, in meters."""
    err = np.linalg.norm(predict_paths(model, ds) - ds.p_fut, axis=-1)
    return {"mean": float(err.mean()), "final": float(err[:, -1].mean())}


def map_ablation(cfg: ExperimentConfig, seeds, modes=("full", "unknown"), splits=None, log=None,
                 models: dict | None = None) -> dict:
    """Held-out path errors per visibility mode and seed; test maps use the same visibility as training.

    Trained models are stored in ``models[(mode, seed)]`` when a dict is given.
    """
    splits = splits or build_splits(cfg)
    out = {m: [] for m in modes}
    for mode in modes:
        test = apply_visibility(splits["test"], mode)
        for seed in seeds:
            model, _ = train_pathnet(cfg, splits, seed, visibility=mode)
            res = path_errors(model, test)
            out[mode].append(res)
            if models is not None:
                models[mode, seed] = model
            if log is not None:
                log({"mode": mode, "seed": seed, **res})
    return out


LOSS_VARIANTS = {
    "full": (1.0, 1.0, 2.0, 1.0),
    "no_map": (1.0, 1.0, 0.0, 1.0),
    "no_col": (1.0, 1.0, 2.0, 0.0),
}


def loss_ablation(cfg: ExperimentConfig, seeds, variants=("no_map", "no_col"), splits=None, log=None,
                  reuse: dict | None = None) -> dict:
    """Held-out path error per loss variant and seed. ``reuse`` may carry finished variants."""
    splits = splits or build_splits(cfg)
    out = dict(reuse or {})
    for name in variants:
        if name in out:
            continue
        out[name] = []
        for seed in seeds:
            model, _ = train_pathnet(cfg, splits, seed, lambdas=LOSS_VARIANTS[name])
            res = path_errors(model, splits["test"])
            out[name].append(res)
            if log is not None:
                log({"variant": name, "seed": seed, **res})
    return out


def sign_test_p(wins: int, n: int) -> float:
    """One-sided binomial p-value of at least ``wins`` successes out of n under p = 1/2."""
    return sum(math.comb(n, k) for k in range(wins, n + 1)) / 2 ** n


def prediction_table(path_model: pn.PathNetModel, pose_model: ps.PoseNetModel, ds: WindowDataset,
                     horizons=(1.0, 1.5, 2.0, 3.0)) -> dict:
    """Path and pose errors of the chained predictor (PoseNet fed with PathNet's path)."""
    p_hat = predict_paths(path_model, ds)
    x_hat = ps.predict_batch(pose_model, ds.pose_hist, p_hat)
    return eval_prediction(p_hat, ds.p_fut, x_hat, ds.pose_fut, horizons, rate=5.0)


@dataclass
class FollowConfig:
    scenarios: int = 20
    seed_base: int = 1000
    kinds: tuple[str, ...] = ("L-turn", "T-junction")
    rollout: RolloutConfig = field(default_factory=RolloutConfig)


CONTROLLERS = ("greedy-EKF", "DP+pred", "DP+gt")


def make_controller(name: str, full_predictor: FullPredictor | None, rc: RolloutConfig):
    """(predictor, controller) pair for one of :data:`CONTROLLERS`."""
    if name == "greedy-EKF":
        return NoPredictor(), GreedyEKFController()
    if name == "DP+pred":
        if full_predictor is None:
            raise InvalidArgument("DP+pred needs a trained predictor")
        return ModelPredictor(full_predictor), DPController(rc.lattice)
    if name == "DP+gt":
        return GroundTruthPredictor(), DPController(rc.lattice)
    raise InvalidArgument(f"unknown controller {name!r}; expected one of {CONTROLLERS}")


def follow_ahead(cfg: FollowConfig, full_predictor: FullPredictor | None, controllers=CONTROLLERS, log=None):
    """Per-controller lists of rollout summaries over the same scenarios."""
    rc = cfg.rollout
    out = {c: [] for c in controllers}
    logs = {c: [] for c in controllers}
    for k in range(cfg.scenarios):
        seed = cfg.seed_base + k
        sc = make_scenario(cfg.kinds[k % len(cfg.kinds)], seed)
        for name in controllers:
            pred, ctl = make_controller(name, full_predictor, rc)
            rl = rollout(sc, pred, ctl, rc, name)
            summary = summarize(rl, sc.grid, rc)
            out[name].append(summary)
            logs[name].append(rl)
            if log is not None:
                log({"scenario": seed, "controller": name, **summary})
    return out, logs


def mean_summary(rows: list[dict]) -> dict:
    keys = ("area_proxy", "tracking_time", "distance")
    return {k: float(np.mean([r[k] for r in rows])) for k in keys}


def config_dict(cfg) -> dict:
    return asdict(cfg)

