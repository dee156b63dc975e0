"""Closed-loop follow-ahead rollouts.

Each step the robot observes the last N walker poses, a predictor turns them
into a forecast, and a controller picks one action that is applied to the
continuous robot state. Moves that would end within ``robot_radius`` of an
obstacle are blocked.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..control import (ControlInput, EKFState, GreedyConfig, HumanForecast, LatticeConfig, RobotState, ViewConfig,
                       default_actions, ekf_init, ekf_update, plan_dp, plan_greedy_ekf, step, window_lattice)
from ..encoding import SkeletonSequence, heading_from_pose
from ..errors import InfeasibleStart, NoFeasiblePlan
from ..gridworld import is_collision
from .metrics import eval_followahead, view_sample
from .walker import Scenario, frame_times, walk

ROLLOUT_FORMAT = "followahead-rollout"
ROLLOUT_VERSION = 1


def desk_lattice() -> LatticeConfig:
    """Planner settings used in simulation; one heading bin per turning step."""
    omega = 2 * math.pi / 16 / 0.2
    return LatticeConfig(resolution=0.1, headings=16, actions=default_actions((0.0, 0.6, 1.2), omega), dt=0.2,
                         inflation=0.3, margin=1.0, view=ViewConfig(d_min=1.5, kappa_near=10.0))


@dataclass
class RolloutConfig:
    rate: float = 5.0
    N: int = 15
    T: int = 15
    start_ahead: float = 1.5
    robot_radius: float = 0.2
    noise_std: float = 0.0
    seed: int = 0
    fov: float = math.radians(87.0)
    range_: float = 6.0
    lattice: LatticeConfig = field(default_factory=desk_lattice)

    @property
    def dt(self) -> float:
        return 1.0 / self.rate


# predictors --------------------------------------------------------------------------


class GroundTruthPredictor:
    """The walker's true next T positions and headings."""

    name = "gt"

    def __call__(self, scenario: Scenario, t: float, history: SkeletonSequence, cfg: RolloutConfig):
        pos, hd = [], []
        for k in range(1, cfg.T + 1):
            joints, heading = walk(scenario, min(t + k * cfg.dt, scenario.duration))
            pos.append(joints[0, :2])
            hd.append(heading)
        return HumanForecast(np.array(pos), np.array(hd))


class ModelPredictor:
    """Wraps a :class:`followahead.predictor.FullPredictor`."""

    name = "pred"

    def __init__(self, full):
        self.full = full

    def __call__(self, scenario: Scenario, t: float, history: SkeletonSequence, cfg: RolloutConfig):
        return self.full.predict(scenario.grid, history).forecast()


class NoPredictor:
    name = "none"

    def __call__(self, scenario, t, history, cfg):
        return None


# controllers ---------------------------------------------------------------------------


class DPController:
    """Receding-horizon DP on a lattice anchored at the robot's current position.

    If the inflated problem has no finite plan (the robot has drifted into the
    safety margin), it replans with ``fallback_inflation``, then stops.
    """

    def __init__(self, lattice: LatticeConfig, fallback_inflation: float = 0.2):
        self.lattice = lattice
        self.fallback = replace(lattice, inflation=min(fallback_inflation, lattice.inflation))

    def reset(self):
        pass

    def _plan(self, grid, forecast, robot, cfg):
        pts = np.vstack([robot.xy[None], forecast.positions])
        lat = window_lattice(pts, cfg.resolution, cfg.headings, cfg.margin, anchor=robot.xy)
        return plan_dp(grid, forecast, robot, cfg, lat).first()

    def act(self, scenario: Scenario, robot: RobotState, history: SkeletonSequence, forecast: HumanForecast,
            dt: float) -> ControlInput:
        for cfg in (self.lattice, self.fallback):
            try:
                return self._plan(scenario.grid, forecast, robot, cfg)
            except (NoFeasiblePlan, InfeasibleStart):
                continue
        return ControlInput(0.0, 0.0)


class GreedyEKFController:
    def __init__(self, cfg: GreedyConfig | None = None, q: float = 0.05, r: float = 0.01):
        self.cfg = cfg or GreedyConfig(actions=desk_lattice().actions)
        self.q = q
        self.r = r
        self.state: EKFState | None = None

    def reset(self):
        self.state = None

    def act(self, scenario, robot, history, forecast, dt) -> ControlInput:
        z = history.hips[-1, :2]
        heading = float(heading_from_pose(history.frames[-1]))
        if self.state is None:
            # warm start on the whole observed history
            self.state = ekf_init(history.hips[0, :2], pos_var=self.r, heading=heading)
            for p in history.hips[1:, :2]:
                self.state = ekf_update(self.state, p, history.dt, self.q * np.eye(4), self.r, heading)
        else:
            self.state = ekf_update(self.state, z, dt, self.q * np.eye(4), self.r, heading)
        return plan_greedy_ekf(scenario.grid, self.state, robot, dt, self.cfg)


# rollout -------------------------------------------------------------------------------


@dataclass
class RolloutLog:
    scenario_seed: int
    controller: str
    times: list = field(default_factory=list)
    human: list = field(default_factory=list)        # (J, 3) world joints
    heading: list = field(default_factory=list)
    forecast: list = field(default_factory=list)     # (T, 2) or None
    robot: list = field(default_factory=list)        # (x, y, theta)
    control: list = field(default_factory=list)      # (v, omega)
    tracked: list = field(default_factory=list)
    blocked: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    def records(self):
        for k in range(len(self)):
            yield {
                "t": self.times[k],
                "human": np.asarray(self.human[k]).tolist(),
                "heading": self.heading[k],
                "forecast": None if self.forecast[k] is None else np.asarray(self.forecast[k]).tolist(),
                "robot": list(self.robot[k]),
                "control": list(self.control[k]),
                "tracked": bool(self.tracked[k]),
                "blocked": bool(self.blocked[k]),
            }

    def dumps(self) -> str:
        head = {"format": ROLLOUT_FORMAT, "version": ROLLOUT_VERSION, "scenario": self.scenario_seed,
                "controller": self.controller, "steps": len(self)}
        lines = [json.dumps(head)] + [json.dumps(r) for r in self.records()]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())


def start_pose(scenario: Scenario, t0: float, ahead: float) -> RobotState:
    """``ahead`` meters along the route from the walker, facing the direction of travel."""
    s = scenario.distance_at(t0)
    pos, tangent = scenario.path.at(min(s + ahead, scenario.path.length))
    if s + ahead > scenario.path.length:
        cur, tangent = scenario.path.at(s)
        pos = cur + ahead * np.array([math.cos(tangent), math.sin(tangent)])
    return RobotState(pos[0], pos[1], tangent)


def rollout(scenario: Scenario, predictor, controller, cfg: RolloutConfig = RolloutConfig(),
            name: str | None = None) -> RolloutLog:
    """Run the closed loop from the first moment a full history exists to the end of the scenario."""
    log = RolloutLog(scenario.seed, name or type(controller).__name__)
    times = frame_times(scenario.duration, cfg.rate)
    if len(times) < cfg.N:
        return log
    rng = np.random.default_rng([cfg.seed, scenario.seed])
    poses = [walk(scenario, float(t)) for t in times]
    joints = np.stack([p[0] for p in poses])
    observed = joints.copy()
    if cfg.noise_std > 0:
        observed[..., :2] += rng.normal(0.0, cfg.noise_std, size=(len(times), 1, 2))
    controller.reset()
    k0 = cfg.N - 1
    robot = start_pose(scenario, float(times[k0]), cfg.start_ahead)
    if is_collision(scenario.grid, robot.xy, cfg.robot_radius):
        raise InfeasibleStart(f"robot start ({robot.x:.2f}, {robot.y:.2f}) is not free")
    for k in range(k0, len(times)):
        t = float(times[k])
        history = SkeletonSequence(observed[k - cfg.N + 1 : k + 1], 0, cfg.dt)
        forecast = predictor(scenario, t, history, cfg)
        u = controller.act(scenario, robot, history, forecast, cfg.dt)
        tracked = view_sample(scenario.grid, robot.as_array(), joints[k, 0, :2], poses[k][1], cfg.fov,
                              cfg.range_)[0]
        log.times.append(t)
        log.human.append(joints[k])
        log.heading.append(float(poses[k][1]))
        log.forecast.append(None if forecast is None else forecast.positions)
        log.robot.append([robot.x, robot.y, robot.theta])
        log.control.append([u.v, u.omega])
        log.tracked.append(tracked)
        nxt = step(robot, u, cfg.dt)
        blocked = is_collision(scenario.grid, nxt.xy, cfg.robot_radius)
        log.blocked.append(blocked)
        if blocked:
            nxt = RobotState(robot.x, robot.y, nxt.theta)
        robot = nxt
    return log


def summarize(log: RolloutLog, grid, cfg: RolloutConfig = RolloutConfig()) -> dict:
    humans = [h[0, :2] for h in log.human]
    return eval_followahead(log.robot, humans, log.heading, grid, cfg.fov, cfg.range_)


def config_dict(cfg: RolloutConfig) -> dict:
    d = asdict(cfg)
    d["lattice"]["actions"] = np.asarray(cfg.lattice.actions).tolist()
    return d
