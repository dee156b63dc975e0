"""Follow-ahead planners.

The robot is a unicycle ``Y = (x, y, theta)`` carrying a rear-facing camera.
Its viewing cost prefers poses in front of the person, facing away from them.
Three planners are provided:

- ``plan_dp``: finite-horizon value iteration over an (x, y, theta) lattice;
- ``plan_oracle``: the same planner fed the true future instead of a forecast;
- ``plan_greedy_ekf``: a myopic baseline that chases a point ahead of a
  constant-velocity Kalman estimate.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleStart, InvalidArgument, NoFeasiblePlan, NumericError
from .geometry import wrap_angle
from .gridworld import OccupancyGrid, collision_mask, is_collision

BEARING = "bearing"
LITERAL = "literal"


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class ControlInput:
    v: float
    omega: float


@dataclass(frozen=True)
class HumanForecast:
    """T future positions (T, 2) and headings (T,), world frame."""

    positions: np.ndarray
    headings: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64).reshape(-1, 2)
        hd = np.array(self.headings, dtype=np.float64).reshape(-1)
        if len(pos) != len(hd) or len(pos) == 0:
            raise InvalidArgument("forecast needs matching non-empty positions and headings")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "headings", hd)

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True)
class ViewConfig:
    """Viewing-cost constants.

    ``convention`` picks how gamma is measured: ``bearing`` uses the angle
    between the human heading and the human-to-robot direction; ``literal``
    uses the angle between the camera focal direction and the human heading.
    ``d_min``/``kappa_near`` add an optional linear penalty for standing too
    close (off by default).
    """

    eps: float = 0.1
    kappa_view: float = 50.0
    fov: float = math.radians(87.0)
    convention: str = BEARING
    d_min: float = 0.0
    kappa_near: float = 0.0

    def __post_init__(self):
        if self.convention not in (BEARING, LITERAL):
            raise InvalidArgument(f"unknown gamma convention {self.convention!r}")


def default_actions(v=(0.0, 0.4, 0.8), omega=1.0) -> np.ndarray:
    """(A, 2) action table; v outer, omega inner in the order (0, -omega, +omega).

    The stop action (0, 0) is always index 0, so ties prefer standing still.
    """
    return np.array([(vv, w) for vv in v for w in (0.0, -omega, omega)], dtype=np.float64)


@dataclass(frozen=True)
class LatticeConfig:
    resolution: float = 0.25
    headings: int = 16
    actions: np.ndarray = field(default_factory=default_actions)
    dt: float = 0.2
    lambda_col: float = math.inf
    inflation: float = 0.3
    margin: float = 1.5
    view: ViewConfig = field(default_factory=ViewConfig)

    def __post_init__(self):
        if not (self.resolution > 0 and self.headings >= 1 and self.dt > 0):
            raise InvalidArgument("lattice resolution, headings and dt must be positive")
        if self.lambda_col < 0:
            raise InvalidArgument("lambda_col must be non-negative")
        acts = np.array(self.actions, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "actions", acts)


# dynamics and costs --------------------------------------------------------------


def step(Y: RobotState, u: ControlInput, dt: float) -> RobotState:
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    return RobotState(
        Y.x + u.v * math.cos(Y.theta) * dt,
        Y.y + u.v * math.sin(Y.theta) * dt,
        Y.theta + u.omega * dt,
    )


def step_arrays(x, y, theta, v, omega, dt):
    """Vectorized unicycle step; theta is wrapped."""
    return x + v * np.cos(theta) * dt, y + v * np.sin(theta) * dt, wrap_angle(theta + omega * dt)


def view_cost_arrays(x, y, theta, hx, hy, hh, cfg: ViewConfig = ViewConfig()) -> np.ndarray:
    """Broadcasting viewing cost for robot poses against a human position and heading."""
    dx = np.asarray(x, dtype=np.float64) - hx
    dy = np.asarray(y, dtype=np.float64) - hy
    theta = np.asarray(theta, dtype=np.float64)
    d = np.sqrt(dx * dx + dy * dy)
    cam = theta + math.pi
    if cfg.convention == BEARING:
        gamma = wrap_angle(np.arctan2(dy, dx) - hh)
    else:
        gamma = wrap_angle(cam - hh)
    cost = d / np.maximum(np.cos(gamma), cfg.eps)
    # the rear camera must actually see the person
    seen = np.abs(wrap_angle(np.arctan2(-dy, -dx) - cam)) <= cfg.fov / 2
    cost = cost + np.where(seen, 0.0, cfg.kappa_view)
    if cfg.d_min > 0 and cfg.kappa_near > 0:
        cost = cost + cfg.kappa_near * np.maximum(0.0, cfg.d_min - d) / cfg.d_min
    return np.where(d == 0.0, 0.0, cost)


def view_cost(Y: RobotState, human_xy, human_heading: float, cfg: ViewConfig = ViewConfig()) -> float:
    """d / max(cos gamma, eps), plus kappa_view when the person is outside the camera FOV."""
    hx, hy = float(human_xy[0]), float(human_xy[1])
    return float(view_cost_arrays(Y.x, Y.y, Y.theta, hx, hy, float(human_heading), cfg))


def collision_weight(hit, lambda_col: float):
    """Collision term: lambda_col on hits, with an infinite lambda making hits absorbing."""
    hit = np.asarray(hit, dtype=bool)
    if math.isinf(lambda_col):
        return np.where(hit, math.inf, 0.0)
    return np.where(hit, float(lambda_col), 0.0)


def stage_cost(Y: RobotState, human_xy, human_heading: float, grid: OccupancyGrid,
               lambda_col: float = math.inf, inflation: float = 0.3, cfg: ViewConfig = ViewConfig()) -> float:
    hit = is_collision(grid, Y.xy, inflation)
    col = float(collision_weight(hit, lambda_col))
    if math.isinf(col):
        return math.inf
    return view_cost(Y, human_xy, human_heading, cfg) + col


# lattice and value table ---------------------------------------------------------------


@dataclass(frozen=True)
class Lattice:
    """Axis-aligned (x, y, theta) lattice: cell (i, j, k) sits at origin + r * (i, j), heading k * 2pi / K."""

    origin: tuple[float, float]
    resolution: float
    nx: int
    ny: int
    headings: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.ny, self.nx, self.headings)

    @property
    def size(self) -> int:
        return self.ny * self.nx * self.headings

    def centers(self):
        """Broadcastable (ny,1,1), (1,nx,1), (1,1,K) coordinate arrays."""
        xs = self.origin[0] + self.resolution * np.arange(self.nx)
        ys = self.origin[1] + self.resolution * np.arange(self.ny)
        th = wrap_angle(2 * math.pi * np.arange(self.headings) / self.headings)
        return ys[:, None, None], xs[None, :, None], np.asarray(th).reshape(1, 1, -1)

    def state_of(self, idx: tuple[int, int, int]) -> RobotState:
        j, i, k = idx
        th = 2 * math.pi * k / self.headings
        return RobotState(self.origin[0] + self.resolution * i, self.origin[1] + self.resolution * j, th)

    def project(self, x, y, theta):
        """Nearest cell indices (j, i, k) and an in-lattice mask; works on arrays."""
        i = np.floor((np.asarray(x) - self.origin[0]) / self.resolution + 0.5).astype(np.int64)
        j = np.floor((np.asarray(y) - self.origin[1]) / self.resolution + 0.5).astype(np.int64)
        k = np.floor(np.asarray(theta) * self.headings / (2 * math.pi) + 0.5).astype(np.int64) % self.headings
        inside = (i >= 0) & (i < self.nx) & (j >= 0) & (j < self.ny)
        return j, i, k, inside

    def project_state(self, Y: RobotState):
        j, i, k, inside = self.project(Y.x, Y.y, Y.theta)
        if not bool(inside):
            return None
        return int(j), int(i), int(k)


def window_lattice(points, resolution: float, headings: int, margin: float, anchor=None) -> Lattice:
    """Smallest lattice covering ``points`` plus ``margin``.

    Nodes sit on multiples of ``resolution``, shifted so that ``anchor`` (if given) is a node.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    base = np.zeros(2) if anchor is None else np.asarray(anchor, dtype=np.float64)
    lo = np.floor((pts.min(axis=0) - margin - base) / resolution)
    hi = np.ceil((pts.max(axis=0) + margin - base) / resolution)
    n = (hi - lo).astype(np.int64) + 1
    origin = base + lo * resolution
    return Lattice((float(origin[0]), float(origin[1])), resolution, int(n[0]), int(n[1]), headings)


def successor_table(lat: Lattice, actions: np.ndarray, dt: float) -> np.ndarray:
    """(A, ny, nx, K) flat successor index per action, -1 where the successor leaves the lattice."""
    Y, X, TH = lat.centers()
    X, Y, TH = np.broadcast_arrays(X, Y, TH)
    out = np.empty((len(actions),) + lat.shape, dtype=np.int64)
    for a, (v, w) in enumerate(actions):
        nx_, ny_, nth = step_arrays(X, Y, TH, v, w, dt)
        j, i, k, inside = lat.project(nx_, ny_, nth)
        flat = np.ravel_multi_index((np.clip(j, 0, lat.ny - 1), np.clip(i, 0, lat.nx - 1), k), lat.shape)
        out[a] = np.where(inside, flat, -1)
    return out


def stage_table(lat: Lattice, forecast: HumanForecast, grid: OccupancyGrid, cfg: LatticeConfig) -> np.ndarray:
    """(T, ny, nx, K) stage costs of every lattice state against every forecast step."""
    Y, X, TH = lat.centers()
    XY = np.stack(np.broadcast_arrays(X[..., 0], Y[..., 0]), axis=-1)
    col = collision_weight(collision_mask(grid, XY, cfg.inflation), cfg.lambda_col)[..., None]
    out = np.empty((len(forecast),) + lat.shape)
    for t in range(len(forecast)):
        (hx, hy), hh = forecast.positions[t], forecast.headings[t]
        out[t] = view_cost_arrays(X, Y, TH, hx, hy, hh, cfg.view) + col
    return out


@dataclass
class ValueTable:
    """V[t] for t = 0..T and argmin actions for t = 0..T-1 over a lattice.

    V[T] is the terminal stage cost, V[t] = stage[t] + min_a V[t+1](succ) for
    1 <= t < T, and V[0] = min_a V[1](succ), because the current state's own cost
    cannot be changed by any action.
    """

    lattice: Lattice
    values: np.ndarray    # (T+1, ny, nx, K)
    policy: np.ndarray    # (T, ny, nx, K)
    stage: np.ndarray     # (T, ny, nx, K), stage[t-1] is the cost at step t
    successors: np.ndarray

    @property
    def horizon(self) -> int:
        return self.policy.shape[0]


def backup(V_next: np.ndarray, succ: np.ndarray):
    """Min over actions of V_next at each successor; returns (best value, argmin) with ties to index 0."""
    flat = V_next.reshape(-1)
    cand = np.where(succ >= 0, flat[np.maximum(succ, 0)], math.inf)
    best = np.argmin(cand, axis=0)
    return np.take_along_axis(cand, best[None], axis=0)[0], best


def build_value_table(lat: Lattice, stage: np.ndarray, succ: np.ndarray) -> ValueTable:
    T = stage.shape[0]
    values = np.empty((T + 1,) + lat.shape)
    policy = np.empty((T,) + lat.shape, dtype=np.int64)
    values[T] = stage[T - 1]
    for t in range(T - 1, -1, -1):
        best, arg = backup(values[t + 1], succ)
        values[t] = best if t == 0 else stage[t - 1] + best
        policy[t] = arg
    if np.isnan(values).any():
        raise NumericError("value table contains NaN")
    return ValueTable(lat, values, policy, stage, succ)


@dataclass
class ControlPlan:
    actions: np.ndarray      # (T, 2) v, omega
    states: np.ndarray       # (T+1, 3) lattice states starting at the projected start
    stage_costs: np.ndarray  # (T,) cost of each reached state
    total_cost: float
    table: ValueTable | None = None

    def first(self) -> ControlInput:
        return ControlInput(float(self.actions[0, 0]), float(self.actions[0, 1]))

    def records(self) -> list[dict]:
        out = []
        for t in range(len(self.actions)):
            x, y, th = self.states[t]
            out.append({"t": t, "x": float(x), "y": float(y), "theta": float(th),
                        "v": float(self.actions[t, 0]), "omega": float(self.actions[t, 1]),
                        "stage_cost": float(self.stage_costs[t])})
        return out


def write_plan(plan: ControlPlan, path) -> None:
    with open(path, "w") as fh:
        for rec in plan.records():
            fh.write(json.dumps(rec) + "\n")


def plan_dp(grid: OccupancyGrid, forecast: HumanForecast, Y0: RobotState, cfg: LatticeConfig = LatticeConfig(),
            lattice: Lattice | None = None) -> ControlPlan:
    """Backward value iteration then a forward read-out of the argmin actions from project(Y0).

    Without an explicit ``lattice`` the window covers the start and the forecast plus ``cfg.margin``.
    """
    if is_collision(grid, Y0.xy, cfg.inflation):
        raise InfeasibleStart(f"start ({Y0.x:.3f}, {Y0.y:.3f}) is in collision")
    if lattice is None:
        pts = np.vstack([Y0.xy[None], forecast.positions])
        lattice = window_lattice(pts, cfg.resolution, cfg.headings, cfg.margin)
    start = lattice.project_state(Y0)
    if start is None:
        raise InvalidArgument("start lies outside the lattice")
    succ = successor_table(lattice, cfg.actions, cfg.dt)
    table = build_value_table(lattice, stage_table(lattice, forecast, grid, cfg), succ)
    total = float(table.values[0][start])
    if math.isinf(total):
        raise NoFeasiblePlan("every action sequence from the start has infinite cost")
    T = table.horizon
    cur = np.ravel_multi_index(start, lattice.shape)
    states, acts, costs = [lattice.state_of(start).as_array()], [], []
    for t in range(T):
        idx = np.unravel_index(cur, lattice.shape)
        a = int(table.policy[t][idx])
        cur = int(succ[a][idx])
        acts.append(cfg.actions[a])
        nxt = np.unravel_index(cur, lattice.shape)
        states.append(lattice.state_of(tuple(int(q) for q in nxt)).as_array())
        costs.append(table.stage[t][nxt])
    return ControlPlan(np.array(acts), np.array(states), np.array(costs), total, table)


def plan_oracle(grid: OccupancyGrid, gt_future: HumanForecast, Y0: RobotState,
                cfg: LatticeConfig = LatticeConfig(), lattice: Lattice | None = None) -> ControlPlan:
    """plan_dp fed the true future of the person."""
    return plan_dp(grid, gt_future, Y0, cfg, lattice)


def enumerate_plans(grid: OccupancyGrid, forecast: HumanForecast, Y0: RobotState, cfg: LatticeConfig,
                    lattice: Lattice):
    """Exhaustive search over all action sequences with the same projection rule.

    Stage costs come from scalar :func:`stage_cost` calls. Sums run from the last
    step backwards, matching the value recursion. Returns (best cost, best action indices).
    """
    start = lattice.project_state(Y0)
    T = len(forecast)
    moves: dict = {}
    stages: dict = {}

    def move(s, a):
        if (s, a) not in moves:
            v, w = cfg.actions[a]
            moves[s, a] = lattice.project_state(step(lattice.state_of(s), ControlInput(v, w), cfg.dt))
        return moves[s, a]

    def stage(s, t):
        if (s, t) not in stages:
            stages[s, t] = stage_cost(lattice.state_of(s), forecast.positions[t], forecast.headings[t], grid,
                                      cfg.lambda_col, cfg.inflation, cfg.view)
        return stages[s, t]

    best, best_seq = math.inf, None
    for seq in itertools.product(range(len(cfg.actions)), repeat=T):
        s, costs = start, []
        for t, a in enumerate(seq):
            s = move(s, a)
            if s is None:
                break
            costs.append(stage(s, t))
        if s is None:
            continue
        total = costs[-1]
        for c in reversed(costs[:-1]):
            total = c + total
        if total < best:
            best, best_seq = total, seq
    return best, best_seq


def evaluate_trace(states: np.ndarray, truth: HumanForecast, grid: OccupancyGrid, cfg: LatticeConfig) -> float:
    """Total stage cost of states[1:] against a (true) human path."""
    total = 0.0
    for t in range(len(truth)):
        Y = RobotState(*states[t + 1])
        total += stage_cost(Y, truth.positions[t], truth.headings[t], grid, cfg.lambda_col, cfg.inflation, cfg.view)
    return total


# constant-velocity EKF -------------------------------------------------------------------


@dataclass(frozen=True)
class EKFState:
    mean: np.ndarray   # x, y, vx, vy
    cov: np.ndarray    # 4 x 4
    heading: float = 0.0

    def __post_init__(self):
        m = np.array(self.mean, dtype=np.float64).reshape(4)
        P = np.array(self.cov, dtype=np.float64).reshape(4, 4)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", P)


def _cv_matrices(delta: float):
    F = np.eye(4)
    F[0, 2] = F[1, 3] = delta
    H = np.zeros((2, 4))
    H[0, 0] = H[1, 1] = 1.0
    return F, H


def _as_cov(q, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q * np.eye(n) if q.ndim == 0 else q.reshape(n, n)


def ekf_init(position, pos_var: float = 0.01, vel_var: float = 1.0, heading: float = 0.0) -> EKFState:
    return EKFState(np.array([position[0], position[1], 0.0, 0.0]),
                    np.diag([pos_var, pos_var, vel_var, vel_var]), heading)


def ekf_predict(state: EKFState, delta: float, Q) -> EKFState:
    F, _ = _cv_matrices(delta)
    P = F @ state.cov @ F.T + _as_cov(Q, 4)
    return EKFState(F @ state.mean, 0.5 * (P + P.T), state.heading)


def ekf_update(state: EKFState, measurement, delta: float, Q, R, heading: float | None = None) -> EKFState:
    """Predict by ``delta`` with a constant-velocity model, then fuse a position measurement.

    Uses the Joseph form so the covariance stays symmetric positive semidefinite.
    """
    pred = ekf_predict(state, delta, Q)
    _, H = _cv_matrices(delta)
    Rm = _as_cov(R, 2)
    S = H @ pred.cov @ H.T + Rm
    if not np.all(np.isfinite(S)) or np.linalg.eigvalsh(S).min() <= 1e-300 or np.linalg.cond(S) > 1e15:
        raise NumericError("innovation covariance is singular")
    K = np.linalg.solve(S, H @ pred.cov).T
    y = np.asarray(measurement, dtype=np.float64) - H @ pred.mean
    mean = pred.mean + K @ y
    A = np.eye(4) - K @ H
    P = A @ pred.cov @ A.T + K @ Rm @ K.T
    hd = state.heading if heading is None else float(heading)
    return EKFState(mean, 0.5 * (P + P.T), hd)


# greedy baseline -------------------------------------------------------------------------


@dataclass(frozen=True)
class GreedyConfig:
    actions: np.ndarray = field(default_factory=default_actions)
    d_ahead: float = 1.5
    inflation: float = 0.3
    k_heading: float = 0.1
    arrive_tol: float = 0.1
    min_speed: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "actions", np.array(self.actions, dtype=np.float64).reshape(-1, 2))


def greedy_target(ekf: EKFState, d_ahead: float, min_speed: float = 1e-6):
    """Point ``d_ahead`` ahead of the estimate along its velocity (or the last heading when still)."""
    vel = ekf.mean[2:]
    speed = float(np.hypot(*vel))
    direction = vel / speed if speed > min_speed else np.array([math.cos(ekf.heading), math.sin(ekf.heading)])
    return ekf.mean[:2] + d_ahead * direction, math.atan2(direction[1], direction[0])


def plan_greedy_ekf(grid: OccupancyGrid, ekf: EKFState, Y0: RobotState, dt: float,
                    cfg: GreedyConfig = GreedyConfig()) -> ControlInput:
    """One-step enumeration: the admissible successor closest to the target wins.

    A small heading term (turning toward the target, or along the estimated
    motion once there) breaks the ties between rotations in place.
    """
    target, motion_dir = greedy_target(ekf, cfg.d_ahead, cfg.min_speed)
    best, best_u = math.inf, ControlInput(0.0, 0.0)
    for v, w in cfg.actions:
        nxt = step(Y0, ControlInput(v, w), dt)
        if is_collision(grid, nxt.xy, cfg.inflation):
            continue
        off = target - nxt.xy
        dist = math.hypot(off[0], off[1])
        desired = motion_dir if dist <= cfg.arrive_tol else math.atan2(off[1], off[0])
        cost = dist + cfg.k_heading * (1.0 - math.cos(nxt.theta - desired))
        if cost < best:
            best, best_u = cost, ControlInput(float(v), float(w))
    return best_u
