import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from followahead.encoding import HIP, encode_pixels, heading_from_pose
from followahead.errors import InfeasibleStart, InvalidArgument
from followahead.geometry import wrap_angle
from followahead.gridworld import empty_grid, is_collision
from followahead.pathnet import loss_col
from followahead.sim.dataset import apply_visibility, split_by_scenario, synthesize_dataset, window_count
from followahead.sim.maps import KINDS, MapParams, free_band_rows, generate_map, is_connected
from followahead.sim.metrics import eval_followahead, eval_prediction, format_table, view_sample
from followahead.sim.rollout import (DPController, GreedyEKFController, GroundTruthPredictor, NoPredictor,
                                     RolloutConfig, rollout, summarize)
from followahead.sim.walker import STYLES, Scenario, body_pose, frame_times, make_scenario, skeleton, walk


def static_scenario(duration=8.0):
    world = generate_map("corridor", MapParams(width=2.4, length=9.0))
    return Scenario(world, world.routes[0], "walk", 0.0, 11, duration)


class TestMaps:
    @pytest.mark.parametrize("r", [0.1, 0.15, 0.25])
    def test_corridor_band_width(self, r):
        wm = generate_map("corridor", MapParams(width=2.0, length=10.0, resolution=r))
        pad = int(math.ceil(0.3 / r - 1e-9))
        expect = int(math.ceil(2.0 / r - 1e-9))
        for col in range(pad, wm.grid.width - pad):
            assert free_band_rows(wm.grid, col) == expect

    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic_and_connected(self, kind):
        for seed in range(4):
            a = generate_map(kind, seed=seed)
            b = generate_map(kind, seed=seed)
            assert np.array_equal(a.grid.cells, b.grid.cells)
            assert is_connected(a.grid)

    def test_seeds_vary_geometry(self):
        shapes = {generate_map("T-junction", seed=s).grid.shape for s in range(6)}
        assert len(shapes) > 1

    def test_open_room_interior_free(self):
        wm = generate_map("open-room", MapParams(width=5.0, length=8.0))
        pad = 3
        assert np.all(wm.grid.cells[pad:-pad, pad:-pad] == 0.0)
        assert np.all(wm.grid.cells[:pad] == 1.0) and np.all(wm.grid.cells[:, -pad:] == 1.0)

    @pytest.mark.parametrize("kind", KINDS)
    def test_routes_in_free_space(self, kind):
        for seed in range(3):
            wm = generate_map(kind, seed=seed)
            for route in wm.routes:
                assert not any(is_collision(wm.grid, p, 0.3) for p in route)

    def test_bad_params(self):
        with pytest.raises(InvalidArgument):
            generate_map("corridor", MapParams(width=0.6))
        with pytest.raises(InvalidArgument):
            generate_map("maze")
        with pytest.raises(InvalidArgument):
            generate_map("corridor", MapParams(resolution=0.0))


class TestWalker:
    def test_start_at_first_waypoint(self):
        sc = make_scenario("L-turn", 3)
        joints, _ = walk(sc, 0.0)
        assert np.allclose(joints[HIP, :2], sc.waypoints[0], atol=1e-12)

    def test_straight_segment_speed(self):
        wm = generate_map("corridor", MapParams(width=2.0, length=8.0))
        sc = Scenario(wm, wm.routes[0], "walk", 0.55, 0, 6.0)
        dt = 0.1
        hips = np.array([walk(sc, k * dt)[0][HIP, :2] for k in range(40)])
        speed = np.hypot(*np.diff(hips, axis=0).T) / dt
        assert np.allclose(speed, 0.55, atol=1e-9)

    def test_crab_heading_perpendicular_to_velocity(self):
        for seed in range(3):
            sc = make_scenario("L-turn", seed, style="crab")
            for t in np.linspace(0.2, sc.duration - 1.0, 15):
                joints, heading = walk(sc, float(t))
                nxt, _ = walk(sc, float(t) + 1e-4)
                vel = nxt[HIP, :2] - joints[HIP, :2]
                if np.linalg.norm(vel) < 1e-9:
                    continue
                vel /= np.linalg.norm(vel)
                assert abs(vel @ [math.cos(heading), math.sin(heading)]) < 1e-3

    def test_body_heading_matches_shoulder_line(self):
        for h in np.linspace(-3, 3, 7):
            assert abs(wrap_angle(heading_from_pose(body_pose(np.zeros(3), h, h, 0.3)) - h)) < 1e-12

    @pytest.mark.parametrize("style", STYLES)
    def test_joints_near_hip_and_hip_on_path(self, style):
        sc = make_scenario("T-junction", 5, style=style)
        for t in np.linspace(0, sc.duration, 25):
            joints, _ = walk(sc, float(t))
            assert np.all(np.linalg.norm(joints - joints[HIP], axis=1) <= 1.0)
            pos, _ = sc.path.at(sc.distance_at(float(t)))
            assert np.allclose(joints[HIP, :2], pos)

    def test_walker_never_enters_occupied_cells(self):
        for seed in range(12):
            sc = make_scenario(KINDS[seed % 3], seed)
            for t in frame_times(sc.duration, 5.0):
                hip = walk(sc, float(t))[0][HIP, :2]
                assert not is_collision(sc.grid, hip)

    def test_deterministic(self):
        a = skeleton(make_scenario("L-turn", 4), np.arange(20) * 0.2).frames
        b = skeleton(make_scenario("L-turn", 4), np.arange(20) * 0.2).frames
        assert a.tobytes() == b.tobytes()

    def test_time_out_of_range(self):
        sc = make_scenario("corridor", 0)
        with pytest.raises(InvalidArgument):
            walk(sc, -0.1)
        with pytest.raises(InvalidArgument):
            walk(sc, sc.duration + 1.0)

    def test_scenario_validation(self):
        wm = generate_map("corridor", MapParams(width=2.0, length=8.0))
        with pytest.raises(InvalidArgument):
            Scenario(wm, wm.routes[0], "walk", -0.1, 0, 5.0)
        with pytest.raises(InvalidArgument):
            Scenario(wm, wm.routes[0], "moonwalk", 0.5, 0, 5.0)
        with pytest.raises(InvalidArgument):
            Scenario(wm, np.array([[0.5, 1.0], [0.5, -5.0]]), "walk", 0.5, 0, 5.0)

    def test_variable_speed_never_reverses(self):
        sc = make_scenario("corridor", 2, style="variable-speed")
        s = [sc.distance_at(t) for t in np.linspace(0, sc.duration, 200)]
        assert np.all(np.diff(s) >= 0)
        assert s[-1] == pytest.approx(sc.path.length)


class TestDataset:
    def test_boundary_duration_gives_one_window(self):
        N, T, rate = 4, 3, 5.0
        sc = make_scenario("corridor", 1, duration=(N + T) / rate)
        assert len(synthesize_dataset([sc], N, T, rate)) == 1

    def test_window_count_matches_formula(self):
        scs = [make_scenario(k, s) for k, s in (("L-turn", 0), ("T-junction", 1), ("corridor", 2))]
        ds = synthesize_dataset(scs, 5, 5, 5.0)
        for sc in scs:
            expect = math.floor(sc.duration * 5.0 + 1e-9) - 10 + 1
            assert np.sum(ds.scenario == sc.seed) == expect == window_count(sc.duration, 5.0, 5, 5)

    def test_short_scenario_contributes_nothing(self):
        sc = make_scenario("corridor", 1, duration=1.0)
        ds = synthesize_dataset([sc], 5, 5, 5.0)
        assert len(ds) == 0 and ds.map_size == (40, 40)

    def test_ground_truth_futures_collision_free(self):
        scs = [make_scenario(k, s) for k, s in (("L-turn", 3), ("T-junction", 4))]
        ds = synthesize_dataset(scs, 15, 15, 5.0, stride=3)
        assert len(ds) > 0
        uv = (ds.p_fut + 2.5) / ds.resolution
        m = encode_pixels(uv, 40, 40, "binary")
        occupied = np.where(ds.occ > 0.5, 1.0, 0.0)
        assert loss_col(m, occupied).item() == 0.0

    def test_local_frame_conventions(self):
        ds = synthesize_dataset([make_scenario("L-turn", 6)], 15, 15, 5.0)
        # the last observed hip is the actor-frame origin
        assert np.allclose(ds.p_hist[:, -1], 0.0, atol=1e-12)
        assert np.all(ds.pose_hist[:, :, HIP] == 0.0)

    def test_split_keeps_scenarios_together(self):
        scs = [make_scenario("L-turn", s) for s in range(8)]
        ds = synthesize_dataset(scs, 5, 5, 5.0, stride=4)
        parts = split_by_scenario(ds)
        sets = [set(np.unique(p.scenario)) for p in parts]
        assert sum(len(p) for p in parts) == len(ds)
        assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])

    def test_visibility_modes(self):
        ds = synthesize_dataset([make_scenario("T-junction", 2)], 5, 5, 5.0, stride=5)
        assert apply_visibility(ds, "full") is ds
        assert np.all(apply_visibility(ds, "unknown").occ == 0.5)
        part = apply_visibility(ds, "partial").occ
        known = part != 0.5
        assert np.array_equal(part[known], ds.occ[known])
        with pytest.raises(InvalidArgument):
            apply_visibility(ds, "blurred")


class TestPredictionMetrics:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        p = rng.normal(size=(4, 15, 2))
        x = rng.normal(size=(4, 15, 13, 3))
        out = eval_prediction(p, p, x, x)
        assert out["path"] == [0.0] * 4 and out["pose"] == [0.0] * 4 and out["path_mean"] == 0.0

    def test_uniform_hip_offset(self):
        rng = np.random.default_rng(1)
        p = rng.normal(size=(3, 15, 2))
        x = rng.normal(size=(3, 15, 13, 3))
        off = 0.1 * np.array([math.cos(0.7), math.sin(0.7)])
        shifted = x.copy()
        shifted[..., :2] += off
        out = eval_prediction(p + off, p, shifted, x)
        assert np.allclose(out["path"], 100.0) and np.allclose(out["pose"], 0.0, atol=1e-9)

    def test_horizon_indexing(self):
        p = np.zeros((1, 15, 2))
        g = np.zeros((1, 15, 2))
        g[0, :, 0] = np.arange(1, 16) * 0.001  # error at step k is k mm
        assert eval_prediction(p, g)["path"] == pytest.approx([5.0, 8.0, 10.0, 15.0])

    def test_horizon_beyond_T(self):
        with pytest.raises(InvalidArgument):
            eval_prediction(np.zeros((1, 10, 2)), np.zeros((1, 10, 2)), horizons=(3.0,))

    def test_table_layout(self):
        res = eval_prediction(np.zeros((1, 15, 2)), np.ones((1, 15, 2)))
        lines = format_table({"full": res, "unknown": res}).splitlines()
        assert len(lines) == 3
        assert all(len(line.split()) == 4 + 2 for line in lines)


class TestFollowMetrics:
    def setup_method(self):
        self.grid = empty_grid(100, 100, 0.1, (-5.0, -5.0))

    def test_dead_center_at_reference_distance(self):
        # robot 1.5 m ahead of the person, facing away, camera looking back at them
        robots = [[1.5, 0.0, 0.0]] * 5
        out = eval_followahead(robots, [[0.0, 0.0]] * 5, [0.0] * 5, self.grid)
        assert out == {"area_proxy": 1.0, "tracking_time": 1.0, "distance": 0.0}

    def test_never_visible(self):
        robots = [[1.5, 0.0, math.pi]] * 3
        out = eval_followahead(robots, [[0.0, 0.0]] * 3, [0.0] * 3, self.grid)
        assert out == {"area_proxy": 0.0, "tracking_time": 0.0, "distance": 1.0}

    def test_range_and_occlusion(self):
        assert not view_sample(self.grid, (4.0, 0.0, 0.0), (-2.5, 0.0), 0.0)[0]
        cells = self.grid.cells.copy()
        cells[40:60, 57] = 1.0
        assert not view_sample(self.grid.with_cells(cells), (1.5, 0.0, 0.0), (0.0, 0.0), 0.0)[0]

    def test_empty_log(self):
        with pytest.raises(InvalidArgument):
            eval_followahead(np.zeros((0, 3)), [], [], self.grid)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.floats(-4, 4), st.floats(-4, 4), st.floats(-4, 4), st.floats(-4, 4)),
                    min_size=1, max_size=6))
    def test_metrics_in_unit_interval(self, rows):
        robots = [[a, b, c] for a, b, c, _ in rows]
        humans = [[0.0, 0.0]] * len(rows)
        out = eval_followahead(robots, humans, [d for *_, d in rows], self.grid)
        assert all(0.0 <= v <= 1.0 for v in out.values())


class TestRollout:
    def test_static_walker_settles_in_front(self):
        sc = static_scenario()
        cfg = RolloutConfig()
        log = rollout(sc, GroundTruthPredictor(), DPController(cfg.lattice), cfg)
        hip = log.human[0][HIP, :2]
        heading = log.heading[0]
        for k, (x, y, _) in enumerate(log.robot):
            d = math.hypot(x - hip[0], y - hip[1])
            gamma = wrap_angle(math.atan2(y - hip[1], x - hip[0]) - heading)
            assert d <= 2.0 and abs(gamma) < math.radians(45), k
        assert all(log.tracked)

    def test_zero_duration_gives_empty_log(self):
        sc = static_scenario(duration=0.0)
        log = rollout(sc, GroundTruthPredictor(), DPController(RolloutConfig().lattice))
        assert len(log) == 0

    def test_uniform_monotone_timestamps(self):
        sc = make_scenario("L-turn", 1, duration=5.0)
        log = rollout(sc, NoPredictor(), GreedyEKFController())
        steps = np.diff(log.times)
        assert np.all(steps > 0) and np.allclose(steps, 0.2)
        assert len(log) == len(frame_times(5.0, 5.0)) - 14

    def test_same_seed_byte_identical(self):
        cfg = RolloutConfig(noise_std=0.02, seed=3)
        sc = make_scenario("T-junction", 2, duration=5.0)
        a = rollout(sc, GroundTruthPredictor(), DPController(cfg.lattice), cfg).dumps()
        b = rollout(make_scenario("T-junction", 2, duration=5.0), GroundTruthPredictor(),
                    DPController(cfg.lattice), cfg).dumps()
        assert a == b
        # observation noise only reaches controllers that read the history
        e1 = rollout(sc, NoPredictor(), GreedyEKFController(), cfg).dumps()
        assert e1 == rollout(sc, NoPredictor(), GreedyEKFController(), cfg).dumps()
        assert e1 != rollout(sc, NoPredictor(), GreedyEKFController(), RolloutConfig(noise_std=0.02, seed=4)).dumps()

    def test_infeasible_start(self):
        sc = static_scenario()
        with pytest.raises(InfeasibleStart):
            rollout(sc, GroundTruthPredictor(), DPController(RolloutConfig().lattice), RolloutConfig(start_ahead=20.0))

    def test_log_header_and_summary(self):
        sc = make_scenario("L-turn", 1, duration=4.0)
        log = rollout(sc, NoPredictor(), GreedyEKFController(), name="greedy-EKF")
        lines = log.dumps().splitlines()
        assert lines[0].startswith('{"format": "followahead-rollout", "version": 1')
        assert len(lines) == len(log) + 1
        s = summarize(log, sc.grid)
        assert set(s) == {"area_proxy", "tracking_time", "distance"}
