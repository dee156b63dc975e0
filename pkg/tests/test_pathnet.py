import math

import numpy as np
import pytest

from followahead import nnkernel as nk
from followahead import pathnet as pn
from followahead.data import WindowDataset
from followahead.encoding import Trajectory2D, encode_trajectory_map
from followahead.errors import InvalidArgument
from followahead.geometry import ActorFrame
from followahead.gridworld import OccupancyGrid

import oracles


def toy_dataset(n=4, H=16, N=3, T=3, res=0.125, seed=0, J=13):
    """Straight walks along +x in the actor frame with a wall strip at the top."""
    rng = np.random.default_rng(seed)
    occ = np.zeros((n, H, H))
    occ[:, -2:, :] = 1.0
    speed = rng.uniform(0.1, 0.2, size=n)
    lat = rng.uniform(-0.05, 0.05, size=n)
    k_hist = np.arange(-N + 1, 1)
    k_fut = np.arange(1, T + 1)
    p_hist = np.stack([np.stack([speed[i] * k_hist, lat[i] * k_hist], axis=1) for i in range(n)])
    p_fut = np.stack([np.stack([speed[i] * k_fut, lat[i] * k_fut], axis=1) for i in range(n)])
    return WindowDataset(occ, p_hist, p_fut, np.zeros((n, N, J, 3)), np.zeros((n, T, J, 3)), np.full(n, 0.9),
                         np.zeros((n, 3)), np.arange(n), res)


def toy_config(H=16, N=3, T=3, **kw):
    return pn.PathNetConfig(H=H, W=H, N=N, T=T, channels=(4, 4, 8), bottleneck=16, **kw)


class TestLossesAgainstOracle:
    def test_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            T = int(rng.integers(1, 5))
            p_hat, p_gt = rng.normal(size=(T, 2)), rng.normal(size=(T, 2))
            m_hat = rng.uniform(0, 1, size=(T, 8, 8))
            m_gt = (rng.random((T, 8, 8)) < 0.1).astype(float)
            occ = rng.choice([0.0, 0.5, 1.0], size=(8, 8))
            assert pn.loss_traj(p_hat, p_gt).item() == pytest.approx(oracles.traj(p_hat, p_gt), abs=1e-9)
            assert pn.loss_final(p_hat, p_gt).item() == pytest.approx(oracles.final(p_hat, p_gt), abs=1e-9)
            assert pn.loss_map(m_hat, m_gt, 40).item() == pytest.approx(oracles.bce_map(m_hat, m_gt, 40), abs=1e-9)
            assert pn.loss_col(m_hat, occ).item() == pytest.approx(oracles.col(m_hat, occ), abs=1e-9)

    def test_logit_form_matches_probability_form(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(scale=3, size=(2, 3, 8, 8))
        m_gt = (rng.random((2, 3, 8, 8)) < 0.2).astype(float)
        a = pn.loss_map_logits(logits, m_gt, 40).item()
        b = pn.loss_map(1 / (1 + np.exp(-logits)), m_gt, 40).item()
        assert a == pytest.approx(b, rel=1e-10)


class TestLossExamples:
    def test_traj_and_final(self):
        gt = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]])
        assert pn.loss_traj(gt, gt).item() == 0.0
        off = gt + np.array([0.6, 0.8])
        assert pn.loss_traj(off, gt).item() == pytest.approx(1.0)
        assert pn.loss_final(off, gt).item() == pytest.approx(1.0)
        two = np.array([[0.0, 0.0], [0.0, 2.0]])
        assert pn.loss_traj(two, np.zeros((2, 2))).item() == pytest.approx(1.0)
        assert pn.loss_final(two, np.zeros((2, 2))).item() == pytest.approx(2.0)

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgument):
            pn.loss_traj(np.zeros((3, 2)), np.zeros((2, 2)))
        with pytest.raises(InvalidArgument):
            pn.loss_final(np.zeros((3, 2)), np.zeros((2, 2)))
        with pytest.raises(InvalidArgument):
            pn.loss_map(np.zeros((1, 2, 2)), np.zeros((1, 3, 3)))

    def test_map_closed_form(self):
        assert pn.loss_map(np.full((1, 1, 1), 0.5), np.ones((1, 1, 1)), 40).item() == pytest.approx(27.7259, abs=1e-4)
        assert pn.loss_map(np.full((1, 1, 1), 0.5), np.zeros((1, 1, 1)), 40).item() == pytest.approx(0.6931, abs=1e-4)

    def test_map_exact_prediction_is_clamped_near_zero(self):
        gt = (np.random.default_rng(2).random((2, 4, 4)) < 0.3).astype(float)
        assert 0.0 <= pn.loss_map(gt, gt, 40).item() <= 40 * 1e-6

    def test_col(self):
        m = np.random.default_rng(3).random((2, 5, 5))
        assert pn.loss_col(m, np.zeros((5, 5))).item() == 0.0
        occ = np.zeros((4, 4))
        occ[1, 2] = 1.0
        m1 = np.zeros((1, 4, 4))
        m1[0, 1, 2] = 0.7
        assert pn.loss_col(m1, occ).item() == pytest.approx(0.7)
        m2 = np.zeros((1, 4, 4))
        m2[0, 3, 3] = 0.9
        assert pn.loss_col(m2, occ).item() == 0.0

    def test_col_counts_unknown_at_half(self):
        m = np.ones((1, 2, 2))
        assert pn.loss_col(m, np.full((2, 2), 0.5)).item() == pytest.approx(2.0)

    def test_total(self):
        assert pn.loss_total((0, 0, 0, 0)) == 0
        assert pn.loss_total((1, 1, 1, 1)) == 5
        assert pn.loss_total((3, 4, 5, 6), (0, 0, 0, 0)) == 0
        with pytest.raises(InvalidArgument):
            pn.loss_total((1, 1, 1))

    def test_all_losses_non_negative(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            m = rng.random((3, 6, 6))
            assert pn.loss_map(m, (rng.random((3, 6, 6)) < 0.1) * 1.0).item() >= 0
            assert pn.loss_col(m, rng.choice([0.0, 0.5, 1.0], size=(6, 6))).item() >= 0


class TestModel:
    def test_config_validation(self):
        with pytest.raises(InvalidArgument):
            pn.PathNetConfig(H=20)
        with pytest.raises(InvalidArgument):
            pn.PathNetConfig(lambdas=(1, -1, 2, 1))
        with pytest.raises(InvalidArgument):
            pn.PathNetConfig(w=0.0)

    def test_default_output_shapes(self):
        cfg = pn.PathNetConfig()
        m = pn.PathNetModel(cfg, 0)
        with nk.no_grad():
            m_hat, p_hat = m(nk.Tensor(np.zeros((2, cfg.N + 1, 40, 40))), nk.Tensor(np.zeros((2, cfg.N, 2))))
        assert m_hat.shape == (2, cfg.T, 40, 40) and p_hat.shape == (2, cfg.T, 2)
        assert np.all((m_hat.data > 0) & (m_hat.data < 1))

    def test_zero_head_gives_half_maps_and_center(self):
        cfg = toy_config()
        model = pn.PathNetModel(cfg, 0)
        model.head.weight.data[:] = 0.0
        model.head.bias.data[:] = 0.0
        frame = ActorFrame((2.0, -1.0), 0.4)
        local = OccupancyGrid(np.zeros((16, 16)), cfg.resolution, cfg.origin, frame)
        hist = Trajectory2D(np.zeros((cfg.N, 2)), 0.2)
        m_hist = encode_trajectory_map(Trajectory2D(frame.to_world(hist.points), 0.2), cfg.georef(frame))
        m_hat, p_hat = pn.forward(model, local, m_hist, hist)
        assert np.all(m_hat.values == 0.5)
        # the soft-argmax of a constant map is the mean pixel, i.e. the raster's center point
        center = frame.to_world(np.array(cfg.origin) + cfg.resolution * np.array([7.5, 7.5]))
        assert np.allclose(p_hat.points, center, atol=1e-12)

    def test_forward_is_deterministic(self):
        cfg = toy_config()
        ds = toy_dataset()
        batch = pn.make_batch(ds, [0, 1], cfg)
        a = pn.predict_batch(pn.PathNetModel(cfg, 3), batch["maps_in"], batch["p_hist"])
        b = pn.predict_batch(pn.PathNetModel(cfg, 3), batch["maps_in"], batch["p_hist"])
        assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()

    def test_forward_shape_mismatch(self):
        cfg = toy_config()
        model = pn.PathNetModel(cfg, 0)
        local = OccupancyGrid(np.zeros((8, 8)), cfg.resolution)
        with pytest.raises(InvalidArgument):
            pn.forward(model, local, encode_trajectory_map(Trajectory2D(np.zeros((3, 2))), cfg.georef()),
                       Trajectory2D(np.zeros((3, 2))))

    def test_make_batch_rejects_mismatched_dataset(self):
        with pytest.raises(InvalidArgument):
            pn.make_batch(toy_dataset(H=16), [0], toy_config(H=24))


class TestGradients:
    def test_full_loss_gradient(self):
        cfg = pn.PathNetConfig(H=16, W=16, N=3, T=3, channels=(4, 4, 8), bottleneck=16)
        model = pn.PathNetModel(cfg, 1)
        batch = pn.make_batch(toy_dataset(n=2), [0, 1], cfg)
        err = nk.gradient_check(lambda: pn.pathnet_losses(model, batch)["total"], model.parameters(),
                                max_per_param=6, rng=np.random.default_rng(0))
        assert err <= 1e-4

    def test_probability_map_loss_gradient(self):
        rng = np.random.default_rng(2)
        logits = nk.Tensor(rng.normal(size=(2, 4, 4)), requires_grad=True)
        gt = (rng.random((2, 4, 4)) < 0.3).astype(float)
        occ = rng.choice([0.0, 0.5, 1.0], size=(4, 4))

        def f():
            m = nk.sigmoid(logits)
            return pn.loss_map(m, gt) + pn.loss_col(m, occ)

        assert nk.gradient_check(f, [logits]) <= 1e-4


class TestTraining:
    def test_single_batch_overfit(self):
        cfg = toy_config(H=16, N=3, T=3)
        model = pn.PathNetModel(cfg, 0)
        batch = pn.make_batch(toy_dataset(n=1), [0], cfg)
        opt = nk.Adam(model.parameters(), lr=1e-3)
        first = None
        for _ in range(500):
            model.zero_grad()
            parts = pn.pathnet_losses(model, batch)
            first = parts["total"].item() if first is None else first
            nk.backward(parts["total"])
            opt.step()
        m_hat, p_hat = pn.predict_batch(model, batch["maps_in"], batch["p_hist"])
        final = pn.pathnet_losses(model, batch)["total"].item()
        assert final <= 0.2 * first
        err_px = np.linalg.norm(p_hat[0] - batch["p_fut"][0], axis=-1) / cfg.resolution
        assert err_px.max() <= 1.0

    def test_one_epoch_on_one_sample_reduces_loss(self):
        cfg = toy_config()
        ds = toy_dataset(n=1)
        model = pn.PathNetModel(cfg, 0)
        before = pn.evaluate(model, ds)["total"]
        pn.train(model, ds, pn.TrainConfig(epochs=1, batch_size=1, lr=1e-3))
        assert pn.evaluate(model, ds)["total"] < before

    def test_seeded_runs_identical(self):
        cfg = toy_config()
        ds = toy_dataset(n=5)
        tc = pn.TrainConfig(epochs=3, batch_size=2, seed=7)
        a = pn.train(pn.PathNetModel(cfg, 1), ds, tc).records
        b = pn.train(pn.PathNetModel(cfg, 1), ds, tc).records
        assert a == b

    def test_zero_lr_keeps_loss_constant(self):
        cfg = toy_config()
        ds = toy_dataset(n=3)
        rep = pn.train(pn.PathNetModel(cfg, 1), ds, pn.TrainConfig(epochs=3, batch_size=8, lr=0.0))
        curve = rep.curve("total")
        assert max(curve) - min(curve) <= 1e-12 * abs(curve[0])

    def test_empty_dataset(self):
        cfg = toy_config()
        with pytest.raises(InvalidArgument):
            pn.train(pn.PathNetModel(cfg, 0), toy_dataset(n=4).subset([]), pn.TrainConfig(epochs=1))

    def test_report_keeps_best_state(self):
        cfg = toy_config()
        ds = toy_dataset(n=3)
        model = pn.PathNetModel(cfg, 0)
        rep = pn.train(model, ds, pn.TrainConfig(epochs=4, batch_size=3))
        vals = [r["val_loss_traj"] for r in rep.records]
        assert rep.best_epoch == int(np.argmin(vals)) and rep.best_val == min(vals)
        assert set(rep.records[0]) >= {"epoch", "loss_traj", "loss_final", "loss_map", "loss_col", "total"}

    def test_resume_matches_uninterrupted(self):
        cfg = toy_config()
        ds = toy_dataset(n=4)
        tc = pn.TrainConfig(epochs=2, batch_size=2, seed=3)
        full = pn.PathNetModel(cfg, 0)
        ref = pn.train(full, ds, pn.TrainConfig(epochs=3, batch_size=2, seed=3)).records
        part = pn.PathNetModel(cfg, 0)
        opt = nk.Adam(part.parameters(), lr=tc.lr)
        pn.train(part, ds, tc, optimizer=opt)
        state, ostate = part.state_dict(), opt.state()
        resumed = pn.PathNetModel(cfg, 99)
        resumed.load_state_dict(state)
        opt2 = nk.Adam(resumed.parameters(), lr=tc.lr)
        opt2.load_state(ostate)
        nxt = pn.train(resumed, ds, pn.TrainConfig(epochs=1, batch_size=2, seed=3), optimizer=opt2, start_epoch=2)
        assert nxt.records[0] == ref[2]


def test_soft_argmax_tensor_matches_oracle():
    cfg = toy_config()
    rng = np.random.default_rng(5)
    m = rng.random((2, 16, 16))
    out = pn.soft_argmax_t(nk.Tensor(m), cfg).data
    for t in range(2):
        u, v = oracles.soft_argmax(m[t].tolist(), cfg.beta)
        expect = np.array(cfg.origin) + cfg.resolution * np.array([u, v])
        assert np.allclose(out[t], expect, atol=1e-12)
    assert math.isfinite(out.sum())
