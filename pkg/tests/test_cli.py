import json
import time

import pytest

from followahead import cli

TINY_GEN = ["train_scenarios=3", "val_scenarios=1", "test_scenarios=1", "stride=8"]
TINY_TRAIN = ["epochs=2", "pose_epochs=2"]


def run(*args):
    return cli.main([str(a) for a in args])


def manifest(path):
    return (path).read_text()


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run("gen", "--out", out, "--quiet", *TINY_GEN) == 0
    assert run("train", "--out", out, "--quiet", *TINY_TRAIN) == 0
    return out


class TestConfig:
    def test_defaults_and_overrides(self, tmp_path):
        cfg_file = tmp_path / "gen.cfg"
        cfg_file.write_text("# comment\nmap_size = 16\n\nstride = 2  # trailing\n")
        cfg = cli.resolve_config("gen", cli.parse_config_text(cfg_file.read_text()), ["stride=5"])
        assert cfg["map_size"] == 16 and cfg["stride"] == 5 and cfg["N"] == 15

    def test_every_key_has_a_default(self):
        for name, schema in cli.SCHEMAS.items():
            cfg = cli.resolve_config(name, {}, [])
            assert set(cfg) == set(schema)

    def test_round_trip_through_text(self):
        cfg = cli.resolve_config("train", {}, ["lambdas=1,0,2,0.5", "resume=yes"])
        again = cli.resolve_config("train", cli.parse_config_text(cli.format_config(cfg)), [])
        assert again == cfg

    def test_unknown_key_and_bad_value_exit_2(self, tmp_path, capsys):
        assert run("gen", "--out", tmp_path, "bogus=1") == 2
        assert run("gen", "--out", tmp_path, "seed=abc") == 2
        assert run("gen", "--out", tmp_path, "noequals") == 2
        bad = tmp_path / "bad.cfg"
        bad.write_text("just words\n")
        assert run("gen", "--out", tmp_path, "--config", bad) == 2
        assert run("gen", "--out", tmp_path, "--config", tmp_path / "missing.cfg") == 2
        assert "bogus" in capsys.readouterr().err

    def test_usage_errors(self, capsys):
        assert run("--help") == 0
        assert run("frobnicate") == 2
        assert run() == 2
        assert run("gen", "--workers", "0") == 2
        capsys.readouterr()

    def test_help_lists_keys(self, capsys):
        assert run("train", "--help") == 0
        text = capsys.readouterr().out
        assert all(k in text for k in cli.SCHEMAS["train"])


class TestGen:
    def test_nonzero_samples_and_manifest(self, trained):
        lines = manifest(trained / "manifest-gen.txt").splitlines()
        names = [line.split("  ")[1] for line in lines]
        assert {"data/train.jsonl", "data/val.jsonl", "data/test.jsonl", "data/gen.cfg"} <= set(names)
        assert any(n.startswith("maps/scenario_") for n in names)
        head = json.loads((trained / "data" / "train.jsonl").read_text().splitlines()[0])
        assert head["count"] > 0

    def test_same_seed_same_hashes(self, tmp_path, trained):
        assert run("gen", "--out", tmp_path, "--quiet", *TINY_GEN) == 0
        assert manifest(tmp_path / "manifest-gen.txt") == manifest(trained / "manifest-gen.txt")

    def test_different_seed_differs(self, tmp_path, trained):
        assert run("gen", "--out", tmp_path, "--quiet", "seed=5", *TINY_GEN) == 0
        assert manifest(tmp_path / "manifest-gen.txt") != manifest(trained / "manifest-gen.txt")

    def test_bad_path_exit_2(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert run("gen", "--out", blocker / "sub", "--quiet", *TINY_GEN) == 2

    def test_env_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "envout"))
        assert run("gen", "--quiet", *TINY_GEN) == 0
        assert (tmp_path / "envout" / "manifest-gen.txt").exists()

    def test_workers_do_not_change_output(self, tmp_path, trained):
        assert run("gen", "--out", tmp_path, "--quiet", "--workers", "2", *TINY_GEN) == 0
        assert manifest(tmp_path / "manifest-gen.txt") == manifest(trained / "manifest-gen.txt")

    def test_bad_kind(self, tmp_path):
        assert run("gen", "--out", tmp_path, "kinds=maze") == 2


class TestTrain:
    def test_missing_dataset_exit_2(self, tmp_path):
        assert run("train", "--out", tmp_path, "--quiet") == 2

    def test_checkpoint_files(self, trained):
        ck = trained / "ckpt"
        for name in ("pathnet", "posenet"):
            assert (ck / f"{name}.fawt").read_bytes()[:4] == b"FAWT"
            side = cli.parse_config_text((ck / f"{name}.cfg").read_text())
            assert side["epochs_done"] == "2"
        recs = [json.loads(x) for x in (trained / "train_report.jsonl").read_text().splitlines()]
        assert [r["model"] for r in recs] == ["pathnet"] * 2 + ["posenet"] * 2
        assert {"loss_traj", "loss_final", "loss_map", "loss_col", "total"} <= set(recs[0])

    def test_smoke_ten_epochs_under_two_minutes(self, tmp_path, trained):
        t0 = time.perf_counter()
        assert run("train", "--out", tmp_path, "--quiet", f"data={trained}", "epochs=10", "pose_epochs=10") == 0
        assert time.perf_counter() - t0 < 120

    def test_resume_reproduces_uninterrupted(self, tmp_path, trained):
        a, b = tmp_path / "a", tmp_path / "b"
        common = ["--quiet", f"data={trained}", "pose_epochs=1"]
        assert run("train", "--out", a, *common, "epochs=3") == 0
        assert run("train", "--out", b, *common, "epochs=2") == 0
        assert run("train", "--out", b, *common, "epochs=3", "resume=true") == 0
        assert manifest(a / "manifest-train.txt") == manifest(b / "manifest-train.txt")

    def test_resume_refuses_changed_lr(self, tmp_path, trained):
        common = ["--quiet", f"data={trained}", "pose_epochs=1"]
        assert run("train", "--out", tmp_path, *common, "epochs=1") == 0
        assert run("train", "--out", tmp_path, *common, "epochs=2", "resume=true", "lr=0.5") == 2

    def test_lr_override_in_report(self, tmp_path, trained):
        assert run("train", "--out", tmp_path, "--quiet", f"data={trained}", "epochs=1", "pose_epochs=1",
                   "lr=0.0025", "pose_lr=0.0005") == 0
        recs = [json.loads(x) for x in (tmp_path / "train_report.jsonl").read_text().splitlines()]
        assert [r["lr"] for r in recs] == [0.0025, 0.0005]

    def test_bad_visibility(self, tmp_path, trained):
        assert run("train", "--out", tmp_path, f"data={trained}", "visibility=foggy") == 2


class TestEval:
    def test_oracle_is_all_zero(self, tmp_path, trained):
        assert run("eval", "--out", tmp_path, "--quiet", f"data={trained}", "predictor=oracle") == 0
        for line in (tmp_path / "eval.jsonl").read_text().splitlines():
            rec = json.loads(line)
            assert rec["path"] == [0.0] * 4 and rec["pose"] == [0.0] * 4

    def test_table_shape(self, tmp_path, trained):
        assert run("eval", "--out", tmp_path, "--quiet", f"data={trained}", f"ckpt={trained}") == 0
        text = (tmp_path / "eval.txt").read_text()
        rows = [line.split() for line in text.splitlines() if line.strip() and "error" not in line]
        assert all(len(r) == 4 + 2 for r in rows)
        variants = [json.loads(x)["variant"] for x in (tmp_path / "eval.jsonl").read_text().splitlines()]
        assert variants == ["full", "partial", "unknown"]

    def test_horizon_beyond_T_exit_2(self, tmp_path, trained):
        assert run("eval", "--out", tmp_path, f"data={trained}", "predictor=oracle", "horizons=1,3.2") == 2

    def test_missing_checkpoint_exit_2(self, tmp_path, trained):
        assert run("eval", "--out", tmp_path, f"data={trained}") == 2


class TestRollout:
    ARGS = ["scenarios=2", "seed_base=1000"]

    def test_three_rows_and_determinism(self, tmp_path, trained):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("rollout", "--out", a, "--quiet", f"ckpt={trained}", *self.ARGS) == 0
        assert run("rollout", "--out", b, "--quiet", f"ckpt={trained}", "--workers", "2", *self.ARGS) == 0
        table = (a / "rollout_summary.txt").read_text().splitlines()
        assert [line.split()[0] for line in table[1:]] == ["greedy-EKF", "DP+pred", "DP+gt"]
        assert manifest(a / "manifest-rollout.txt") == manifest(b / "manifest-rollout.txt")
        means = [json.loads(x) for x in (a / "rollout_summary.jsonl").read_text().splitlines() if '"mean"' in x]
        assert len(means) == 3 and all(0.0 <= m["tracking_time"] <= 1.0 for m in means)

    def test_predictor_needs_checkpoint(self, tmp_path):
        assert run("rollout", "--out", tmp_path, *self.ARGS) == 2
        assert run("rollout", "--out", tmp_path, "--quiet", "controllers=greedy-EKF", "scenarios=1") == 0

    def test_unknown_controller(self, tmp_path):
        assert run("rollout", "--out", tmp_path, "controllers=MPC") == 2


def test_gradcheck_passes(capsys):
    assert run("gradcheck") == 0
    out = capsys.readouterr().out
    assert "pathnet_loss" in out and "FAIL" not in out
