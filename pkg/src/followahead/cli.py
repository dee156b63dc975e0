"""Command-line front end: dataset generation, training, evaluation, rollouts and gradient checks.

Every command takes an optional flat ``key = value`` config file and
``key=value`` overrides after the command name; overrides win. Unknown keys
are rejected. Outputs land under ``--out`` (default ``$FOLLOWAHEAD_OUT`` or
``./followahead-out``) and each command writes a sha256 manifest of its files.

Exit status is 0 on success, 2 for usage, config or missing-input errors and
1 for failures while running.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import experiments as ex
from . import nnkernel as nk
from . import pathnet as pn
from . import posenet as ps
from .data import WindowDataset, read_dataset, write_dataset
from .errors import InvalidArgument
from .gridworld import write_map
from .predictor import FullPredictor
from .sim.dataset import VISIBILITY, apply_visibility, synthesize_dataset
from .sim.maps import KINDS
from .sim.metrics import eval_prediction, format_table, horizon_steps
from .sim.rollout import RolloutConfig, rollout, summarize
from .sim.walker import make_scenario

ENV_OUT = "FOLLOWAHEAD_OUT"
DEFAULT_OUT = "followahead-out"


class UsageError(Exception):
    """Bad flags, config keys or missing inputs; maps to exit status 2."""


# config ------------------------------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _strs(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in _strs(text))


# key: (parser, default, help)
SCHEMAS: dict[str, dict[str, tuple]] = {
    "gen": {
        "seed": (int, "0", "first scenario seed"),
        "kinds": (_strs, "L-turn,T-junction", f"map kinds, cycled over scenarios; any of {','.join(KINDS)}"),
        "train_scenarios": (int, "40", "scenarios in the training split"),
        "val_scenarios": (int, "10", "scenarios in the validation split"),
        "test_scenarios": (int, "20", "scenarios in the test split"),
        "map_size": (int, "24", "local map side in pixels (multiple of 8)"),
        "resolution": (float, "0.2", "local map meters per pixel"),
        "N": (int, "15", "history frames"),
        "T": (int, "15", "future frames"),
        "rate": (float, "5.0", "frames per second"),
        "stride": (int, "4", "keep every k-th window"),
    },
    "train": {
        "data": (str, "", "directory holding data/*.jsonl (default: --out)"),
        "seed": (int, "0", "initialization and shuffling seed"),
        "epochs": (int, "20", "PathNet epochs"),
        "batch_size": (int, "16", "PathNet batch size"),
        "lr": (float, "1e-3", "PathNet learning rate"),
        "pose_epochs": (int, "30", "PoseNet epochs"),
        "pose_batch_size": (int, "32", "PoseNet batch size"),
        "pose_lr": (float, "1e-3", "PoseNet learning rate"),
        "lambdas": (_floats, "1,1,2,1", "weights of the traj, final, map and col losses"),
        "visibility": (str, "full", f"training map visibility; one of {','.join(VISIBILITY)}"),
        "resume": (_bool, "false", "continue from the checkpoint in --out"),
    },
    "eval": {
        "data": (str, "", "directory holding data/test.jsonl (default: --out)"),
        "ckpt": (str, "", "directory holding ckpt/ (default: --out)"),
        "horizons": (_floats, "1,1.5,2,3", "horizons in seconds"),
        "variants": (_strs, "full,partial,unknown", "test map visibilities to report"),
        "predictor": (str, "model", "model, or oracle for the ground-truth futures"),
    },
    "rollout": {
        "ckpt": (str, "", "directory holding ckpt/ (default: --out)"),
        "scenarios": (int, "20", "number of scenarios"),
        "seed_base": (int, "1000", "first scenario seed"),
        "kinds": (_strs, "L-turn,T-junction", "map kinds, cycled over scenarios"),
        "controllers": (_strs, ",".join(ex.CONTROLLERS), "controllers to compare"),
        "noise_std": (float, "0.0", "observation noise on the walker hips, meters"),
        "seed": (int, "0", "noise seed"),
        "save_logs": (_bool, "true", "write one log per scenario and controller"),
    },
    "gradcheck": {
        "seed": (int, "0", "seed for the random test points"),
    },
}


def parse_config_text(text: str, source: str = "config") -> dict[str, str]:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{n}: expected key = value")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def resolve_config(command: str, file_values: dict[str, str], overrides: list[str]) -> dict:
    """Defaults, then the config file, then command-line overrides."""
    schema = SCHEMAS[command]
    raw = {k: entry[1] for k, entry in schema.items()}
    given = dict(file_values)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        given[k.strip()] = v.strip()
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise UsageError(f"unknown {command} keys: {', '.join(unknown)}")
    raw.update(given)
    cfg = {}
    for k, (conv, _, _) in schema.items():
        try:
            cfg[k] = conv(raw[k])
        except ValueError as err:
            raise UsageError(f"bad value for {k}: {err}") from None
    return cfg


def show_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(show_value(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def format_config(cfg: dict) -> str:
    return "".join(f"{k} = {show_value(v)}\n" for k, v in cfg.items())


# files -------------------------------------------------------------------------------


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(root: Path, name: str, files: list[Path]) -> Path:
    lines = [f"{sha256_file(f)}  {f.relative_to(root).as_posix()}\n" for f in sorted(files)]
    path = root / name
    path.write_text("".join(lines))
    return path


def _prepare_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise UsageError(f"cannot create output directory {path}: {err}") from None
    if not os.access(path, os.W_OK):
        raise UsageError(f"output directory {path} is not writable")
    return path


def _write_jsonl(path: Path, records) -> None:
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def _input_dir(value: str, out: Path) -> Path:
    return Path(value) if value else out


def _need(path: Path, what: str) -> Path:
    if not path.exists():
        raise UsageError(f"missing {what}: {path}")
    return path


def _parallel_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# checkpoints -------------------------------------------------------------------------


def _sidecar(path: Path, values: dict) -> None:
    path.write_text(format_config(values))


def _read_sidecar(path: Path) -> dict[str, str]:
    return parse_config_text(_need(path, "checkpoint sidecar").read_text(), str(path))


def _pathnet_from_sidecar(side: dict[str, str]) -> pn.PathNetConfig:
    return pn.PathNetConfig(H=int(side["H"]), W=int(side["W"]), N=int(side["N"]), T=int(side["T"]),
                            resolution=float(side["resolution"]), channels=tuple(map(int, _strs(side["channels"]))),
                            bottleneck=int(side["bottleneck"]), lambdas=_floats(side["lambdas"]),
                            w=float(side["w"]), beta=float(side["beta"]), sigma=float(side["sigma"]))


def _posenet_from_sidecar(side: dict[str, str]) -> ps.PoseNetConfig:
    return ps.PoseNetConfig(N=int(side["N"]), T=int(side["T"]), J=int(side["J"]), hidden=int(side["hidden"]),
                            width=int(side["width"]), hip_index=int(side["hip_index"]))


def load_models(ckpt_root: Path) -> tuple[pn.PathNetModel, ps.PoseNetModel, str]:
    """Best-validation PathNet and PoseNet plus the PathNet's training visibility."""
    ck = _need(ckpt_root / "ckpt", "checkpoint directory")
    side = _read_sidecar(ck / "pathnet.cfg")
    path_model = pn.PathNetModel(_pathnet_from_sidecar(side), 0)
    path_model.load_state_dict(nk.load_weights(_need(ck / "pathnet.fawt", "PathNet weights")))
    pside = _read_sidecar(ck / "posenet.cfg")
    pose_model = ps.PoseNetModel(_posenet_from_sidecar(pside), 0)
    pose_model.load_state_dict(nk.load_weights(_need(ck / "posenet.fawt", "PoseNet weights")))
    return path_model, pose_model, side.get("visibility", "full")


def _train_phase(name: str, module, model, cfg_values: dict, train, val, tc: pn.TrainConfig, ck: Path,
                 resume: bool, progress) -> list[dict]:
    """Epoch-by-epoch training with a resumable checkpoint after every epoch."""
    opt = nk.Adam(model.parameters(), lr=tc.lr)
    state_file, best_file, side_file = ck / f"{name}_state.fawt", ck / f"{name}.fawt", ck / f"{name}.cfg"
    report_file = ck / f"{name}_report.jsonl"
    records: list[dict] = []
    start, best_val, best_epoch = 0, math.inf, -1
    if resume and side_file.exists():
        side = _read_sidecar(side_file)
        for key in ("seed", "lr", "batch_size"):
            if side[key] != show_value(cfg_values[key]):
                raise UsageError(f"cannot resume {name}: {key} changed from {side[key]}")
        state = nk.load_weights(_need(state_file, f"{name} training state"))
        model.load_state_dict({k: v for k, v in state.items() if not k.startswith("adam.")})
        opt.load_state(state)
        start = int(side["epochs_done"])
        best_val, best_epoch = float(side["best_val"]), int(side["best_epoch"])
        records = [json.loads(line) for line in _need(report_file, f"{name} report").read_text().splitlines()]
        records = records[:start]
    if best_epoch >= 0:
        best_state = nk.load_weights(best_file)
    else:
        best_state = model.state_dict()
    one = pn.TrainConfig(epochs=1, batch_size=tc.batch_size, lr=tc.lr, gamma=tc.gamma, step_size=tc.step_size,
                         seed=tc.seed)
    for epoch in range(start, tc.epochs):
        rep = module.train(model, train, one, val=val, optimizer=opt, start_epoch=epoch)
        rec = {"model": name, "lr": opt.lr, **rep.records[0]}
        records.append(rec)
        if rep.best_val < best_val:
            best_val, best_epoch, best_state = rep.best_val, epoch, model.state_dict()
        nk.save_weights(state_file, {**model.state_dict(), **opt.state()})
        nk.save_weights(best_file, best_state)
        _sidecar(side_file, {**cfg_values, "epochs_done": epoch + 1, "best_epoch": best_epoch,
                             "best_val": best_val})
        _write_jsonl(report_file, records)
        progress(rec)
    if best_epoch < 0:
        nk.save_weights(best_file, best_state)
        _sidecar(side_file, {**cfg_values, "epochs_done": start, "best_epoch": best_epoch, "best_val": best_val})
        _write_jsonl(report_file, records)
    return records


# commands ----------------------------------------------------------------------------


def _gen_job(args):
    kind, seed, N, T, rate, d, res, stride = args
    sc = make_scenario(kind, seed)
    return sc, synthesize_dataset([sc], N, T, rate, d, d, res, stride=stride)


def cmd_gen(cfg: dict, out: Path, workers: int, echo) -> int:
    for k in cfg["kinds"]:
        if k not in KINDS:
            raise UsageError(f"unknown map kind {k!r}")
    if cfg["map_size"] % 8 or cfg["map_size"] <= 0:
        raise UsageError("map_size must be a positive multiple of 8")
    _prepare_dir(out)
    data_dir = _prepare_dir(out / "data")
    map_dir = _prepare_dir(out / "maps")
    d = cfg["map_size"] * cfg["resolution"] / 2
    files = []
    seed = cfg["seed"]
    counts = {}
    for split in ("train", "val", "test"):
        n = cfg[f"{split}_scenarios"]
        seeds = list(range(seed, seed + n))
        seed += n
        jobs = [(cfg["kinds"][s % len(cfg["kinds"])], s, cfg["N"], cfg["T"], cfg["rate"], d, cfg["resolution"],
                 cfg["stride"]) for s in seeds]
        results = _parallel_map(_gen_job, jobs, workers)
        parts = [ds for _, ds in results if len(ds)]
        if not parts:
            raise UsageError(f"the {split} split has no samples; scenarios are shorter than N+T frames")
        ds = WindowDataset.concat(parts) if len(parts) > 1 else parts[0]
        path = data_dir / f"{split}.jsonl"
        write_dataset(ds, path)
        files.append(path)
        counts[split] = len(ds)
        for sc, _ in results:
            mp = map_dir / f"scenario_{sc.seed}.map"
            write_map(sc.grid, mp)
            files.append(mp)
    cfg_file = data_dir / "gen.cfg"
    cfg_file.write_text(format_config(cfg))
    files.append(cfg_file)
    write_manifest(out, "manifest-gen.txt", files)
    echo(" ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def cmd_train(cfg: dict, out: Path, workers: int, echo) -> int:
    data = _input_dir(cfg["data"], out) / "data"
    train = read_dataset(_need(data / "train.jsonl", "training set"))
    val = read_dataset(_need(data / "val.jsonl", "validation set"))
    if cfg["visibility"] not in VISIBILITY:
        raise UsageError(f"visibility must be one of {VISIBILITY}")
    if len(cfg["lambdas"]) != 4:
        raise UsageError("lambdas needs four comma-separated weights")
    ck = _prepare_dir(_prepare_dir(out) / "ckpt")
    H, W = train.map_size
    pcfg = pn.PathNetConfig(H=H, W=W, N=train.N, T=train.T, resolution=train.resolution, lambdas=cfg["lambdas"])
    qcfg = ps.PoseNetConfig(N=train.N, T=train.T, J=train.pose_hist.shape[2])

    def progress(rec):
        echo(json.dumps(rec, sort_keys=True))

    # PathNet first, then PoseNet teacher-forced on ground-truth paths
    path_values = {**pn.config_to_dict(pcfg), "visibility": cfg["visibility"], "seed": cfg["seed"], "lr": cfg["lr"],
                   "batch_size": cfg["batch_size"]}
    path_model = pn.PathNetModel(pcfg, cfg["seed"])
    recs = _train_phase("pathnet", pn, path_model, path_values, apply_visibility(train, cfg["visibility"]),
                        apply_visibility(val, cfg["visibility"]),
                        pn.TrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"],
                                       seed=cfg["seed"]), ck, cfg["resume"], progress)
    pose_values = {**vars(qcfg), "seed": cfg["seed"], "lr": cfg["pose_lr"], "batch_size": cfg["pose_batch_size"]}
    pose_model = ps.PoseNetModel(qcfg, cfg["seed"])
    recs += _train_phase("posenet", ps, pose_model, pose_values, train, val,
                         pn.TrainConfig(epochs=cfg["pose_epochs"], batch_size=cfg["pose_batch_size"],
                                        lr=cfg["pose_lr"], seed=cfg["seed"]), ck, cfg["resume"], progress)
    _write_jsonl(out / "train_report.jsonl", recs)
    files = sorted(ck.iterdir()) + [out / "train_report.jsonl"]
    write_manifest(out, "manifest-train.txt", files)
    return 0


def _eval_tables(rows: dict, horizons) -> str:
    parts = ["path error (mm)", format_table(rows, horizons, "path")]
    if all("pose" in r for r in rows.values()):
        parts += ["", "pose error (mm)", format_table(rows, horizons, "pose")]
    return "\n".join(parts) + "\n"


def cmd_eval(cfg: dict, out: Path, workers: int, echo) -> int:
    data = _input_dir(cfg["data"], out) / "data"
    test = read_dataset(_need(data / "test.jsonl", "test set"))
    gen_cfg = data / "gen.cfg"
    rate = float(parse_config_text(gen_cfg.read_text()).get("rate", "5.0")) if gen_cfg.exists() else 5.0
    try:
        horizon_steps(cfg["horizons"], rate, test.T)
    except InvalidArgument as err:
        raise UsageError(str(err)) from None
    for v in cfg["variants"]:
        if v not in VISIBILITY:
            raise UsageError(f"unknown variant {v!r}; expected one of {VISIBILITY}")
    if cfg["predictor"] not in ("model", "oracle"):
        raise UsageError("predictor must be model or oracle")
    if cfg["predictor"] == "model":
        path_model, pose_model, _ = load_models(_input_dir(cfg["ckpt"], out))
        if path_model.config.T != test.T or path_model.config.N != test.N:
            raise UsageError("checkpoint horizons do not match the test set")
    rows = {}
    for v in cfg["variants"]:
        if cfg["predictor"] == "oracle":
            p_hat, x_hat = test.p_fut, test.pose_fut
        else:
            ds = apply_visibility(test, v)
            p_hat = ex.predict_paths(path_model, ds)
            x_hat = ps.predict_batch(pose_model, ds.pose_hist, p_hat)
        rows[v] = eval_prediction(p_hat, test.p_fut, x_hat, test.pose_fut, cfg["horizons"], rate)
    _prepare_dir(out)
    _write_jsonl(out / "eval.jsonl", [{"variant": k, **r} for k, r in rows.items()])
    table = _eval_tables(rows, cfg["horizons"])
    (out / "eval.txt").write_text(table)
    write_manifest(out, "manifest-eval.txt", [out / "eval.jsonl", out / "eval.txt"])
    echo(table.rstrip("\n"))
    return 0


_WORKER_PREDICTOR: dict = {}


def _rollout_job(args):
    k, seed, kind, controllers, ckpt, noise_std, noise_seed = args
    rc = RolloutConfig(noise_std=noise_std, seed=noise_seed)
    full = None
    if "DP+pred" in controllers:
        if ckpt not in _WORKER_PREDICTOR:
            path_model, pose_model, vis = load_models(Path(ckpt))
            _WORKER_PREDICTOR[ckpt] = FullPredictor(path_model, pose_model, vis)
        full = _WORKER_PREDICTOR[ckpt]
    sc = make_scenario(kind, seed)
    rows = []
    for name in controllers:
        pred, ctl = ex.make_controller(name, full, rc)
        log = rollout(sc, pred, ctl, rc, name)
        rows.append((name, summarize(log, sc.grid, rc), log.dumps()))
    return seed, rows


def _summary_table(means: dict) -> str:
    head = f"{'controller':>12}  {'area':>8}  {'tracking':>8}  {'distance':>8}"
    lines = [head] + [f"{c:>12}  {m['area_proxy']:8.3f}  {m['tracking_time']:8.3f}  {m['distance']:8.3f}"
                      for c, m in means.items()]
    return "\n".join(lines) + "\n"


def cmd_rollout(cfg: dict, out: Path, workers: int, echo) -> int:
    for name in cfg["controllers"]:
        if name not in ex.CONTROLLERS:
            raise UsageError(f"unknown controller {name!r}; expected one of {ex.CONTROLLERS}")
    for k in cfg["kinds"]:
        if k not in KINDS:
            raise UsageError(f"unknown map kind {k!r}")
    if cfg["scenarios"] < 1:
        raise UsageError("scenarios must be positive")
    ckpt = _input_dir(cfg["ckpt"], out)
    if "DP+pred" in cfg["controllers"]:
        load_models(ckpt)  # fail early on a missing checkpoint
    _prepare_dir(out)
    log_dir = _prepare_dir(out / "rollout") if cfg["save_logs"] else None
    jobs = [(k, cfg["seed_base"] + k, cfg["kinds"][k % len(cfg["kinds"])], cfg["controllers"], str(ckpt),
             cfg["noise_std"], cfg["seed"]) for k in range(cfg["scenarios"])]
    results = _parallel_map(_rollout_job, jobs, workers)
    records, files = [], []
    per = {c: [] for c in cfg["controllers"]}
    for seed, rows in results:
        for name, summary, text in rows:
            records.append({"scenario": seed, "controller": name, **summary})
            per[name].append(summary)
            if log_dir is not None:
                path = log_dir / f"{seed}_{name.replace('+', '_')}.jsonl"
                path.write_text(text)
                files.append(path)
    means = {c: ex.mean_summary(v) for c, v in per.items()}
    records += [{"controller": c, "scenarios": len(per[c]), "mean": True, **m} for c, m in means.items()]
    _write_jsonl(out / "rollout_summary.jsonl", records)
    table = _summary_table(means)
    (out / "rollout_summary.txt").write_text(table)
    files += [out / "rollout_summary.jsonl", out / "rollout_summary.txt"]
    write_manifest(out, "manifest-rollout.txt", files)
    echo(table.rstrip("\n"))
    return 0


def cmd_gradcheck(cfg: dict, out: Path, workers: int, echo) -> int:
    from .verify import run_suite

    rows = run_suite(cfg["seed"])
    for r in rows:
        status = "ok" if r["passed"] else "FAIL"
        echo(f"{r['case']:>16}  error {r['error']:.2e}  corrupted {r['corrupted']:.2e}  {status}")
    failed = [r["case"] for r in rows if not r["passed"]]
    if failed:
        echo(f"failed: {', '.join(failed)}")
        return 1
    return 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "rollout": cmd_rollout, "gradcheck": cmd_gradcheck}

HELP = {
    "gen": "synthesize train/val/test windows and scenario maps",
    "train": "train PathNet, then PoseNet on ground-truth paths",
    "eval": "path and pose error tables per map visibility",
    "rollout": "closed-loop follow-ahead comparison of controllers",
    "gradcheck": "finite-difference check of every kernel primitive and both loss graphs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="followahead", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, schema in SCHEMAS.items():
        keys = "\n".join(f"  {k} (default {entry[1] or '-'}): {entry[2]}" for k, entry in schema.items())
        p = sub.add_parser(name, help=HELP[name], description=HELP[name], epilog="config keys:\n" + keys,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--out", type=Path, default=None,
                       help=f"output directory (default ${ENV_OUT} or ./{DEFAULT_OUT})")
        p.add_argument("--workers", type=int, default=1, help="parallel processes across scenarios")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        # overrides may also follow the options
        stray = [x for x in extra if x.startswith("-") or "=" not in x]
        if stray:
            parser.error(f"unrecognized arguments: {' '.join(stray)}")
        args.overrides = list(args.overrides) + extra
    except SystemExit as exc:
        return int(exc.code or 0)
    echo = (lambda s: None) if args.quiet else (lambda s: print(s, flush=True))
    out = args.out or Path(os.environ.get(ENV_OUT) or DEFAULT_OUT)
    try:
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        file_values = {}
        if args.config is not None:
            try:
                text = args.config.read_text()
            except OSError as err:
                raise UsageError(f"cannot read config: {err}") from None
            file_values = parse_config_text(text, str(args.config))
        cfg = resolve_config(args.command, file_values, args.overrides)
        return COMMANDS[args.command](cfg, out, args.workers, echo)
    except (UsageError, InvalidArgument) as err:
        print(f"followahead {args.command}: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - report and exit 1 on any runtime failure
        print(f"followahead {args.command}: error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
