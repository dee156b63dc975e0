"""Sliding-window forecasting samples, stored as stacked arrays.

All coordinates are in the actor frame of the last history step (hip at the
origin, +x along the body heading).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InvalidArgument

DATASET_FORMAT = "followahead-dataset"
DATASET_VERSION = 1


@dataclass
class WindowDataset:
    occ: np.ndarray        # (S, H, W) local occupancy, full visibility
    p_hist: np.ndarray     # (S, N, 2)
    p_fut: np.ndarray      # (S, T, 2)
    pose_hist: np.ndarray  # (S, N, J, 3) hip-relative
    pose_fut: np.ndarray   # (S, T, J, 3) hip-relative
    hip_z: np.ndarray      # (S,)
    frame: np.ndarray      # (S, 3) world x, y, heading of the actor frame
    scenario: np.ndarray   # (S,) scenario seed
    resolution: float = 0.125

    def __post_init__(self):
        n = len(self.occ)
        for f in fields(self):
            if f.name == "resolution":
                continue
            arr = np.asarray(getattr(self, f.name))
            setattr(self, f.name, arr)
            if len(arr) != n:
                raise InvalidArgument(f"field {f.name} has {len(arr)} rows, expected {n}")

    def __len__(self) -> int:
        return len(self.occ)

    @property
    def N(self) -> int:
        return self.p_hist.shape[1]

    @property
    def T(self) -> int:
        return self.p_fut.shape[1]

    @property
    def map_size(self) -> tuple[int, int]:
        return self.occ.shape[1:]

    def subset(self, idx) -> "WindowDataset":
        idx = np.asarray(idx, dtype=np.int64)
        kw = {f.name: getattr(self, f.name)[idx] for f in fields(self) if f.name != "resolution"}
        return WindowDataset(resolution=self.resolution, **kw)

    def select_scenarios(self, seeds) -> "WindowDataset":
        return self.subset(np.nonzero(np.isin(self.scenario, list(seeds)))[0])

    def with_occ(self, occ) -> "WindowDataset":
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "resolution"}
        kw["occ"] = np.asarray(occ, dtype=np.float64)
        return WindowDataset(resolution=self.resolution, **kw)

    @staticmethod
    def concat(parts: list["WindowDataset"]) -> "WindowDataset":
        if not parts:
            raise InvalidArgument("nothing to concatenate")
        kw = {
            f.name: np.concatenate([getattr(p, f.name) for p in parts])
            for f in fields(WindowDataset)
            if f.name != "resolution"
        }
        return WindowDataset(resolution=parts[0].resolution, **kw)


_ARRAY_FIELDS = ("occ", "p_hist", "p_fut", "pose_hist", "pose_fut", "hip_z", "frame", "scenario")


def write_dataset(ds: WindowDataset, path) -> None:
    """Line-delimited JSON: a versioned header then one record per sample."""
    with open(path, "w") as fh:
        head = {"format": DATASET_FORMAT, "version": DATASET_VERSION, "resolution": ds.resolution,
                "count": len(ds)}
        fh.write(json.dumps(head) + "\n")
        for i in range(len(ds)):
            rec = {k: np.asarray(getattr(ds, k)[i]).tolist() for k in _ARRAY_FIELDS}
            fh.write(json.dumps(rec) + "\n")


def read_dataset(path) -> WindowDataset:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InvalidArgument(f"empty dataset file {path}")
    head = json.loads(lines[0])
    if head.get("format") != DATASET_FORMAT or head.get("version") != DATASET_VERSION:
        raise InvalidArgument(f"unsupported dataset header {head}")
    recs = [json.loads(line) for line in lines[1:] if line.strip()]
    if not recs:
        raise InvalidArgument("dataset has no samples")
    kw = {k: np.array([r[k] for r in recs], dtype=np.float64) for k in _ARRAY_FIELDS}
    kw["scenario"] = kw["scenario"].astype(np.int64)
    return WindowDataset(resolution=float(head["resolution"]), **kw)
