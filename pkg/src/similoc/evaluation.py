"""Trajectory error metrics.

ATE is the mean distance between time-paired predicted and true positions.
LPE is the mean distance from each predicted position to the closest true
position anywhere on the run, which isolates lateral error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputParseError

PAIR_TOLERANCE = 0.05


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    xy: np.ndarray  # (N, 2) easting, northing
    heading: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        xy = np.asarray(self.xy, dtype=np.float64).reshape(-1, 2)
        if t.shape[0] != xy.shape[0]:
            raise ValueError(f"{t.shape[0]} timestamps but {xy.shape[0]} positions")
        if t.shape[0] and np.any(np.diff(t) < 0):
            raise ValueError("timestamps must be non-decreasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xy", xy)
        if self.heading is not None:
            h = np.asarray(self.heading, dtype=np.float64).reshape(-1)
            if h.shape != t.shape:
                raise ValueError("heading length differs from timestamps")
            object.__setattr__(self, "heading", h)

    def __len__(self) -> int:
        return self.t.shape[0]

    @classmethod
    def from_poses(cls, t, poses) -> "Trajectory":
        arr = np.array([(p.easting, p.northing, p.heading) for p in poses], dtype=np.float64).reshape(-1, 3)
        return cls(t, arr[:, :2], arr[:, 2])

    def path_length(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.sum(np.hypot(*np.diff(self.xy, axis=0).T)))


@dataclass(frozen=True, eq=False)
class Pairing:
    pred_idx: np.ndarray
    gt_idx: np.ndarray
    dropped: int


def pair_by_time(pred: Trajectory, gt: Trajectory, tol: float = PAIR_TOLERANCE) -> Pairing:
    """Match each predicted sample to the gt sample nearest in time (earlier wins ties)."""
    if len(gt) == 0 or len(pred) == 0:
        return Pairing(np.zeros(0, np.int64), np.zeros(0, np.int64), len(pred))
    right = np.clip(np.searchsorted(gt.t, pred.t, side="left"), 0, len(gt) - 1)
    left = np.clip(right - 1, 0, len(gt) - 1)
    take_left = np.abs(gt.t[left] - pred.t) <= np.abs(gt.t[right] - pred.t)
    idx = np.where(take_left, left, right)
    ok = np.abs(gt.t[idx] - pred.t) <= tol
    pred_idx = np.flatnonzero(ok)
    return Pairing(pred_idx, idx[ok], int(len(pred) - pred_idx.size))


def _require_pairs(p: Pairing) -> None:
    if p.pred_idx.size == 0:
        raise ValueError(f"no time-paired samples (dropped {p.dropped})")


def ate(pred: Trajectory, gt: Trajectory, tol: float = PAIR_TOLERANCE) -> float:
    p = pair_by_time(pred, gt, tol)
    _require_pairs(p)
    d = pred.xy[p.pred_idx] - gt.xy[p.gt_idx]
    return float(np.mean(np.hypot(d[:, 0], d[:, 1])))


def nearest_distances(points: np.ndarray, gt_xy: np.ndarray) -> np.ndarray:
    """Distance from each point to its closest gt point.

    The k-d tree only picks the index; the distance is recomputed with the
    same formula a double loop would use, so results match it exactly.
    """
    _, idx = cKDTree(gt_xy).query(points, k=1)
    d = points - gt_xy[idx]
    return np.hypot(d[:, 0], d[:, 1])


def lpe(pred: Trajectory, gt: Trajectory) -> float:
    if len(pred) == 0 or len(gt) == 0:
        raise ValueError("lpe needs non-empty trajectories")
    return float(np.mean(nearest_distances(pred.xy, gt.xy)))


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    t: np.ndarray
    euclidean: np.ndarray
    lateral: np.ndarray
    dropped: int


def error_series(pred: Trajectory, gt: Trajectory, tol: float = PAIR_TOLERANCE) -> ErrorSeries:
    p = pair_by_time(pred, gt, tol)
    if p.pred_idx.size == 0:
        empty = np.zeros(0)
        return ErrorSeries(empty, empty, empty, p.dropped)
    d = pred.xy[p.pred_idx] - gt.xy[p.gt_idx]
    lateral = nearest_distances(pred.xy[p.pred_idx], gt.xy)
    return ErrorSeries(pred.t[p.pred_idx], np.hypot(d[:, 0], d[:, 1]), lateral, p.dropped)


def report(pred: Trajectory, gt: Trajectory, tol: float = PAIR_TOLERANCE) -> str:
    p = pair_by_time(pred, gt, tol)
    _require_pairs(p)
    return (f"ATE={ate(pred, gt, tol):.4f} LPE={lpe(pred, gt):.4f} "
            f"paired={p.pred_idx.size} dropped={p.dropped}")


# ---------------------------------------------------------------------------
# CSV: t,easting,northing[,heading]


def write_trajectory(traj: Trajectory, path) -> None:
    with open(Path(path), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        has_h = traj.heading is not None
        w.writerow(["t", "easting", "northing"] + (["heading"] if has_h else []))
        for i in range(len(traj)):
            row = [repr(float(traj.t[i])), repr(float(traj.xy[i, 0])), repr(float(traj.xy[i, 1]))]
            if has_h:
                row.append(repr(float(traj.heading[i])))
            w.writerow(row)


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = [h.strip() for h in next(reader, [])]
        need = ["t", "easting", "northing"]
        if any(h not in header for h in need):
            raise InputParseError(f"{path}: header must contain {','.join(need)}, got {header}")
        cols = [header.index(h) for h in need]
        hcol = header.index("heading") if "heading" in header else None
        rows, heads = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                rows.append([float(rec[c]) for c in cols])
                if hcol is not None:
                    heads.append(float(rec[hcol]))
            except (ValueError, IndexError):
                raise InputParseError(f"{path}:{lineno}: bad row {rec}") from None
    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(arr)):
        raise InputParseError(f"{path}: non-finite values")
    try:
        return Trajectory(arr[:, 0], arr[:, 1:], np.array(heads) if hcol is not None else None)
    except ValueError as exc:
        raise InputParseError(f"{path}: {exc}") from None


def dead_reckon(start_xy, start_heading: float, deltas, frame: str = "world") -> np.ndarray:
    """Integrate odometry deltas; returns (N+1, 3) poses including the start."""
    out = np.empty((len(deltas) + 1, 3))
    x, y = map(float, start_xy)
    h = float(start_heading)
    out[0] = x, y, h
    for k, d in enumerate(deltas, start=1):
        if frame == "body":
            c, s = math.cos(h), math.sin(h)
            x += c * d.dx - s * d.dy
            y += s * d.dx + c * d.dy
        else:
            x += d.dx
            y += d.dy
        h += d.dtheta
        out[k] = x, y, h
    return out
