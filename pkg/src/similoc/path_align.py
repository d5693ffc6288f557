"""Trajectory-to-path registration.

The recent estimated trajectory and the planned route are drawn as thin
curves on two binary rasters.  An exhaustive rotation x translation search
finds the rigid motion that puts the most trajectory pixels onto the
(1 px dilated) route; when that overlap is convincing the same motion is
applied to the current pose estimate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import DegenerateInputError, InputParseError
from .georaster import GeoRef, WorldPose, world_to_pixel


@dataclass(frozen=True, eq=False)
class PlannedPath:
    points: np.ndarray  # (N, 2) easting, northing

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if pts.shape[0] < 2:
            raise ValueError("a path needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("path contains non-finite points")
        if np.any(np.all(np.diff(pts, axis=0) == 0, axis=1)):
            raise ValueError("consecutive path points must be distinct")
        object.__setattr__(self, "points", pts)

    @property
    def arclength(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.points, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arclength[-1])


@dataclass(frozen=True)
class AlignmentTransform:
    rotation: float  # radians, CCW in the world
    translation: tuple[float, float]  # meters (east, north), or pixels from register
    overlap_score: float


@dataclass(frozen=True)
class AlignConfig:
    resolution: float = 0.2
    size_px: int = 1000
    rot_range: float = math.radians(5.0)
    rot_step: float = math.radians(0.5)
    trans_range: int = 20
    trans_step: int = 1
    accept: float = 0.7
    min_length: float = 100.0


@dataclass(frozen=True)
class RefineResult:
    pose: WorldPose
    transform: AlignmentTransform | None
    applied: bool
    reason: str = ""
    baseline_score: float = math.nan  # overlap with no correction


def read_path(path) -> PlannedPath:
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = [h.strip() for h in next(reader, [])]
        if header[:2] != ["easting", "northing"]:
            raise InputParseError(f"{path}: expected header 'easting,northing', got {header}")
        try:
            pts = [(float(r[0]), float(r[1])) for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise InputParseError(f"{path}: {exc}") from None
    try:
        return PlannedPath(np.array(pts))
    except ValueError as exc:
        raise InputParseError(f"{path}: {exc}") from None


def write_path(p: PlannedPath, path) -> None:
    with open(Path(path), "w") as f:
        f.write("easting,northing\n")
        for e, n in p.points:
            f.write(f"{float(e)!r},{float(n)!r}\n")


bresenham = kernels.bresenham


def render_curve(points, georef: GeoRef, size_px: int) -> np.ndarray:
    """Boolean (size, size) raster with the polyline drawn 1 px wide."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise ValueError("render_curve needs at least 2 points")
    col, row = world_to_pixel(georef, pts[:, 0], pts[:, 1])
    ci = np.floor(np.asarray(col) + 0.5).astype(np.int64)
    ri = np.floor(np.asarray(row) + 0.5).astype(np.int64)
    return kernels.draw_polyline(ci, ri, size_px)


def _grid(rng: float, step: float) -> np.ndarray:
    n = int(math.floor(rng / step + 1e-9))
    return np.arange(-n, n + 1) * step


def register(traj_raster: np.ndarray, path_raster: np.ndarray, rot_range: float, rot_step: float,
             trans_range: int, trans_step: int = 1) -> AlignmentTransform:
    """Best rigid motion (pixels) taking the trajectory curve onto the path.

    Rotation is about the raster center, positive counterclockwise as seen on
    a north-up image; translation is (dcol, drow).
    """
    traj = np.asarray(traj_raster, dtype=bool)
    ref = np.asarray(path_raster, dtype=bool)
    if traj.shape != ref.shape:
        raise ValueError(f"raster shapes differ: {traj.shape} vs {ref.shape}")
    if not traj.any() or not ref.any():
        raise DegenerateInputError("register needs non-empty rasters")
    dil = ndimage.binary_dilation(ref, structure=np.ones((3, 3), dtype=bool))
    h, w = traj.shape
    crow, ccol = h // 2, w // 2
    rr, cc = np.nonzero(traj)
    offsets = np.ascontiguousarray(np.stack([cc - ccol, rr - crow], axis=1), dtype=np.float64)
    rots = _grid(rot_range, rot_step)
    shifts = (np.arange(-(trans_range // trans_step), trans_range // trans_step + 1) * trans_step).astype(np.int64)
    cos_sin = np.ascontiguousarray(np.stack([np.cos(rots), np.sin(rots)], axis=1))
    counts = kernels.overlap_grid(offsets, dil, float(ccol), float(crow), cos_sin, shifts, shifts)
    best = counts.max()
    a, i, j = np.nonzero(counts == best)
    order = np.lexsort((np.arange(a.size), shifts[i] ** 2 + shifts[j] ** 2, np.abs(rots[a])))
    k = order[0]
    return AlignmentTransform(float(rots[a[k]]), (float(shifts[j[k]]), float(shifts[i[k]])),
                              float(best) / len(offsets))


def refine(current: WorldPose, recent_traj, path: PlannedPath, cfg: AlignConfig = AlignConfig()) -> RefineResult:
    """Snap the estimate using the trajectory-to-path alignment.

    ``recent_traj`` is an (N, 2) array or a Trajectory of estimated positions.
    """
    xy = np.asarray(getattr(recent_traj, "xy", recent_traj), dtype=np.float64).reshape(-1, 2)
    if xy.shape[0] < 2 or np.sum(np.hypot(*np.diff(xy, axis=0).T)) < cfg.min_length:
        return RefineResult(current, None, False, "trajectory too short")
    ref = GeoRef.centered(current.easting, current.northing, cfg.resolution, cfg.size_px, cfg.size_px)
    traj_img = render_curve(xy, ref, cfg.size_px)
    path_img = render_curve(path.points, ref, cfg.size_px)
    if not traj_img.any() or not path_img.any():
        return RefineResult(current, None, False, "curve outside raster")
    t = register(traj_img, path_img, cfg.rot_range, cfg.rot_step, cfg.trans_range, cfg.trans_step)
    base = overlap_score(traj_img, path_img)
    world_t = AlignmentTransform(t.rotation, (t.translation[0] * cfg.resolution,
                                              -t.translation[1] * cfg.resolution), t.overlap_score)
    if t.overlap_score < cfg.accept:
        return RefineResult(current, world_t, False, f"overlap {t.overlap_score:.3f} below {cfg.accept}", base)
    return RefineResult(apply_transform(current, current, world_t), world_t, True, "", base)


def overlap_score(traj_raster: np.ndarray, path_raster: np.ndarray) -> float:
    """Share of trajectory pixels on the 1 px dilated path, untransformed."""
    traj = np.asarray(traj_raster, dtype=bool)
    n = int(traj.sum())
    if n == 0:
        return 0.0
    dil = ndimage.binary_dilation(np.asarray(path_raster, dtype=bool), structure=np.ones((3, 3), dtype=bool))
    return float(np.count_nonzero(traj & dil)) / n


def apply_transform(pose: WorldPose, pivot: WorldPose, t: AlignmentTransform) -> WorldPose:
    """Rotate ``pose`` about ``pivot`` by t.rotation, then shift by t.translation (meters)."""
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    dx, dy = pose.easting - pivot.easting, pose.northing - pivot.northing
    return WorldPose(pivot.easting + c * dx - s * dy + t.translation[0],
                     pivot.northing + s * dx + c * dy + t.translation[1],
                     pose.heading + t.rotation)
