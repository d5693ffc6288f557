"""Bird's-eye-view construction from colored point clouds.

Points are carried as parallel arrays: ``xyz`` (N, 3) meters and ``rgb``
(N, 3) in [0, 1].  Sensor frame: x forward, y left, z up.
"""

from __future__ import annotations

import collections
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import InputParseError
from .georaster import GeoRaster, GeoRef, WorldPose


@dataclass(frozen=True, eq=False)
class ScanFrame:
    timestamp: float
    xyz: np.ndarray
    rgb: np.ndarray
    pose: WorldPose

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        rgb = np.asarray(self.rgb, dtype=np.float64).reshape(-1, 3)
        if xyz.shape[0] != rgb.shape[0]:
            raise ValueError(f"{xyz.shape[0]} points but {rgb.shape[0]} colors")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "rgb", rgb)


@dataclass(frozen=True, eq=False)
class CameraProjection:
    matrix: np.ndarray  # 3x4, intrinsics @ [R | t]
    width: int
    height: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 4):
            raise ValueError(f"projection must be 3x4, got {m.shape}")
        object.__setattr__(self, "matrix", m)


def colorize_scan(xyz: np.ndarray, image, proj: CameraProjection):
    """Color sensor-frame points from a camera image.

    Points behind the camera or outside the image are dropped; the rest take
    the nearest pixel's color.  Returns ``(xyz_kept, rgb)``.
    """
    img = image.values if isinstance(image, GeoRaster) else np.asarray(image, dtype=np.float64)
    if img.shape[:2] != (proj.height, proj.width):
        raise ValueError(f"image {img.shape[:2]} does not match projection "
                         f"{(proj.height, proj.width)}")
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    hom = np.hstack([xyz, np.ones((xyz.shape[0], 1))]) @ proj.matrix.T
    depth = hom[:, 2]
    front = depth > 0
    safe = np.where(front, depth, 1.0)
    col = np.floor(hom[:, 0] / safe + 0.5)
    row = np.floor(hom[:, 1] / safe + 0.5)
    keep = front & (col >= 0) & (row >= 0) & (col < proj.width) & (row < proj.height)
    rgb = img[row[keep].astype(np.int64), col[keep].astype(np.int64)]
    if rgb.ndim == 1:
        rgb = np.repeat(rgb[:, None], 3, axis=1)
    return xyz[keep], rgb


def sensor_to_world(xyz: np.ndarray, pose: WorldPose) -> np.ndarray:
    """Planar rigid transform: rotate x, y by heading, translate; z unchanged."""
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    out = np.empty_like(xyz)
    out[:, 0] = pose.easting + c * xyz[:, 0] - s * xyz[:, 1]
    out[:, 1] = pose.northing + s * xyz[:, 0] + c * xyz[:, 1]
    out[:, 2] = xyz[:, 2]
    return out


class PointAccumulator:
    """Sliding window of world-frame colored points.

    The window is a frame count, a time span in seconds, or both (a frame is
    evicted as soon as either limit excludes it).  Single writer.
    """

    def __init__(self, window_frames: int | None = 300, window_seconds: float | None = None):
        if window_frames is not None and window_frames < 1:
            raise ValueError("window_frames must be >= 1")
        if window_seconds is not None and window_seconds <= 0:
            raise ValueError("window_seconds must be > 0")
        self.window_frames = window_frames
        self.window_seconds = window_seconds
        self._frames: collections.deque = collections.deque()

    def __len__(self) -> int:
        return len(self._frames)

    @property
    def timestamps(self) -> list[float]:
        return [f[0] for f in self._frames]

    @property
    def newest(self) -> float | None:
        return self._frames[-1][0] if self._frames else None

    def add(self, frame: ScanFrame) -> "PointAccumulator":
        if self._frames and not frame.timestamp > self._frames[-1][0]:
            raise ValueError(f"frame timestamp {frame.timestamp} not newer than "
                             f"{self._frames[-1][0]}")
        self._frames.append((frame.timestamp, sensor_to_world(frame.xyz, frame.pose), frame.rgb))
        if self.window_frames is not None:
            while len(self._frames) > self.window_frames:
                self._frames.popleft()
        if self.window_seconds is not None:
            cutoff = frame.timestamp - self.window_seconds
            while self._frames and self._frames[0][0] < cutoff:
                self._frames.popleft()
        return self

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._frames:
            return np.zeros((0, 3)), np.zeros((0, 3))
        return (np.concatenate([f[1] for f in self._frames]),
                np.concatenate([f[2] for f in self._frames]))


def accumulate(acc: PointAccumulator, frame: ScanFrame) -> PointAccumulator:
    return acc.add(frame)


def bev_bins(xyz_world: np.ndarray, center: WorldPose, size_px: int, res: float):
    """Integer (col, row) bins in the heading-up raster centered on ``center``."""
    c, s = math.cos(center.heading), math.sin(center.heading)
    dx = xyz_world[:, 0] - center.easting
    dy = xyz_world[:, 1] - center.northing
    fwd = c * dx + s * dy
    left = -s * dx + c * dy
    half = size_px // 2
    cols = np.floor(half - left / res + 0.5).astype(np.int64)
    rows = np.floor(half - fwd / res + 0.5).astype(np.int64)
    return cols, rows


def rasterize_points(xyz_world: np.ndarray, rgb: np.ndarray, center: WorldPose,
                     size_px: int = 500, res: float = 0.2) -> GeoRaster:
    if size_px <= 0 or not res > 0:
        raise ValueError("size_px and res must be positive")
    cols, rows = bev_bins(xyz_world, center, size_px, res)
    img, filled = kernels.bin_max_z(cols, rows, np.ascontiguousarray(xyz_world[:, 2]),
                                    np.ascontiguousarray(rgb, dtype=np.float64), size_px)
    ref = GeoRef.centered(center.easting, center.northing, res, size_px, size_px, center.heading)
    return GeoRaster(img, ref, ~filled)


def rasterize_bev(acc: PointAccumulator, center: WorldPose, size_px: int = 500,
                  res: float = 0.2) -> GeoRaster:
    """Top-down color raster, vehicle heading up, vehicle at pixel (size/2, size/2).

    Each bin shows its highest point; empty bins are holes.
    """
    xyz, rgb = acc.points()
    return rasterize_points(xyz, rgb, center, size_px, res)


# ---------------------------------------------------------------------------
# scan files


def write_scan(frame: ScanFrame, path) -> None:
    header = (f"timestamp {frame.timestamp!r}\n"
              f"pose {frame.pose.easting!r} {frame.pose.northing!r} {frame.pose.heading!r}")
    np.savetxt(path, np.hstack([frame.xyz, frame.rgb]), fmt="%.6f", header=header, comments="# ")


def read_scan(path) -> ScanFrame:
    path = Path(path)
    timestamp = pose = None
    with open(path) as f:
        for line in f:
            if not line.startswith("#"):
                break
            parts = line[1:].split()
            if parts and parts[0] == "timestamp" and len(parts) == 2:
                timestamp = float(parts[1])
            elif parts and parts[0] == "pose" and len(parts) == 4:
                pose = WorldPose(*map(float, parts[1:]))
    if timestamp is None or pose is None:
        raise InputParseError(f"{path}: missing '# timestamp' or '# pose' header")
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except ValueError as exc:
        raise InputParseError(f"{path}: {exc}") from None
    if data.size == 0:
        data = np.zeros((0, 6))
    if data.shape[1] != 6:
        raise InputParseError(f"{path}: expected 6 columns 'x y z r g b', got {data.shape[1]}")
    return ScanFrame(timestamp, data[:, :3], data[:, 3:], pose)
