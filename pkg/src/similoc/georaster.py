"""Geo-referenced rasters and the planar pose type.

Conventions
-----------
* World frame: easting/northing in meters, heading counterclockwise from
  east, normalized to (-pi, pi].
* Pixel frame: (col, row), pixel centers on integers, row 0 at the top.
* A raster's "up" direction is ``GeoRef.up``; ordinary map tiles are
  north-up (``up = pi/2``).  Vehicle-centric rasters (BEV images, particle
  patches) put the vehicle heading up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels

NORTH_UP = math.pi / 2


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def wrap_angles(a: np.ndarray) -> np.ndarray:
    out = np.remainder(a + np.pi, 2.0 * np.pi) - np.pi
    out[out <= -np.pi] += 2.0 * np.pi
    return out


def _unit(angle: float) -> tuple[float, float]:
    # snap to exact axes so axis-aligned sampling stays interpolation-free
    c, s = math.cos(angle), math.sin(angle)
    c = 0.0 if abs(c) < 1e-12 else (math.copysign(1.0, c) if abs(abs(c) - 1) < 1e-15 else c)
    s = 0.0 if abs(s) < 1e-12 else (math.copysign(1.0, s) if abs(abs(s) - 1) < 1e-15 else s)
    return c, s


@dataclass(frozen=True)
class WorldPose:
    easting: float
    northing: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "easting", float(self.easting))
        object.__setattr__(self, "northing", float(self.northing))
        if not (math.isfinite(self.easting) and math.isfinite(self.northing)):
            raise ValueError(f"non-finite position ({self.easting}, {self.northing})")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.easting, self.northing])

    def distance_to(self, other: "WorldPose") -> float:
        return math.hypot(self.easting - other.easting, self.northing - other.northing)


@dataclass(frozen=True)
class GeoRef:
    """Placement of a pixel grid in the world.

    ``origin_easting``/``origin_northing`` locate the center of pixel
    (col 0, row 0); ``up`` is the world direction of decreasing row.
    """

    origin_easting: float
    origin_northing: float
    resolution: float
    up: float = NORTH_UP

    def __post_init__(self):
        for name in ("origin_easting", "origin_northing", "resolution", "up"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError(f"resolution must be positive, got {self.resolution}")

    @property
    def north_up(self) -> bool:
        return _unit(self.up) == (0.0, 1.0)

    def axes(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """World unit vectors of +col (right) and -row (up)."""
        uc, us = _unit(self.up)
        return (us, -uc), (uc, us)

    @classmethod
    def centered(cls, center_e: float, center_n: float, resolution: float,
                 width: int, height: int, up: float = NORTH_UP) -> "GeoRef":
        """GeoRef whose pixel (width//2, height//2) sits on the given point."""
        tmp = cls(0.0, 0.0, resolution, up)
        (rx, ry), (ux, uy) = tmp.axes()
        dc, dr = width // 2, height // 2
        oe = center_e - dc * resolution * rx + dr * resolution * ux
        on = center_n - dc * resolution * ry + dr * resolution * uy
        return cls(oe, on, resolution, up)


def world_to_pixel(georef: GeoRef, e, n):
    """World coordinates to fractional (col, row); works on scalars or arrays."""
    de = np.subtract(e, georef.origin_easting)
    dn = np.subtract(n, georef.origin_northing)
    if georef.north_up:
        return de / georef.resolution, -dn / georef.resolution
    (rx, ry), (ux, uy) = georef.axes()
    return (de * rx + dn * ry) / georef.resolution, -(de * ux + dn * uy) / georef.resolution


def pixel_to_world(georef: GeoRef, col, row):
    if georef.north_up:
        return (georef.origin_easting + np.multiply(col, georef.resolution),
                georef.origin_northing - np.multiply(row, georef.resolution))
    (rx, ry), (ux, uy) = georef.axes()
    res = georef.resolution
    return (georef.origin_easting + np.multiply(col, res * rx) - np.multiply(row, res * ux),
            georef.origin_northing + np.multiply(col, res * ry) - np.multiply(row, res * uy))


@dataclass(frozen=True, eq=False)
class GeoRaster:
    """Pixel grid plus placement.

    ``values`` is (H, W) for single-channel rasters (similarity, masks) and
    (H, W, 3) for color.  Hole pixels are zero in every channel and flagged
    in ``hole_mask``.
    """

    values: np.ndarray
    georef: GeoRef
    hole_mask: np.ndarray | None = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim not in (2, 3):
            raise ValueError(f"raster values must be 2-D or 3-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("raster contains non-finite values")
        object.__setattr__(self, "values", v)
        if self.hole_mask is not None:
            m = np.asarray(self.hole_mask, dtype=bool)
            if m.shape != v.shape[:2]:
                raise ValueError(f"hole mask shape {m.shape} != raster shape {v.shape[:2]}")
            object.__setattr__(self, "hole_mask", m)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.values.ndim == 2 else self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    def as_3d(self) -> np.ndarray:
        return self.values if self.values.ndim == 3 else self.values[:, :, None]

    def holes(self) -> np.ndarray:
        if self.hole_mask is None:
            return np.zeros(self.shape, dtype=bool)
        return self.hole_mask

    def center_world(self) -> tuple[float, float]:
        e, n = pixel_to_world(self.georef, self.width // 2, self.height // 2)
        return float(e), float(n)

    def with_values(self, values: np.ndarray, hole_mask: np.ndarray | None = None) -> "GeoRaster":
        return replace(self, values=values, hole_mask=hole_mask)


def bilinear_sample(raster: GeoRaster, col: float, row: float):
    """Blend of the four surrounding pixel centers; 0 away from the grid.

    Returns a float for single-channel rasters, an array otherwise.
    """
    src = raster.as_3d()
    out = kernels._gather_bilinear(src, np.asarray([float(col)]), np.asarray([float(row)]))[0]
    return float(out[0]) if raster.channels == 1 else out


def _patch_affine(src_ref: GeoRef, center: WorldPose, size: int, patch_res: float):
    """Affine map from patch pixel (i, j) to source (col, row), patch up = heading."""
    patch_ref = GeoRef.centered(center.easting, center.northing, patch_res, size, size, center.heading)
    (prx, pry), (pux, puy) = patch_ref.axes()
    c0, r0 = world_to_pixel(src_ref, patch_ref.origin_easting, patch_ref.origin_northing)
    (srx, sry), (sux, suy) = src_ref.axes()
    k = patch_res / src_ref.resolution
    # patch row step = -up, patch col step = +right, both expressed in source pixels
    dc_di = -k * (pux * srx + puy * sry)
    dr_di = k * (pux * sux + puy * suy)
    dc_dj = k * (prx * srx + pry * sry)
    dr_dj = -k * (prx * sux + pry * suy)
    affine = np.array([_snap(float(c0)), _snap(float(r0)), dc_di, dc_dj, dr_di, dr_dj])
    return affine, patch_ref


def _snap(x: float, tol: float = 1e-9) -> float:
    """Round to an integer pixel when float noise is all that separates them."""
    r = round(x)
    return float(r) if abs(x - r) < tol else x


def patch_affine(src_ref: GeoRef, center: WorldPose, size: int) -> np.ndarray:
    return _patch_affine(src_ref, center, size, src_ref.resolution)[0]


def extract_patch(raster: GeoRaster, center: WorldPose, size_px: int) -> GeoRaster:
    """size_px x size_px patch centered on ``center`` with its heading up.

    Pixels that fall off the source (or onto source holes only) become holes.
    """
    if size_px <= 0:
        raise ValueError(f"patch size must be positive, got {size_px}")
    affine, ref = _patch_affine(raster.georef, center, size_px, raster.georef.resolution)
    src = raster.as_3d()
    observed = (~raster.holes()).astype(np.float64)[:, :, None]
    stacked = np.concatenate([src, observed], axis=2)
    out = kernels.sample_affine(stacked, size_px, size_px, affine)
    holes = out[:, :, -1] <= 0.0
    vals = out[:, :, :-1]
    vals[holes] = 0.0
    if raster.channels == 1:
        vals = vals[:, :, 0]
    return GeoRaster(vals, ref, holes)


def resample_to_resolution(raster: GeoRaster, new_res: float) -> GeoRaster:
    """Bilinear resample covering the same extent; dimensions round down.

    The output's first pixel center coincides with the input's.
    """
    if not new_res > 0:
        raise ValueError(f"new resolution must be positive, got {new_res}")
    old = raster.georef
    scale = old.resolution / new_res
    w = int(math.floor((raster.width - 1) * scale + 1e-9)) + 1
    h = int(math.floor((raster.height - 1) * scale + 1e-9)) + 1
    k = new_res / old.resolution
    affine = np.array([0.0, 0.0, 0.0, k, k, 0.0])
    src = raster.as_3d()
    observed = (~raster.holes()).astype(np.float64)[:, :, None]
    out = kernels.sample_affine(np.concatenate([src, observed], axis=2), h, w, affine)
    holes = out[:, :, -1] <= 0.0
    vals = out[:, :, :-1]
    vals[holes] = 0.0
    if raster.channels == 1:
        vals = vals[:, :, 0]
    ref = GeoRef(old.origin_easting, old.origin_northing, new_res, old.up)
    return GeoRaster(vals, ref, holes if raster.hole_mask is not None else None)
