"""Synthetic worlds and drives.

A world is a north-up color "satellite" raster with one closed road loop
painted on textured terrain.  A run drives the loop at constant speed and
yields ground truth, drifting odometry and colored ground scans.  Scans are
produced lazily from per-frame sub-seeds so a 4000-frame run never has to
sit in memory or on disk.

Everything is a pure function of the seeds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .bev import ScanFrame
from .config import apply_overrides
from .errors import InputParseError
from .evaluation import Trajectory, write_trajectory
from .georaster import GeoRaster, GeoRef, WorldPose, world_to_pixel, wrap_angle
from .particle_filter import MotionDelta
from .path_align import PlannedPath, write_path
from .raster_io import save_raster


class InfeasibleWorldError(ValueError):
    """The requested road geometry cannot be built inside the world."""


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 42
    extent: tuple[float, float] = (400.0, 400.0)
    resolution: float = 0.2
    path_length: float = 2000.0
    columns: int = 6
    margin: float = 25.0
    jitter: float = 10.0
    waypoint_spacing: float = 40.0
    min_turn_radius: float = 12.0
    road_width: float = 4.0
    road_color: tuple[float, float, float] = (0.72, 0.70, 0.66)
    terrain_color: tuple[float, float, float] = (0.30, 0.36, 0.22)
    road_noise: float = 0.02
    terrain_noise: float = 0.12
    terrain_relief: float = 0.5
    path_spacing: float = 1.0

    def shape(self) -> tuple[int, int]:
        w = self.extent[0] / self.resolution
        h = self.extent[1] / self.resolution
        if abs(w - round(w)) > 1e-6 or abs(h - round(h)) > 1e-6:
            raise ValueError(f"extent {self.extent} is not a whole number of {self.resolution} m pixels")
        if self.road_width < 2 * self.resolution:
            raise ValueError("road must be at least 2 px wide")
        return int(round(h)), int(round(w))


@dataclass(frozen=True)
class RunSpec:
    seed: int = 7
    speed: float = 5.0
    rate: float = 10.0
    scan_range: float = 40.0
    points_per_scan: int = 20000
    occlusion_sectors: int = 1
    occlusion_width: float = math.radians(60.0)
    bias: tuple[float, float, float] = (0.002, 0.001, math.radians(0.005))
    noise: tuple[float, float, float] = (0.002, 0.002, math.radians(0.005))
    color_noise: float = 0.01
    laps: float = 1.0

    def __post_init__(self):
        if min(self.speed, self.rate, self.scan_range, self.laps) <= 0 or self.points_per_scan < 1:
            raise ValueError("speed, rate, scan range, laps and points per scan must be positive")


@dataclass(frozen=True, eq=False)
class SyntheticWorld:
    spec: WorldSpec
    satellite: GeoRaster
    road_mask: GeoRaster
    planned_path: PlannedPath
    relief: np.ndarray  # terrain height per pixel, meters
    spline: tuple = field(repr=False, default=())  # (CubicSpline x, CubicSpline y, period)


# ---------------------------------------------------------------------------
# geometry


def _meander_waypoints(spec: WorldSpec, top: float, rng_state: dict) -> np.ndarray:
    """Closed boustrophedon: up/down columns, U-turns, return leg along the bottom."""
    rng = np.random.default_rng(rng_state["seed"])
    w, _ = spec.extent
    m = spec.columns
    if m < 2 or m % 2:
        raise InfeasibleWorldError("columns must be an even number >= 2")
    x0, x1 = spec.margin, w - spec.margin
    pitch = (x1 - x0) / (m - 0.5)
    turn = pitch / 2
    y_ret = spec.margin
    y_low = y_ret + 2 * turn
    if top - turn <= y_low + spec.waypoint_spacing:
        raise InfeasibleWorldError("world too small for the requested column layout")
    cols = x0 + turn / 2 + pitch * np.arange(m)
    pts = []
    n_seg = max(2, int(round((top - turn - y_low) / spec.waypoint_spacing)))
    ys = np.linspace(y_low, top - turn, n_seg + 1)
    for k, cx in enumerate(cols):
        yk = ys if k % 2 == 0 else ys[::-1]
        jit = rng.uniform(-spec.jitter, spec.jitter, yk.size)
        jit[[0, -1]] = 0.0
        if k == 0:
            pts.append((cx, y_ret + turn))
        pts.extend(zip(cx + jit, yk))
        if k < m - 1:
            # U-turn to the next column: apex between the two columns
            apex = top if k % 2 == 0 else y_low - turn
            pts.append((cx + turn, apex))
    # return leg: down to the bottom corridor and back west
    pts.append((cols[-1] - 0.3 * turn, y_ret + 0.3 * turn))
    xs = np.linspace(cols[-1] - turn, cols[0] + turn, max(2, int((m - 1) * pitch / spec.waypoint_spacing)))
    pts.extend((x, y_ret) for x in xs)
    pts.append((cols[0] + 0.3 * turn, y_ret + 0.3 * turn))
    return np.array(pts)


def _closed_spline(waypoints: np.ndarray):
    closed = np.vstack([waypoints, waypoints[:1]])
    u = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(closed, axis=0).T))])
    sx = CubicSpline(u, closed[:, 0], bc_type="periodic")
    sy = CubicSpline(u, closed[:, 1], bc_type="periodic")
    return sx, sy, float(u[-1])


def _dense(sx, sy, period: float, step: float = 0.1):
    u = np.arange(0.0, period, step)
    x, y = sx(u), sy(u)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
    return u, x, y, s


def _curve_length(sx, sy, period) -> float:
    u, x, y, s = _dense(sx, sy, period)
    return float(s[-1] + math.hypot(x[0] - x[-1], y[0] - y[-1]))


def _min_turn_radius(sx, sy, period) -> float:
    u = np.arange(0.0, period, 0.25)
    dx, dy = sx(u, 1), sy(u, 1)
    ddx, ddy = sx(u, 2), sy(u, 2)
    k = np.abs(dx * ddy - dy * ddx) / np.maximum(np.hypot(dx, dy) ** 3, 1e-12)
    return float(1.0 / max(k.max(), 1e-12))


def _self_clearance(sx, sy, period, min_gap: float) -> bool:
    """No two parts of the loop more than ``3*min_gap`` apart along it come within ``min_gap``."""
    u, x, y, s = _dense(sx, sy, period, step=0.5)
    pairs = cKDTree(np.stack([x, y], 1)).query_pairs(min_gap, output_type="ndarray")
    if pairs.size == 0:
        return True
    d = np.abs(s[pairs[:, 0]] - s[pairs[:, 1]])
    d = np.minimum(d, s[-1] - d)
    return bool(np.all(d < 3 * min_gap))


def _layout(spec: WorldSpec):
    """Periodic spline whose length matches ``spec.path_length``.

    Column height is bisected to hit the length; jitter draws are retried
    until the turn-radius and self-clearance bounds hold.
    """
    top_max = spec.extent[1] - spec.margin
    _meander_waypoints(spec, top_max, {"seed": spec.seed})  # surfaces layout errors as-is
    for attempt in range(50):
        seed = {"seed": [spec.seed, attempt]}

        def build(top):
            try:
                sp = _closed_spline(_meander_waypoints(spec, top, seed))
            except InfeasibleWorldError:
                return 0.0, None
            return _curve_length(*sp), sp

        longest, sp = build(top_max)
        if longest < spec.path_length:
            raise InfeasibleWorldError(
                f"longest loop that fits is {longest:.0f} m < requested {spec.path_length:.0f} m")
        lo, hi = spec.margin, top_max
        while hi - lo > 1e-3:
            mid = 0.5 * (lo + hi)
            length, cand = build(mid)
            if length < spec.path_length:
                lo = mid
            else:
                hi, sp = mid, cand
        got = _curve_length(*sp)
        if abs(got - spec.path_length) > 0.01 * spec.path_length:
            raise InfeasibleWorldError(
                f"shortest loop for this layout is {got:.0f} m > requested {spec.path_length:.0f} m")
        if _min_turn_radius(*sp) >= spec.min_turn_radius and _self_clearance(*sp, 3 * spec.road_width):
            return sp
    raise InfeasibleWorldError(
        f"no loop met the {spec.min_turn_radius} m turn-radius bound after 50 attempts")


# ---------------------------------------------------------------------------
# rasters


def _noise_field(rng: np.random.Generator, shape, scales=(1.0, 4.0, 16.0), weights=(0.5, 0.3, 0.2)):
    out = np.zeros(shape)
    for s, w in zip(scales, weights):
        f = rng.standard_normal(shape)
        if s > 1:
            f = ndimage.gaussian_filter(f, s, mode="wrap")
        f /= max(f.std(), 1e-12)
        out += w * f
    return out / math.sqrt(sum(w * w for w in weights))


def world_georef(spec: WorldSpec) -> GeoRef:
    h, _ = spec.shape()
    r = spec.resolution
    return GeoRef(r / 2, h * r - r / 2, r)


def segment_distance(px: np.ndarray, py: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points to segment a-b."""
    d = b - a
    L2 = float(d @ d)
    t = np.clip(((px - a[0]) * d[0] + (py - a[1]) * d[1]) / L2, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * d[0]), py - (a[1] + t * d[1]))


def polyline_distance_field(points: np.ndarray, georef: GeoRef, shape, reach: float) -> np.ndarray:
    """Exact distance to the polyline for pixels within ``reach``; +inf beyond."""
    h, w = shape
    res = georef.resolution
    out = np.full(shape, np.inf)
    pad = reach + res
    for a, b in zip(points[:-1], points[1:]):
        c_lo, r_hi = world_to_pixel(georef, min(a[0], b[0]) - pad, min(a[1], b[1]) - pad)
        c_hi, r_lo = world_to_pixel(georef, max(a[0], b[0]) + pad, max(a[1], b[1]) + pad)
        c0, c1 = max(int(math.floor(c_lo)), 0), min(int(math.ceil(c_hi)), w - 1)
        r0, r1 = max(int(math.floor(r_lo)), 0), min(int(math.ceil(r_hi)), h - 1)
        if c0 > c1 or r0 > r1:
            continue
        cc, rr = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
        ex = georef.origin_easting + cc * res
        ny = georef.origin_northing - rr * res
        d = segment_distance(ex, ny, a, b)
        view = out[r0:r1 + 1, c0:c1 + 1]
        np.minimum(view, d, out=view)
    return out


def generate_world(spec: WorldSpec = WorldSpec()) -> SyntheticWorld:
    shape = spec.shape()
    sx, sy, period = _layout(spec)
    u, x, y, s = _dense(sx, sy, period)
    total = s[-1] + math.hypot(x[0] - x[-1], y[0] - y[-1])
    n = max(3, int(round(total / spec.path_spacing)))
    sk = np.linspace(0.0, s[-1], n)
    pts = np.stack([np.interp(sk, s, x), np.interp(sk, s, y)], 1)
    pts = np.vstack([pts, pts[:1]])  # close the loop
    path = PlannedPath(pts)

    ref = world_georef(spec)
    dist = polyline_distance_field(path.points, ref, shape, spec.road_width)
    road = dist <= spec.road_width / 2

    rng = np.random.default_rng([spec.seed, 1])
    terrain_tex = _noise_field(rng, shape)
    road_tex = rng.standard_normal(shape)
    tint = rng.standard_normal((3,)) * 0.02
    img = np.empty(shape + (3,))
    for ch in range(3):
        t = spec.terrain_color[ch] + tint[ch] + spec.terrain_noise * terrain_tex
        r = spec.road_color[ch] + spec.road_noise * road_tex
        img[..., ch] = np.where(road, r, t)
    np.clip(img, 0.0, 1.0, out=img)
    relief = spec.terrain_relief * _noise_field(rng, shape, scales=(8.0, 32.0), weights=(0.4, 0.6))
    relief = np.where(road, 0.0, np.abs(relief))
    return SyntheticWorld(spec, GeoRaster(img, ref), GeoRaster(road.astype(np.float64), ref),
                          path, relief, (sx, sy, period))


# ---------------------------------------------------------------------------
# appearance shifts


@dataclass(frozen=True)
class SeasonalShift:
    gain: tuple[float, float, float] = (-0.55, -0.45, -0.65)
    offset: tuple[float, float, float] = (0.95, 0.90, 0.95)
    noise_amp: float = 0.08
    noise_scale: float = 40.0


@dataclass(frozen=True)
class NightShift:
    gain: float = 0.5
    noise_amp: float = 0.02


def apply_appearance_shift(world: SyntheticWorld, kind: str, seed: int = 0, params=None) -> SyntheticWorld:
    """Recolor the satellite; geometry untouched.

    seasonal: per-channel affine plus low-frequency noise.
    night: gray luminance times a gain plus pixel noise.
    """
    v = world.satellite.values
    rng = np.random.default_rng([seed, 99])
    if kind == "seasonal":
        p = params or SeasonalShift()
        out = v * np.asarray(p.gain) + np.asarray(p.offset)
        if p.noise_amp > 0:
            lf = ndimage.gaussian_filter(rng.standard_normal(v.shape[:2]), p.noise_scale, mode="wrap")
            lf /= max(lf.std(), 1e-12)
            out = out + p.noise_amp * lf[..., None]
    elif kind == "night":
        p = params or NightShift()
        lum = v @ np.array([0.299, 0.587, 0.114]) * p.gain
        if p.noise_amp > 0:
            lum = lum + p.noise_amp * rng.standard_normal(lum.shape)
        out = np.repeat(lum[..., None], 3, axis=2)
    else:
        raise ValueError(f"unknown appearance shift {kind!r}")
    out = np.clip(out, 0.0, 1.0)
    return replace(world, satellite=world.satellite.with_values(out))


# ---------------------------------------------------------------------------
# runs


def ground_truth(world: SyntheticWorld, run: RunSpec) -> tuple[np.ndarray, np.ndarray]:
    """Timestamps and (N, 3) poses at constant speed along the loop."""
    sx, sy, period = world.spline
    u, x, y, s = _dense(sx, sy, period, step=0.05)
    loop = s[-1] + math.hypot(x[0] - x[-1], y[0] - y[-1])
    ds = run.speed / run.rate
    n = int(math.floor(run.laps * loop / ds))
    sk = np.arange(n) * ds
    uk = np.interp(np.mod(sk, loop), np.append(s, loop), np.append(u, period))
    poses = np.stack([sx(uk), sy(uk), np.arctan2(sy(uk, 1), sx(uk, 1))], 1)
    return np.arange(n) / run.rate, poses


def synthesize_odometry(gt: np.ndarray, run: RunSpec, rng: np.random.Generator):
    """World-frame odometry deltas and the dead-reckoned poses they integrate to.

    Each true body-frame step gets per-meter bias and Gaussian noise, then is
    rotated by the (drifting) odometry heading.
    """
    n = gt.shape[0]
    bx, by, bt = run.bias
    nx, ny, nt = run.noise
    odom = np.empty_like(gt)
    odom[0] = gt[0]
    deltas = []
    noise = rng.standard_normal((max(n - 1, 0), 3))
    for k in range(1, n):
        dxw, dyw = gt[k, 0] - gt[k - 1, 0], gt[k, 1] - gt[k - 1, 1]
        h = gt[k - 1, 2]
        c, s = math.cos(h), math.sin(h)
        fwd, left = c * dxw + s * dyw, -s * dxw + c * dyw
        dth = wrap_angle(gt[k, 2] - gt[k - 1, 2])
        dist = math.hypot(dxw, dyw)
        fwd += bx * dist + nx * noise[k - 1, 0]
        left += by * dist + ny * noise[k - 1, 1]
        dth += bt * dist + nt * noise[k - 1, 2]
        ho = odom[k - 1, 2]
        co, so = math.cos(ho), math.sin(ho)
        d = MotionDelta(co * fwd - so * left, so * fwd + co * left, dth)
        deltas.append(d)
        odom[k] = odom[k - 1, 0] + d.dx, odom[k - 1, 1] + d.dy, wrap_angle(ho + d.dtheta)
    return deltas, odom


def open_arcs(centers, width: float) -> list[tuple[float, float]]:
    """Complement of the blind sectors on [0, 2pi) as sorted (start, end) arcs."""
    two_pi = 2.0 * math.pi
    blocked = []
    for c in centers:
        lo = (c - width / 2) % two_pi
        hi = lo + min(width, two_pi)
        if hi > two_pi:
            blocked += [(lo, two_pi), (0.0, hi - two_pi)]
        else:
            blocked.append((lo, hi))
    blocked.sort()
    arcs, pos = [], 0.0
    for lo, hi in blocked:
        if lo > pos:
            arcs.append((pos, lo))
        pos = max(pos, hi)
    if pos < two_pi:
        arcs.append((pos, two_pi))
    return arcs


class ScanSequence:
    """Lazily generated scans; frame k depends only on (run seed, k)."""

    def __init__(self, world: SyntheticWorld, run: RunSpec, gt: np.ndarray, odom: np.ndarray, t: np.ndarray):
        self.world, self.run, self.gt, self.odom, self.t = world, run, gt, odom, t
        rng = np.random.default_rng([run.seed, 2])
        self.sectors = rng.uniform(-math.pi, math.pi, run.occlusion_sectors)
        self.arcs = open_arcs(self.sectors, run.occlusion_width)
        self._colors = world.satellite.values.reshape(-1, 3)
        self._relief = world.relief.reshape(-1)
        if not self.arcs:
            raise ValueError("occlusion sectors cover the full circle")

    def __len__(self) -> int:
        return self.gt.shape[0]

    def _disk_points(self, rng: np.random.Generator, n: int):
        """n points uniform over the disk minus the blind sectors (sensor frame)."""
        R = self.run.scan_range
        cos_half = math.cos(self.run.occlusion_width / 2)
        dirs = [(math.cos(c), math.sin(c)) for c in self.sectors]
        xs, ys, have = [], [], 0
        while have < n:
            q = (rng.random((2, int(1.5 * (n - have)) + 64)) * 2.0 - 1.0) * R
            x, y = q[0], q[1]
            r = np.hypot(x, y)
            keep = r <= R
            for cx, cy in dirs:
                keep &= x * cx + y * cy < cos_half * r
            xs.append(x[keep])
            ys.append(y[keep])
            have += int(keep.sum())
        return np.concatenate(xs)[:n], np.concatenate(ys)[:n]

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def __getitem__(self, k: int) -> ScanFrame:
        if not 0 <= k < len(self):
            raise IndexError(k)
        run, world = self.run, self.world
        rng = np.random.default_rng([run.seed, 3, k])
        n = run.points_per_scan
        xs, ys = self._disk_points(rng, n)
        e0, n0, h = self.gt[k]
        c, s = math.cos(h), math.sin(h)
        ref = world.satellite.georef
        col, row = world_to_pixel(ref, e0 + c * xs - s * ys, n0 + s * xs + c * ys)
        H, W = world.satellite.shape
        ci = np.clip(np.floor(col + 0.5).astype(np.int64), 0, W - 1)
        ri = np.clip(np.floor(row + 0.5).astype(np.int64), 0, H - 1)
        flat = ri * W + ci
        # uniform noise with the configured standard deviation
        noise = rng.random((n, 3), dtype=np.float32) - np.float32(0.5)
        rgb = np.take(self._colors, flat, axis=0) + (run.color_noise * math.sqrt(12.0)) * noise
        np.clip(rgb, 0.0, 1.0, out=rgb)
        xyz = np.empty((n, 3))
        xyz[:, 0], xyz[:, 1], xyz[:, 2] = xs, ys, np.take(self._relief, flat)
        return ScanFrame(float(self.t[k]), xyz, rgb,
                         WorldPose(*self.odom[k]))


@dataclass(frozen=True, eq=False)
class SyntheticRun:
    spec: RunSpec
    t: np.ndarray
    gt_poses: np.ndarray
    odom_poses: np.ndarray
    deltas: list
    scans: ScanSequence

    @property
    def gt(self) -> Trajectory:
        return Trajectory(self.t, self.gt_poses[:, :2], self.gt_poses[:, 2])

    @property
    def odometry(self) -> Trajectory:
        return Trajectory(self.t, self.odom_poses[:, :2], self.odom_poses[:, 2])


def generate_run(world: SyntheticWorld, run: RunSpec = RunSpec(), scan_world: SyntheticWorld | None = None) -> SyntheticRun:
    """Drive the loop.  ``scan_world`` (e.g. an appearance-shifted copy) colors the scans."""
    t, gt = ground_truth(world, run)
    deltas, odom = synthesize_odometry(gt, run, np.random.default_rng([run.seed, 1]))
    scans = ScanSequence(scan_world or world, run, gt, odom, t)
    return SyntheticRun(run, t, gt, odom, deltas, scans)


# ---------------------------------------------------------------------------
# scenario S1 and the on-disk run directory


def s1_world_spec(**overrides) -> WorldSpec:
    return replace(WorldSpec(), **overrides)


def s1_run_spec(**overrides) -> RunSpec:
    return replace(RunSpec(), **overrides)


def write_odometry(t: np.ndarray, deltas, path) -> None:
    with open(Path(path), "w") as f:
        f.write("t,dx,dy,dtheta\n")
        for tk, d in zip(t[1:], deltas):
            f.write(f"{float(tk)!r},{d.dx!r},{d.dy!r},{d.dtheta!r}\n")


def read_odometry(path) -> tuple[np.ndarray, list[MotionDelta]]:
    """(t, deltas) from a ``t,dx,dy,dtheta`` file; t is the time of the frame each delta ends at."""
    path = Path(path)
    try:
        with open(path) as f:
            header = f.readline().strip().replace(" ", "")
            if header != "t,dx,dy,dtheta":
                raise InputParseError(f"{path}: expected header 't,dx,dy,dtheta', got {header!r}")
            ts, deltas = [], []
            for lineno, line in enumerate(f, start=2):
                if not line.strip():
                    continue
                try:
                    t, dx, dy, dth = (float(v) for v in line.split(","))
                except ValueError:
                    raise InputParseError(f"{path}:{lineno}: bad row {line.strip()!r}") from None
                ts.append(t)
                deltas.append(MotionDelta(dx, dy, dth))
    except OSError as exc:
        raise InputParseError(f"cannot read {path}: {exc.strerror}") from None
    return np.array(ts), deltas


def _manifest_lines(prefix: str, obj) -> list[str]:
    lines = []
    for k, v in asdict(obj).items():
        if isinstance(v, (tuple, list)):
            v = " ".join(repr(float(x)) for x in v)
        lines.append(f"{prefix}.{k} = {v}")
    return lines


def write_run_dir(world: SyntheticWorld, run: SyntheticRun, out, scans: bool = True,
                  shift: str | None = None, shift_seed: int = 0) -> Path:
    """satellite.ppm/.geo, road_mask.pgm, path.csv, odometry.csv, gt.csv, scans/ or manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    save_raster(world.satellite, out / "satellite.ppm")
    save_raster(world.road_mask, out / "road_mask.pgm")
    write_path(world.planned_path, out / "path.csv")
    write_odometry(run.t, run.deltas, out / "odometry.csv")
    write_trajectory(run.gt, out / "gt.csv")
    lines = _manifest_lines("world", world.spec) + _manifest_lines("run", run.spec)
    lines.append(f"shift.kind = {shift or 'none'}")
    lines.append(f"shift.seed = {shift_seed}")
    (out / "manifest.cfg").write_text("\n".join(lines) + "\n")
    if scans:
        from .bev import write_scan
        sd = out / "scans"
        sd.mkdir(exist_ok=True)
        for k, frame in enumerate(run.scans):
            write_scan(frame, sd / f"{k:06d}.txt")
    return out


def specs_from_manifest(cfg: dict[str, str]) -> tuple[WorldSpec, RunSpec, str | None, int]:
    """World and run specs plus (shift kind, shift seed) from manifest keys."""
    world = apply_overrides(WorldSpec(), cfg, "world")
    run = apply_overrides(RunSpec(), cfg, "run")
    kind = cfg.get("shift.kind", "none")
    try:
        seed = int(cfg.get("shift.seed", "0"))
    except ValueError:
        raise InputParseError(f"shift.seed: not an integer: {cfg['shift.seed']!r}") from None
    return world, run, (None if kind == "none" else kind), seed


def regenerate_scans(cfg: dict[str, str]) -> ScanSequence:
    """Rebuild the lazy scan sequence of a run directory written without scans."""
    wspec, rspec, kind, seed = specs_from_manifest(cfg)
    world = generate_world(wspec)
    scan_world = apply_appearance_shift(world, kind, seed) if kind else None
    return generate_run(world, rspec, scan_world).scans
