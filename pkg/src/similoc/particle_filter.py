"""Monte-Carlo pose filter driven by NCC scores against a global map.

One step is: move every particle by the odometry increment plus Gaussian
noise, multiply each weight by the NCC of the current BEV against the map
patch under that particle, renormalize, resample (systematic) when the
effective sample size 1/sum(w^2) drops below a fraction of N, and report the
weighted mean pose.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError
from .georaster import GeoRaster, WorldPose, wrap_angles
from .matcher import ScanMatchResult, pose_scores


class HeadingAmbiguityWarning(UserWarning):
    """Particle headings cancel out; the max-weight particle's heading was used."""


@dataclass(frozen=True)
class MotionDelta:
    dx: float
    dy: float
    dtheta: float

    def __post_init__(self):
        for name in ("dx", "dy", "dtheta"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass(frozen=True)
class NoiseParams:
    sigma_x: float = 0.15
    sigma_y: float = 0.15
    sigma_theta: float = math.radians(0.3)

    def __post_init__(self):
        if min(self.sigma_x, self.sigma_y, self.sigma_theta) < 0:
            raise ValueError("noise sigmas must be >= 0")


@dataclass(frozen=True)
class FilterConfig:
    n: int = 100
    init_radius: float = 5.0
    init_heading_range: float = math.radians(1.0)
    neff_threshold: float = 0.5
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0
    # "world": deltas are added as-is; "body": (dx, dy) is forward/left in
    # each particle's own frame
    motion_frame: str = "world"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("particle count must be >= 1")
        if not self.init_radius > 0:
            raise ValueError("init_radius must be > 0")
        if not 0 < self.neff_threshold <= 1:
            raise ValueError("neff_threshold must lie in (0, 1]")
        if self.motion_frame not in ("world", "body"):
            raise ValueError(f"unknown motion frame {self.motion_frame!r}")


@dataclass(eq=False)
class ParticleSet:
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    w: np.ndarray
    rng: np.random.Generator
    t: int = 0
    degenerate: bool = False
    last_scores: np.ndarray | None = None

    def __len__(self) -> int:
        return self.x.shape[0]

    def poses(self) -> np.ndarray:
        return np.stack([self.x, self.y, self.theta], axis=1)

    def copy(self, **changes) -> "ParticleSet":
        base = dict(x=self.x.copy(), y=self.y.copy(), theta=self.theta.copy(), w=self.w.copy())
        base.update(changes)
        return replace(self, **base)


def initialize(prior, cfg: FilterConfig) -> ParticleSet:
    """Uniform over a disk of ``init_radius`` and +-``init_heading_range``."""
    if isinstance(prior, ScanMatchResult):
        prior = prior.pose
    rng = np.random.default_rng(cfg.seed)
    r = cfg.init_radius * np.sqrt(rng.uniform(0.0, 1.0, cfg.n))
    phi = rng.uniform(0.0, 2.0 * math.pi, cfg.n)
    dth = rng.uniform(-cfg.init_heading_range, cfg.init_heading_range, cfg.n)
    return ParticleSet(
        x=prior.easting + r * np.cos(phi),
        y=prior.northing + r * np.sin(phi),
        theta=wrap_angles(prior.heading + dth),
        w=np.full(cfg.n, 1.0 / cfg.n),
        rng=rng,
    )


def predict(ps: ParticleSet, delta: MotionDelta, noise: NoiseParams, frame: str = "world") -> ParticleSet:
    n = len(ps)
    eps = ps.rng.standard_normal((3, n))
    if frame == "world":
        mx = np.full(n, delta.dx)
        my = np.full(n, delta.dy)
    elif frame == "body":
        c, s = np.cos(ps.theta), np.sin(ps.theta)
        mx = c * delta.dx - s * delta.dy
        my = s * delta.dx + c * delta.dy
    else:
        raise ValueError(f"unknown motion frame {frame!r}")
    return ps.copy(
        x=ps.x + mx + noise.sigma_x * eps[0],
        y=ps.y + my + noise.sigma_y * eps[1],
        theta=wrap_angles(ps.theta + delta.dtheta + noise.sigma_theta * eps[2]),
        t=ps.t + 1,
    )


def update_weights(ps: ParticleSet, bev_sim: GeoRaster, global_sim: GeoRaster) -> ParticleSet:
    """w_i <- w_i * NCC(bev, patch under particle i), then normalize.

    A zero weight sum resets to uniform and sets ``degenerate``.
    """
    if bev_sim.height != bev_sim.width:
        raise DimensionMismatchError(f"bev must be square, got {bev_sim.height}x{bev_sim.width}")
    if bev_sim.channels != global_sim.channels:
        raise DimensionMismatchError(
            f"bev has {bev_sim.channels} channels, global map has {global_sim.channels}")
    scores = pose_scores(bev_sim, global_sim, ps.poses())
    raw = ps.w * np.maximum(scores, 0.0)
    total = float(np.sum(raw))
    n = len(ps)
    if total > 0.0 and math.isfinite(total):
        w = raw / total
        degenerate = False
    else:
        w = np.full(n, 1.0 / n)
        degenerate = True
    return ps.copy(w=w, degenerate=degenerate, last_scores=scores)


def effective_count(ps: ParticleSet) -> float:
    return 1.0 / float(np.sum(ps.w * ps.w))


def systematic_indices(w: np.ndarray, u0: float) -> np.ndarray:
    """Indices picked by the comb u0 + k/N, k = 0..N-1, with u0 in [0, 1/N)."""
    n = w.shape[0]
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    positions = u0 + np.arange(n) / n
    return np.minimum(np.searchsorted(cdf, positions, side="right"), n - 1)


def resample(ps: ParticleSet) -> ParticleSet:
    n = len(ps)
    idx = systematic_indices(ps.w, float(ps.rng.uniform(0.0, 1.0 / n)))
    return ps.copy(x=ps.x[idx], y=ps.y[idx], theta=ps.theta[idx], w=np.full(n, 1.0 / n))


def estimate_pose(ps: ParticleSet) -> WorldPose:
    """Weighted mean position and circular-mean heading."""
    x = float(np.sum(ps.w * ps.x))
    y = float(np.sum(ps.w * ps.y))
    s = float(np.sum(ps.w * np.sin(ps.theta)))
    c = float(np.sum(ps.w * np.cos(ps.theta)))
    if math.hypot(s, c) < 1e-12:
        warnings.warn("particle headings cancel; using the max-weight particle",
                      HeadingAmbiguityWarning, stacklevel=2)
        heading = float(ps.theta[int(np.argmax(ps.w))])
    else:
        heading = math.atan2(s, c)
    return WorldPose(x, y, heading)


def step(ps: ParticleSet, delta: MotionDelta, bev_sim: GeoRaster, global_sim: GeoRaster,
         cfg: FilterConfig) -> tuple[ParticleSet, WorldPose]:
    ps = predict(ps, delta, cfg.noise, cfg.motion_frame)
    ps = update_weights(ps, bev_sim, global_sim)
    if effective_count(ps) < cfg.neff_threshold * len(ps):
        ps = resample(ps)
    return ps, estimate_pose(ps)


def shift_particles(ps: ParticleSet, pivot: WorldPose, rotation: float,
                    translation: tuple[float, float]) -> ParticleSet:
    """Rigidly move the whole set: rotate about ``pivot`` then translate."""
    c, s = math.cos(rotation), math.sin(rotation)
    dx = ps.x - pivot.easting
    dy = ps.y - pivot.northing
    return ps.copy(
        x=pivot.easting + c * dx - s * dy + translation[0],
        y=pivot.northing + s * dx + c * dy + translation[1],
        theta=wrap_angles(ps.theta + rotation),
    )


def dump_csv(ps: ParticleSet, path) -> None:
    with open(Path(path), "w") as f:
        f.write("i,x,y,theta,w\n")
        for i in range(len(ps)):
            f.write(f"{i},{float(ps.x[i])!r},{float(ps.y[i])!r},{float(ps.theta[i])!r},{float(ps.w[i])!r}\n")
