"""The online localization loop.

Per frame: add the scan to the sliding point window and integrate odometry.
Every ``update_every`` frames the window is rasterized into a BEV around the
odometry pose, projected into road similarity (or kept as raw color in
``rgb`` mode), and one filter step runs with the odometry accumulated since
the previous one.  At most every ``align_every`` frames the recent estimated
trajectory is registered against the planned path; an accepted correction
moves the estimate and the whole particle set.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import particle_filter as pf
from .bev import PointAccumulator, ScanFrame, rasterize_bev
from .errors import SimilocError
from .evaluation import Trajectory, write_trajectory
from .georaster import GeoRaster, WorldPose, wrap_angle
from .matcher import scan_match
from .path_align import AlignConfig, PlannedPath, refine
from .similarity import (DEFAULT_DIM, PrototypeSet, embed_default, sample_traversability_vectors,
                         similarity_map, update_prototypes)


class DivergenceError(SimilocError):
    """The filter stayed degenerate for too many consecutive updates."""


@dataclass(frozen=True)
class LocalizeConfig:
    mode: str = "similarity"
    bev_size: int = 500
    bev_res: float = 0.2
    window_frames: int = 25
    update_every: int = 20
    min_frames: int = 10
    align_every: int = 100
    align_window: float = 150.0
    align: bool = True
    align_min_gain: float = 0.15
    coarse_init: bool = False
    coarse_radius: float = 50.0
    coarse_step: float = 0.5
    coarse_heading_range: float = math.radians(2.0)
    coarse_heading_step: float = math.radians(0.5)
    tau_new: float = 0.85
    eta: float = 0.05
    k_max: int = 4
    max_degenerate: int = 100
    filter: pf.FilterConfig = field(default_factory=lambda: pf.FilterConfig(motion_frame="body"))
    align_cfg: AlignConfig = field(default_factory=AlignConfig)

    def __post_init__(self):
        if self.mode not in ("similarity", "rgb"):
            raise ValueError(f"mode must be 'similarity' or 'rgb', got {self.mode!r}")
        if self.update_every < 1 or self.window_frames < 1:
            raise ValueError("update_every and window_frames must be >= 1")
        if self.bev_size * self.bev_res / 2 < self.coarse_radius - 1e-9 and self.coarse_init:
            raise ValueError("coarse search radius exceeds the BEV half-extent")


@dataclass(frozen=True)
class StepRecord:
    t: float
    odom: WorldPose
    estimate: WorldPose
    gt: WorldPose | None
    neff: float
    best_ncc: float
    aligned: bool

    header = "t,odom_e,odom_n,odom_h,est_e,est_n,est_h,gt_e,gt_n,gt_h,neff,best_ncc,aligned"

    def csv_row(self) -> str:
        g = self.gt
        gvals = (g.easting, g.northing, g.heading) if g is not None else (math.nan,) * 3
        vals = (self.t, *self._p(self.odom), *self._p(self.estimate), *gvals, self.neff, self.best_ncc)
        return ",".join(repr(float(v)) for v in vals) + f",{int(self.aligned)}"

    @staticmethod
    def _p(p: WorldPose):
        return p.easting, p.northing, p.heading


@dataclass
class LocalizeResult:
    records: list[StepRecord]
    seconds: float
    updates: int

    @property
    def estimate(self) -> Trajectory:
        return Trajectory.from_poses([r.t for r in self.records], [r.estimate for r in self.records])

    @property
    def odometry(self) -> Trajectory:
        return Trajectory.from_poses([r.t for r in self.records], [r.odom for r in self.records])

    @property
    def fps(self) -> float:
        return len(self.records) / max(self.seconds, 1e-9)


def body_delta(d: pf.MotionDelta, odom_heading: float) -> pf.MotionDelta:
    """World-frame odometry step expressed in the odometry's own body frame."""
    c, s = math.cos(odom_heading), math.sin(odom_heading)
    return pf.MotionDelta(c * d.dx + s * d.dy, -s * d.dx + c * d.dy, d.dtheta)


def relative_motion(a: WorldPose, b: WorldPose, frame: str) -> pf.MotionDelta:
    """Odometry motion from pose a to pose b, in the world or in a's body frame."""
    dx, dy = b.easting - a.easting, b.northing - a.northing
    dth = wrap_angle(b.heading - a.heading)
    if frame == "world":
        return pf.MotionDelta(dx, dy, dth)
    return body_delta(pf.MotionDelta(dx, dy, dth), a.heading)


def compose(pose: WorldPose, m: pf.MotionDelta, frame: str) -> WorldPose:
    if frame == "world":
        return WorldPose(pose.easting + m.dx, pose.northing + m.dy, pose.heading + m.dtheta)
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return WorldPose(pose.easting + c * m.dx - s * m.dy, pose.northing + s * m.dx + c * m.dy,
                     pose.heading + m.dtheta)


class Localizer:
    """Frame-by-frame driver; ``feed`` one scan and odometry step at a time.

    One filter step (predict, weight, conditional resample, estimate) runs
    every ``update_every`` frames with the odometry accumulated since the
    previous step.  Frames in between report the last filter estimate moved
    by the odometry since then.
    """

    def __init__(self, global_map: GeoRaster, path: PlannedPath | None, prior: WorldPose,
                 cfg: LocalizeConfig = LocalizeConfig()):
        want = 1 if cfg.mode == "similarity" else 3
        if global_map.channels != want:
            raise ValueError(f"{cfg.mode} mode needs a {want}-channel global map, got {global_map.channels}")
        self.map = global_map
        self.path = path
        self.cfg = cfg
        self.acc = PointAccumulator(window_frames=cfg.window_frames)
        self.protos = PrototypeSet(DEFAULT_DIM, tau_new=cfg.tau_new, eta=cfg.eta, k_max=cfg.k_max)
        self.prior = prior
        self.ps: pf.ParticleSet | None = None
        self.frame = 0
        self.updates = 0
        self.degenerate_run = 0
        self.history: list[tuple[float, float]] = []
        self.odom_hist: list[WorldPose] = []
        self.odom: WorldPose | None = None
        # odometry and filter estimate at the last filter step
        self.anchor_odom: WorldPose | None = None
        self.anchor_est: WorldPose = prior
        self.last_align = 0
        self.neff = math.nan

    def _bev(self, odom: WorldPose) -> GeoRaster:
        color = rasterize_bev(self.acc, odom, self.cfg.bev_size, self.cfg.bev_res)
        if self.cfg.mode == "rgb":
            return color
        fm = embed_default(color)
        recent = self.odom_hist[-self.cfg.window_frames:]
        self.protos = update_prototypes(self.protos, sample_traversability_vectors(fm, recent))
        if len(self.protos) == 0:
            return color.with_values(np.zeros(color.shape), color.holes())
        return similarity_map(fm, self.protos)

    def _coarse(self, bev: GeoRaster, center: WorldPose) -> WorldPose:
        c = self.cfg
        n = int(math.floor(c.coarse_heading_range / c.coarse_heading_step + 1e-9))
        heads = center.heading + np.arange(-n, n + 1) * c.coarse_heading_step
        return scan_match(bev, self.map, center, c.coarse_radius, c.coarse_step, heads).pose

    def _filter_step(self, bev: GeoRaster) -> float:
        cfg = self.cfg
        frame = cfg.filter.motion_frame
        self.ps = pf.predict(self.ps, relative_motion(self.anchor_odom, self.odom, frame),
                             cfg.filter.noise, frame)
        self.ps = pf.update_weights(self.ps, bev, self.map)
        self.updates += 1
        self.degenerate_run = self.degenerate_run + 1 if self.ps.degenerate else 0
        if self.degenerate_run > cfg.max_degenerate:
            raise DivergenceError(f"frame {self.frame}: filter degenerate for "
                                  f"{self.degenerate_run} consecutive updates")
        if pf.effective_count(self.ps) < cfg.filter.neff_threshold * len(self.ps):
            self.ps = pf.resample(self.ps)
        self.neff = pf.effective_count(self.ps)
        self.anchor_odom = self.odom
        self.anchor_est = pf.estimate_pose(self.ps)
        return float(np.max(self.ps.last_scores))

    def feed(self, scan: ScanFrame, delta: pf.MotionDelta | None) -> StepRecord:
        cfg = self.cfg
        if self.odom is None:
            self.odom = scan.pose
            self.anchor_odom = scan.pose
        elif delta is not None:
            self.odom = WorldPose(self.odom.easting + delta.dx, self.odom.northing + delta.dy,
                                  self.odom.heading + delta.dtheta)
        self.acc.add(scan)
        self.odom_hist.append(scan.pose)
        if len(self.odom_hist) > 4 * cfg.window_frames:
            del self.odom_hist[:-cfg.window_frames]

        best = math.nan
        aligned = False
        ready = len(self.acc) >= cfg.min_frames
        if self.ps is None and (not cfg.coarse_init or ready):
            start = compose(self.anchor_est, relative_motion(self.anchor_odom, self.odom, cfg.filter.motion_frame),
                            cfg.filter.motion_frame)
            if cfg.coarse_init:
                start = self._coarse(self._bev(scan.pose), start)
            self.ps = pf.initialize(start, cfg.filter)
            self.anchor_odom, self.anchor_est = self.odom, start
        elif self.ps is not None and ready and self.frame % cfg.update_every == 0:
            best = self._filter_step(self._bev(scan.pose))
            if (cfg.align and self.path is not None
                    and self.frame - self.last_align >= cfg.align_every):
                self.last_align = self.frame
                aligned = self._align()
        est = compose(self.anchor_est, relative_motion(self.anchor_odom, self.odom, cfg.filter.motion_frame),
                      cfg.filter.motion_frame)
        self.history.append((est.easting, est.northing))
        self.frame += 1
        return StepRecord(scan.timestamp, self.odom, est, None, self.neff, best, aligned)

    def _align(self) -> bool:
        est = self.anchor_est
        xy = np.array(self.history + [(est.easting, est.northing)])
        seg = np.hypot(*np.diff(xy, axis=0).T)
        back = np.cumsum(seg[::-1])
        k = int(np.searchsorted(back, self.cfg.align_window))
        recent = xy[max(0, len(xy) - 2 - k):]
        r = refine(est, recent, self.path, self.cfg.align_cfg)
        # a trajectory already lying on the path gains nothing but noise
        if not r.applied or r.transform.overlap_score - r.baseline_score < self.cfg.align_min_gain:
            return False
        self.ps = pf.shift_particles(self.ps, est, r.transform.rotation, r.transform.translation)
        self.anchor_est = r.pose
        return True


def localize(scans: Sequence[ScanFrame], deltas: Sequence[pf.MotionDelta], global_map: GeoRaster,
             path: PlannedPath | None, prior: WorldPose, cfg: LocalizeConfig = LocalizeConfig(),
             gt: np.ndarray | None = None, progress=None) -> LocalizeResult:
    """Run the loop over a whole drive.

    ``deltas[k-1]`` moves frame k-1 to frame k.  ``gt`` (N, 3) is only copied
    into the step records.
    """
    if len(deltas) != max(len(scans) - 1, 0):
        raise ValueError(f"{len(scans)} scans need {len(scans) - 1} odometry steps, got {len(deltas)}")
    loc = Localizer(global_map, path, prior, cfg)
    records = []
    t0 = time.perf_counter()
    for k in range(len(scans)):
        try:
            rec = loc.feed(scans[k], deltas[k - 1] if k > 0 else None)
        except SimilocError as exc:
            if not isinstance(exc, DivergenceError):
                exc.args = (f"frame {k}: {exc}",)
            raise
        if gt is not None:
            rec = StepRecord(rec.t, rec.odom, rec.estimate, WorldPose(*gt[k]), rec.neff, rec.best_ncc, rec.aligned)
        records.append(rec)
        if progress is not None:
            progress(k, rec)
    return LocalizeResult(records, time.perf_counter() - t0, loc.updates)


def write_steps(records: Sequence[StepRecord], path) -> None:
    with open(Path(path), "w") as f:
        f.write(StepRecord.header + "\n")
        for r in records:
            f.write(r.csv_row() + "\n")


def write_estimate(result: LocalizeResult, path) -> None:
    write_trajectory(result.estimate, path)
