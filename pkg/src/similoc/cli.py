"""Command line entry point: ``similoc <command> [flags] [--config FILE]``.

Exit codes: 0 success, 2 bad arguments, 3 unreadable or malformed input,
4 filter divergence.  Config files hold ``prefix.key = value`` lines with
prefixes world, run, filter, localize, align and simimap; angles are in
radians, lengths in meters.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import particle_filter as pf
from .bev import read_scan
from .config import apply_overrides, load_config
from .errors import InputParseError, SimilocError
from .evaluation import read_trajectory, report
from .georaster import WorldPose
from .matcher import scan_match
from .path_align import AlignConfig, read_path
from .pipeline import DivergenceError, LocalizeConfig, localize, write_estimate, write_steps
from .plot import plot_steps
from .raster_io import load_raster, save_raster
from .sim import (RunSpec, WorldSpec, apply_appearance_shift, generate_run, generate_world, read_odometry,
                  regenerate_scans, write_run_dir)
from .similarity import build_global_simimap

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_DIVERGED = 0, 2, 3, 4


class ScanDir:
    """Scan files ``NNNNNN.txt`` read on demand."""

    def __init__(self, root: Path):
        self.files = sorted(root.glob("*.txt"))

    def __len__(self):
        return len(self.files)

    def __getitem__(self, k):
        return read_scan(self.files[k])


def _config(args) -> dict[str, str]:
    return load_config(args.config) if args.config else {}


def filter_config(cfg: dict[str, str], base: pf.FilterConfig) -> pf.FilterConfig:
    """``filter.*`` keys; ``filter.sigma_*`` go to the motion noise."""
    noise_keys = {k: v for k, v in cfg.items() if k.startswith("filter.sigma_")}
    rest = {k: v for k, v in cfg.items() if k not in noise_keys}
    noise = apply_overrides(base.noise, noise_keys, "filter")
    return dataclasses.replace(apply_overrides(base, rest, "filter"), noise=noise)


def localize_config(cfg: dict[str, str], mode: str | None = None) -> LocalizeConfig:
    base = LocalizeConfig()
    scalar = {k: v for k, v in cfg.items() if k.startswith("localize.")}
    out = apply_overrides(base, scalar, "localize")
    out = dataclasses.replace(out, filter=filter_config(cfg, base.filter),
                              align_cfg=apply_overrides(AlignConfig(), cfg, "align"))
    if mode is not None:
        out = dataclasses.replace(out, mode=mode)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = _config(args)
    wspec = apply_overrides(WorldSpec(), cfg, "world")
    rspec = apply_overrides(RunSpec(), cfg, "run")
    if args.world_seed is not None:
        wspec = dataclasses.replace(wspec, seed=args.world_seed)
    if args.run_seed is not None:
        rspec = dataclasses.replace(rspec, seed=args.run_seed)
    world = generate_world(wspec)
    scan_world = apply_appearance_shift(world, args.shift, args.shift_seed) if args.shift else None
    run = generate_run(world, rspec, scan_world)
    write_run_dir(world, run, args.out, scans=not args.no_scans, shift=args.shift, shift_seed=args.shift_seed)
    print(f"seed world={wspec.seed} run={rspec.seed} frames={len(run.t)} -> {args.out}")
    return EXIT_OK


def cmd_build_simimap(args) -> int:
    cfg = _config(args)
    keys = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("simimap.")}
    known = {"sample_interval": float, "patch_px": int, "tau_new": float, "eta": float, "k_max": int}
    params = {}
    for k, v in keys.items():
        if k not in known:
            raise InputParseError(f"unknown config key 'simimap.{k}'")
        try:
            params[k] = known[k](v)
        except ValueError:
            raise InputParseError(f"config key 'simimap.{k}': cannot read {v!r}") from None
    sat = load_raster(args.satellite)
    path = read_path(args.path)
    sim = build_global_simimap(sat, path.points, **params)
    save_raster(sim, args.out)
    covered = ~sim.holes()
    print(f"wrote {args.out} ({sim.width}x{sim.height}, {covered.mean():.1%} covered)")
    return EXIT_OK


def _run_inputs(run_dir: Path):
    _, deltas = read_odometry(run_dir / "odometry.csv")
    if (run_dir / "scans").is_dir():
        scans = ScanDir(run_dir / "scans")
    elif (run_dir / "manifest.cfg").exists():
        scans = regenerate_scans(load_config(run_dir / "manifest.cfg"))
    else:
        raise InputParseError(f"{run_dir}: neither scans/ nor manifest.cfg present")
    gt = read_trajectory(run_dir / "gt.csv") if (run_dir / "gt.csv").exists() else None
    path = read_path(run_dir / "path.csv") if (run_dir / "path.csv").exists() else None
    return scans, deltas, gt, path


def cmd_localize(args) -> int:
    cfg = _config(args)
    lcfg = localize_config(cfg, args.mode)
    if args.coarse_init:
        lcfg = dataclasses.replace(lcfg, coarse_init=True)
    run_dir = Path(args.run)
    scans, deltas, gt, path = _run_inputs(run_dir)
    if len(scans) == 0:
        raise InputParseError(f"{run_dir}: no scans")
    if lcfg.mode == "similarity":
        if args.simimap is None:
            raise InputParseError("similarity mode needs --simimap")
        gmap = load_raster(args.simimap)
    else:
        gmap = load_raster(args.satellite or run_dir / "satellite.ppm")
    prior = scans[0].pose
    if args.prior:
        prior = WorldPose(*args.prior)
    gt_poses = None
    if gt is not None and gt.heading is not None and len(gt) == len(scans):
        gt_poses = np.column_stack([gt.xy, gt.heading])

    def progress(k, rec):
        if args.verbose and k % 500 == 0:
            print(f"frame {k}/{len(scans)} est=({rec.estimate.easting:.2f}, {rec.estimate.northing:.2f})",
                  file=sys.stderr)

    res = localize(scans, deltas, gmap, None if args.no_align else path, prior, lcfg, gt_poses, progress)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_estimate(res, out / "est.csv")
    write_steps(res.records, out / "steps.csv")
    line = f"frames={len(res.records)} updates={res.updates} seconds={res.seconds:.1f} fps={res.fps:.1f}"
    if gt is not None:
        line += " " + report(res.estimate, gt)
    print(line)
    return EXIT_OK


def cmd_eval(args) -> int:
    est = read_trajectory(args.est)
    gt = read_trajectory(args.gt)
    try:
        print(report(est, gt, args.tol))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_match(args) -> int:
    bev = load_raster(args.bev)
    gmap = load_raster(args.simimap)
    if bev.channels != gmap.channels:
        raise InputParseError(f"BEV has {bev.channels} channels, map has {gmap.channels}")
    e, n, h = args.center
    span = math.radians(args.heading_range)
    k = int(math.floor(span / math.radians(args.heading_step) + 1e-9))
    heads = h + np.arange(-k, k + 1) * math.radians(args.heading_step)
    r = scan_match(bev, gmap, WorldPose(e, n, h), args.radius, args.step, heads, args.method)
    print(f"pose {r.pose.easting:.3f} {r.pose.northing:.3f} {r.pose.heading:.6f} "
          f"score {r.score:.6f} second {r.second_best_score:.6f}")
    return EXIT_OK


def cmd_plot(args) -> int:
    plot_steps(args.steps, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _triple(text: str):
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected 'easting,northing,heading'")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="similoc", description="Road-similarity map localization.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="key = value config file")
        sp.set_defaults(fn=fn)
        return sp

    s = add("simulate", cmd_simulate, "generate a synthetic world and drive")
    s.add_argument("--out", required=True)
    s.add_argument("--world-seed", type=int)
    s.add_argument("--run-seed", type=int)
    s.add_argument("--shift", choices=["seasonal", "night"], help="recolor the world the scans see")
    s.add_argument("--shift-seed", type=int, default=0)
    s.add_argument("--no-scans", action="store_true", help="write a manifest instead of scan files")

    s = add("build-simimap", cmd_build_simimap, "precompute the global road similarity map")
    s.add_argument("--satellite", required=True)
    s.add_argument("--path", required=True)
    s.add_argument("--out", required=True)

    s = add("localize", cmd_localize, "run the particle filter over a run directory")
    s.add_argument("--run", required=True)
    s.add_argument("--simimap")
    s.add_argument("--satellite", help="color map for --mode rgb (default: the run's satellite.ppm)")
    s.add_argument("--mode", choices=["similarity", "rgb"])
    s.add_argument("--out", required=True)
    s.add_argument("--prior", type=_triple, help="initial pose e,n,heading (default: first scan pose)")
    s.add_argument("--coarse-init", action="store_true")
    s.add_argument("--no-align", action="store_true")
    s.add_argument("-v", "--verbose", action="store_true")

    s = add("eval", cmd_eval, "ATE and LPE of an estimate against ground truth")
    s.add_argument("--est", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--tol", type=float, default=0.05, help="time pairing tolerance (s)")

    s = add("match", cmd_match, "match one BEV raster against the global map")
    s.add_argument("--bev", required=True)
    s.add_argument("--simimap", required=True)
    s.add_argument("--center", type=_triple, required=True)
    s.add_argument("--radius", type=float, default=50.0)
    s.add_argument("--step", type=float, default=0.5)
    s.add_argument("--heading-range", type=float, default=2.0, help="degrees")
    s.add_argument("--heading-step", type=float, default=0.5, help="degrees")
    s.add_argument("--method", choices=["auto", "direct", "fft"], default="auto")

    s = add("plot", cmd_plot, "SVG of ground truth, odometry and estimate")
    s.add_argument("--steps", required=True)
    s.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SimilocError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
