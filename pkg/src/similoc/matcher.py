"""Normalized correlation between equally sized rasters, and exhaustive
pose scanning of a vehicle-centric raster against a global map.

The score is the plain normalized inner product

    R = sum(G * S) / sqrt(sum(G**2) * sum(S**2))

with no mean subtraction, so zero-valued holes in either raster simply drop
out of the numerator.  R is defined as 0 when either energy is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from . import kernels
from .errors import DegenerateInputError, DimensionMismatchError
from .georaster import GeoRaster, WorldPose, patch_affine, world_to_pixel


def _arr(x) -> np.ndarray:
    return x.values if isinstance(x, GeoRaster) else np.asarray(x, dtype=np.float64)


def _unit_scale(x: np.ndarray) -> np.ndarray:
    m = float(np.max(np.abs(x))) if x.size else 0.0
    if m == 0.0 or not math.isfinite(m):
        return x
    return np.ldexp(x, -math.frexp(m)[1])


def ncc(G, S) -> float:
    g = _arr(G)
    s = _arr(S)
    if g.shape != s.shape:
        raise DimensionMismatchError(f"ncc needs equal shapes, got {g.shape} and {s.shape}")
    # power-of-two rescale is exact and keeps tiny inputs from underflowing
    g = _unit_scale(g)
    s = _unit_scale(s)
    gg = float(np.sum(g * g, dtype=np.float64))
    ss = float(np.sum(s * s, dtype=np.float64))
    if gg == 0.0 or ss == 0.0:
        return 0.0
    r = float(np.sum(g * s, dtype=np.float64)) / math.sqrt(gg * ss)
    return min(max(r, -1.0), 1.0)


@dataclass(frozen=True)
class ScanMatchResult:
    pose: WorldPose
    score: float
    second_best_score: float


def _cropped(S3: np.ndarray, affines: np.ndarray, h: int, w: int):
    """Zero-padded crop of S3 covering every sample of every affine map."""
    corners = np.array([[0, 0], [0, w - 1], [h - 1, 0], [h - 1, w - 1]], dtype=np.float64)
    cols = affines[:, None, 0] + corners[None, :, 0] * affines[:, None, 2] + corners[None, :, 1] * affines[:, None, 3]
    rows = affines[:, None, 1] + corners[None, :, 0] * affines[:, None, 4] + corners[None, :, 1] * affines[:, None, 5]
    c_lo = int(math.floor(cols.min())) - 2
    c_hi = int(math.ceil(cols.max())) + 3
    r_lo = int(math.floor(rows.min())) - 2
    r_hi = int(math.ceil(rows.max())) + 3
    H, W, C = S3.shape
    out = np.zeros((r_hi - r_lo, c_hi - c_lo, C))
    rs, re = max(r_lo, 0), min(r_hi, H)
    cs, ce = max(c_lo, 0), min(c_hi, W)
    if rs < re and cs < ce:
        out[rs - r_lo:re - r_lo, cs - c_lo:ce - c_lo] = S3[rs:re, cs:ce]
    shifted = affines.copy()
    shifted[:, 0] -= c_lo
    shifted[:, 1] -= r_lo
    return out, shifted


def pose_scores(bev, global_map: GeoRaster, poses: np.ndarray) -> np.ndarray:
    """NCC of ``bev`` against the global-map patch at each (e, n, heading) row."""
    G = bev.as_3d() if isinstance(bev, GeoRaster) else np.asarray(bev, dtype=np.float64)
    if G.ndim == 2:
        G = G[:, :, None]
    if G.shape[2] != global_map.channels:
        raise DimensionMismatchError(
            f"bev has {G.shape[2]} channels, global map has {global_map.channels}")
    h, w = G.shape[:2]
    if h != w:
        raise DimensionMismatchError(f"bev must be square, got {h}x{w}")
    poses = np.atleast_2d(np.asarray(poses, dtype=np.float64))
    if poses.shape[0] == 0:
        return np.zeros(0)
    affines = np.array([patch_affine(global_map.georef, WorldPose(*p), h) for p in poses])
    return _direct_scores(G, global_map, affines)


def _direct_scores(G, global_map: GeoRaster, affines: np.ndarray) -> np.ndarray:
    G = G if G.ndim == 3 else G[:, :, None]
    h, w = G.shape[:2]
    S, affines = _cropped(global_map.as_3d(), affines, h, w)
    return kernels.affine_ncc(np.ascontiguousarray(G), S, affines)


# ---------------------------------------------------------------------------
# exhaustive scan


def _grid_offsets(radius: float, step: float) -> np.ndarray:
    k = int(math.floor(radius / step + 1e-9))
    return np.arange(-k, k + 1) * step


def _candidate_affines(ref, cand_e, cand_n, heading, size):
    """Patch affines for many centers sharing one heading (only the offset varies)."""
    a0 = patch_affine(ref, WorldPose(float(cand_e[0]), float(cand_n[0]), heading), size)
    c_all, r_all = world_to_pixel(ref, cand_e, cand_n)
    c_first, r_first = world_to_pixel(ref, cand_e[0], cand_n[0])
    out = np.tile(a0, (len(cand_e), 1))
    out[:, 0] += c_all - c_first
    out[:, 1] += r_all - r_first
    return out


def _fft_scores_for_heading(G2: np.ndarray, global_map: GeoRaster, cand_e: np.ndarray,
                            cand_n: np.ndarray, heading: float, spectra_cache: dict) -> np.ndarray:
    """Exact scores of all candidates at one heading via splat + FFT correlation.

    Candidates are grouped by the sub-pixel phase of their patch origin; each
    group shares one splatted template (numerator) and five pair-weight
    templates (sum of squared bilinear samples), correlated against S and the
    matching neighbour products of S.
    """
    h, w = G2.shape
    ref = global_map.georef
    affines = _candidate_affines(ref, cand_e, cand_n, heading, h)
    base_c = np.floor(affines[:, 0])
    base_r = np.floor(affines[:, 1])
    frac = np.round(np.stack([affines[:, 0] - base_c, affines[:, 1] - base_r], axis=1), 9)
    wrap = frac >= 1.0
    base_c += wrap[:, 0]
    base_r += wrap[:, 1]
    frac[wrap] = 0.0
    lin = affines[0, 2:]
    corners = np.array([[0, 0], [0, w - 1], [h - 1, 0], [h - 1, w - 1]], dtype=np.float64)
    kc = corners[:, 0] * lin[0] + corners[:, 1] * lin[1]
    kr = corners[:, 0] * lin[2] + corners[:, 1] * lin[3]
    col_base = int(math.floor(kc.min())) - 1
    row_base = int(math.floor(kr.min())) - 1
    kw = int(math.ceil(kc.max())) + 3 - col_base
    kh = int(math.ceil(kr.max())) + 3 - row_base

    S = global_map.values if global_map.channels == 1 else None
    if S is None:
        raise DimensionMismatchError("FFT scan supports single-channel maps only")
    # heading-independent region: every sample lies within half a diagonal
    # of its candidate center, so the S-side spectra are shared by all headings
    cc_px, cr_px = world_to_pixel(ref, cand_e, cand_n)
    reach = int(math.ceil(max(h, w) * math.sqrt(0.5))) + 4
    r_lo = int(math.floor(cr_px.min())) - reach
    c_lo = int(math.floor(cc_px.min())) - reach
    r_hi = int(math.ceil(cr_px.max())) + reach
    c_hi = int(math.ceil(cc_px.max())) + reach
    assert base_r.min() + row_base >= r_lo and base_r.max() + row_base + kh - 1 <= r_hi
    assert base_c.min() + col_base >= c_lo and base_c.max() + col_base + kw - 1 <= c_hi
    key = (r_lo, c_lo, r_hi, c_hi)
    if key not in spectra_cache:
        spectra_cache.clear()
        H, W = S.shape
        R = np.zeros((r_hi - r_lo + 1, c_hi - c_lo + 1))
        rs, re = max(r_lo, 0), min(r_hi + 1, H)
        cs, ce = max(c_lo, 0), min(c_hi + 1, W)
        if rs < re and cs < ce:
            R[rs - r_lo:re - r_lo, cs - c_lo:ce - c_lo] = S[rs:re, cs:ce]
        # outputs are read only where template + offset stay inside R, so
        # circular wrap-around never reaches them and no extra padding is needed
        shape = (sfft.next_fast_len(R.shape[0], real=True), sfft.next_fast_len(R.shape[1], real=True))
        Rp = np.zeros((R.shape[0] + 1, R.shape[1] + 2))
        Rp[:-1, 1:-1] = R
        core = Rp[:-1, 1:-1]
        prods = [
            core * core,
            2.0 * core * Rp[:-1, 2:],
            2.0 * core * Rp[1:, 1:-1],
            2.0 * core * Rp[1:, 2:],
            2.0 * core * Rp[1:, :-2],
        ]
        spectra_cache[key] = (shape, sfft.rfft2(R, shape), [sfft.rfft2(p, shape) for p in prods],
                              R.shape)
    shape, FR, FP, rshape = spectra_cache[key]

    scores = np.zeros(len(cand_e))
    gg = float(np.sum(G2 * G2))
    if gg == 0.0:
        return scores
    groups: dict[tuple[float, float], list[int]] = {}
    for idx, f in enumerate(map(tuple, frac)):
        groups.setdefault(f, []).append(idx)
    for (fc, fr), members in groups.items():
        members = np.array(members)
        affine = np.array([fc - col_base, fr - row_base, lin[0], lin[1], lin[2], lin[3]])
        tpl, pairs = kernels.splat(G2, affine, 0, 0, kh, kw)
        num_full = sfft.irfft2(FR * np.conj(sfft.rfft2(tpl, shape)), shape)
        den_spec = sum(FP[d] * np.conj(sfft.rfft2(pairs[d], shape)) for d in range(5))
        den_full = sfft.irfft2(den_spec, shape)
        rr = (base_r[members].astype(np.int64) + row_base) - r_lo
        cc = (base_c[members].astype(np.int64) + col_base) - c_lo
        num = num_full[rr, cc]
        den = den_full[rr, cc]
        floor = 1e-9 * max(float(np.max(np.abs(den_full[:rshape[0], :rshape[1]]))), 1e-300)
        ok = den > floor
        scores[members[ok]] = num[ok] / np.sqrt(gg * den[ok])
    return np.clip(scores, -1.0, 1.0)


def scan_match(bev_sim, global_sim: GeoRaster, center: WorldPose, radius: float, step: float,
               headings: Sequence[float], method: str = "auto") -> ScanMatchResult:
    """Best pose on the grid {center +- radius, step} x headings.

    Ties go to the candidate nearest ``center``, then the smallest heading
    deviation, then scan order (headings outer, northing, easting inner).
    ``method`` is ``"direct"`` (per-candidate sampling), ``"fft"`` (exact
    splat + FFT correlation, single-channel only) or ``"auto"``.
    """
    if not radius > 0 or not step > 0:
        raise ValueError("radius and step must be positive")
    G = bev_sim.values if isinstance(bev_sim, GeoRaster) else np.asarray(bev_sim, dtype=np.float64)
    if not np.any(G != 0.0):
        raise DegenerateInputError("BEV raster is all zero")
    headings = [float(h) for h in headings]
    if not headings:
        raise ValueError("need at least one heading")
    offs = _grid_offsets(radius, step)
    dn, de = np.meshgrid(offs[::-1], offs, indexing="ij")
    de, dn = de.ravel(), dn.ravel()
    cand_e = center.easting + de
    cand_n = center.northing + dn
    if method == "auto":
        px_step = step / global_sim.georef.resolution
        periodic = abs(px_step * 2 - round(px_step * 2)) < 1e-9
        method = "fft" if (G.ndim == 2 and periodic and global_sim.georef.north_up
                           and len(cand_e) > 400) else "direct"
    all_scores = []
    cache: dict = {}
    for hd in headings:
        if method == "fft":
            s = _fft_scores_for_heading(G, global_sim, cand_e, cand_n, hd, cache)
        elif method == "direct":
            s = _direct_scores(G, global_sim, _candidate_affines(global_sim.georef, cand_e, cand_n, hd, G.shape[0]))
        else:
            raise ValueError(f"unknown method {method!r}")
        all_scores.append(s)
    scores = np.concatenate(all_scores)
    n = len(cand_e)
    dist = np.tile(np.hypot(de, dn), len(headings))
    hdev = np.repeat([abs(math.remainder(h - center.heading, 2 * math.pi)) for h in headings], n)
    order = np.lexsort((np.arange(scores.size), hdev, dist, -scores))
    best = order[0]
    second = float(scores[order[1]]) if scores.size > 1 else float(scores[best])
    pose = WorldPose(float(cand_e[best % n]), float(cand_n[best % n]), headings[best // n])
    return ScanMatchResult(pose, float(scores[best]), second)
