"""Road similarity space.

A color raster is embedded into per-pixel feature vectors; feature vectors
under the driven (or planned) path are clustered online into unit
"prototype" vectors; every pixel's similarity is its best cosine against the
prototypes, clamped to [0, 1].

Prototype updates are order dependent by construction and must be fed
sequentially; embedding and per-patch similarity are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError, RasterFormatError
from .georaster import GeoRaster, GeoRef, WorldPose, world_to_pixel
from .raster_io import read_geo, sidecar_path, write_geo

DEFAULT_DIM = 11
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class FeatureMap:
    data: np.ndarray  # (H, W, d)
    georef: GeoRef

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3:
            raise DimensionMismatchError(f"feature map must be (H, W, d), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("feature map has non-finite entries")
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def zero_mask(self) -> np.ndarray:
        return ~np.any(self.data != 0.0, axis=2)


Embedder = Callable[[GeoRaster], FeatureMap]


def _box_sum(a: np.ndarray, size: int) -> np.ndarray:
    # zero outside the image == window truncated at the border
    return ndimage.uniform_filter(a, size=size, mode="constant", cval=0.0) * float(size * size)


def _masked_gradient(lum: np.ndarray, valid: np.ndarray, axis: int) -> np.ndarray:
    """Central difference where both neighbours are valid, one-sided otherwise."""
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    lp = np.pad(lum, pad)
    vp = np.pad(valid, pad)
    sl = [slice(None), slice(None)]
    sl[axis] = slice(2, None)
    nxt, vn = lp[tuple(sl)], vp[tuple(sl)]
    sl[axis] = slice(None, -2)
    prv, vpv = lp[tuple(sl)], vp[tuple(sl)]
    return np.where(vn & vpv, (nxt - prv) / 2.0,
                    np.where(vn, nxt - lum, np.where(vpv, lum - prv, 0.0)))


def embed_default(image: GeoRaster, window: int = 5) -> FeatureMap:
    """Hand-crafted 11-d descriptor per pixel.

    Raw features are [r, g, b, local mean rgb, local std rgb, |grad
    luminance|] over a ``window`` x ``window`` neighbourhood that skips holes
    and the outside of the image.  Each is standardized over the image's
    valid pixels so cosines separate surfaces instead of all sitting near 1;
    a constant 1 is appended so no valid pixel embeds to the zero vector.
    Hole pixels map to the zero vector.
    """
    if image.channels != 3:
        raise DimensionMismatchError(f"embedder needs a 3-channel raster, got {image.channels}")
    rgb = image.values
    valid = ~image.holes()
    vf = valid.astype(np.float64)
    n = _box_sum(vf, window)
    n_safe = np.where(n > 0.5, n, 1.0)
    planes = [np.ascontiguousarray(rgb[..., ch]) for ch in range(3)]
    means, stds = [], []
    for x in planes:
        x = x * vf
        mean = _box_sum(x, window) / n_safe
        var = _box_sum(x * x, window) / n_safe - mean * mean
        # cancellation floor: a flat window must give exactly zero spread
        var[var < 1e-12 * (mean * mean + 1e-12)] = 0.0
        means.append(mean)
        stds.append(np.sqrt(np.maximum(var, 0.0)))
    lum = LUMA[0] * planes[0] + LUMA[1] * planes[1] + LUMA[2] * planes[2]
    gx = _masked_gradient(lum, valid, axis=1)
    gy = _masked_gradient(lum, valid, axis=0)
    planes = planes + means + stds + [np.hypot(gx, gy)]
    if valid.any():
        for k, x in enumerate(planes):
            v = x[valid]
            sd = v.std()
            # a feature with no spread (up to roundoff) carries nothing
            planes[k] = (x - v.mean()) / sd if sd > 1e-9 else np.zeros_like(x)
    planes.append(np.ones_like(vf))
    feats = np.stack(planes, axis=-1)
    feats[~valid] = 0.0
    return FeatureMap(feats, image.georef)


def save_feature_map(fm: FeatureMap, path) -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(f"FMAP {fm.width} {fm.height} {fm.dim}\n".encode("ascii"))
        f.write(fm.data.astype("<f4").tobytes())
    write_geo(fm.georef, sidecar_path(path))


def load_feature_map(path) -> FeatureMap:
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise RasterFormatError(f"{path}: missing FMAP header line")
    parts = raw[:nl].split()
    if len(parts) != 4 or parts[0] != b"FMAP":
        raise RasterFormatError(f"{path}: expected 'FMAP <width> <height> <dim>'")
    try:
        w, h, d = (int(p) for p in parts[1:])
    except ValueError:
        raise RasterFormatError(f"{path}: non-integer FMAP dimensions") from None
    if min(w, h, d) <= 0:
        raise RasterFormatError(f"{path}: non-positive FMAP dimensions")
    payload = raw[nl + 1:]
    expected = w * h * d * 4
    if len(payload) != expected:
        raise DimensionMismatchError(
            f"{path}: header declares {w}x{h}x{d} ({expected} bytes), payload has {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, d).astype(np.float64)
    return FeatureMap(data, read_geo(sidecar_path(path)))


def sample_traversability_vectors(fm: FeatureMap, trajectory: Sequence) -> np.ndarray:
    """Feature vectors at the nearest pixel of each pose inside the map.

    ``trajectory`` holds WorldPose objects or (easting, northing) pairs.
    Zero vectors (holes) are skipped.
    """
    if len(trajectory) == 0:
        return np.zeros((0, fm.dim))
    pts = np.array([(p.easting, p.northing) if isinstance(p, WorldPose) else (p[0], p[1])
                    for p in trajectory], dtype=np.float64)
    col, row = world_to_pixel(fm.georef, pts[:, 0], pts[:, 1])
    col = np.floor(col + 0.5).astype(np.int64)
    row = np.floor(row + 0.5).astype(np.int64)
    inside = (col >= 0) & (row >= 0) & (col < fm.width) & (row < fm.height)
    vecs = fm.data[row[inside], col[inside]]
    return vecs[np.any(vecs != 0.0, axis=1)]


# ---------------------------------------------------------------------------
# prototypes


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """Unit-norm road prototypes with observation counts.

    New vectors join the most similar prototype when cosine >= ``tau_new``
    (exponential moving average with rate ``eta``, renormalized), spawn a new
    prototype while fewer than ``k_max`` exist, and otherwise join the nearest
    prototype regardless.
    """

    dim: int
    vectors: np.ndarray = field(default=None)
    counts: np.ndarray = field(default=None)
    tau_new: float = 0.85
    eta: float = 0.05
    k_max: int = 4

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        v = np.zeros((0, self.dim)) if self.vectors is None else np.asarray(self.vectors, dtype=np.float64)
        c = np.zeros(0, dtype=np.int64) if self.counts is None else np.asarray(self.counts, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != self.dim or v.shape[0] != c.shape[0]:
            raise DimensionMismatchError(f"prototype array {v.shape} / counts {c.shape} vs dim {self.dim}")
        if v.shape[0] > self.k_max:
            raise ValueError(f"{v.shape[0]} prototypes exceed k_max={self.k_max}")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "counts", c)

    def __len__(self) -> int:
        return self.vectors.shape[0]


def update_prototypes(ps: PrototypeSet, vectors) -> PrototypeSet:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.size == 0:
        return ps
    vectors = vectors.reshape(-1, vectors.shape[-1])
    if vectors.shape[1] != ps.dim:
        raise DimensionMismatchError(f"vector dim {vectors.shape[1]} != prototype dim {ps.dim}")
    protos = [p.copy() for p in ps.vectors]
    counts = [int(c) for c in ps.counts]
    for v in vectors:
        norm = math.sqrt(float(v @ v))
        if norm == 0.0:
            continue
        v_hat = v / norm
        if protos:
            sims = np.array([float(p @ v_hat) for p in protos])
            j = int(np.argmax(sims))
            if sims[j] < ps.tau_new and len(protos) < ps.k_max:
                protos.append(v_hat)
                counts.append(1)
                continue
            p = (1.0 - ps.eta) * protos[j] + ps.eta * v_hat
            protos[j] = p / math.sqrt(float(p @ p))
            counts[j] += 1
        else:
            protos.append(v_hat)
            counts.append(1)
    return replace(ps, vectors=np.array(protos).reshape(-1, ps.dim), counts=np.array(counts))


def save_prototypes(ps: PrototypeSet, path) -> None:
    with open(path, "w") as f:
        for c, v in zip(ps.counts, ps.vectors):
            f.write(" ".join([str(int(c))] + [repr(float(x)) for x in v]) + "\n")


def load_prototypes(path, tau_new: float = 0.85, eta: float = 0.05, k_max: int = 4) -> PrototypeSet:
    rows = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
    if not rows:
        raise RasterFormatError(f"{path}: no prototypes")
    dims = {len(r) - 1 for r in rows}
    if len(dims) != 1:
        raise DimensionMismatchError(f"{path}: prototype lines differ in length")
    try:
        counts = [int(r[0]) for r in rows]
        vecs = [[float(x) for x in r[1:]] for r in rows]
    except ValueError as exc:
        raise RasterFormatError(f"{path}: {exc}") from None
    return PrototypeSet(dims.pop(), np.array(vecs), np.array(counts), tau_new, eta, max(k_max, len(rows)))


def similarity_map(fm: FeatureMap, ps: PrototypeSet) -> GeoRaster:
    if len(ps) == 0:
        raise ValueError("similarity_map needs at least one prototype")
    if ps.dim != fm.dim:
        raise DimensionMismatchError(f"prototype dim {ps.dim} != feature dim {fm.dim}")
    flat = fm.data.reshape(-1, fm.dim)
    norms = np.sqrt(np.einsum("ij,ij->i", flat, flat))
    zero = norms == 0.0
    cos = (flat @ ps.vectors.T).max(axis=1) / np.where(zero, 1.0, norms)
    sim = np.clip(cos, 0.0, 1.0)
    sim[zero] = 0.0
    shape = (fm.height, fm.width)
    return GeoRaster(sim.reshape(shape), fm.georef, zero.reshape(shape))


# ---------------------------------------------------------------------------
# offline global map


def densify_polyline(points: np.ndarray, spacing: float) -> np.ndarray:
    """Points every ``spacing`` meters of arclength, endpoints included."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] < 2:
        return points.copy()
    seg = np.hypot(*np.diff(points, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return points[:1].copy()
    n = int(math.floor(s[-1] / spacing + 1e-9))
    q = np.arange(n + 1) * spacing
    if s[-1] - q[-1] > 1e-9 * max(1.0, s[-1]):
        q = np.append(q, s[-1])
    return np.stack([np.interp(q, s, points[:, 0]), np.interp(q, s, points[:, 1])], axis=1)


def _path_array(path) -> np.ndarray:
    if hasattr(path, "points"):
        return np.asarray(path.points, dtype=np.float64)
    return np.array([(p.easting, p.northing) if isinstance(p, WorldPose) else (p[0], p[1])
                     for p in path], dtype=np.float64)


def _north_up_window(raster: GeoRaster, center_col: int, center_row: int, size: int) -> GeoRaster:
    """size x size sub-array centered on an integer pixel, holes outside."""
    half = size // 2
    r0, c0 = center_row - half, center_col - half
    src = raster.as_3d()
    out = np.zeros((size, size, src.shape[2]))
    holes = np.ones((size, size), dtype=bool)
    rs, re = max(r0, 0), min(r0 + size, raster.height)
    cs, ce = max(c0, 0), min(c0 + size, raster.width)
    if rs < re and cs < ce:
        out[rs - r0:re - r0, cs - c0:ce - c0] = src[rs:re, cs:ce]
        holes[rs - r0:re - r0, cs - c0:ce - c0] = raster.holes()[rs:re, cs:ce]
    out[holes] = 0.0
    g = raster.georef
    ref = GeoRef(g.origin_easting + c0 * g.resolution, g.origin_northing - r0 * g.resolution,
                 g.resolution, g.up)
    vals = out if raster.channels != 1 else out[:, :, 0]
    return GeoRaster(vals, ref, holes)


def build_global_simimap(satellite: GeoRaster, planned_path, sample_interval: float = 50.0,
                         patch_px: int = 1000, embedder: Embedder = embed_default,
                         tau_new: float = 0.85, eta: float = 0.05, k_max: int = 4) -> GeoRaster:
    """Stitch per-patch similarity maps along a planned path into one raster.

    A reference point every ``sample_interval`` meters along the path gets a
    north-up ``patch_px`` window (snapped to the nearest satellite pixel);
    prototypes come from the path pixels inside that window only.  Overlaps
    merge by per-pixel max; pixels no patch covers are holes.
    """
    if not satellite.georef.north_up:
        raise ValueError("satellite raster must be north-up")
    pts = _path_array(planned_path)
    g = satellite.georef
    col, row = world_to_pixel(g, pts[:, 0], pts[:, 1])
    inside = (col >= 0) & (row >= 0) & (col <= satellite.width - 1) & (row <= satellite.height - 1)
    if not np.any(inside):
        raise ValueError("planned path lies entirely outside the satellite raster")
    refs = densify_polyline(pts, sample_interval)
    dense = densify_polyline(pts, g.resolution)
    acc = np.zeros(satellite.shape)
    covered = np.zeros(satellite.shape, dtype=bool)
    for e, n in refs:
        c, r = world_to_pixel(g, e, n)
        c, r = int(math.floor(c + 0.5)), int(math.floor(r + 0.5))
        if not (0 <= c < satellite.width and 0 <= r < satellite.height):
            continue
        patch = _north_up_window(satellite, c, r, patch_px)
        fm = embedder(patch)
        vecs = sample_traversability_vectors(fm, dense)
        if vecs.shape[0] == 0:
            continue
        ps = update_prototypes(PrototypeSet(fm.dim, tau_new=tau_new, eta=eta, k_max=k_max), vecs)
        sim = similarity_map(fm, ps)
        half = patch_px // 2
        r0, c0 = r - half, c - half
        rs, re = max(r0, 0), min(r0 + patch_px, satellite.height)
        cs, ce = max(c0, 0), min(c0 + patch_px, satellite.width)
        sub = sim.values[rs - r0:re - r0, cs - c0:ce - c0]
        ok = ~patch.holes()[rs - r0:re - r0, cs - c0:ce - c0]
        np.maximum(acc[rs:re, cs:ce], np.where(ok, sub, 0.0), out=acc[rs:re, cs:ce])
        covered[rs:re, cs:ce] |= ok
    acc[~covered] = 0.0
    return GeoRaster(acc, g, ~covered)
