"""PPM/PGM raster files with a ``.geo`` text sidecar.

* color: binary PPM (``P6``, maxval 255)
* single channel: binary PGM (``P5``, maxval 65535, big-endian), value v
  stored as round(v * 65535).
* an optional ``<name>.holes`` PGM (maxval 255, 255 = hole) carries the hole
  mask of either kind.
* ``<name>.geo``: ``origin_easting``, ``origin_northing``, ``resolution``
  lines, plus ``up`` for rasters that are not north-up.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, MissingSidecarError, RasterFormatError
from .georaster import GeoRaster, GeoRef


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".geo")


def holes_path(path) -> Path:
    return Path(path).with_suffix(".holes")


def write_geo(georef: GeoRef, path) -> None:
    lines = [
        f"origin_easting {georef.origin_easting!r}",
        f"origin_northing {georef.origin_northing!r}",
        f"resolution {georef.resolution!r}",
    ]
    if not georef.north_up:
        lines.append(f"up {georef.up!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_geo(path) -> GeoRef:
    path = Path(path)
    if not path.exists():
        raise MissingSidecarError(path)
    fields = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise RasterFormatError(f"{path}:{lineno}: expected '<key> <float>', got {line!r}")
        try:
            fields[parts[0]] = float(parts[1])
        except ValueError:
            raise RasterFormatError(f"{path}:{lineno}: bad number {parts[1]!r}") from None
    missing = {"origin_easting", "origin_northing", "resolution"} - fields.keys()
    if missing:
        raise RasterFormatError(f"{path}: missing keys {sorted(missing)}")
    try:
        return GeoRef(fields["origin_easting"], fields["origin_northing"], fields["resolution"],
                      fields.get("up", math.pi / 2))
    except ValueError as exc:
        raise RasterFormatError(f"{path}: {exc}") from None


def _read_netpbm(path: Path):
    data = path.read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise RasterFormatError(f"{path}: truncated header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    magic = tokens[0].decode("ascii", "replace")
    if magic not in ("P5", "P6"):
        raise RasterFormatError(f"{path}: unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise RasterFormatError(f"{path}: non-integer header field") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise RasterFormatError(f"{path}: bad header values {width}x{height} maxval {maxval}")
    channels = 3 if magic == "P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * channels * dtype.itemsize
    payload = data[pos:]
    if len(payload) != expected:
        raise DimensionMismatchError(
            f"{path}: header declares {width}x{height}x{channels} ({expected} bytes), "
            f"payload has {len(payload)} bytes")
    arr = np.frombuffer(payload, dtype=dtype).astype(np.float64) / maxval
    shape = (height, width, 3) if channels == 3 else (height, width)
    return magic, arr.reshape(shape)


def _write_netpbm(path: Path, arr: np.ndarray, maxval: int) -> None:
    magic = "P6" if arr.ndim == 3 else "P5"
    h, w = arr.shape[:2]
    q = np.round(np.clip(arr, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as f:
        f.write(f"{magic}\n{w} {h}\n{maxval}\n".encode("ascii"))
        f.write(q.astype(dtype).tobytes())


def save_raster(raster: GeoRaster, path) -> None:
    path = Path(path)
    if raster.channels == 3:
        _write_netpbm(path, raster.values, 255)
    elif raster.channels == 1:
        _write_netpbm(path, raster.values, 65535)
    else:
        raise DimensionMismatchError(f"cannot store {raster.channels}-channel raster")
    write_geo(raster.georef, sidecar_path(path))
    hp = holes_path(path)
    if raster.hole_mask is not None:
        _write_netpbm(hp, raster.hole_mask.astype(np.float64), 255)
    elif hp.exists():
        hp.unlink()


def load_raster(path) -> GeoRaster:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    georef = read_geo(sidecar_path(path))
    _, values = _read_netpbm(path)
    hole_mask = None
    hp = holes_path(path)
    if hp.exists():
        _, m = _read_netpbm(hp)
        if m.shape != values.shape[:2]:
            raise DimensionMismatchError(f"{hp}: shape {m.shape} != raster {values.shape[:2]}")
        hole_mask = m > 0.5
    return GeoRaster(values, georef, hole_mask)
