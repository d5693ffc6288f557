"""Hot inner loops.

Every kernel exists twice: a numba ``@njit`` loop and a pure-numpy twin with
the same signature and the same arithmetic.  The numba versions are used when
numba imports cleanly and ``SIMILOC_NO_NUMBA`` is unset (or ``0``); setting
``SIMILOC_NO_NUMBA=1`` before import selects the numpy versions.  Both sets
stay importable as ``*_numba`` / ``*_numpy`` for tests and benchmarks.

Bilinear convention shared by all samplers: pixel centers sit on integer
(col, row); pixels outside the grid read as 0, so a sample blends toward 0
within one pixel of the border and is exactly 0 beyond that.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None

_flag = os.environ.get("SIMILOC_NO_NUMBA", "0").strip().lower()
USE_NUMBA = numba is not None and _flag in ("", "0", "false", "no")


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# affine bilinear sampling
#
# ``affine`` is (col0, row0, dc_di, dc_dj, dr_di, dr_dj): output pixel (i, j)
# samples the source at col = col0 + i*dc_di + j*dc_dj, row likewise.
# The blend is written as two nested lerps, which returns stored values
# bit-exactly at integer coordinates.


@_njit
def _px(S, r, c, k, H, W):
    if r < 0 or c < 0 or r >= H or c >= W:
        return 0.0
    return S[r, c, k]


@_njit
def _bilinear_at(S, c, r, k, H, W):
    c0 = int(np.floor(c))
    r0 = int(np.floor(r))
    fc = c - c0
    fr = r - r0
    if c0 >= 0 and r0 >= 0 and c0 + 1 < W and r0 + 1 < H:
        a = S[r0, c0, k]
        top = a + fc * (S[r0, c0 + 1, k] - a)
        b = S[r0 + 1, c0, k]
        bot = b + fc * (S[r0 + 1, c0 + 1, k] - b)
    else:
        a = _px(S, r0, c0, k, H, W)
        top = a + fc * (_px(S, r0, c0 + 1, k, H, W) - a)
        b = _px(S, r0 + 1, c0, k, H, W)
        bot = b + fc * (_px(S, r0 + 1, c0 + 1, k, H, W) - b)
    return top + fr * (bot - top)


@_njit
def _sample_affine_nb(src, out_h, out_w, affine):
    H, W, C = src.shape
    out = np.zeros((out_h, out_w, C))
    for i in range(out_h):
        cb = affine[0] + i * affine[2]
        rb = affine[1] + i * affine[4]
        for j in range(out_w):
            c = cb + j * affine[3]
            r = rb + j * affine[5]
            if c <= -1.0 or r <= -1.0 or c >= W or r >= H:
                continue
            for k in range(C):
                out[i, j, k] = _bilinear_at(src, c, r, k, H, W)
    return out


def _affine_coords(out_h, out_w, affine):
    i = np.arange(out_h, dtype=np.float64)[:, None]
    j = np.arange(out_w, dtype=np.float64)[None, :]
    c = (affine[0] + i * affine[2]) + j * affine[3]
    r = (affine[1] + i * affine[4]) + j * affine[5]
    return c, r


def _gather_bilinear(src, c, r):
    """Vectorised twin of ``_bilinear_at``; c and r are same-shape arrays."""
    H, W, C = src.shape
    inside = (c > -1.0) & (r > -1.0) & (c < W) & (r < H)
    c = np.where(inside, c, 0.0)
    r = np.where(inside, r, 0.0)
    c0 = np.floor(c).astype(np.int64)
    r0 = np.floor(r).astype(np.int64)
    fc = (c - c0)[..., None]
    fr = (r - r0)[..., None]

    def px(rr, cc):
        ok = (rr >= 0) & (cc >= 0) & (rr < H) & (cc < W)
        vals = src[np.clip(rr, 0, H - 1), np.clip(cc, 0, W - 1)]
        return np.where(ok[..., None], vals, 0.0)

    a = px(r0, c0)
    top = a + fc * (px(r0, c0 + 1) - a)
    b = px(r0 + 1, c0)
    bot = b + fc * (px(r0 + 1, c0 + 1) - b)
    return np.where(inside[..., None], top + fr * (bot - top), 0.0)


def _sample_affine_np(src, out_h, out_w, affine):
    c, r = _affine_coords(out_h, out_w, affine)
    return _gather_bilinear(src, c, r)


# ---------------------------------------------------------------------------
# fused sample + normalized correlation, one score per affine map


@_njit
def _ncc_sums(G, S, affines, gs_out, ss_out):
    # one channel: add sum(G * v) and sum(v * v) per affine into the outputs.
    # Same arithmetic as _bilinear_at; int(x + 1) - 1 equals floor(x) on the
    # (-1, inf) range that survives the bounds test.
    h, w = G.shape
    H, W = S.shape
    for p in range(affines.shape[0]):
        a0, a1, a2 = affines[p, 0], affines[p, 1], affines[p, 2]
        a3, a4, a5 = affines[p, 3], affines[p, 4], affines[p, 5]
        gs = 0.0
        ss = 0.0
        for i in range(h):
            cb = a0 + i * a2
            rb = a1 + i * a4
            for j in range(w):
                c = cb + j * a3
                r = rb + j * a5
                if c <= -1.0 or r <= -1.0 or c >= W or r >= H:
                    continue
                c0 = int(c + 1.0) - 1
                r0 = int(r + 1.0) - 1
                fc = c - c0
                fr = r - r0
                if c0 >= 0 and r0 >= 0 and c0 + 1 < W and r0 + 1 < H:
                    q00 = S[r0, c0]
                    q01 = S[r0, c0 + 1]
                    q10 = S[r0 + 1, c0]
                    q11 = S[r0 + 1, c0 + 1]
                else:
                    q00 = S[r0, c0] if r0 >= 0 and c0 >= 0 else 0.0
                    q01 = S[r0, c0 + 1] if r0 >= 0 and c0 + 1 < W else 0.0
                    q10 = S[r0 + 1, c0] if r0 + 1 < H and c0 >= 0 else 0.0
                    q11 = S[r0 + 1, c0 + 1] if r0 + 1 < H and c0 + 1 < W else 0.0
                top = q00 + fc * (q01 - q00)
                bot = q10 + fc * (q11 - q10)
                v = top + fr * (bot - top)
                gs += G[i, j] * v
                ss += v * v
        gs_out[p] += gs
        ss_out[p] += ss


@_njit
def _affine_ncc_nb(G, S, affines):
    h, w, C = G.shape
    n = affines.shape[0]
    gg = 0.0
    for i in range(h):
        for j in range(w):
            for k in range(C):
                gg += G[i, j, k] * G[i, j, k]
    gs = np.zeros(n)
    ss = np.zeros(n)
    # channel planes are made contiguous so the inner loop walks 2-D memory
    for k in range(C):
        _ncc_sums(np.ascontiguousarray(G[:, :, k]), np.ascontiguousarray(S[:, :, k]), affines, gs, ss)
    out = np.zeros(n)
    for p in range(n):
        if gg > 0.0 and ss[p] > 0.0:
            out[p] = gs[p] / np.sqrt(gg * ss[p])
    return out


def _affine_ncc_np(G, S, affines):
    h, w, _ = G.shape
    gg = float(np.sum(G * G))
    out = np.zeros(affines.shape[0])
    for p, affine in enumerate(affines):
        patch = _sample_affine_np(S, h, w, affine)
        ss = float(np.sum(patch * patch))
        if gg > 0.0 and ss > 0.0:
            out[p] = float(np.sum(G * patch)) / np.sqrt(gg * ss)
    return out


# ---------------------------------------------------------------------------
# top-down binning, highest z wins (later point wins an exact z tie)


@_njit
def _bin_max_z_nb(cols, rows, z, colors, size):
    C = colors.shape[1]
    img = np.zeros((size, size, C))
    zbuf = np.full((size, size), -np.inf)
    filled = np.zeros((size, size), dtype=np.bool_)
    for p in range(cols.shape[0]):
        c = cols[p]
        r = rows[p]
        if c < 0 or r < 0 or c >= size or r >= size:
            continue
        if z[p] >= zbuf[r, c]:
            zbuf[r, c] = z[p]
            filled[r, c] = True
            for k in range(C):
                img[r, c, k] = colors[p, k]
    return img, filled


def _bin_max_z_np(cols, rows, z, colors, size):
    C = colors.shape[1]
    img = np.zeros((size, size, C))
    filled = np.zeros((size, size), dtype=bool)
    keep = (cols >= 0) & (rows >= 0) & (cols < size) & (rows < size)
    if not np.any(keep):
        return img, filled
    idx = np.flatnonzero(keep)
    flat = rows[idx] * size + cols[idx]
    order = np.lexsort((z[idx], flat))
    flat_sorted = flat[order]
    last = np.ones(flat_sorted.shape[0], dtype=bool)
    last[:-1] = flat_sorted[1:] != flat_sorted[:-1]
    winners = idx[order[last]]
    bins = flat_sorted[last]
    img.reshape(-1, C)[bins] = colors[winners]
    filled.reshape(-1)[bins] = True
    return img, filled


# ---------------------------------------------------------------------------
# rotation x translation overlap counts for binary curve registration
#
# ``offsets`` holds lit trajectory pixels as (dcol, drow) relative to the
# rotation center (ccol, crow).  For rotation index a and translation (tc, tr)
# the score is the number of distinct transformed pixels landing on ``mask``.


@_njit
def _overlap_grid_nb(offsets, mask, ccol, crow, cos_sin, shifts_c, shifts_r):
    H, W = mask.shape
    n_rot = cos_sin.shape[0]
    n_tc = shifts_c.shape[0]
    n_tr = shifts_r.shape[0]
    m = offsets.shape[0]
    pad = 0
    for e in range(n_tc):
        pad = max(pad, abs(shifts_c[e]))
    for b in range(n_tr):
        pad = max(pad, abs(shifts_r[b]))
    counts = np.zeros((n_rot, n_tr, n_tc), dtype=np.int64)
    stamp = np.full((H + 2 * pad, W + 2 * pad), -1, dtype=np.int64)
    pc = np.empty(m, dtype=np.int64)
    pr = np.empty(m, dtype=np.int64)
    for a in range(n_rot):
        ca = cos_sin[a, 0]
        sa = cos_sin[a, 1]
        u = 0
        for q in range(m):
            dc = offsets[q, 0]
            dr = offsets[q, 1]
            c = int(np.floor(ccol + ca * dc + sa * dr + 0.5))
            r = int(np.floor(crow - sa * dc + ca * dr + 0.5))
            if c < -pad or r < -pad or c >= W + pad or r >= H + pad:
                continue
            if stamp[r + pad, c + pad] == a:
                continue
            stamp[r + pad, c + pad] = a
            pc[u] = c
            pr[u] = r
            u += 1
        for b in range(n_tr):
            tr = shifts_r[b]
            for e in range(n_tc):
                tc = shifts_c[e]
                cnt = 0
                for q in range(u):
                    c = pc[q] + tc
                    r = pr[q] + tr
                    if c >= 0 and r >= 0 and c < W and r < H and mask[r, c]:
                        cnt += 1
                counts[a, b, e] = cnt
    return counts


def _overlap_grid_np(offsets, mask, ccol, crow, cos_sin, shifts_c, shifts_r):
    H, W = mask.shape
    counts = np.zeros((cos_sin.shape[0], shifts_r.shape[0], shifts_c.shape[0]), dtype=np.int64)
    for a, (ca, sa) in enumerate(cos_sin):
        c = np.floor(ccol + ca * offsets[:, 0] + sa * offsets[:, 1] + 0.5).astype(np.int64)
        r = np.floor(crow - sa * offsets[:, 0] + ca * offsets[:, 1] + 0.5).astype(np.int64)
        pts = np.unique(np.stack([r, c], axis=1), axis=0)
        r, c = pts[:, 0], pts[:, 1]
        rr = r[None, :, None] + shifts_r[:, None, None]
        cc = c[None, :, None] + shifts_c[None, None, :]
        ok = (rr >= 0) & (cc >= 0) & (rr < H) & (cc < W)
        hit = mask[np.clip(rr, 0, H - 1), np.clip(cc, 0, W - 1)] & ok
        counts[a] = hit.sum(axis=1)
    return counts


# ---------------------------------------------------------------------------
# polyline drawing: 8-connected Bresenham segments between integer vertices,
# clipped to a size x size canvas.  Segments whose bounding box misses the
# canvas are skipped without walking.


@_njit
def _draw_polyline_nb(cols, rows, size):
    out = np.zeros((size, size), dtype=np.bool_)
    for k in range(cols.shape[0] - 1):
        c0, r0, c1, r1 = cols[k], rows[k], cols[k + 1], rows[k + 1]
        if max(c0, c1) < 0 or max(r0, r1) < 0 or min(c0, c1) >= size or min(r0, r1) >= size:
            continue
        dc = abs(c1 - c0)
        dr = -abs(r1 - r0)
        sc = 1 if c0 < c1 else -1
        sr = 1 if r0 < r1 else -1
        err = dc + dr
        while True:
            if 0 <= c0 < size and 0 <= r0 < size:
                out[r0, c0] = True
            if c0 == c1 and r0 == r1:
                break
            e2 = 2 * err
            if e2 >= dr:
                err += dr
                c0 += sc
            if e2 <= dc:
                err += dc
                r0 += sr
    return out


def bresenham(c0: int, r0: int, c1: int, r1: int) -> tuple[np.ndarray, np.ndarray]:
    dc, dr = abs(c1 - c0), -abs(r1 - r0)
    sc = 1 if c0 < c1 else -1
    sr = 1 if r0 < r1 else -1
    err = dc + dr
    cols, rows = [], []
    while True:
        cols.append(c0)
        rows.append(r0)
        if c0 == c1 and r0 == r1:
            break
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c0 += sc
        if e2 <= dc:
            err += dc
            r0 += sr
    return np.array(cols, dtype=np.int64), np.array(rows, dtype=np.int64)


def _draw_polyline_np(cols, rows, size):
    out = np.zeros((size, size), dtype=bool)
    for k in range(cols.shape[0] - 1):
        c0, r0, c1, r1 = (int(v) for v in (cols[k], rows[k], cols[k + 1], rows[k + 1]))
        if max(c0, c1) < 0 or max(r0, r1) < 0 or min(c0, c1) >= size or min(r0, r1) >= size:
            continue
        cs, rs = bresenham(c0, r0, c1, r1)
        ok = (cs >= 0) & (rs >= 0) & (cs < size) & (rs < size)
        out[rs[ok], cs[ok]] = True
    return out


# ---------------------------------------------------------------------------
# bilinear splatting: the adjoint of sampling, used to turn a rotated
# correlation into an axis-aligned one (see matcher.scan_match)
#
# For output pixel (i, j) of a template sampled at (col, row) = affine(i, j),
# weight G[i, j] is spread onto the 4 neighbour pixels.  ``pair_kernels``
# additionally accumulates w_p * w_q for the neighbour pairs (p, p + d),
# d in {(0,0), (0,1), (1,0), (1,1), (1,-1)} (drow, dcol), which expresses a
# sum of squared bilinear samples as a correlation with pixel products.


@_njit
def _splat_nb(G, affine, col_base, row_base, out_h, out_w):
    h, w = G.shape
    out = np.zeros((out_h, out_w))
    pairs = np.zeros((5, out_h, out_w))
    for i in range(h):
        cb = affine[0] + i * affine[2]
        rb = affine[1] + i * affine[4]
        for j in range(w):
            c = cb + j * affine[3]
            r = rb + j * affine[5]
            c0 = int(np.floor(c))
            r0 = int(np.floor(r))
            fc = c - c0
            fr = r - r0
            w00 = (1.0 - fc) * (1.0 - fr)
            w01 = fc * (1.0 - fr)
            w10 = (1.0 - fc) * fr
            w11 = fc * fr
            a = r0 - row_base
            b = c0 - col_base
            g = G[i, j]
            out[a, b] += g * w00
            out[a, b + 1] += g * w01
            out[a + 1, b] += g * w10
            out[a + 1, b + 1] += g * w11
            pairs[0, a, b] += w00 * w00
            pairs[0, a, b + 1] += w01 * w01
            pairs[0, a + 1, b] += w10 * w10
            pairs[0, a + 1, b + 1] += w11 * w11
            pairs[1, a, b] += w00 * w01
            pairs[1, a + 1, b] += w10 * w11
            pairs[2, a, b] += w00 * w10
            pairs[2, a, b + 1] += w01 * w11
            pairs[3, a, b] += w00 * w11
            pairs[4, a, b + 1] += w01 * w10
    return out, pairs


def _splat_np(G, affine, col_base, row_base, out_h, out_w):
    h, w = G.shape
    c, r = _affine_coords(h, w, affine)
    c0 = np.floor(c).astype(np.int64)
    r0 = np.floor(r).astype(np.int64)
    fc = c - c0
    fr = r - r0
    w00 = (1.0 - fc) * (1.0 - fr)
    w01 = fc * (1.0 - fr)
    w10 = (1.0 - fc) * fr
    w11 = fc * fr
    a = (r0 - row_base).ravel()
    b = (c0 - col_base).ravel()
    shape = (out_h, out_w)

    def acc(rows, cols, vals):
        return np.bincount(np.ravel_multi_index((rows, cols), shape), weights=vals.ravel(),
                           minlength=out_h * out_w).reshape(shape)

    g = G.ravel()
    out = (acc(a, b, g * w00.ravel()) + acc(a, b + 1, g * w01.ravel())
           + acc(a + 1, b, g * w10.ravel()) + acc(a + 1, b + 1, g * w11.ravel()))
    pairs = np.zeros((5,) + shape)
    pairs[0] = (acc(a, b, w00 ** 2) + acc(a, b + 1, w01 ** 2)
                + acc(a + 1, b, w10 ** 2) + acc(a + 1, b + 1, w11 ** 2))
    pairs[1] = acc(a, b, w00 * w01) + acc(a + 1, b, w10 * w11)
    pairs[2] = acc(a, b, w00 * w10) + acc(a, b + 1, w01 * w11)
    pairs[3] = acc(a, b, w00 * w11)
    pairs[4] = acc(a, b + 1, w01 * w10)
    return out, pairs


sample_affine_numba = _sample_affine_nb
sample_affine_numpy = _sample_affine_np
affine_ncc_numba = _affine_ncc_nb
affine_ncc_numpy = _affine_ncc_np
bin_max_z_numba = _bin_max_z_nb
bin_max_z_numpy = _bin_max_z_np
overlap_grid_numba = _overlap_grid_nb
overlap_grid_numpy = _overlap_grid_np
splat_numba = _splat_nb
splat_numpy = _splat_np
draw_polyline_numba = _draw_polyline_nb
draw_polyline_numpy = _draw_polyline_np

if USE_NUMBA:
    sample_affine = _sample_affine_nb
    affine_ncc = _affine_ncc_nb
    bin_max_z = _bin_max_z_nb
    overlap_grid = _overlap_grid_nb
    splat = _splat_nb
    draw_polyline = _draw_polyline_nb
else:
    sample_affine = _sample_affine_np
    affine_ncc = _affine_ncc_np
    bin_max_z = _bin_max_z_np
    overlap_grid = _overlap_grid_np
    splat = _splat_np
    draw_polyline = _draw_polyline_np
