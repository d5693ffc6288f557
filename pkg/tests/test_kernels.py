"""Numba kernels against their numpy twins."""

import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from similoc import kernels

seeds = st.integers(0, 2**32 - 1)


def _affine(rng, n, center, spread=0.3):
    th = rng.uniform(-math.pi, math.pi, n)
    s = rng.uniform(1 - spread, 1 + spread, n)
    return np.ascontiguousarray(np.stack([center + rng.uniform(-8, 8, n), center + rng.uniform(-8, 8, n),
                                          s * np.cos(th), -s * np.sin(th), s * np.sin(th), s * np.cos(th)], 1))


@given(seeds, st.integers(1, 3))
def test_sample_affine_twins(seed, ch):
    rng = np.random.default_rng(seed)
    src = rng.random((23, 19, ch))
    aff = _affine(rng, 1, 4.0)[0]
    a = kernels.sample_affine_numba(src, 17, 21, aff)
    b = kernels.sample_affine_numpy(src, 17, 21, aff)
    assert np.array_equal(a, b)


@given(seeds, st.integers(1, 3))
def test_affine_ncc_twins(seed, ch):
    rng = np.random.default_rng(seed)
    G = rng.random((9, 11, ch))
    G[rng.random((9, 11)) < 0.2] = 0.0
    S = rng.random((30, 30, ch))
    aff = _affine(rng, 12, 10.0)
    a = kernels.affine_ncc_numba(G, S, aff)
    b = kernels.affine_ncc_numpy(G, S, aff)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@given(seeds)
def test_bin_max_z_twins(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, 400))
    cols = rng.integers(-3, 15, n)
    rows = rng.integers(-3, 15, n)
    z = rng.integers(0, 4, n).astype(float)  # plenty of exact ties
    colors = rng.random((n, 3))
    ia, fa = kernels.bin_max_z_numba(cols, rows, z, colors, 12)
    ib, fb = kernels.bin_max_z_numpy(cols, rows, z, colors, 12)
    assert np.array_equal(ia, ib) and np.array_equal(fa, fb)


def test_bin_max_z_semantics():
    cols = np.array([1, 1, 1, 5])
    rows = np.array([2, 2, 2, 0])
    z = np.array([0.5, 0.9, 0.9, 0.0])
    colors = np.array([[0.1], [0.2], [0.3], [0.4]])
    for fn in (kernels.bin_max_z_numba, kernels.bin_max_z_numpy):
        img, filled = fn(cols, rows, z, colors, 4)
        assert img[2, 1, 0] == 0.3  # highest, later wins the tie
        assert filled.sum() == 1  # (0, 5) falls off the canvas


@given(seeds)
def test_overlap_grid_twins(seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((40, 40)) < 0.3
    offsets = np.ascontiguousarray(rng.integers(-25, 26, (60, 2)).astype(float))
    rots = rng.uniform(-0.2, 0.2, 5)
    cs = np.ascontiguousarray(np.stack([np.cos(rots), np.sin(rots)], 1))
    shifts = np.arange(-4, 5, dtype=np.int64)
    a = kernels.overlap_grid_numba(offsets, mask, 20.0, 20.0, cs, shifts, shifts)
    b = kernels.overlap_grid_numpy(offsets, mask, 20.0, 20.0, cs, shifts, shifts)
    assert np.array_equal(a, b)


@given(seeds)
def test_draw_polyline_twins(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    cols = rng.integers(-30, 60, n)
    rows = rng.integers(-30, 60, n)
    assert np.array_equal(kernels.draw_polyline_numba(cols, rows, 32), kernels.draw_polyline_numpy(cols, rows, 32))


@given(seeds)
def test_splat_twins(seed):
    rng = np.random.default_rng(seed)
    G = rng.random((10, 8))
    aff = _affine(rng, 1, 30.0)[0]  # footprint stays inside the canvas
    a = kernels.splat_numba(G, aff, 0, 0, 64, 64)
    b = kernels.splat_numpy(G, aff, 0, 0, 64, 64)
    assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-12)
    assert np.allclose(a[1], b[1], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("flag,expected", [("1", "False"), ("0", "True")])
def test_env_switch(flag, expected):
    env = dict(os.environ, SIMILOC_NO_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from similoc import kernels; print(kernels.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
