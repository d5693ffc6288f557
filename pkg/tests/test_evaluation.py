import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from similoc.errors import InputParseError
from similoc.evaluation import (Trajectory, ate, dead_reckon, error_series, lpe, pair_by_time, read_trajectory,
                                report, write_trajectory)
from similoc.particle_filter import MotionDelta


def _traj(xy, t=None):
    xy = np.asarray(xy, float).reshape(-1, 2)
    return Trajectory(np.arange(len(xy)) * 0.1 if t is None else t, xy)


def lpe_oracle(pred, gt):
    total = 0.0
    for p in pred:
        total += min(math.hypot(p[0] - q[0], p[1] - q[1]) for q in gt)
    return total / len(pred)


def test_ate_examples():
    gt = _traj(np.random.default_rng(0).random((20, 2)) * 100)
    assert ate(gt, gt) == 0.0
    assert ate(_traj(gt.xy + [3.0, 4.0]), gt) == pytest.approx(5.0)
    assert ate(_traj([[2.0, 0.0]]), _traj([[0.0, 0.0]])) == 2.0


def test_ate_without_pairs_raises():
    with pytest.raises(ValueError):
        ate(_traj([[0, 0]], t=[10.0]), _traj([[0, 0]], t=[0.0]))


def test_pairing_tolerance_and_ties():
    gt = Trajectory([0.0, 0.1, 0.2], np.zeros((3, 2)))
    pred = Trajectory([0.05, 0.12, 0.5], np.zeros((3, 2)))
    p = pair_by_time(pred, gt)
    assert p.pred_idx.tolist() == [0, 1] and p.gt_idx.tolist() == [0, 1] and p.dropped == 1


def test_lpe_examples():
    gt = _traj([[0, 0]])
    assert lpe(gt, gt) == 0.0
    xs = np.arange(0, 100.0001, 0.1)
    line = _traj(np.column_stack([xs, np.zeros_like(xs)]))
    shifted = _traj(np.column_stack([xs + 0.05, np.full_like(xs, 2.0)]))
    assert lpe(shifted, line) == pytest.approx(2.0, abs=0.0013)
    two = _traj([[-3.0, 4.0], [3.0, 4.0]])
    assert lpe(_traj([[0.0, 0.0]]), two) == 5.0


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 10_000))
def test_lpe_matches_brute_force(n_pred, n_gt, seed):
    rng = np.random.default_rng(seed)
    pred = rng.normal(0, 50, (n_pred, 2))
    gt = rng.normal(0, 50, (n_gt, 2))
    assert lpe(_traj(pred), _traj(gt)) == pytest.approx(lpe_oracle(pred, gt), rel=1e-12, abs=1e-12)


def test_lpe_brute_force_large():
    rng = np.random.default_rng(1)
    pred, gt = rng.random((1000, 2)) * 100, rng.random((1000, 2)) * 100
    diff = pred[:, None, :] - gt[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1]).min(axis=1)
    assert lpe(_traj(pred), _traj(gt)) == float(np.mean(d))


@given(st.integers(2, 40), st.integers(0, 10_000), st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_lpe_le_ate_and_translation_invariant(n, seed, tx, ty):
    rng = np.random.default_rng(seed)
    gt = rng.normal(0, 20, (n, 2))
    pred = gt + rng.normal(0, 3, (n, 2))
    a, l = ate(_traj(pred), _traj(gt)), lpe(_traj(pred), _traj(gt))
    assert l <= a + 1e-12
    off = np.array([tx, ty])
    assert ate(_traj(pred + off), _traj(gt + off)) == pytest.approx(a, abs=1e-9)
    assert lpe(_traj(pred + off), _traj(gt + off)) == pytest.approx(l, abs=1e-9)


def test_error_series():
    gt = _traj(np.random.default_rng(2).random((30, 2)) * 10)
    const = error_series(_traj(gt.xy + [0.0, 1.0]), gt)
    np.testing.assert_allclose(const.euclidean, 1.0)
    pred = _traj(gt.xy + np.random.default_rng(3).normal(0, 1, (30, 2)))
    es = error_series(pred, gt)
    assert abs(es.euclidean.mean() - ate(pred, gt)) <= 1e-12
    assert abs(es.lateral.mean() - lpe(pred, gt)) <= 1e-12
    empty = error_series(_traj([[0, 0]], t=[99.0]), gt)
    assert empty.t.size == 0 and empty.dropped == 1


def test_report_format():
    gt = _traj([[0, 0], [1, 0]])
    assert report(gt, gt) == "ATE=0.0000 LPE=0.0000 paired=2 dropped=0"


def test_trajectory_file_round_trip(tmp_path):
    tr = Trajectory([0.0, 0.1], [[1.5, 2.5], [3.0, 4.0]], [0.1, -0.2])
    write_trajectory(tr, tmp_path / "t.csv")
    back = read_trajectory(tmp_path / "t.csv")
    assert np.array_equal(back.xy, tr.xy) and np.array_equal(back.heading, tr.heading)
    (tmp_path / "bad.csv").write_text("t,easting\n0,1\n")
    with pytest.raises(InputParseError):
        read_trajectory(tmp_path / "bad.csv")
    (tmp_path / "bad2.csv").write_text("t,easting,northing\n0,1,x\n")
    with pytest.raises(InputParseError):
        read_trajectory(tmp_path / "bad2.csv")


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([0.0, -1.0], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        Trajectory([0.0], np.zeros((2, 2)))


def test_dead_reckoning_frames():
    deltas = [MotionDelta(1.0, 0.0, math.pi / 2)] * 4
    world = dead_reckon((0, 0), 0.0, deltas)
    np.testing.assert_allclose(world[-1, :2], [4.0, 0.0])
    body = dead_reckon((0, 0), 0.0, deltas, frame="body")
    np.testing.assert_allclose(body[-1, :2], [0.0, 0.0], atol=1e-12)
