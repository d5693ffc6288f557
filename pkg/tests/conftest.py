import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def bilinear_oracle(img, col, row):
    """Scalar bilinear read with zeros outside the grid, written from scratch."""
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, c = img.shape

    def px(r, q):
        if 0 <= r < h and 0 <= q < w:
            return img[r, q]
        return np.zeros(c)

    c0, r0 = int(np.floor(col)), int(np.floor(row))
    fc, fr = col - c0, row - r0
    return ((1 - fc) * (1 - fr) * px(r0, c0) + fc * (1 - fr) * px(r0, c0 + 1)
            + (1 - fc) * fr * px(r0 + 1, c0) + fc * fr * px(r0 + 1, c0 + 1))


def ncc_oracle(G, S):
    G = np.asarray(G, dtype=float).ravel().tolist()
    S = np.asarray(S, dtype=float).ravel().tolist()
    num = sum(g * s for g, s in zip(G, S))
    gg = sum(g * g for g in G)
    ss = sum(s * s for s in S)
    if gg == 0 or ss == 0:
        return 0.0
    return num / (gg * ss) ** 0.5


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance criteria summary: tests marked ``criterion(n, title)`` get one
# PASS/FAIL line each at the end of the run, with any detail they recorded
# via ``record_property("detail", ...)``.

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    n, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    if n in _CRITERIA:  # several tests share one criterion
        old_status, _, old_detail = _CRITERIA[n]
        status = "FAIL" if "FAIL" in (old_status, status) else status
        detail = "; ".join(d for d in (old_detail, detail) if d)
    _CRITERIA[n] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title}" + (f"  [{detail}]" if detail else ""))
