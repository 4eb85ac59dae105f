import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gneitlab.covariance import make_radial
from gneitlab.geometry import (ConvexBody, GrowthSchedule, WindowSpec, covariogram, covariogram_mc,
                               covariogram_scaling_check, rate_admissible, unit_ball_volume,
                               unit_box)

from golden import BALL2_LENS_1


def ball(d, r=1.0):
    return ConvexBody("centered-ball", d, (r,))


def test_box_covariogram():
    assert covariogram(unit_box(2), [0.5, 0.5]) == 0.25
    assert covariogram(unit_box(3), [0.0, 0.0, 0.0]) == 1.0
    assert covariogram(unit_box(1), [1.5]) == 0.0


def test_ball_lens_matches_oracle_and_mc():
    b = ball(2)
    assert covariogram(b, [1.0, 0.0]) == pytest.approx(BALL2_LENS_1, rel=1e-14)
    value, se = covariogram_mc(b, [1.0, 0.0], n_points=200_000, seed=3)
    assert abs(value - BALL2_LENS_1) < 3 * se


@pytest.mark.parametrize("d", [1, 2, 3])
def test_ball_at_zero_is_volume(d):
    assert covariogram(ball(d, 1.3), np.zeros(d)) == pytest.approx(unit_ball_volume(d) * 1.3**d)


def test_ball_3d_lens_vs_mc():
    b = ball(3)
    z = [0.6, 0.3, 0.0]
    exact = covariogram(b, z)
    value, se = covariogram_mc(b, z, n_points=200_000, seed=1)
    assert abs(value - exact) < 3 * se


def test_scaling_examples():
    assert covariogram_scaling_check(unit_box(1), [0.5], 2) == (1.5, 1.5)
    a, b = covariogram_scaling_check(unit_box(2), [0.2, 0.2], 4)
    assert a == pytest.approx(b, rel=1e-15)
    a, b = covariogram_scaling_check(ball(2), [0.0, 0.0], 3.0)
    assert a == pytest.approx(9 * math.pi) and b == pytest.approx(9 * math.pi)


def test_rate_admissible():
    f = lambda rho, d: make_radial("gen-cauchy", (1.0, rho), d, role="factor2")
    assert rate_admissible(GrowthSchedule(1, 1), f(0.5, 1), 2)
    assert not rate_admissible(GrowthSchedule(0.1, 1), f(0.4, 1), 1)
    assert not rate_admissible(GrowthSchedule(1, 2), f(0.5, 1), 1)
    # only the tail index is consulted, so an exponential profile stands in
    assert not rate_admissible(GrowthSchedule(1, 1), make_radial("exponential", (1.0,), 1), 1)


def test_window_json_roundtrip():
    w = WindowSpec(unit_box(2), ball(1), GrowthSchedule(1.0, 0.5))
    again = WindowSpec.from_json(w.to_json())
    assert again == w
    assert again.volume_at(4.0) == pytest.approx(16.0 * 2 * 2.0)


def test_n_refinement_increases_to_volume():
    z = np.array([0.7, 0.4])
    for body in (unit_box(2), ball(2)):
        seq = [covariogram(body, z / n) for n in (1, 2, 4, 8, 16, 32, 64)]
        assert all(b >= a for a, b in zip(seq, seq[1:]))
        assert seq[-1] <= body.vol


directions = st.lists(st.floats(-1, 1), min_size=2, max_size=2).filter(
    lambda v: np.hypot(*v) > 1e-3)


@settings(max_examples=100, deadline=None)
@given(directions, st.floats(0, 3), st.floats(0, 3), st.sampled_from(["box", "ball"]))
def test_monotone_along_rays(u, s, t, kind):
    body = unit_box(2) if kind == "box" else ball(2)
    u = np.asarray(u)
    lo, hi = sorted((s, t))
    assert covariogram(body, lo * u) >= covariogram(body, hi * u) - 1e-15
    # central symmetry
    assert covariogram(body, -hi * u) == pytest.approx(covariogram(body, hi * u))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2), st.floats(0.1, 20))
def test_scaling_identity_boxes(z, t):
    a, b = covariogram_scaling_check(unit_box(2), np.asarray(z), t)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
