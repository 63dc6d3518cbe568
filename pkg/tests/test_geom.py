import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isopart.geom import (
    CircularArc,
    DegenerateArcError,
    DegenerateArcWarning,
    InfeasibleArcError,
    arc_area_moment,
    arc_first_moments,
    arc_length,
    endpoint_tangents,
    length_and_grad,
    moment_and_grad,
    sample_arc,
    segment_factor,
)


def polyline_length(arc, n=20001):
    pts = sample_arc(arc, n)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def polyline_moment(arc, n=20001):
    pts = sample_arc(arc, n)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def test_straight_segment_length():
    assert arc_length(CircularArc((0, 0), (1, 0), 0.0)) == 1.0


def test_semicircle_length():
    assert arc_length(CircularArc((-1, 0), (1, 0), 1.0)) == pytest.approx(math.pi, abs=1e-14)


def test_sixty_degree_arc_length_matches_polyline():
    arc = CircularArc((0, 0), (1, 0), 1.0)
    assert arc_length(arc) == pytest.approx(math.pi / 3, abs=1e-12)
    assert polyline_length(arc) == pytest.approx(math.pi / 3, rel=1e-8)


def test_major_arc_length():
    arc = CircularArc((0, 0), (1, 0), 1.0, major=True)
    assert arc_length(arc) == pytest.approx(2 * math.pi - math.pi / 3, abs=1e-12)
    assert polyline_length(arc) == pytest.approx(arc_length(arc), rel=1e-8)


def test_zero_length_arc_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert arc_length(CircularArc((1, 1), (1, 1), 0.0)) == 0.0
    assert any(issubclass(x.category, DegenerateArcWarning) for x in w)


def test_infeasible_arc_rejected():
    with pytest.raises(InfeasibleArcError):
        CircularArc((0, 0), (3, 0), 1.0)


def test_length_is_continuous_as_curvature_vanishes():
    a = CircularArc((0.2, -0.1), (1.7, 0.4), 1e-9)
    b = CircularArc((0.2, -0.1), (1.7, 0.4), 0.0)
    assert abs(arc_length(a) - arc_length(b)) < 1e-8


def test_unit_disk_from_two_semicircles():
    # counter-clockwise: each half bulges to the right of its chord
    top = CircularArc((1, 0), (-1, 0), -1.0)
    bottom = CircularArc((-1, 0), (1, 0), -1.0)
    assert arc_area_moment(top) + arc_area_moment(bottom) == pytest.approx(math.pi, abs=1e-14)


def test_unit_square_area():
    pts = [(0, 0), (1, 0), (1, 1), (0, 1)]
    tot = sum(arc_area_moment(CircularArc(a, b, 0.0)) for a, b in zip(pts, pts[1:] + pts[:1]))
    assert tot == pytest.approx(1.0, abs=1e-15)


def test_symmetric_lens_area():
    c = math.sqrt(3) / 2
    lower = CircularArc((-c, 0), (c, 0), -1.0)
    upper = CircularArc((c, 0), (-c, 0), -1.0)
    area = arc_area_moment(lower) + arc_area_moment(upper)
    expected = 2 * (math.pi / 3 - math.sqrt(3) / 4)
    assert area == pytest.approx(expected, abs=1e-14)
    assert area == pytest.approx(1.228370, abs=1e-6)
    assert polyline_moment(lower) + polyline_moment(upper) == pytest.approx(expected, rel=1e-7)


def test_first_moments_of_offset_disk():
    cx, cy, r = 0.3, -0.7, 0.5
    top = CircularArc((cx + r, cy), (cx - r, cy), -1 / r)
    bottom = CircularArc((cx - r, cy), (cx + r, cy), -1 / r)
    mx = sum(arc_first_moments(a)[0] for a in (top, bottom))
    my = sum(arc_first_moments(a)[1] for a in (top, bottom))
    area = math.pi * r * r
    assert mx == pytest.approx(cx * area, abs=1e-13)
    assert my == pytest.approx(cy * area, abs=1e-13)


def test_segment_tangents():
    t0, t1 = endpoint_tangents(CircularArc((0, 0), (1, 0), 0.0))
    np.testing.assert_allclose(t0, [1, 0])
    np.testing.assert_allclose(t1, [1, 0])


def test_semicircle_tangents():
    t0, t1 = endpoint_tangents(CircularArc((-1, 0), (1, 0), 1.0))
    np.testing.assert_allclose(t0, [0, 1], atol=1e-15)
    np.testing.assert_allclose(t1, [0, -1], atol=1e-15)


def test_thirty_degree_tangents_match_finite_difference():
    arc = CircularArc((0, 0), (1, 0), 1.0)
    t0, t1 = endpoint_tangents(arc)
    assert math.degrees(math.atan2(t0[1], t0[0])) == pytest.approx(30.0, abs=1e-12)
    assert math.degrees(math.atan2(t1[1], t1[0])) == pytest.approx(-30.0, abs=1e-12)
    h = 1e-7
    fd0 = (arc.point_at(h) - arc.point_at(0.0)) / h
    fd1 = (arc.point_at(1.0) - arc.point_at(1 - h)) / h
    np.testing.assert_allclose(fd0 / np.linalg.norm(fd0), t0, atol=1e-6)
    np.testing.assert_allclose(fd1 / np.linalg.norm(fd1), t1, atol=1e-6)


def test_degenerate_tangent_raises():
    with pytest.raises(DegenerateArcError):
        endpoint_tangents(CircularArc((1, 2), (1, 2), 0.0))


def test_segment_factor_series_is_continuous():
    for th in (0.99e-3, 1.01e-3, -1.01e-3):
        exact = (th - math.sin(th) * math.cos(th)) / (4 * math.sin(th) ** 2)
        assert segment_factor(th) == pytest.approx(exact, rel=1e-9)


points = st.tuples(st.floats(-3, 3), st.floats(-3, 3))


@settings(max_examples=60, deadline=None)
@given(points, points, st.floats(-3.0, 3.0))
def test_gradients_match_finite_differences(p0, p1, theta):
    if math.dist(p0, p1) < 1e-2:
        return
    p0, p1 = np.array(p0), np.array(p1)
    for fn in (length_and_grad, moment_and_grad):
        val, g0, g1, gt = fn(p0, p1, theta)
        h = 1e-6
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd0 = (fn(p0 + e, p1, theta)[0] - fn(p0 - e, p1, theta)[0]) / (2 * h)
            fd1 = (fn(p0, p1 + e, theta)[0] - fn(p0, p1 - e, theta)[0]) / (2 * h)
            assert fd0 == pytest.approx(g0[k], abs=1e-5 * max(1, abs(val)))
            assert fd1 == pytest.approx(g1[k], abs=1e-5 * max(1, abs(val)))
        fdt = (fn(p0, p1, theta + h)[0] - fn(p0, p1, theta - h)[0]) / (2 * h)
        assert fdt == pytest.approx(gt, abs=1e-5 * max(1, abs(val)))


@settings(max_examples=60, deadline=None)
@given(points, points, st.floats(-3.0, 3.0))
def test_reversal_flips_moment_and_keeps_length(p0, p1, theta):
    if math.dist(p0, p1) < 1e-3:
        return
    arc = CircularArc.from_theta(p0, p1, theta)
    rev = arc.reversed()
    assert arc_length(rev) == pytest.approx(arc_length(arc), rel=1e-12)
    assert arc_area_moment(rev) == pytest.approx(-arc_area_moment(arc), abs=1e-10 * max(1, arc_length(arc) ** 2))


@settings(max_examples=60, deadline=None)
@given(points, points, st.floats(-3.0, 3.0), st.floats(0.05, 0.95))
def test_sub_arcs_add_up(p0, p1, theta, t):
    if math.dist(p0, p1) < 1e-3:
        return
    arc = CircularArc.from_theta(p0, p1, theta)
    a, b = arc.sub_arc(0.0, t), arc.sub_arc(t, 1.0)
    scale = max(1.0, arc_length(arc))
    assert arc_length(a) + arc_length(b) == pytest.approx(arc_length(arc), abs=1e-9 * scale)
    assert arc_area_moment(a) + arc_area_moment(b) == pytest.approx(arc_area_moment(arc), abs=1e-9 * scale**2)


@settings(max_examples=40, deadline=None)
@given(points, points, st.floats(-3.0, 3.0))
def test_closed_form_length_matches_polyline(p0, p1, theta):
    if math.dist(p0, p1) < 1e-2:
        return
    arc = CircularArc.from_theta(p0, p1, theta)
    assert polyline_length(arc, 4001) == pytest.approx(arc_length(arc), rel=1e-6)
    assert polyline_moment(arc, 4001) == pytest.approx(arc_area_moment(arc), abs=1e-5 * max(1, arc_length(arc)) ** 2)
