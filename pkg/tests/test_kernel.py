import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from thickpart import kernel
from thickpart.kernel import (Cone, Geodesic, GeodesicPlane, PointUHS,
                              bisector, dist, dist_hyperboloid,
                              geodesic_arc, loxodromic, mdot,
                              segment_cone_clip)

finite = st.floats(min_value=-2.0, max_value=2.0,
                   allow_nan=False, allow_infinity=False)
height = st.floats(min_value=0.05, max_value=5.0,
                   allow_nan=False, allow_infinity=False)


def rand_point(rng):
    return PointUHS(rng.uniform(-1, 1), rng.uniform(-1, 1),
                    rng.uniform(0.1, 3.0))


def test_distance_vertical_axis():
    # along the vertical axis the metric is log of the height ratio
    p = PointUHS(0.0, 0.0, 1.0)
    q = PointUHS(0.0, 0.0, math.e)
    assert dist(p, q) == pytest.approx(1.0, abs=1e-12)


@given(finite, finite, height, height)
@settings(max_examples=40, deadline=None)
def test_model_round_trips(x, y, z1, z2):
    p = PointUHS(x, y, z1)
    X = kernel.uhs_to_hyperboloid(p)
    assert mdot(X, X) == pytest.approx(-1.0, abs=1e-9)
    back = kernel.hyperboloid_to_uhs(X)
    assert np.allclose(back, p.array(), atol=1e-9)
    k = kernel.hyperboloid_to_klein(X)
    assert np.linalg.norm(k) < 1.0
    assert np.allclose(kernel.klein_to_hyperboloid(k), X, atol=1e-8)
    # unused z2 keeps the strategy shape symmetric with the pair tests
    del z2


def test_isometry_preserves_distance():
    rng = np.random.default_rng(3)
    g = loxodromic(0.3, 1.1)
    for _ in range(25):
        p, q = rand_point(rng), rand_point(rng)
        assert dist(g.apply(p), g.apply(q)) == pytest.approx(
            dist(p, q), abs=1e-9)


def test_loxodromic_translation_length():
    g = loxodromic(0.25, 0.6)
    p = PointUHS(0.0, 0.0, 1.0)   # on the axis
    assert dist(p, g.apply(p)) == pytest.approx(0.25, abs=1e-10)


def test_ball_volume_against_quadrature():
    for r in np.linspace(0.05, 2.5, 25):
        num, _ = quad(lambda t: 4.0 * math.pi * math.sinh(t) ** 2, 0.0, r,
                      epsabs=1e-13, epsrel=1e-13)
        assert abs(num - kernel.ball_volume(r)) < 1e-10


def test_bisector_equidistance():
    rng = np.random.default_rng(7)
    p, q = rand_point(rng), rand_point(rng)
    plane = bisector(p, q)
    for pt in plane.sample_points(40, rng):
        u = kernel.hyperboloid_to_uhs(pt)
        a = dist(PointUHS(*u), p)
        b = dist(PointUHS(*u), q)
        assert a == pytest.approx(b, abs=1e-8)


def test_bisector_of_axis_points_is_hemisphere():
    # two points on the vertical axis at heights a and b: the bisector is
    # the hemisphere of radius sqrt(a b) about the origin
    a, b = 0.7, 2.9
    plane = bisector(PointUHS(0, 0, a), PointUHS(0, 0, b))
    kind, center, radius = plane.uhs_description()
    assert kind == "hemisphere"
    assert np.allclose(center, [0.0, 0.0], atol=1e-10)
    assert radius == pytest.approx(math.sqrt(a * b), abs=1e-10)


def test_plane_through_contains_inputs():
    rng = np.random.default_rng(11)
    pts = [rand_point(rng) for _ in range(3)]
    plane = kernel.plane_through(pts)
    for p in pts:
        assert abs(plane.signed_side(p)) < 1e-9


def test_geodesic_arc_endpoints_and_speed():
    rng = np.random.default_rng(13)
    p, q = rand_point(rng), rand_point(rng)
    sample, length = geodesic_arc(p, q)
    assert length == pytest.approx(dist(p, q), abs=1e-12)
    assert np.allclose(sample(0.0), kernel.uhs_to_hyperboloid(p), atol=1e-9)
    assert np.allclose(sample(length), kernel.uhs_to_hyperboloid(q),
                       atol=1e-9)
    mid = sample(0.5 * length)
    assert dist_hyperboloid(sample(0.0), mid) == pytest.approx(
        0.5 * length, abs=1e-9)


def test_segment_cone_clip_crossing():
    C = Cone(Geodesic.vertical_axis(), 0.5)
    p = PointUHS(1.2, 0.0, 1.0)
    q = PointUHS(-1.2, 0.0, 1.0)
    clip = segment_cone_clip(p, q, C)
    assert clip is not None
    t0, t1 = clip
    sample, length = geodesic_arc(p, q)
    for t in (t0, t1):
        assert float(C.dist_to_axis(sample(t * length))) == pytest.approx(
            C.radius, abs=1e-8)
    assert t0 < 0.5 < t1


def test_segment_cone_clip_miss():
    C = Cone(Geodesic.vertical_axis(), 0.2)
    p = PointUHS(2.0, 0.0, 1.0)
    q = PointUHS(2.0, 0.5, 1.0)
    assert segment_cone_clip(p, q, C) is None


def test_cone_cylinder_round_trip():
    C = Cone(Geodesic.vertical_axis(), 0.45)
    rng = np.random.default_rng(19)
    tphi = np.stack([rng.uniform(-1, 1, 30),
                     rng.uniform(-math.pi, math.pi, 30)], axis=-1)
    X = C.boundary_from_cylinder(tphi)
    assert np.allclose(C.dist_to_axis(X), C.radius, atol=1e-10)
    back = C.cylinder_from_hyperboloid(X)
    assert np.allclose(back[:, 0], tphi[:, 0], atol=1e-9)
    dphi = (back[:, 1] - tphi[:, 1] + math.pi) % (2 * math.pi) - math.pi
    assert np.max(np.abs(dphi)) < 1e-9
