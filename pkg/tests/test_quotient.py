import math

import numpy as np
import pytest

from thickpart import kernel
from thickpart.quotient import (TubeQuotient, compute_thick_thin,
                                thick_tube_radius, x_tube_radius)

J = np.diag([-1.0, 1.0, 1.0, 1.0])


def test_deck_matrix_is_lorentz():
    M = TubeQuotient(length=0.3, twist=0.9)
    for n in (-3, -1, 1, 5):
        T = M.deck_matrix(n)
        assert np.allclose(T.T @ J @ T, J, atol=1e-12)
    assert np.allclose(M.deck_matrix(2), M.deck_matrix(1) @ M.deck_matrix(1),
                       atol=1e-12)


def test_cyl_round_trip():
    M = TubeQuotient(length=0.4, twist=0.6)
    rng = np.random.default_rng(2)
    trp = np.stack([rng.uniform(-1, 1, 40), rng.uniform(0.05, 2.0, 40),
                    rng.uniform(-math.pi, math.pi, 40)], axis=-1)
    back = M.cyl_coords(M.from_cyl(trp))
    assert np.allclose(back[:, :2], trp[:, :2], atol=1e-9)
    dphi = (back[:, 2] - trp[:, 2] + math.pi) % (2 * math.pi) - math.pi
    assert np.max(np.abs(dphi)) < 1e-9


def test_displacement_formula():
    # displacement of g^n at tube radius r: cosh = cosh^2 r cosh(n l)
    # - sinh^2 r cos(n theta)
    M = TubeQuotient(length=0.2, twist=0.5)
    for r in (0.1, 0.7, 1.5):
        p = M.from_cyl(np.array([0.0, r, 0.3]))
        X = kernel.uhs_to_hyperboloid(p)
        for n in (1, 2, 3):
            got = kernel.dist_hyperboloid(X, X @ M.deck_matrix(n).T)
            want = math.acosh(math.cosh(r) ** 2 * math.cosh(n * M.length)
                              - math.sinh(r) ** 2 * math.cos(n * M.twist))
            assert float(got) == pytest.approx(want, abs=1e-9)
            assert M.displacement_at_radius(r, n) == pytest.approx(
                want, abs=1e-12)


def test_inj_radius_brute_force():
    M = TubeQuotient(length=0.15, twist=0.4)
    rng = np.random.default_rng(9)
    for _ in range(30):
        p = M.from_cyl(np.array([rng.uniform(0, M.length),
                                 rng.uniform(0.05, 1.8),
                                 rng.uniform(-math.pi, math.pi)]))
        X = kernel.uhs_to_hyperboloid(p)
        brute = min(float(kernel.dist_hyperboloid(X, X @ M.deck_matrix(n).T))
                    for n in range(1, 1001)) / 2.0
        assert M.inj_radius(p) == pytest.approx(brute, abs=1e-12)


def test_quotient_dist_symmetry_and_identity():
    M = TubeQuotient(length=0.3, twist=0.2)
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = M.from_cyl(np.array([rng.uniform(0, 0.3), rng.uniform(0.1, 1.0),
                                 rng.uniform(-3, 3)]))
        q = M.from_cyl(np.array([rng.uniform(0, 0.3), rng.uniform(0.1, 1.0),
                                 rng.uniform(-3, 3)]))
        # acosh near 1 has a sqrt-of-roundoff noise floor
        assert M.quotient_dist(p, p) == pytest.approx(0.0, abs=1e-6)
        assert M.quotient_dist(p, q) == pytest.approx(
            M.quotient_dist(q, p), abs=1e-10)
        # deck invariance
        gp = kernel.hyperboloid_to_uhs(
            kernel.uhs_to_hyperboloid(p) @ M.deck_matrix(3).T)
        assert M.quotient_dist(gp, q) == pytest.approx(
            M.quotient_dist(p, q), abs=1e-9)


def test_thick_tube_radius_defining_equation():
    M = TubeQuotient(length=0.1, twist=0.3)
    mu = 0.5
    r = thick_tube_radius(M, mu)
    assert M.inj_radius_at_radius(r) == pytest.approx(mu, abs=1e-9)
    # monotone in mu
    assert thick_tube_radius(M, 0.6) > r


def test_degenerate_no_thin_part():
    M = TubeQuotient(length=1.2, twist=0.3)
    assert thick_tube_radius(M, 0.5) == 0.0   # mu <= length/2
    assert x_tube_radius(M, 0.5, 0.2) == 0.0
    xd = compute_thick_thin(M, 0.5, 0.2)
    assert xd.tube_radius_X == 0.0
    assert not xd.drilled
    assert xd.cone(M) is None
    assert xd.R_empirical == pytest.approx(M.length / 2.0)


def test_thick_thin_drilled_case():
    M = TubeQuotient(length=0.1, twist=0.3)
    xd = compute_thick_thin(M, 0.5, 0.3)
    assert xd.drilled
    assert xd.tube_radius_X == pytest.approx(xd.tube_radius_mu - 0.3)
    # infimum of the injectivity radius over the kept region is on the
    # drilled boundary
    assert xd.R_empirical == pytest.approx(
        M.inj_radius_at_radius(xd.tube_radius_X), abs=1e-12)
    assert xd.D == pytest.approx(min(xd.R_empirical, 0.3))


def test_cyl_dist_matrix_matches_quotient_dist():
    M = TubeQuotient(length=0.25, twist=0.8)
    rng = np.random.default_rng(21)
    P = np.stack([rng.uniform(0, 0.25, 6), rng.uniform(0.2, 1.0, 6),
                  rng.uniform(-math.pi, math.pi, 6)], axis=-1)
    Q = np.stack([rng.uniform(0, 0.25, 5), rng.uniform(0.2, 1.0, 5),
                  rng.uniform(-math.pi, math.pi, 5)], axis=-1)
    d = M.cyl_dist_matrix(P, Q, cap=10.0)
    for i in range(6):
        for j in range(5):
            want = M.quotient_dist(M.from_cyl(P[i]), M.from_cyl(Q[j]))
            assert d[i, j] == pytest.approx(want, abs=1e-9)
