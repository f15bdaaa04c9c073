import math

import numpy as np
import pytest

from thickpart import kernel
from thickpart.net import (build_net, constants, min_pairwise_quotient_dist,
                           sample_shell_cyl, shell_volume, shell_volume_mc)
from thickpart.quotient import TubeQuotient, compute_thick_thin


@pytest.fixture(scope="module")
def setup():
    M = TubeQuotient(length=0.1, twist=0.3)
    xd = compute_thick_thin(M, 0.5, 0.3)
    return M, xd


def test_constants_identities():
    t = constants(0.3, 0.4)
    assert t.D == min(0.3, 0.4)
    assert t.C3 == pytest.approx(1.0 / kernel.ball_volume(t.D / 2))
    assert t.C2 == pytest.approx(kernel.ball_volume(2.5 * t.D)
                                 / kernel.ball_volume(t.D / 2))
    assert t.C1 == pytest.approx(t.C2 * (t.C2 - 1.0))
    assert t.C0 == 2.0 * t.C1
    assert t.C == max(t.C3, (6.0 * t.Cbar0 - 4.0) * t.C0)
    assert t.K == t.C * t.C


def test_constants_rejects_nonpositive():
    with pytest.raises(ValueError):
        constants(0.0, 0.2)
    with pytest.raises(ValueError):
        constants(0.2, -1.0)


def test_shell_volume_against_mc(setup):
    M, xd = setup
    rng = np.random.default_rng(0)
    exact = shell_volume(M, 0.4, 1.0)
    mean, sigma = shell_volume_mc(M, 0.4, 1.0, 200_000, rng)
    assert abs(mean - exact) < 4.0 * sigma


def test_shell_sampler_stays_in_shell(setup):
    M, _ = setup
    rng = np.random.default_rng(1)
    cyl = sample_shell_cyl(M, 0.3, 0.9, 500, rng)
    assert np.all(cyl[:, 0] >= 0.0) and np.all(cyl[:, 0] <= M.length)
    assert np.all(cyl[:, 1] >= 0.3) and np.all(cyl[:, 1] <= 0.9)


def test_net_separation_and_coverage(setup):
    M, xd = setup
    net = build_net(M, xd, D=xd.D, sample_budget=800, seed=3,
                    outer_cutoff_multiplier=1.5)
    assert net.size > 1
    assert min_pairwise_quotient_dist(M, net) > net.D
    # covering radius <= D on fresh probes (maximality)
    rng = np.random.default_rng(99)
    probes = sample_shell_cyl(M, net.r_inner, net.r_outer, 4000, rng)
    cover = M.cyl_dist_matrix(probes, M.cyl_coords(net.points),
                              cap=1.001 * net.D).min(axis=1)
    assert float(cover.max()) <= net.D


def test_net_deterministic(setup):
    M, xd = setup
    a = build_net(M, xd, D=xd.D, sample_budget=400, seed=7,
                  outer_cutoff_multiplier=1.2)
    b = build_net(M, xd, D=xd.D, sample_budget=400, seed=7,
                  outer_cutoff_multiplier=1.2)
    assert np.array_equal(a.points, b.points)
