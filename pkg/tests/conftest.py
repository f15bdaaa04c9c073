import math

import numpy as np
import pytest

from thickpart.cells import cell
from thickpart.clip import clip_to_X
from thickpart.net import Net
from thickpart.pipeline import RunConfig, run
from thickpart.quotient import (TubeQuotient, compute_thick_thin,
                                thick_tube_radius)


@pytest.fixture(scope="session")
def light_run():
    """One full drilled pipeline run, shared by everything that only
    needs to inspect a finished run."""
    cfg = RunConfig(length=0.1, twist=0.3, mu=0.5, d=0.3, seed=2,
                    sample_budget=1200, outer_cutoff_multiplier=1.5)
    return run(cfg)


@pytest.fixture(scope="session")
def slab():
    """A single-cell slab hugging the drilled tube: its clipped cell has
    one genus-1 component, exercising the whole cutting machinery."""
    M = TubeQuotient(length=1.0, twist=0.7)
    r_mu = thick_tube_radius(M, 0.8)
    d = r_mu - 0.3
    xd = compute_thick_thin(M, mu=0.8, d=d)
    C = xd.cone(M)
    r_p = xd.tube_radius_X + 0.5
    pt = M.from_cyl(np.array([[0.37, r_p, 1.1]]))
    net = Net(points=pt, D=xd.D, seed=0,
              r_inner=xd.tube_radius_X, r_outer=r_p + 1.0)
    far = M.from_cyl(np.array([0.37 + 0.5, xd.tube_radius_X,
                               1.1 + math.pi]))
    dist_far = M.quotient_dist(pt[0], far)
    poly = cell(0, net, M, cutoff_factor=1.3 * dist_far / xd.D)
    clipped = clip_to_X(poly, C)
    s = M.from_cyl(np.array([0.37, 0.45 * xd.tube_radius_X, 1.1]))
    return {"M": M, "xd": xd, "cone": C, "net": net, "poly": poly,
            "clipped": clipped, "s": s}
