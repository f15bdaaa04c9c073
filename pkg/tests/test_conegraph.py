import math

import numpy as np
import pytest

from thickpart import kernel
from thickpart.clip import GenericityError
from thickpart.conegraph import (build_graph, plane_section_arc,
                                 random_curve_system,
                                 tree_edge_bound_oracle)
from thickpart.kernel import Cone, Geodesic, PointUHS, mdot

C = Cone(Geodesic.vertical_axis(), 0.5)
S = PointUHS(0.12, 0.05, 1.0)      # inside the cone, off the axis


def bpt(t, phi):
    # plane_section_arc takes cylinder coordinates on the cone boundary
    return np.array([t, phi])


def arc_residuals(arc):
    w = np.asarray(arc.plane_w, dtype=float)
    w = w / math.sqrt(float(mdot(w, w)))
    X = C.boundary_from_cylinder(np.asarray(arc.polyline))
    on_plane = float(np.max(np.abs(mdot(X, w))))
    on_cone = float(np.max(np.abs(C.dist_to_axis(X) - C.radius)))
    return on_plane, on_cone


def test_section_arc_dual_residual():
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = bpt(rng.uniform(-1, 1), rng.uniform(-math.pi, math.pi))
        q = bpt(rng.uniform(-1, 1), rng.uniform(-math.pi, math.pi))
        arc = plane_section_arc(C, S, p, q)
        on_plane, on_cone = arc_residuals(arc)
        assert on_plane < 1e-8
        assert on_cone < 1e-8


def test_section_arc_endpoints():
    p, q = bpt(0.4, 0.3), bpt(-0.6, 2.0)
    arc = plane_section_arc(C, S, p, q)
    ends = np.asarray([arc.polyline[0], arc.polyline[-1]])
    for e in (p, q):
        gap = np.min(np.abs(ends[:, 0] - e[0]))
        assert gap < 1e-6


def test_section_arc_degenerate_coplanar_input():
    # p, q, s in a common plane with the axis: perturb-and-retry path
    s = PointUHS(0.05, 0.0, 1.0)
    p, q = bpt(0.3, 0.0), bpt(-0.3, 0.0)
    arc = plane_section_arc(C, s, p, q, rng=np.random.default_rng(1))
    on_plane, on_cone = arc_residuals(arc)
    assert on_plane < 1e-8 and on_cone < 1e-8


def test_build_graph_base_case():
    curves = random_curve_system(1, seed=0)
    g = build_graph(C, S, curves, seed=0)
    assert g.n == 0
    assert g.n_arc_edges == 0
    assert g.check()["connected"]


def test_build_graph_two_circles():
    phi = np.linspace(0.0, 2 * math.pi, 100, endpoint=False)
    top = np.stack([np.full_like(phi, 0.7), phi], axis=-1)
    bot = np.stack([np.full_like(phi, -0.7), phi], axis=-1)
    g = build_graph(C, S, [top, bot], seed=0)
    assert g.n == 1
    assert g.n_arc_edges == 1          # = 2n - 1
    assert all(g.check().values())


def test_build_graph_random_systems():
    for seed in range(15):
        n_curves = 2 + seed % 4
        curves = random_curve_system(n_curves, seed=seed)
        g = build_graph(C, S, curves, seed=seed)
        checks = g.check()
        assert all(checks.values()), (seed, checks)
        assert g.n_arc_edges <= 2 * g.n - 1


def test_graph_arcs_lie_on_their_planes():
    curves = random_curve_system(4, seed=3)
    g = build_graph(C, S, curves, seed=3)
    for a in g.arcs.values():
        w = np.asarray(a["plane_w"], dtype=float)
        w = w / math.sqrt(float(mdot(w, w)))
        X = C.boundary_from_cylinder(np.asarray(a["polyline"]))
        assert float(np.max(np.abs(mdot(X, w)))) < 1e-8


def test_tree_oracle_small():
    rep = tree_edge_bound_oracle(7)
    assert rep["violations"] == 0
    assert rep["tight_single_edge"]
    assert rep["tight_three_star"]


def test_tree_oracle_rejects_tiny():
    with pytest.raises(ValueError):
        tree_edge_bound_oracle(1)
