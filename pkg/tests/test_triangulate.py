import math

import numpy as np
import pytest

from thickpart import kernel
from thickpart.cells import build_cells
from thickpart.clip import clip_to_X
from thickpart.kernel import Cone, Geodesic, PointUHS
from thickpart.net import build_net, constants
from thickpart.quotient import TubeQuotient, compute_thick_thin
from thickpart.triangulate import (VertexRegistry, assemble, cone_ball,
                                   cut_clipped_cell, plan_cell_cuts,
                                   build_cell_triangulation,
                                   retraction_point, surface_from_vid_triangles,
                                   triangulate_cells, vertex_census)

CONE = Cone(Geodesic.vertical_axis(), 0.5)
S = PointUHS(0.1, 0.0, 1.0)


# ---------------------------------------------------------------------------
# retraction


def test_retraction_lands_on_boundary():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = PointUHS(rng.uniform(-2, 2), rng.uniform(-2, 2),
                     rng.uniform(0.3, 3.0))
        if float(CONE.dist_to_axis(kernel.uhs_to_hyperboloid(p))) \
                <= CONE.radius:
            continue
        r = retraction_point(p, S, CONE)
        X = kernel.uhs_to_hyperboloid(r)
        assert float(CONE.dist_to_axis(X)) == pytest.approx(CONE.radius,
                                                            abs=1e-8)


def test_retraction_fixes_boundary_and_is_idempotent():
    rng = np.random.default_rng(1)
    for _ in range(20):
        b = CONE.boundary_from_cylinder(
            np.array([rng.uniform(-1, 1),
                      rng.uniform(-math.pi, math.pi)]))
        r = retraction_point(b, S, CONE)
        assert np.linalg.norm(r - b) < 1e-9
        p = PointUHS(1.5, rng.uniform(-1, 1), 1.0)
        r1 = retraction_point(kernel.uhs_to_hyperboloid(p), S, CONE)
        r2 = retraction_point(r1, S, CONE)
        assert np.linalg.norm(r1 - r2) < 1e-9


def test_retraction_deformation_property():
    # points along [p, r] retract to the same r
    p = kernel.uhs_to_hyperboloid(PointUHS(1.8, 0.4, 1.2))
    r = retraction_point(p, S, CONE)
    sample, length = kernel.geodesic_arc(p, r)
    for f in (0.25, 0.5, 0.9):
        q = sample(f * length)
        rq = retraction_point(q, S, CONE)
        assert np.linalg.norm(rq - r) < 1e-7


def test_retraction_rejects_interior_point():
    with pytest.raises(ValueError):
        retraction_point(PointUHS(0.01, 0.0, 1.0), S, CONE)


# ---------------------------------------------------------------------------
# coning


def octahedron_tris():
    # vids 0..5: poles 4 (top) and 5 (bottom), equator 0-3
    out = []
    for i in range(4):
        j = (i + 1) % 4
        out.append((4, i, j))
        out.append((5, j, i))
    return out


def test_cone_ball_tetrahedron():
    tris = [(0, 1, 2), (0, 3, 1), (1, 3, 2), (0, 2, 3)]
    tri = cone_ball(tris)
    assert tri.n_tets == 4            # 2v - 4 with v = 4
    tri.check_gluings()
    assert tri.is_orientable()
    assert tri.euler_distinct() == 1


def test_cone_ball_octahedron():
    tri = cone_ball(octahedron_tris())
    assert tri.n_tets == 8            # 2*6 - 4
    tri.check_gluings()
    assert tri.euler_distinct() == 1


def random_sphere_tris(v_target, seed):
    """Random triangulated sphere grown from a tetrahedron by repeated
    1-to-3 vertex splits (combinatorial only)."""
    rng = np.random.default_rng(seed)
    tris = [(0, 1, 2), (0, 3, 1), (1, 3, 2), (0, 2, 3)]
    nxt = 4
    while nxt < v_target:
        k = rng.integers(0, len(tris))
        a, b, c = tris.pop(int(k))
        tris += [(a, b, nxt), (b, c, nxt), (c, a, nxt)]
        nxt += 1
    return tris


@pytest.mark.parametrize("v,seed", [(10, 0), (25, 1), (50, 2)])
def test_cone_ball_random_spheres(v, seed):
    tri = cone_ball(random_sphere_tris(v, seed))
    assert tri.n_tets == 2 * v - 4
    tri.check_gluings()
    assert tri.is_orientable()
    assert tri.euler_distinct() == 1


def test_surface_euler_of_sphere():
    surf = surface_from_vid_triangles(octahedron_tris())
    surf.check_closed()
    assert surf.orient()
    assert surf.euler() == 2
    assert surf.n_vertices() == 6


# ---------------------------------------------------------------------------
# vertex registry


def test_registry_identifies_deck_translates():
    M = TubeQuotient(length=0.4, twist=0.9)
    reg = VertexRegistry(M=M)
    rng = np.random.default_rng(5)
    for _ in range(30):
        p = M.from_cyl(np.array([rng.uniform(0, 0.4), rng.uniform(0.1, 1.5),
                                 rng.uniform(-math.pi, math.pi)]))
        X = kernel.uhs_to_hyperboloid(p)
        vid = reg.id_of(X)
        for n in (-2, 1, 3):
            assert reg.id_of(X @ M.deck_matrix(n).T) == vid


def test_registry_separates_distinct_points():
    reg = VertexRegistry(M=None)
    a = kernel.uhs_to_hyperboloid(PointUHS(0.0, 0.0, 1.0))
    b = kernel.uhs_to_hyperboloid(PointUHS(0.1, 0.0, 1.0))
    assert reg.id_of(a) != reg.id_of(b)
    assert reg.id_of(a.copy()) == reg.id_of(a)


# ---------------------------------------------------------------------------
# the genus-1 slab: cut complex, ball triangulation, census


@pytest.fixture(scope="module")
def slab_cut(slab):
    reg = VertexRegistry(M=slab["M"])
    kxs = cut_clipped_cell(slab["clipped"], slab["cone"], slab["s"], reg,
                           M=slab["M"], seed=0)
    cuts = plan_cell_cuts([slab["clipped"]], [kxs], slab["M"],
                          slab["cone"], reg)[0]
    return reg, kxs, cuts


def test_slab_cut_complex_counts(slab, slab_cut):
    _, kxs, _ = slab_cut
    assert len(kxs) == 1
    kx = kxs[0]
    # genus 1: exactly 2g - 1 = 1 cutting face, no interior edges
    assert kx.n_faces == 1
    assert len(kx.interior_edges) == 0
    ct = constants(slab["xd"].R_empirical, slab["xd"].d)
    kx.check_bounds(ct.C1)


def test_slab_cut_to_ball(slab, slab_cut):
    reg, _, cuts = slab_cut
    ctri = build_cell_triangulation(slab["clipped"], slab["cone"], reg,
                                    M=slab["M"], cuts=cuts)
    assert len(ctri.components) == 1
    comp = ctri.components[0]
    assert comp.genus == 1
    assert comp.surface.euler() == 2     # the cut opened the handle
    assert comp.surface.n_triangles == 2 * comp.n_surface_vertices - 4


def test_slab_census(slab, slab_cut):
    _, kxs, _ = slab_cut
    ct = constants(slab["xd"].R_empirical, slab["xd"].d)
    census = vertex_census(slab["clipped"], kxs, ct)
    assert census["ok"]
    assert census["total"] == sum(census["classes"].values())


# ---------------------------------------------------------------------------
# assembly on a small real net


@pytest.fixture(scope="module")
def small_assembly():
    M = TubeQuotient(length=0.1, twist=0.3)
    xd = compute_thick_thin(M, 0.5, 0.3)
    net = build_net(M, xd, D=xd.D, sample_budget=600, seed=5,
                    outer_cutoff_multiplier=1.2)
    cells = build_cells(net, M)
    cone = xd.cone(M)
    clipped = [clip_to_X(poly, cone) for poly in cells]
    cell_tris, reg = triangulate_cells(clipped, cone, M=M)
    ct = constants(xd.R_empirical, 0.3)
    asm = assemble(clipped, cell_tris, reg, constants=ct)
    return M, xd, net, clipped, cell_tris, reg, asm


def test_assembly_valid(small_assembly):
    *_, asm = small_assembly
    asm.tri.check_gluings()
    assert asm.tri.is_orientable()
    assert asm.n_wall_gluings > 0


def test_assembly_walls_match_bitwise(small_assembly):
    # non-flagged cells may not leave unmatched wall triangles
    M, xd, net, clipped, cell_tris, reg, asm = small_assembly
    unflagged = [i for i, cl in enumerate(clipped) if not cl.touches_cutoff]
    bad = [b for b in asm.tri.boundary
           if b[2][0] == "unmatched" and asm.tet_cell[b[0]] in unflagged]
    assert bad == []


def test_assembly_tet_counts(small_assembly):
    M, xd, net, clipped, cell_tris, reg, asm = small_assembly
    assert asm.tri.n_tets == sum(ct.n_tets for ct in cell_tris)
    for ct in cell_tris:
        for comp in ct.components:
            assert comp.surface.n_triangles == \
                2 * comp.n_surface_vertices - 4
