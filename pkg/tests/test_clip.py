import numpy as np
import pytest

from thickpart.cells import build_cells
from thickpart.clip import clip_to_X, verify_cell_bounds
from thickpart.net import build_net, constants
from thickpart.quotient import TubeQuotient, compute_thick_thin


@pytest.fixture(scope="module")
def clipped_set():
    M = TubeQuotient(length=0.1, twist=0.3)
    xd = compute_thick_thin(M, 0.5, 0.3)
    net = build_net(M, xd, D=xd.D, sample_budget=600, seed=5,
                    outer_cutoff_multiplier=1.2)
    cells = build_cells(net, M)
    cone = xd.cone(M)
    clipped = [clip_to_X(poly, cone) for poly in cells]
    return M, xd, net, cells, cone, clipped


def test_trivial_clip_without_cone(clipped_set):
    _, _, _, cells, _, _ = clipped_set
    cl = clip_to_X(cells[0], None)
    assert cl.n_components == 1
    # no tube boundary: no crossings, every edge one whole segment
    assert not cl.crossings
    assert cl.n_segments == len(cells[0].edges)
    assert cl.components[0].genus == 0
    assert cl.n_vertices_in_X == cells[0].n_vertices


def test_cell_disjoint_from_cone_is_whole_cell(clipped_set):
    _, _, _, cells, cone, clipped = clipped_set
    # pick a cell whose vertices are all outside the tube
    for poly, cl in zip(cells, clipped):
        if cl.crossings or not bool(np.all(cl.vertices_in_X)):
            continue
        assert cl.n_components == 1
        assert not cl.footprint_pieces
        assert cl.components[0].genus == 0
        return
    pytest.skip("no fully exterior cell in this net")


def test_face_trichotomy(clipped_set):
    _, _, _, _, _, clipped = clipped_set
    for cl in clipped:
        for v in cl.face_classes.values():
            assert v in ("empty", "disks", "annulus")


def test_edge_contributes_at_most_two_segments(clipped_set):
    _, _, _, _, _, clipped = clipped_set
    for cl in clipped:
        for ec in cl.edge_clips.values():
            assert len(ec.segments) <= 2


def test_component_counts_consistent(clipped_set):
    _, _, _, _, _, clipped = clipped_set
    for cl in clipped:
        if cl.components:
            assert cl.n_components >= 1
        # every face piece belongs to exactly one component
        owners = [p.component for p in cl.face_pieces]
        assert all(o >= 0 for o in owners)


def test_cell_bounds_on_non_flagged(clipped_set):
    _, xd, _, _, _, clipped = clipped_set
    ct = constants(xd.R_empirical, xd.d)
    for cl in clipped:
        rep = verify_cell_bounds(cl, ct)
        if rep.flagged:
            continue
        assert rep.all_ok, rep.checks


def test_slab_component_has_genus_one(slab):
    cl = slab["clipped"]
    assert cl.n_components == 1
    assert cl.components[0].genus == 1
    # the footprint wraps the tube: some wall faces are annuli
    assert "annulus" in set(cl.face_classes.values())


def test_slab_curves_wind_oppositely(slab):
    winds = sorted(c.winding for c in slab["clipped"].curves)
    assert winds == [-1, 1]
