import math

import numpy as np
import pytest

from thickpart import kernel
from thickpart.cells import (UnstableCellError, build_cells, cell,
                             check_lemma_distance, nearest_center_oracle)
from thickpart.net import Net, build_net
from thickpart.quotient import TubeQuotient, compute_thick_thin


@pytest.fixture(scope="module")
def small_setup():
    M = TubeQuotient(length=0.1, twist=0.3)
    xd = compute_thick_thin(M, 0.5, 0.3)
    net = build_net(M, xd, D=xd.D, sample_budget=600, seed=5,
                    outer_cutoff_multiplier=1.2)
    cells = build_cells(net, M)
    return M, xd, net, cells


def test_vertices_satisfy_halfspaces(small_setup):
    _, _, _, cells = small_setup
    for poly in cells:
        worst = float(np.max(poly.margin_local(poly.vertices_klein)))
        assert worst <= 1e-8


def test_face_lattice_euler(small_setup):
    _, _, _, cells = small_setup
    for poly in cells:
        assert poly.n_vertices - len(poly.edges) + len(poly.faces) == 2


def test_every_vertex_on_three_faces(small_setup):
    _, _, _, cells = small_setup
    for poly in cells:
        count = {v: 0 for v in range(poly.n_vertices)}
        for f in poly.faces:
            for v in f.vertex_ids:
                count[v] += 1
        assert min(count.values()) >= 3


def test_wall_faces_are_bisectors(small_setup):
    """Sampled points of a contributor face are equidistant from the
    cell's center and the contributing orbit translate."""
    M, _, net, cells = small_setup
    rng = np.random.default_rng(0)
    H = net.hyperboloid()
    poly = cells[0]
    for face in poly.faces[:6]:
        if face.contributor is None:
            continue
        j, n = face.contributor
        other = H[j] @ M.deck_matrix(n).T
        verts = poly.vertices_hyperboloid()[list(face.vertex_ids)]
        c = verts.mean(axis=0)
        c = c / math.sqrt(-float(kernel.mdot(c, c)))
        for X in (c, *verts[:3]):
            da = float(kernel.dist_hyperboloid(X, H[poly.index]))
            db = float(kernel.dist_hyperboloid(X, other))
            assert da == pytest.approx(db, abs=1e-7)


def test_single_far_point_is_bounding_polytope(small_setup):
    # deck translates far out on the tube are beyond every bisector
    # cutoff: the cell degenerates to the bare bounding polytope
    M, xd, _, _ = small_setup
    p = M.from_cyl(np.array([[0.04, xd.tube_radius_X + 0.2, 0.5]]))
    net1 = Net(points=p, D=xd.D, seed=0, r_inner=xd.tube_radius_X,
               r_outer=xd.tube_radius_X + 0.6)
    poly = cell(0, net1, M)
    assert all(f.contributor is None for f in poly.faces)


def test_single_near_point_walls_own_translates(small_setup):
    M, xd, _, _ = small_setup
    p = M.from_cyl(np.array([[0.04, 0.3, 0.5]]))
    net1 = Net(points=p, D=xd.D, seed=0, r_inner=0.0, r_outer=1.0)
    poly = cell(0, net1, M)
    contribs = {f.contributor for f in poly.faces if f.contributor}
    # the only walls are against the point's own deck translates
    assert contribs and all(j == 0 and n != 0 for j, n in contribs)


def test_nearest_center_oracle(small_setup):
    M, _, net, cells = small_setup
    checked, mismatches = nearest_center_oracle(M, net, cells,
                                                n_samples=2000, seed=8)
    assert checked > 0
    assert mismatches == 0


def test_lemma_distance_and_injectivity(small_setup):
    M, _, net, cells = small_setup
    for poly in cells[:3]:
        dev, idents = check_lemma_distance(M, net, poly, n_samples=200)
        assert dev < 1e-8
        assert idents == 0


def test_stability_certificate(small_setup):
    M, _, net, _ = small_setup
    # doubling the orbit depth must not change the face lattice
    poly = cell(0, net, M, stability_check=True)
    assert poly.n_vertices >= 4
