"""Voronoi cells of a separated net, as convex Klein-model polytopes.

Each cell is computed in a frame centered at its net point (net point at
the Klein origin), where the bisectors with every nearby orbit translate
become affine half-spaces.  The intersection is truncated by a bounding
octahedron well outside the covered region; faces of the octahedron are
tagged as cutoff faces so downstream stages can flag cells that reach
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import HalfspaceIntersection

from . import kernel
from .kernel import GeodesicPlane, mdot, MINKOWSKI_J
from .net import Net
from .quotient import TubeQuotient

# how far beyond the covering radius the bounding octahedron sits
# (inradius factor relative to D; everything within distance D of the
# net point stays strictly interior)
CUTOFF_FACTOR = 1.3

INCIDENCE_TOL = 1e-8    # vertex-on-plane tolerance, Klein units
DEDUPE_TOL = 1e-9       # vertex merge tolerance, Klein units


class UnstableCellError(RuntimeError):
    """Face lattice changed when the orbit truncation was doubled."""


def frame_at(X) -> np.ndarray:
    """Lorentz matrix whose first column is the (timelike) point X; maps
    the hyperboloid basepoint e0 to X.  Inverse is J F^T J."""
    X = np.asarray(X, dtype=float)
    cols = [X]
    signs = [-1.0]
    for e in np.eye(4)[1:]:
        v = e.copy()
        for c, s in zip(cols, signs):
            v = v - s * mdot(v, c) * c
        n = mdot(v, v)
        cols.append(v / math.sqrt(n))
        signs.append(1.0)
    return np.column_stack(cols)


def lorentz_inverse(F) -> np.ndarray:
    return MINKOWSKI_J @ F.T @ MINKOWSKI_J


@dataclass(frozen=True)
class CellFace:
    """One face of a cell polytope.

    contributor is (j, n) when the face lies on the bisector with the
    orbit translate g^n x_j, or None for a bounding-octahedron face."""

    plane_local: GeodesicPlane
    contributor: tuple[int, int] | None
    vertex_ids: tuple[int, ...]   # ordered cycle around the face

    @property
    def is_cutoff(self) -> bool:
        return self.contributor is None


@dataclass(frozen=True)
class ConvexPolytope:
    """A Voronoi cell in its own centered frame.

    vertices_klein are Klein coordinates with the net point at the
    origin; frame maps the local hyperboloid to the global one."""

    index: int
    frame: np.ndarray
    vertices_klein: np.ndarray
    faces: tuple[CellFace, ...]
    edges: tuple[tuple[int, int], ...]
    cutoff_half_width: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices_klein)

    def vertices_hyperboloid(self) -> np.ndarray:
        """Global hyperboloid coordinates of the vertices."""
        return kernel.klein_to_hyperboloid(self.vertices_klein) @ self.frame.T

    def face_plane_global(self, face: CellFace) -> GeodesicPlane:
        w = self.frame @ np.asarray(face.plane_local.w)
        return GeodesicPlane.from_covector(w)

    def contains_local(self, k, margin: float = 1e-9):
        """Membership of local Klein points, within a margin band."""
        k = np.asarray(k, dtype=float)
        ok = np.ones(k.shape[:-1], dtype=bool)
        for f in self.faces:
            val = k @ f.plane_local.klein_normal - f.plane_local.klein_offset
            ok &= val <= margin
        return ok

    def contains_global(self, X, margin: float = 1e-9):
        """Membership of global hyperboloid points."""
        X = np.asarray(X, dtype=float)
        loc = X @ lorentz_inverse(self.frame).T
        k = kernel.hyperboloid_to_klein(loc)
        return self.contains_local(k, margin)

    def margin_local(self, k):
        """Max constraint violation (negative deep inside)."""
        k = np.asarray(k, dtype=float)
        worst = np.full(k.shape[:-1], -np.inf)
        for f in self.faces:
            val = k @ f.plane_local.klein_normal - f.plane_local.klein_offset
            worst = np.maximum(worst, val)
        return worst


def _orbit_candidates(M: TubeQuotient, net: Net, i: int, cutoff: float):
    """Hyperboloid lifts (and (j, n) tags) of all orbit translates of net
    points within the distance cutoff of net point i, excluding itself."""
    cyl = M.cyl_coords(net.points)
    H = net.hyperboloid()
    ti = cyl[i, 0]
    n_lo = int(math.floor((ti - cyl[:, 0].max() - cutoff) / M.length))
    n_hi = int(math.ceil((ti - cyl[:, 0].min() + cutoff) / M.length))
    cc = math.cosh(cyl[i, 1]) * np.cosh(cyl[:, 1])
    ss = math.sinh(cyl[i, 1]) * np.sinh(cyl[:, 1])
    out_pts, out_tags = [], []
    for n in range(n_lo, n_hi + 1):
        c = np.cosh(ti - cyl[:, 0] - n * M.length) * cc \
            - np.cos(cyl[i, 2] - cyl[:, 2] - n * M.twist) * ss
        keep = np.nonzero(c <= math.cosh(cutoff))[0]
        if len(keep) == 0:
            continue
        deck = M.deck_matrix(n)
        pts = H[keep] @ deck.T
        for row, j in zip(pts, keep):
            if j == i and n == 0:
                continue
            out_pts.append(row)
            out_tags.append((int(j), n))
    if not out_pts:
        return np.zeros((0, 4)), out_tags
    return np.array(out_pts), out_tags


N_CUTOFF_FACES = 128


def _cutoff_halfspaces(rho: float):
    """Tangent half-spaces to the Klein sphere of radius rho at Fibonacci
    directions: a nearly-round bounding polytope (corner overshoot is a
    few percent of the inradius)."""
    i = np.arange(N_CUTOFF_FACES)
    ga = math.pi * (3.0 - math.sqrt(5.0))
    z = 1.0 - (2.0 * i + 1.0) / N_CUTOFF_FACES
    r = np.sqrt(1.0 - z * z)
    dirs = np.stack([r * np.cos(ga * i), r * np.sin(ga * i), z], axis=-1)
    return [(d, rho) for d in dirs]


# max angular gap of the Fibonacci covering (measured numerically, with
# margin); bounds the polytope's circumradius rho / cos(alpha)
_CUTOFF_COS = 0.96


def _face_lattice(halfspaces, tags, verts):
    """Faces (with ordered vertex cycles) and edges from deduped vertices."""
    faces = []
    edge_set = {}
    for (n, c), tag in zip(halfspaces, tags):
        val = verts @ n - c
        on = np.nonzero(np.abs(val) <= INCIDENCE_TOL)[0]
        if len(on) < 3:
            continue
        # order the cycle by angle in the face plane
        pts = verts[on]
        centroid = pts.mean(axis=0)
        nn = n / np.linalg.norm(n)
        a = np.array([1.0, 0.0, 0.0])
        if abs(nn @ a) > 0.9:
            a = np.array([0.0, 1.0, 0.0])
        u = a - (a @ nn) * nn
        u /= np.linalg.norm(u)
        v = np.cross(nn, u)
        ang = np.arctan2((pts - centroid) @ v, (pts - centroid) @ u)
        cyc = tuple(int(on[k]) for k in np.argsort(ang))
        w = np.concatenate([[c], n])
        faces.append(CellFace(plane_local=GeodesicPlane.from_covector(w),
                              contributor=tag, vertex_ids=cyc))
        for a_id, b_id in zip(cyc, cyc[1:] + cyc[:1]):
            key = (min(a_id, b_id), max(a_id, b_id))
            edge_set[key] = edge_set.get(key, 0) + 1
    if any(cnt != 2 for cnt in edge_set.values()):
        raise ValueError("face lattice inconsistent: edge not on 2 faces")
    return faces, sorted(edge_set)


def _dedupe(points, tol):
    """Merge near-identical rows; returns (unique points, index map)."""
    order = np.lexsort(points.T[::-1])
    uniq, remap = [], np.empty(len(points), dtype=int)
    for idx in order:
        p = points[idx]
        hit = -1
        for k in range(len(uniq) - 1, -1, -1):
            if np.all(np.abs(uniq[k] - p) <= tol):
                hit = k
                break
            if uniq[k][0] < p[0] - tol:
                break
        if hit < 0:
            uniq.append(p)
            hit = len(uniq) - 1
        remap[idx] = hit
    return np.array(uniq), remap


def _build_polytope(i, F, planes, tags, rho):
    cut = _cutoff_halfspaces(rho)
    hs_list = [(p, o) for p, o in planes] + cut
    tag_list = list(tags) + [None] * len(cut)
    arr = np.array([np.concatenate([n, [-c]]) for n, c in hs_list])
    hsi = HalfspaceIntersection(arr, np.zeros(3))
    verts, remap = _dedupe(hsi.intersections, DEDUPE_TOL)
    faces, edges = _face_lattice(hs_list, tag_list, verts)
    # Euler check for the bounded cell
    if len(verts) - len(edges) + len(faces) != 2:
        raise ValueError(
            f"cell {i}: Euler check failed "
            f"(V={len(verts)} E={len(edges)} F={len(faces)})")
    # convexity: every vertex satisfies every half-space
    for n, c in hs_list:
        if np.any(verts @ n - c > INCIDENCE_TOL):
            raise ValueError(f"cell {i}: vertex violates a half-space")
    # every vertex on >= 3 face planes
    counts = np.zeros(len(verts), dtype=int)
    for f in faces:
        counts[list(f.vertex_ids)] += 1
    if np.any(counts < 3):
        raise ValueError(f"cell {i}: vertex on fewer than 3 faces")
    return ConvexPolytope(index=i, frame=F, vertices_klein=verts,
                          faces=tuple(faces), edges=tuple(edges),
                          cutoff_half_width=rho)


def _lattice_signature(poly: ConvexPolytope):
    return (sorted(f.contributor for f in poly.faces if not f.is_cutoff),
            poly.n_vertices, len(poly.edges))


def cell(i: int, net: Net, M: TubeQuotient,
         orbit_depth: int | None = None,
         stability_check: bool = False,
         perturb_seed: int = 0,
         cutoff_factor: float = CUTOFF_FACTOR) -> ConvexPolytope:
    """Voronoi cell of net point i as a bounded convex polytope.

    The cell is cut from a bounding polytope (inradius cutoff_factor * D
    around the net point) by the bisectors with every orbit translate
    close enough for its bisector to reach that polytope; the distance
    cutoff is exact, so enlarging the candidate set cannot change the
    result.  stability_check verifies this by doubling the truncation.
    Near-degenerate vertex configurations are retried with tiny seeded
    offsets on the plane positions.
    """
    D = net.D
    rho = math.tanh(cutoff_factor * D)
    if rho / _CUTOFF_COS >= 0.995:
        raise ValueError("separation too large for the bounding polytope")
    corner = math.atanh(rho / _CUTOFF_COS)
    cutoff = 2.0 * corner + 1e-6
    if orbit_depth is not None:
        cutoff = min(cutoff, orbit_depth * M.length)

    Xi = net.hyperboloid()[i]
    F = frame_at(Xi)
    Finv = lorentz_inverse(F)

    def planes_for(cut):
        cand, tags = _orbit_candidates(M, net, i, cut)
        loc = cand @ Finv.T
        out = []
        for row in loc:
            w = row.copy()
            w[0] -= 1.0           # bisector with e0, oriented toward e0
            w /= math.sqrt(mdot(w, w))
            out.append((w[1:], w[0]))
        return out, tags

    planes, tags = planes_for(cutoff)
    rng = np.random.default_rng(perturb_seed + 7919 * i)
    poly = None
    for attempt in range(4):
        try:
            if attempt == 0:
                poly = _build_polytope(i, F, planes, tags, rho)
            else:
                jit = [(n, c + rng.normal(scale=1e-10)) for n, c in planes]
                poly = _build_polytope(i, F, jit, tags, rho)
            break
        except ValueError:
            if attempt == 3:
                raise
    if stability_check:
        planes2, tags2 = planes_for(2.0 * cutoff)
        poly2 = _build_polytope(i, F, planes2, tags2, rho)
        if _lattice_signature(poly) != _lattice_signature(poly2):
            raise UnstableCellError(
                f"cell {i}: face lattice changed under truncation doubling")
    return poly


def build_cells(net: Net, M: TubeQuotient, **kw) -> list[ConvexPolytope]:
    return [cell(i, net, M, **kw) for i in range(net.size)]


# ---------------------------------------------------------------------------
# verification oracles


def nearest_center_oracle(M: TubeQuotient, net: Net,
                          cells: list[ConvexPolytope],
                          n_samples: int = 10_000, seed: int = 17,
                          margin: float = 1e-7):
    """Classify random shell points by nearest net center (quotient
    metric) and compare with polytope membership.

    Returns (checked, mismatches): samples in the margin band are
    skipped; a mismatch is a sample whose nearest cell does not contain
    it even though it is clearly outside the band."""
    from .net import sample_shell_cyl
    rng = np.random.default_rng(seed)
    cyl_net = M.cyl_coords(net.points)
    samples = sample_shell_cyl(M, net.r_inner, net.r_outer, n_samples, rng)
    d = M.cyl_dist_matrix(samples, cyl_net, cap=4.0 * net.D)
    order = np.argsort(d, axis=1)
    checked = mismatches = 0
    H = kernel.uhs_to_hyperboloid(M.from_cyl(samples))
    for s in range(n_samples):
        i0, i1 = order[s, 0], order[s, 1]
        if d[s, i1] - d[s, i0] < margin:
            continue   # ambiguous band
        checked += 1
        # the sample, shifted to the deck representative nearest x_{i0}
        best = None
        for n in range(-2, 3):
            X = H[s] @ M.deck_matrix(n).T
            v = float(kernel.dist_hyperboloid(X, net.hyperboloid()[i0]))
            if best is None or v < best[0]:
                best = (v, X)
        inside = bool(cells[i0].contains_global(best[1], margin=margin))
        if not inside:
            mismatches += 1
    return checked, mismatches


def check_lemma_distance(M: TubeQuotient, net: Net, poly: ConvexPolytope,
                         n_samples: int = 1000, seed: int = 5,
                         orbit_depth: int = 8):
    """Distance identity and projection-injectivity checks on one cell.

    For sampled points p in the cell, the distance to the cell's own
    center must equal the quotient distance between the projections; and
    no sampled point may be identified with the cell under a nonzero
    deck power (which would make two cell points project together).
    Returns (max deviation, identifications)."""
    rng = np.random.default_rng(seed + poly.index)
    Xi = net.hyperboloid()[poly.index]
    D = net.D
    # rejection-sample local Klein points inside the polytope
    pts = []
    lim = math.tanh(CUTOFF_FACTOR * D)
    while len(pts) < n_samples:
        k = rng.uniform(-lim, lim, size=(4 * n_samples, 3))
        k = k[np.linalg.norm(k, axis=1) < lim]
        k = k[poly.contains_local(k, margin=0.0)]
        pts.extend(k)
    pts = np.array(pts[:n_samples])
    Xg = kernel.klein_to_hyperboloid(pts) @ poly.frame.T
    direct = kernel.dist_hyperboloid(Xg, Xi)
    cylP = M.cyl_coords(Xg)
    cyl_i = M.cyl_coords(net.points[poly.index])
    qd = M.cyl_dist_matrix(cylP, cyl_i[None, :], cap=2.0 + 2.0 * D)[:, 0]
    max_dev = float(np.abs(direct - qd).max())
    identifications = 0
    for n in range(1, orbit_depth + 1):
        for m in (n, -n):
            Y = Xg @ M.deck_matrix(m).T
            identifications += int(np.sum(poly.contains_global(Y, margin=-1e-9)))
    return max_dev, identifications
