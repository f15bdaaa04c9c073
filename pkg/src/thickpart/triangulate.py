"""Cutting clipped cells to balls and triangulating the kept region.

The boundary surface of each component of cell minus tube is assembled
from the clip decomposition (face pieces, footprint pieces, and -- for
positive genus -- two copies of each cutting wall), triangulated by
deterministic combinatorial rules over a shared vertex registry, and
coned from an interior apex.  Simplices are combinatorial: vertices
carry coordinates but no straightness is claimed.

Vertex ids are canonical in the quotient (deck-reduced coordinate
hashing), so two cells triangulating the same wall from opposite sides
produce identical triangle lists without any coordinate exchange.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .kernel import Cone, mdot
from .clip import GenericityError

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# canonical vertex registry


class VertexRegistry:
    """Canonical integer ids for geometric points.

    With a quotient manifold, points are keyed by deck-reduced tube
    coordinates (t mod length, r, phi rotated back), so deck-equivalent
    lifts receive the same id.  Keys are hashed on a grid with neighbor
    probing; near the fundamental-domain seam both reductions are
    probed.  Without a manifold, raw coordinates are keyed directly.
    """

    def __init__(self, M=None, grid: float = 1e-7):
        self.M = M
        self.grid = grid
        self._table: dict = {}       # grid key -> list of vids
        self._reduced: list = []     # vid -> reduced representative
        self._pos: list = []         # vid -> a global position (as given)

    def _reps(self, X):
        """Candidate reduced representatives of a point."""
        X = np.asarray(X, dtype=float)
        if self.M is None:
            return [X]
        M = self.M
        t, r, phi = (float(v) for v in M.cyl_coords(X))
        n = math.floor(t / M.length)
        reps = []
        for m in (n, n - 1, n + 1):
            t2 = t - m * M.length
            if -4.0 * self.grid <= t2 <= M.length + 4.0 * self.grid:
                p2 = phi - m * M.twist
                p2 -= TWO_PI * round(p2 / TWO_PI)
                reps.append(np.array([t2, r, p2]))
        return reps

    def _key0(self, rep):
        # three leading coordinates suffice as a bucket key (for
        # hyperboloid points the last coordinate is determined up to the
        # match tolerance; candidates are disambiguated by _match)
        return tuple(np.round(rep[:3] / self.grid).astype(int))

    def _keys(self, rep):
        base = np.round(rep[:3] / self.grid).astype(int)
        for d0 in (0, -1, 1):
            for d1 in (0, -1, 1):
                for d2 in (0, -1, 1):
                    yield (base[0] + d0, base[1] + d1, base[2] + d2)

    def _match(self, rep, vid) -> bool:
        other = self._reduced[vid]
        d = rep - other
        if self.M is not None:
            d[2] -= TWO_PI * round(d[2] / TWO_PI)
        return bool(np.all(np.abs(d) <= 4.0 * self.grid))

    def id_of(self, X) -> int:
        reps = self._reps(X)
        for rep in reps:
            for key in self._keys(rep):
                for vid in self._table.get(key, ()):
                    if self._match(rep, vid):
                        return vid
        vid = len(self._reduced)
        rep = reps[0]
        self._reduced.append(rep)
        self._pos.append(np.asarray(X, dtype=float))
        self._table.setdefault(self._key0(rep), []).append(vid)
        return vid

    def position(self, vid) -> np.ndarray:
        """Canonical coordinates: the reduced-representative lift when a
        quotient is attached, else the stored raw position."""
        if self.M is None:
            return self._pos[vid]
        return kernel.uhs_to_hyperboloid(self.M.from_cyl(self._reduced[vid]))

    def __len__(self) -> int:
        return len(self._reduced)


# ---------------------------------------------------------------------------
# the s-convex retraction


def retraction_point(p, s, C: Cone, eps: float = 1e-9):
    """Entry point of the segment [p, s] into the tube.

    p must lie outside the open tube and s inside; the returned point is
    on the tube boundary, and points already on the boundary are fixed
    (so the map is idempotent).  Accepts PointUHS or hyperboloid/UHS
    arrays; returns the same kind.
    """
    as_point = isinstance(p, kernel.PointUHS)
    P = kernel.uhs_to_hyperboloid(p) if as_point or \
        np.asarray(p, dtype=float).shape[-1] == 3 else np.asarray(p, dtype=float)
    if float(C.dist_to_axis(P)) < C.radius - eps:
        raise ValueError("retraction argument lies inside the open tube")
    clip = kernel.segment_cone_clip(P, s, C, eps=eps)
    if clip is None:
        raise ValueError("segment from p to s misses the tube")
    t0, _ = clip
    sample, length = kernel.geodesic_arc(P, s)
    R = sample(t0 * length)
    R = R / math.sqrt(max(-float(mdot(R, R)), 1e-300))
    if as_point:
        u = kernel.hyperboloid_to_uhs(R)
        return kernel.PointUHS(float(u[0]), float(u[1]), float(u[2]))
    return R


# ---------------------------------------------------------------------------
# triangulated surfaces (boundary spheres of the cut components)


@dataclass
class Surface:
    """A closed triangulated surface with explicit edge gluings.

    triangles are oriented vid triples; glue pairs edge instances
    (triangle index, edge index) so that every instance appears exactly
    once.  Edge e of a triangle runs from corner e to corner e+1.
    Explicit gluings allow duplicate vid pairs (bigons at combinatorial
    cuts), which id-based matching could not represent.
    """

    triangles: list
    glue: list
    labels: list                  # per-triangle provenance tag

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def directed_edge(self, ti, ei):
        t = self.triangles[ti]
        return t[ei], t[(ei + 1) % 3]

    def orient(self) -> bool:
        """Flip triangles so every gluing reverses edge direction; returns
        False when the surface is non-orientable.  Labels are preserved."""
        adj: dict = {}
        for (a, b) in self.glue:
            adj.setdefault(a[0], []).append((a, b))
            adj.setdefault(b[0], []).append((b, a))
        flip = {}
        for start in range(len(self.triangles)):
            if start in flip:
                continue
            flip[start] = False
            stack = [start]
            while stack:
                ti = stack.pop()
                for (me, other) in adj.get(ti, ()):
                    tj = other[0]
                    u, v = self.directed_edge(*me)
                    x, y = self.directed_edge(*other)
                    if {u, v} != {x, y}:
                        raise ValueError("glued edges have different vertices")
                    # consistent iff the effective directions are opposite
                    need = ((x, y) == (u, v)) ^ flip[ti]
                    if tj not in flip:
                        flip[tj] = need
                        stack.append(tj)
                    elif flip[tj] != need:
                        return False
        for ti, f in flip.items():
            if f:
                a, b, c = self.triangles[ti]
                self.triangles[ti] = (a, c, b)
        # re-derive edge indices after flips is unnecessary: flipping a
        # triangle permutes its edges, so remap the gluing edge indices
        self.glue = [(self._remap(a, flip), self._remap(b, flip))
                     for a, b in self.glue]
        return True

    @staticmethod
    def _remap(inst, flip):
        ti, ei = inst
        if not flip.get(ti):
            return inst
        # (a,b,c) -> (a,c,b): edge 0 (a,b) -> edge 2' (b,a); edge 1
        # (b,c) -> edge 1' (c,b); edge 2 (c,a) -> edge 0' (a,c)
        return (ti, {0: 2, 1: 1, 2: 0}[ei])

    def euler(self) -> int:
        """V - E + F with vertices from corner union-find through the
        gluings (correct in the presence of duplicate vid pairs)."""
        n = len(self.triangles)
        parent = list(range(3 * n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x, y):
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[rx] = ry

        for (ti, ei), (tj, ej) in self.glue:
            u, v = self.directed_edge(ti, ei)
            x, y = self.directed_edge(tj, ej)
            if (x, y) == (v, u):
                union(3 * ti + ei, 3 * tj + (ej + 1) % 3)
                union(3 * ti + (ei + 1) % 3, 3 * tj + ej)
            elif (x, y) == (u, v):
                union(3 * ti + ei, 3 * tj + ej)
                union(3 * ti + (ei + 1) % 3, 3 * tj + (ej + 1) % 3)
            else:
                raise ValueError("glued edges have different vertices")
        V = len({find(x) for x in range(3 * n)})
        return V - len(self.glue) + n

    def n_vertices(self) -> int:
        return self.euler() + len(self.glue) - len(self.triangles)

    def check_closed(self):
        seen = set()
        for pair in self.glue:
            for inst in pair:
                if inst in seen:
                    raise ValueError(f"edge instance {inst} glued twice")
                seen.add(inst)
        need = {(ti, ei) for ti in range(len(self.triangles))
                for ei in range(3)}
        if seen != need:
            missing = sorted(need - seen)[:4]
            raise ValueError(f"surface not closed; open edges {missing}")


def surface_from_vid_triangles(tris, labels=None) -> Surface:
    """Surface with gluings inferred from matching vid pairs; every
    undirected edge must occur in exactly two triangles."""
    tris = [tuple(int(v) for v in t) for t in tris]
    for t in tris:
        if len(set(t)) != 3:
            raise ValueError(f"degenerate triangle {t}")
    inst: dict = {}
    for ti, t in enumerate(tris):
        for ei in range(3):
            key = frozenset((t[ei], t[(ei + 1) % 3]))
            inst.setdefault(key, []).append((ti, ei))
    glue = []
    for key, lst in inst.items():
        if len(lst) != 2:
            raise ValueError(f"edge {sorted(key)} on {len(lst)} triangles")
        glue.append((lst[0], lst[1]))
    if labels is None:
        labels = [("surface",)] * len(tris)
    return Surface(triangles=tris, glue=glue, labels=list(labels))


# ---------------------------------------------------------------------------
# triangulations (tetrahedral complexes with explicit face gluings)


@dataclass
class Triangulation:
    """Tetrahedra as vid 4-tuples with explicit face gluings.

    Face f of a tetrahedron omits vertex f.  boundary marks faces of the
    complex boundary with a provenance label."""

    vertices: dict
    tets: list
    gluings: list
    boundary: list

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def face_vids(self, ti, fi):
        t = self.tets[ti]
        return tuple(t[k] for k in range(4) if k != fi)

    def check_gluings(self):
        """Every face in at most one gluing, glued faces share their
        vertex set, and gluings plus boundary cover all faces."""
        used = set()
        for (a, b) in self.gluings:
            for inst in (a, b):
                if inst in used:
                    raise ValueError(f"face {inst} glued twice")
                used.add(inst)
            if set(self.face_vids(*a)) != set(self.face_vids(*b)):
                raise ValueError(f"glued faces {a}, {b} differ")
        for (ti, fi, _label) in self.boundary:
            if (ti, fi) in used:
                raise ValueError(f"boundary face ({ti},{fi}) is glued")
            used.add((ti, fi))
        need = {(ti, fi) for ti in range(len(self.tets)) for fi in range(4)}
        if used != need:
            raise ValueError("faces neither glued nor marked boundary")

    def is_orientable(self) -> bool:
        """BFS sign assignment: a gluing is compatible when the induced
        boundary orientations of the shared face are opposite."""
        adj: dict = {}
        for a, b in self.gluings:
            adj.setdefault(a[0], []).append((a, b))
            adj.setdefault(b[0], []).append((b, a))
        sign: dict = {}
        for start in range(len(self.tets)):
            if start in sign:
                continue
            sign[start] = 1
            stack = [start]
            while stack:
                ti = stack.pop()
                for (me, other) in adj.get(ti, ()):
                    tj = other[0]
                    rel = self._gluing_parity(me, other)
                    want = -sign[ti] * rel
                    if tj not in sign:
                        sign[tj] = want
                        stack.append(tj)
                    elif sign[tj] != want:
                        return False
        return True

    def _gluing_parity(self, a, b):
        """+1 when the two induced face orientations agree."""
        fa = self.face_vids(*a)
        fb = self.face_vids(*b)
        # parity of the permutation carrying fa onto fb (vids distinct)
        perm = [fb.index(v) for v in fa]
        swaps = 0
        perm = list(perm)
        for i in range(3):
            while perm[i] != i:
                j = perm[i]
                perm[i], perm[j] = perm[j], perm[i]
                swaps += 1
        p = 1 if swaps % 2 == 0 else -1
        sa = 1 if a[1] % 2 == 0 else -1
        sb = 1 if b[1] % 2 == 0 else -1
        return p * sa * sb

    def euler_distinct(self) -> int:
        """V - E + F - T over distinct simplices by vid sets (valid when
        no two simplices share a vid set)."""
        vs, es, fs = set(), set(), set()
        for t in self.tets:
            vs.update(t)
            for i in range(4):
                for j in range(i + 1, 4):
                    es.add(frozenset((t[i], t[j])))
                fs.add(frozenset(t[:i] + t[i + 1:]))
        return len(vs) - len(es) + len(fs) - len(self.tets)


def cone_surface(surf: Surface, apex: int, positions: dict,
                 boundary_label=None) -> Triangulation:
    """Cone a closed oriented surface from an apex vertex.

    One tetrahedron per surface triangle; internal faces are glued along
    the surface edge gluings; the surface triangles themselves become
    boundary faces (face 0 of each tetrahedron) unless relabeled later.
    """
    tets = [(apex, a, b, c) for (a, b, c) in surf.triangles]
    gluings = []
    for (ti, ei), (tj, ej) in surf.glue:
        gluings.append(((ti, 1 + (ei + 2) % 3), (tj, 1 + (ej + 2) % 3)))
    boundary = []
    for ti in range(len(tets)):
        label = boundary_label if boundary_label is not None \
            else surf.labels[ti]
        boundary.append((ti, 0, label))
    return Triangulation(vertices=positions, tets=tets,
                         gluings=gluings, boundary=boundary)


def cone_ball(tris, positions=None, apex=None) -> Triangulation:
    """Triangulated ball from a triangulated sphere: validates the
    surface (closed, orientable, Euler characteristic 2) and cones it
    from a new apex; the tetrahedron count is the triangle count, which
    equals 2 v - 4 for v surface vertices."""
    surf = surface_from_vid_triangles(tris)
    surf.check_closed()
    if not surf.orient():
        raise ValueError("surface is not orientable")
    if surf.euler() != 2:
        raise ValueError(f"surface Euler characteristic {surf.euler()} != 2")
    vids = sorted({v for t in surf.triangles for v in t})
    if apex is None:
        apex = max(vids) + 1
    pos = dict(positions) if positions else {v: None for v in vids}
    if apex not in pos:
        if positions:
            pos[apex] = np.mean([np.asarray(pos[v]) for v in vids], axis=0)
        else:
            pos[apex] = None
    tri = cone_surface(surf, apex, pos)
    tri.check_gluings()
    return tri


# ---------------------------------------------------------------------------
# canonical seed points on elliptical arcs

from scipy.optimize import brentq


def _arc_point(chart, theta):
    return chart.point(chart.ellipse_point(theta))


def _arc_equidistant_seed(chart, arc, Pa, Pb):
    """The point of the arc equidistant from its two endpoints: a
    chart-independent (hence cell-independent) interior marker."""
    def g(th):
        X = _arc_point(chart, th)
        return float(kernel.dist_hyperboloid(X, Pa)
                     - kernel.dist_hyperboloid(X, Pb))
    a, b = arc.theta_a, arc.theta_b
    ga, gb = g(a), g(b)
    if ga == 0.0 or gb == 0.0 or (ga > 0) == (gb > 0):
        raise GenericityError("arc midpoint seed has no sign change")
    th = brentq(g, a, b, xtol=1e-13)
    return th, _arc_point(chart, th)


def _refine_extremum(f, th0, half_window, minimize=True, iters=80):
    """Golden-section refinement of a 1D extremum near th0."""
    sgn = 1.0 if minimize else -1.0
    lo, hi = th0 - half_window, th0 + half_window
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c1 = hi - invphi * (hi - lo)
    c2 = lo + invphi * (hi - lo)
    f1, f2 = sgn * f(c1), sgn * f(c2)
    for _ in range(iters):
        if hi - lo < 1e-13:
            break
        if f1 <= f2:
            hi, c2, f2 = c2, c1, f1
            c1 = hi - invphi * (hi - lo)
            f1 = sgn * f(c1)
        else:
            lo, c1, f1 = c1, c2, f2
            c2 = lo + invphi * (hi - lo)
            f2 = sgn * f(c2)
    return 0.5 * (lo + hi)


def _full_arc_seeds(chart, cone: Cone, M=None, n_grid: int = 256):
    """Four canonical seeds on a vertex-free ellipse: the two axial
    (t) extrema and the two mid-level crossings between them.  When the
    ellipse is nearly level (t almost constant) the seeds sit instead at
    three fixed deck-reduced angles.  All rules are geometric, so the
    two cells sharing the face compute identical points."""
    th_grid = np.linspace(0.0, TWO_PI, n_grid, endpoint=False)
    X = chart.point(chart.ellipse_point(th_grid))
    cyl = cone.cylinder_from_hyperboloid(X)
    t_vals = cyl[:, 0]

    def t_of(th):
        return float(cone.cylinder_from_hyperboloid(
            _arc_point(chart, th))[0])

    t_range = float(t_vals.max() - t_vals.min())
    step = TWO_PI / n_grid
    if t_range >= 1e-3:
        th_min = _refine_extremum(t_of, float(th_grid[np.argmin(t_vals)]),
                                  2.0 * step, minimize=True)
        th_max = _refine_extremum(t_of, float(th_grid[np.argmax(t_vals)]),
                                  2.0 * step, minimize=False)
        t_mid = 0.5 * (t_of(th_min) + t_of(th_max))
        th_min %= TWO_PI
        th_max %= TWO_PI
        lo, hi = sorted((th_min, th_max))
        out = []
        for a, b in ((lo, hi), (hi, lo + TWO_PI)):
            out.append(float(brentq(lambda th: t_of(th) - t_mid,
                                    a + 1e-9, b - 1e-9, xtol=1e-13)))
        thetas = sorted(th % TWO_PI for th in [th_min, th_max] + out)
    else:
        if M is None:
            raise GenericityError("level ellipse without a quotient chart")
        phi = np.unwrap(cyl[:, 1])
        n_deck = math.floor(float(t_vals[0]) / M.length)
        phi_red = phi - n_deck * M.twist
        thetas = []
        for target in (0.0, TWO_PI / 3.0, 2.0 * TWO_PI / 3.0):
            shift = phi_red[0] - ((phi_red[0] - target) % TWO_PI
                                  if phi_red[-1] < phi_red[0]
                                  else -((target - phi_red[0]) % TWO_PI))
            # solve phi_red(theta) = shift on the monotone winding branch
            k = np.searchsorted(phi_red if phi_red[-1] > phi_red[0]
                                else -phi_red,
                                shift if phi_red[-1] > phi_red[0] else -shift)
            k = int(np.clip(k, 1, n_grid - 1))
            a, b = float(th_grid[k - 1]), float(th_grid[k])

            def g(th, shift=shift):
                c = cone.cylinder_from_hyperboloid(_arc_point(chart, th))
                d = float(c[1]) - n_deck * M.twist - shift
                return d - TWO_PI * round(d / TWO_PI)
            try:
                thetas.append(float(brentq(g, a, b, xtol=1e-13)))
            except ValueError:
                thetas.append(0.5 * (a + b))
        thetas = sorted(th % TWO_PI for th in thetas)
    return [(th, _arc_point(chart, th)) for th in thetas]


# ---------------------------------------------------------------------------
# component boundary surfaces from the clip decomposition


@dataclass
class ComponentTriangulation:
    """Surface and cone triangulation of one component of cell minus tube."""
    component: int
    surface: Surface
    apex: int
    tri: Triangulation          # tets local to this component
    n_surface_vertices: int
    genus: int


@dataclass
class CellTriangulation:
    """All components of one cell, with bookkeeping for assembly."""
    index: int
    flagged: bool
    components: list
    tets: list                  # concatenated vid 4-tuples
    gluings: list               # internal, over concatenated tet indices
    face_tris: dict             # face_id -> list of tet indices (face 0)
    boundary: list              # (tet, 0, label) for non-wall faces
    vertex_ids: set

    @property
    def n_tets(self):
        return len(self.tets)


class _SurfaceBuilder:
    """Assembles the boundary surface of each component of a clipped
    cell over the shared vertex registry and triangulates it."""

    def __init__(self, clipped, cone, registry: VertexRegistry, M=None,
                 cuts=None):
        self.clipped = clipped
        self.cone = cone
        self.reg = registry
        self.M = M
        self.cuts = cuts
        self.poly = clipped.polytope
        self.H = self.poly.vertices_hyperboloid()
        self.vvid = {}
        for v in range(self.poly.n_vertices):
            if clipped.vertices_in_X[v]:
                self.vvid[v] = registry.id_of(self.H[v])
        self.xvid = {c.id: registry.id_of(c.X) for c in clipped.crossings}
        self.vpos = {}
        for v, vid in self.vvid.items():
            self.vpos.setdefault(vid, self.H[v])
        for c in clipped.crossings:
            self.vpos.setdefault(self.xvid[c.id], c.X)
        # interior vertices on arcs: aid -> sorted [(theta, vid)]
        self.arc_verts = {a.id: [] for a in clipped.arcs}
        # interior vertices on cell edges: edge_key -> [(frac, vid)]
        self.seg_verts = {}
        self._seed_arcs()
        if cuts is not None:
            self._insert_cuts(cuts)

    def _insert_cuts(self, cuts):
        for (aid, th, vid, X) in cuts.arc_ins:
            if all(v != vid for _, v in self.arc_verts[aid]):
                self.vpos.setdefault(vid, np.asarray(X, dtype=float))
                self.arc_verts[aid].append((th, vid))
                self.arc_verts[aid].sort()
        for (ekey, fr, vid, X) in cuts.edge_ins:
            lst = self.seg_verts.setdefault(ekey, [])
            if all(v != vid for _, v in lst):
                self.vpos.setdefault(vid, np.asarray(X, dtype=float))
                lst.append((fr, vid))
                lst.sort()

    def _theta_of(self, aid, vid):
        for th, v in self.arc_verts[aid]:
            if v == vid:
                return th
        arc = self.clipped.arcs[aid]
        if not arc.full:
            if vid == self.xvid[arc.x_a]:
                return arc.theta_a
            if vid == self.xvid[arc.x_b]:
                return arc.theta_b
        raise KeyError((aid, vid))

    def _frac_of(self, ekey, vid):
        for fr, v in self.seg_verts.get(ekey, ()):
            if v == vid:
                return fr
        for x in self.clipped.edge_clips[ekey].crossings:
            if self.xvid[x] == vid:
                return self.clipped.crossings[x].frac
        if self.vvid.get(ekey[0]) == vid:
            return 0.0
        if self.vvid.get(ekey[1]) == vid:
            return 1.0
        raise KeyError((ekey, vid))

    # -- combinatorial cuts ------------------------------------------------

    def _local_side(self, loop, idx, w):
        """Which side of the cutting plane the piece occupies just before
        the chord copy at idx: sampled a small step back along the
        preceding boundary edge, so crossings elsewhere cannot confuse
        the sign."""
        pv, pdesc = loop[idx - 1]
        cv = loop[idx][0]
        if pdesc[0] == "arc":
            aid = pdesc[1]
            arc = self.clipped.arcs[aid]
            chart = self.clipped.charts[arc.face_id]
            th_c = self._theta_of(aid, cv)
            th_p = self._theta_of(aid, pv)
            d = th_p - th_c
            if arc.full:
                d -= TWO_PI * round(d / TWO_PI)
            X = _arc_point(chart, th_c + 0.01 * d)
        elif pdesc[0] == "seg":
            ekey = pdesc[1]
            f_c = self._frac_of(ekey, cv)
            f_p = self._frac_of(ekey, pv)
            K = kernel.hyperboloid_to_klein(self.H)
            k = K[ekey[0]] + (f_c + 0.01 * (f_p - f_c)) * (K[ekey[1]] - K[ekey[0]])
            X = kernel.klein_to_hyperboloid(k)
        else:
            raise GenericityError("cut chords meet at a common endpoint")
        val = float(mdot(X, w))
        if abs(val) < 1e-12:
            raise GenericityError("cut side sample lies on the plane")
        return 1 if val > 0.0 else -1

    def _apply_chords(self, loops, chords):
        """Cut (or constrain) a piece's boundary loops along straight
        chords between boundary vertices.  Each chord splits a loop in
        two or merges two loops; its two copies receive descriptors that
        pair them with the cutting wall's copies (kcut/alpha, by
        geometric side) or with each other (reglue)."""
        loops = [list(l) for l in loops]
        for (va, vb, tag, w) in chords:
            occ_a = [(li, i) for li, l in enumerate(loops)
                     for i, (v, _) in enumerate(l) if v == va]
            occ_b = [(li, i) for li, l in enumerate(loops)
                     for i, (v, _) in enumerate(l) if v == vb]
            if len(occ_a) != 1 or len(occ_b) != 1:
                raise GenericityError(
                    f"chord endpoint multiplicity {len(occ_a)},{len(occ_b)}")
            (la, ia), (lb, ib) = occ_a[0], occ_b[0]
            mark_a = ("pending", tag, 0)
            mark_b = ("pending", tag, 1)
            if la == lb:
                L = self._rotate(loops[la], ia)
                ib = (ib - ia) % len(L)
                loop1 = L[:ib] + [(vb, mark_a)]
                loop2 = L[ib:] + [(va, mark_b)]
                if len(loop1) < 3 or len(loop2) < 3:
                    raise GenericityError("cut chord produces a bigon")
                loops[la] = loop1
                loops.append(loop2)
            else:
                L = self._rotate(loops[la], ia)
                Lm = self._rotate(loops[lb], ib)
                merged = L + [(va, mark_a)] + Lm + [(vb, mark_b)]
                loops[la] = merged
                del loops[lb]
        # resolve pending descriptors
        sides: dict = {}
        for loop in loops:
            for idx, (v, d) in enumerate(loop):
                if d[0] != "pending":
                    continue
                tag = d[1]
                if tag[0] == "reglue":
                    loop[idx] = (v, tag)
                    continue
                w = next(w_ for (_, _, t_, w_) in chords if t_ == tag)
                side = self._local_side(loop, idx, w)
                sides.setdefault(tag, []).append(side)
                loop[idx] = (v, tag + (side,))
        for tag, ss in sides.items():
            if sorted(ss) != [-1, 1]:
                raise GenericityError(
                    f"cut chord {tag} sides {ss} are not opposite")
        return loops

    # -- seeds ------------------------------------------------------------

    def _add_arc_vertex(self, aid, theta, X):
        vid = self.reg.id_of(X)
        self.vpos.setdefault(vid, np.asarray(X, dtype=float))
        self.arc_verts[aid].append((theta, vid))
        self.arc_verts[aid].sort()
        return vid

    def _seed_arcs(self):
        for arc in self.clipped.arcs:
            chart = self.clipped.charts[arc.face_id]
            if arc.full:
                for th, X in _full_arc_seeds(chart, self.cone, self.M):
                    self._add_arc_vertex(arc.id, th, X)
            else:
                Pa = self.clipped.crossings[arc.x_a].X
                Pb = self.clipped.crossings[arc.x_b].X
                th, X = _arc_equidistant_seed(chart, arc, Pa, Pb)
                vid = self.reg.id_of(X)
                if vid in (self.xvid[arc.x_a], self.xvid[arc.x_b]):
                    raise GenericityError("arc too short to seed")
                self.vpos.setdefault(vid, np.asarray(X, dtype=float))
                self.arc_verts[arc.id].append((th, vid))

    # -- loop construction ------------------------------------------------

    def _ref_vid(self, ref):
        return self.vvid[ref[1]] if ref[0] == 'v' else self.xvid[ref[1]]

    @staticmethod
    def _edge_frac(ref, ekey, crossings):
        if ref[0] == 'v':
            return 0.0 if ref[1] == ekey[0] else 1.0
        return crossings[ref[1]].frac

    def _seg_entries(self, r1, r2):
        """Entries (vid, desc) for the cell-edge portion from ref r1 to
        ref r2, excluding the final vertex."""
        if r1[0] == 'v' and r2[0] == 'v':
            a, b = r1[1], r2[1]
            ekey = (min(a, b), max(a, b))
        else:
            xid = r1[1] if r1[0] == 'x' else r2[1]
            ekey = self.clipped.crossings[xid].edge
        f1 = self._edge_frac(r1, ekey, self.clipped.crossings)
        f2 = self._edge_frac(r2, ekey, self.clipped.crossings)
        inner = [(fr, vid) for fr, vid in self.seg_verts.get(ekey, ())
                 if min(f1, f2) < fr < max(f1, f2)]
        inner.sort(reverse=(f2 < f1))
        return [(self._ref_vid(r1), ("seg", ekey))] + \
            [(vid, ("seg", ekey)) for _, vid in inner]

    def _arc_entries(self, aid, rev, from_vid=None):
        """Entries for traversing arc aid, excluding the final vertex.
        rev follows the face-piece loop convention; from_vid is used for
        footprint curves where the traversal is given by the chain."""
        arc = self.clipped.arcs[aid]
        inner = list(self.arc_verts[aid])
        if arc.full:
            # vertex-free closed loop handled by the caller
            raise AssertionError("full arc inside a chained traversal")
        va, vb = self.xvid[arc.x_a], self.xvid[arc.x_b]
        forward = not rev if from_vid is None else (from_vid == va)
        if forward:
            start = va
            seq = [vid for _, vid in inner]
        else:
            start = vb
            seq = [vid for _, vid in reversed(inner)]
        return [(start, ("arc", aid))] + [(v, ("arc", aid)) for v in seq]

    def _full_arc_cycle(self, aid):
        inner = self.arc_verts[aid]
        if len(inner) < 3:
            raise GenericityError("vertex-free loop with too few seeds")
        return [(vid, ("arc", aid)) for _, vid in inner]

    def _face_piece_loops(self, fp):
        loops = []
        for loop in fp.loops:
            if len(loop) == 1 and loop[0][0] == 'arc':
                loops.append(self._full_arc_cycle(loop[0][1]))
                continue
            entries = []
            for item in loop:
                if item[0] == 'chain':
                    chain = item[1]
                    pairs = list(zip(chain, chain[1:]))
                    if len(loop) == 1:
                        pairs.append((chain[-1], chain[0]))
                    for r1, r2 in pairs:
                        entries.extend(self._seg_entries(r1, r2))
                else:
                    _, aid, rev = item
                    entries.extend(self._arc_entries(aid, rev))
            loops.append(entries)
        return loops

    def _footprint_loops(self, piece):
        loops = []
        for cid in piece.curve_ids:
            curve = self.clipped.curves[cid]
            if not curve.crossing_ids:
                (aid, _), = curve.members
                loops.append(self._full_arc_cycle(aid))
                continue
            entries = []
            # member k runs from crossing_ids[k-1] to crossing_ids[k]
            heads = [curve.crossing_ids[-1]] + curve.crossing_ids[:-1]
            for (aid, _), head in zip(curve.members, heads):
                entries.extend(
                    self._arc_entries(aid, None, from_vid=self.xvid[head]))
            loops.append(entries)
        return loops

    # -- piece triangulation ----------------------------------------------

    @staticmethod
    def _rotate(cycle, k):
        return cycle[k:] + cycle[:k]

    @staticmethod
    def _reverse(cycle):
        """Reverse a cycle of (token, vid, desc-to-next) entries, keeping
        each desc attached to its (now reversed) edge."""
        n = len(cycle)
        out = []
        for i in range(n - 1, -1, -1):
            tok, vid, _ = cycle[i]
            desc = cycle[(i - 1) % n][2]
            out.append((tok, vid, desc))
        return out

    @staticmethod
    def _canonical(cycle):
        """Rotate to the least vid and fix the direction by the smaller
        neighbor, so both cells sharing the piece traverse it alike."""
        k = min(range(len(cycle)), key=lambda i: cycle[i][1])
        cyc = _SurfaceBuilder._rotate(cycle, k)
        if cyc[-1][1] < cyc[1][1]:
            cyc = _SurfaceBuilder._reverse(cyc)
            k2 = min(range(len(cyc)), key=lambda i: cyc[i][1])
            cyc = _SurfaceBuilder._rotate(cyc, k2)
        return cyc

    @staticmethod
    def _fan(cycle):
        """Fan triangulation of a token cycle from the least vid that
        occurs exactly once (avoiding duplicated cut/keyhole copies)."""
        from collections import Counter
        counts = Counter(vid for _, vid, _ in cycle)
        single = [i for i, (_, vid, _) in enumerate(cycle)
                  if counts[vid] == 1]
        if not single:
            raise GenericityError("cycle without a simple fan apex")
        k = min(single, key=lambda i: cycle[i][1])
        cyc = _SurfaceBuilder._rotate(cycle, k)
        tris = []
        for i in range(1, len(cyc) - 1):
            t = (cyc[0][0], cyc[i][0], cyc[i + 1][0])
            if len({cyc[0][1], cyc[i][1], cyc[i + 1][1]}) != 3:
                raise GenericityError("degenerate fan triangle")
            tris.append(t)
        return tris

    @staticmethod
    def _zipper(A, B):
        """Deterministic strip triangulation of the annulus between two
        vertex cycles (used for two-loop pieces, where a combinatorial
        cut would duplicate triangles in the shared-face serialization)."""
        A = _SurfaceBuilder._canonical(A)
        B = _SurfaceBuilder._canonical(B)
        nA, nB = len(A), len(B)
        if {v for _, v, _ in A} & {v for _, v, _ in B}:
            raise GenericityError("annulus loops share a vertex")
        tris = []
        i = j = 0
        while i < nA or j < nB:
            adv_a = (i < nA) and (j >= nB or
                                  A[(i + 1) % nA][1] < B[(j + 1) % nB][1])
            a, b = A[i % nA], B[j % nB]
            if adv_a:
                tris.append((a[0], A[(i + 1) % nA][0], b[0]))
                i += 1
            else:
                tris.append((a[0], B[(j + 1) % nB][0], b[0]))
                j += 1
        return tris

    def _triangulate_piece(self, piece_id, cycles):
        """Triangles (as token triples) plus the loop-edge key map for
        one piece.  cycles are lists of (vid, desc) entries; tokens are
        created here."""
        tok_cycles = []
        tok_vid = {}
        nxt = 0
        for cyc in cycles:
            if len(cyc) < 3:
                raise GenericityError("piece loop with fewer than 3 vertices")
            rows = []
            for vid, desc in cyc:
                rows.append((nxt, vid, desc))
                tok_vid[nxt] = vid
                nxt += 1
            tok_cycles.append(rows)

        kh = 0
        if len(tok_cycles) > 2:
            # keyhole-merge all loops into one (footprint pieces only;
            # their triangles are never serialized for cross-cell match)
            tok_cycles.sort(key=lambda c: min(v for _, v, _ in c))
            base = tok_cycles[0]
            for other in tok_cycles[1:]:
                ku = min(range(len(base)), key=lambda i: base[i][1])
                kw = min(range(len(other)), key=lambda i: other[i][1])
                base = self._rotate(base, ku)
                other = self._rotate(other, kw)
                u_tok, u_vid, _ = base[0]
                w_tok, w_vid, _ = other[0]
                u2, w2 = nxt, nxt + 1
                nxt += 2
                tok_vid[u2], tok_vid[w2] = u_vid, w_vid
                key = ("keyhole", piece_id, kh)
                kh += 1
                base = base + [(u2, u_vid, key)] + other + [(w2, w_vid, key)]
            tok_cycles = [base]

        if len(tok_cycles) == 1:
            cyc = [(t, v, d) for t, v, d in tok_cycles[0]]
            try:
                tris = self._fan(cyc)
            except GenericityError:
                # every vid occurs twice (deck-identified boundary):
                # fan from a new interior vertex instead; the canonical
                # positions make the choice cell-independent
                mean = np.mean([self.reg.position(v) for _, v, _ in cyc],
                               axis=0)
                mean = mean / math.sqrt(max(-float(mdot(mean, mean)),
                                            1e-300))
                apex_vid = self.reg.id_of(mean)
                if any(v == apex_vid for _, v, _ in cyc):
                    raise GenericityError(
                        "interior fan apex collides with the boundary")
                self.vpos.setdefault(apex_vid, mean)
                apex_tok = nxt
                tok_vid[apex_tok] = apex_vid
                nxt += 1
                tris = []
                for i in range(len(cyc)):
                    a, b = cyc[i][0], cyc[(i + 1) % len(cyc)][0]
                    tris.append((apex_tok, a, b))
            cycles_out = [cyc]
        else:
            A, B = tok_cycles
            tris = self._zipper(A, B)
            cycles_out = [self._canonical(A), self._canonical(B)]

        # directed loop-edge -> desc (for gluing keys)
        loop_edges = {}
        for cyc in cycles_out:
            n = len(cyc)
            for i in range(n):
                t0, v0, desc = cyc[i]
                t1 = cyc[(i + 1) % n][0]
                loop_edges[(t0, t1)] = desc
        return tris, tok_vid, loop_edges

    # -- component surface -------------------------------------------------

    @staticmethod
    def _loop_vids(loops):
        return {v for l in loops for v, _ in l}

    def _piece_inventory(self, comp):
        """(label, cycles) for every boundary piece of the component,
        with cut and constraint chords applied."""
        cuts = self.cuts
        out = []
        for i in comp.face_piece_ids:
            fp = self.clipped.face_pieces[i]
            face = self.poly.faces[fp.face_id]
            label = ("cutoff", fp.face_id) if face.is_cutoff \
                else ("face", fp.face_id)
            loops = self._face_piece_loops(fp)
            chords = []
            if cuts is not None:
                vids = self._loop_vids(loops)
                for ch in cuts.face_chords.get(fp.face_id, ()):
                    if ch[0] in vids or ch[1] in vids:
                        if not (ch[0] in vids and ch[1] in vids):
                            raise GenericityError(
                                "chord endpoints on different face pieces")
                        chords.append(ch)
            if chords:
                for loop in self._apply_chords(loops, chords):
                    out.append((label, [loop]))
            else:
                out.append((label, loops))
        for i in comp.footprint_piece_ids:
            loops = self._footprint_loops(self.clipped.footprint_pieces[i])
            chords = []
            if cuts is not None:
                vids = self._loop_vids(loops)
                for kf in cuts.kfaces:
                    if kf.x0 in vids or kf.x1 in vids:
                        if not (kf.x0 in vids and kf.x1 in vids):
                            raise GenericityError(
                                "cut arc endpoints on different footprints")
                        chords.append((kf.x0, kf.x1,
                                       ("alpha", kf.kid), kf.plane_w))
            if chords:
                for loop in self._apply_chords(loops, chords):
                    out.append(((("foot",)), [loop]))
            else:
                out.append(((("foot",)), loops))
        if cuts is not None:
            comp_vids = {v for _, cycles in out for l in cycles
                         for v, _ in l}
            for kf in cuts.kfaces:
                if kf.x0 not in comp_vids:
                    continue
                # the cutting wall appears once per side of the cut
                for s in (1, -1):
                    loop = []
                    for vid, desc in kf.loop:
                        if desc[0] == "alpha":
                            desc2 = ("alpha", desc[1], s)
                        else:
                            desc2 = ("kcut", desc[1], desc[2], s)
                        loop.append((vid, desc2))
                    out.append((("kface", kf.kid, s), [loop]))
        return out

    def build_component(self, comp) -> ComponentTriangulation:
        pieces = self._piece_inventory(comp)
        if comp.genus != 0 and not any(lab[0] == "kface" for lab, _ in pieces):
            raise GenericityError(
                "positive-genus component requires a cutting complex")
        return self._assemble_component(comp, pieces)

    def _assemble_component(self, comp, pieces) -> ComponentTriangulation:
        triangles, labels, inst_keys = [], [], []
        for pid, (label, cycles) in enumerate(pieces):
            tris, tok_vid, loop_edges = self._triangulate_piece(pid, cycles)
            for t in tris:
                ti = len(triangles)
                triangles.append(tuple(tok_vid[x] for x in t))
                labels.append(label)
                for ei in range(3):
                    a, b = t[ei], t[(ei + 1) % 3]
                    desc = loop_edges.get((a, b)) or loop_edges.get((b, a))
                    if desc is None:
                        key = ("int", pid, frozenset((a, b)))
                    elif desc[0] in ("keyhole", "kcut", "alpha", "reglue"):
                        key = desc
                    else:
                        key = desc + (frozenset((tok_vid[a], tok_vid[b])),)
                    inst_keys.append(((ti, ei), key))
        groups: dict = {}
        for inst, key in inst_keys:
            groups.setdefault(key, []).append(inst)
        glue = []
        for key, insts in groups.items():
            if len(insts) != 2:
                raise GenericityError(
                    f"component {comp.index}: edge {key} on {len(insts)} "
                    "triangles")
            glue.append((insts[0], insts[1]))
        surf = Surface(triangles=triangles, glue=glue, labels=labels)
        surf.check_closed()
        if not surf.orient():
            raise GenericityError("component surface is not orientable")
        chi = surf.euler()
        if chi != 2:
            raise GenericityError(
                f"component {comp.index}: cut surface has chi {chi}")
        vids = sorted({v for t in surf.triangles for v in t})
        n_v = surf.n_vertices()
        if len(surf.triangles) != 2 * n_v - 4:
            raise AssertionError("sphere triangle count is not 2v - 4")
        pos = {v: np.asarray(self.vpos.get(v, self.reg.position(v)))
               for v in vids}
        mean = np.mean(list(pos.values()), axis=0)
        mean = mean / math.sqrt(max(-float(mdot(mean, mean)), 1e-300))
        apex = self.reg.id_of(mean)
        if apex in pos:
            raise GenericityError("cone apex collides with a surface vertex")
        self.vpos.setdefault(apex, mean)
        pos[apex] = mean
        tri = cone_surface(surf, apex, pos)
        tri.check_gluings()
        return ComponentTriangulation(component=comp.index, surface=surf,
                                      apex=apex, tri=tri,
                                      n_surface_vertices=n_v,
                                      genus=comp.genus)


def build_cell_triangulation(clipped, cone, registry: VertexRegistry,
                             M=None, cuts=None) -> CellTriangulation:
    """Triangulate every component of a clipped cell (cone over its
    boundary sphere, cut to a ball first when the genus is positive)
    with canonical shared-face triangles."""
    b = _SurfaceBuilder(clipped, cone, registry, M=M, cuts=cuts)
    comps = [b.build_component(c) for c in clipped.components]
    tets, gluings, boundary = [], [], []
    face_tris: dict = {}
    ktets: dict = {}
    for ct in comps:
        off = len(tets)
        tets.extend(ct.tri.tets)
        gluings.extend((((a[0] + off, a[1]), (c[0] + off, c[1])))
                       for a, c in ct.tri.gluings)
        for (ti, fi, label) in ct.tri.boundary:
            gi = ti + off
            if label[0] == "face":
                face_tris.setdefault(label[1], []).append(gi)
            elif label[0] == "kface":
                ktets.setdefault((label[1], label[2]), []).append(gi)
            else:
                boundary.append((gi, fi, label))
    # re-identify the two copies of each cutting wall pairwise; the fans
    # coincide, so triangle k of one copy matches triangle k of the other
    for (kid, s), plus in sorted(ktets.items()):
        if s != 1:
            continue
        minus = ktets.get((kid, -1), [])
        if len(plus) != len(minus):
            raise GenericityError("cutting wall copies differ in size")
        for gp, gm in zip(plus, minus):
            gluings.append(((gp, 0), (gm, 0)))
    vertex_ids = {v for t in tets for v in t}
    return CellTriangulation(index=clipped.polytope.index,
                             flagged=clipped.touches_cutoff,
                             components=comps, tets=tets, gluings=gluings,
                             face_tris=face_tris, boundary=boundary,
                             vertex_ids=vertex_ids)


# ---------------------------------------------------------------------------
# assembling cell triangulations into one complex


class AssemblyError(RuntimeError):
    """Raised when the triangulations of a shared wall disagree."""


@dataclass
class AssembledComplex:
    """Glued triangulation of the whole kept region."""
    tri: Triangulation
    cells: list                     # CellTriangulation per cell
    tet_cell: list                  # tet index -> cell index
    registry: VertexRegistry
    n_wall_gluings: int
    boundary_counts: dict

    @property
    def n_tets(self) -> int:
        return self.tri.n_tets

    def cell_tet_counts(self) -> list:
        return [ct.n_tets for ct in self.cells]


def triangulate_cells(clipped_cells, cone, M=None,
                      registry: VertexRegistry | None = None,
                      cuts=None):
    """Cell triangulations over one shared vertex registry."""
    reg = registry if registry is not None else VertexRegistry(M=M)
    return [build_cell_triangulation(cl, cone, reg, M=M,
                                     cuts=None if cuts is None else cuts[i])
            for i, cl in enumerate(clipped_cells)], reg


def _wall_triples(cell_tri: CellTriangulation, fid):
    """Sorted (triple, tet) list for one wall face: the serialization
    that must agree verbatim with the partner cell's."""
    rows = []
    for gi in cell_tri.face_tris.get(fid, ()):
        triple = tuple(sorted(cell_tri.tets[gi][1:]))
        rows.append((triple, gi))
    rows.sort()
    return rows


def assemble(clipped_cells, cell_tris, registry: VertexRegistry,
             constants=None) -> AssembledComplex:
    """Glue per-cell triangulations along shared walls.

    The wall between cell i and the (possibly deck-translated) cell j is
    triangulated independently by both; the two triangle lists must
    match verbatim as sorted vid triples.  A mismatch is an error unless
    one of the cells is flagged (touches the outer cutoff), in which
    case the wall is left as marked boundary.
    """
    offsets = []
    tets, tet_cell = [], []
    for i, ct in enumerate(cell_tris):
        offsets.append(len(tets))
        tets.extend(ct.tets)
        tet_cell.extend([i] * ct.n_tets)

    gluings = []
    for i, ct in enumerate(cell_tris):
        off = offsets[i]
        gluings.extend((((a0 + off, a1), (b0 + off, b1)))
                       for (a0, a1), (b0, b1) in ct.gluings)

    # contributor -> face id lookup per cell
    by_contrib = []
    for cl in clipped_cells:
        m: dict = {}
        for fid, face in enumerate(cl.polytope.faces):
            if face.contributor is not None:
                if face.contributor in m:
                    raise AssemblyError(
                        f"cell {cl.polytope.index}: duplicate contributor "
                        f"{face.contributor}")
                m[face.contributor] = fid
        by_contrib.append(m)

    boundary = []
    boundary_counts: dict = {}

    def mark(ci, fid, kind):
        ct = cell_tris[ci]
        for gi in ct.face_tris.get(fid, ()):
            boundary.append((gi + offsets[ci], 0, (kind, ci, fid)))
            boundary_counts[kind] = boundary_counts.get(kind, 0) + 1

    n_wall = 0
    done = set()
    for i, cl in enumerate(clipped_cells):
        for fid, face in enumerate(cl.polytope.faces):
            if face.contributor is None or (i, fid) in done:
                continue
            j, n = face.contributor
            done.add((i, fid))
            fid2 = by_contrib[j].get((i, -n))
            rows_i = _wall_triples(cell_tris[i], fid)
            if fid2 is None:
                # the partner polytope dropped this wall (a sliver or a
                # face swallowed by the tube); vacuous when no triangles
                if not rows_i:
                    continue
                if cell_tris[i].flagged or cell_tris[j].flagged:
                    mark(i, fid, "unmatched")
                    continue
                raise AssemblyError(
                    f"cell {i} face {fid} has triangles but cell {j} has "
                    f"no matching wall")
            done.add((j, fid2))
            rows_j = _wall_triples(cell_tris[j], fid2)
            if [r[0] for r in rows_i] != [r[0] for r in rows_j]:
                if cell_tris[i].flagged or cell_tris[j].flagged:
                    mark(i, fid, "unmatched")
                    mark(j, fid2, "unmatched")
                    continue
                raise AssemblyError(
                    f"wall triangulations disagree between cell {i} face "
                    f"{fid} and cell {j} face {fid2}")
            for (_, gi), (_, gj) in zip(rows_i, rows_j):
                gluings.append(((gi + offsets[i], 0), (gj + offsets[j], 0)))
                n_wall += 1

    for i, ct in enumerate(cell_tris):
        for (gi, fi, label) in ct.boundary:
            boundary.append((gi + offsets[i], fi, label + (i,)))
            boundary_counts[label[0]] = boundary_counts.get(label[0], 0) + 1

    used = {v for t in tets for v in t}
    vertices = {v: registry.position(v) for v in sorted(used)}
    tri = Triangulation(vertices=vertices, tets=tets,
                        gluings=gluings, boundary=boundary)
    tri.check_gluings()
    if not tri.is_orientable():
        raise AssemblyError("assembled complex is not orientable")
    if constants is not None:
        cap = (6.0 * constants.Cbar0 - 4.0) * constants.C0
        for i, ct in enumerate(cell_tris):
            if not ct.flagged and ct.n_tets > cap:
                raise AssemblyError(
                    f"cell {i} has {ct.n_tets} tetrahedra, over the bound")
    return AssembledComplex(tri=tri, cells=list(cell_tris),
                            tet_cell=tet_cell, registry=registry,
                            n_wall_gluings=n_wall,
                            boundary_counts=boundary_counts)


# ---------------------------------------------------------------------------
# cutting complexes (preimages of the connecting-graph edges)

from .clip import _face_chart


@dataclass
class CutChord:
    """Straight intersection of a cutting wall with one cell face."""
    kid: int
    cid: int
    face_id: int
    vid_a: int
    vid_b: int
    X_a: np.ndarray
    X_b: np.ndarray


@dataclass
class CutFace:
    """One totally geodesic cutting wall: plane through s containing a
    graph arc, intersected with the cell and kept on the arc's side."""
    kid: int
    plane_w: np.ndarray
    loop: list                 # [(vid, desc)]; desc ('alpha',kid)|('kchord',kid,cid)
    chords: list               # CutChord per cell-face crossing
    x0: int                    # vid of the arc start (on a boundary curve)
    x1: int
    arc_ins: list              # (aid, theta, vid, X) insertions on clip arcs
    edge_ins: list             # (ekey, frac, vid, X) insertions on cell edges


@dataclass
class CutComplex:
    """All cutting walls of one component, with incidence bookkeeping."""
    component: int
    faces: list
    interior_edges: list

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def check_bounds(self, C1: float) -> dict:
        return {
            "faces<=2C1-1": self.n_faces <= 2.0 * C1 - 1.0,
            "interior_edges<=4C1-2":
                len(self.interior_edges) <= 4.0 * C1 - 2.0,
        }


@dataclass
class CellCuts:
    """Per-cell cut bookkeeping fed to the surface builder: vertex
    insertions, face chords (own cuts and partner-mirrored constraints),
    and the cutting walls themselves."""
    arc_ins: list = field(default_factory=list)
    edge_ins: list = field(default_factory=list)
    face_chords: dict = field(default_factory=dict)
    kfaces: list = field(default_factory=list)


def _bracketed_root(g, t0, window):
    """Root of g near t0, found by expanding a bracket around t0."""
    for h in (window, 4.0 * window, 16.0 * window):
        a, b = t0 - h, t0 + h
        if g(a) * g(b) < 0.0:
            return float(brentq(g, a, b, xtol=1e-13))
    raise GenericityError("no sign change near the expected root")


def _host_arc_of(clipped, cone, X, face_id=None, tol=1e-6):
    """(aid, theta) of the clip arc containing X on the cone boundary."""
    best = None
    for arc in clipped.arcs:
        if face_id is not None and arc.face_id != face_id:
            continue
        chart = clipped.charts[arc.face_id]
        y = chart.y_of(X)
        loc = np.linalg.solve(chart.axes * chart.radii, y - chart.center)
        th = math.atan2(loc[1], loc[0]) % TWO_PI
        for cand in (th, th + TWO_PI):
            if arc.theta_a - 1e-9 <= cand <= arc.theta_b + 1e-9:
                err = float(np.linalg.norm(
                    chart.ellipse_point(cand) - y))
                if best is None or err < best[2]:
                    best = (arc.id, cand, err)
    if best is None or best[2] > tol:
        raise GenericityError("cut vertex is not on any boundary arc")
    return best[0], best[1]


def _host_edge_of(clipped, X, face_ids=None, tol=1e-6):
    """(edge_key, frac) of the cell edge containing the global point X."""
    poly = clipped.polytope
    K = kernel.hyperboloid_to_klein(poly.vertices_hyperboloid())
    k = kernel.hyperboloid_to_klein(X)
    best = None
    for (a, b) in poly.edges:
        if face_ids is not None:
            faces_ab = [fid for fid, f in enumerate(poly.faces)
                        if a in f.vertex_ids and b in f.vertex_ids]
            if not set(faces_ab) & set(face_ids):
                continue
        d = K[b] - K[a]
        t = float(np.dot(k - K[a], d) / np.dot(d, d))
        if t < -1e-9 or t > 1.0 + 1e-9:
            continue
        err = float(np.linalg.norm(K[a] + t * d - k))
        if best is None or err < best[2]:
            best = ((a, b), min(max(t, 0.0), 1.0), err)
    if best is None or best[2] > tol:
        raise GenericityError("cut vertex is not on any cell edge")
    return best[0], best[1]


def _plane_polygon(poly, chart, y_int):
    """Convex polygon of plane ∩ cell in chart coordinates: ordered
    vertex list plus the cell face carrying each polygon edge."""
    B = chart.B
    rows = []
    for fid, face in enumerate(poly.faces):
        wf = np.asarray(poly.face_plane_global(face).w)
        a = np.array([float(mdot(B[:, 1], wf)), float(mdot(B[:, 2], wf))])
        b = -float(mdot(B[:, 0], wf))
        rows.append((fid, a, b))
    pts = []
    nf = len(rows)
    for i in range(nf):
        for j in range(i + 1, nf):
            Amat = np.array([rows[i][1], rows[j][1]])
            if abs(np.linalg.det(Amat)) < 1e-12:
                continue
            y = np.linalg.solve(Amat, [rows[i][2], rows[j][2]])
            if float(y @ y) >= 1.0 - 1e-9:
                continue
            if all(float(a @ y) <= b + 1e-9 for _, a, b in rows):
                pts.append(y)
    if len(pts) < 3:
        raise GenericityError("cutting plane misses the cell")
    uniq = []
    for y in pts:
        if all(np.linalg.norm(y - u) > 1e-9 for u in uniq):
            uniq.append(y)
    uniq.sort(key=lambda y: math.atan2(y[1] - y_int[1], y[0] - y_int[0]))
    edge_faces = []
    n = len(uniq)
    for i in range(n):
        mid = 0.5 * (uniq[i] + uniq[(i + 1) % n])
        tight = [fid for fid, a, b in rows if abs(float(a @ mid) - b) < 1e-7]
        if len(tight) != 1:
            raise GenericityError("ambiguous face for a cut-polygon edge")
        edge_faces.append(tight[0])
    return uniq, edge_faces


def build_cut_complex(clipped, cone_graph, s, cone,
                      registry: VertexRegistry, curve_ids=None,
                      component=None, M=None) -> CutComplex:
    """Cutting walls for one component from its connecting graph.

    Each graph arc lies in a totally geodesic plane through s; the wall
    is the piece of plane ∩ cell outside the tube adjacent to the arc.
    Only the single-wall case (genus 1) is constructed; the boundary
    walk records one chord per crossed cell face and one new vertex per
    crossed cell edge, so all wall vertices are on the cell boundary.
    """
    if component is None:
        pos = [c for c in clipped.components if c.genus > 0]
        if not pos:
            return CutComplex(component=-1, faces=[], interior_edges=[])
        if len(pos) > 1:
            raise GenericityError("more than one positive-genus component")
        component = pos[0]
    if curve_ids is None:
        curve_ids = []
        for i in component.footprint_piece_ids:
            curve_ids.extend(clipped.footprint_pieces[i].curve_ids)
    if cone_graph.n == 0:
        return CutComplex(component=component.index, faces=[],
                          interior_edges=[])
    if cone_graph.n_arc_edges != 1:
        raise GenericityError(
            "cutting is implemented for a single wall (genus 1) only")
    (gaid, e), = cone_graph.arcs.items()
    w = np.asarray(e["plane_w"], dtype=float)
    w = w / math.sqrt(float(mdot(w, w)))
    poly = clipped.polytope
    kid = component.index

    ends = []
    for gv in (e["va"], e["vb"]):
        pos_cyl = cone_graph.vertices[gv]["pos"]
        X = cone.boundary_from_cylinder(pos_cyl)
        # the graph endpoint sits on a sampled polyline; replace it with
        # the exact plane/arc intersection nearby
        aid, th = _host_arc_of(clipped, cone, X, tol=1e-3)
        achart = clipped.charts[clipped.arcs[aid].face_id]

        def g(t):
            return float(mdot(_arc_point(achart, t), w))
        th = _bracketed_root(g, th, 0.05)
        X = _arc_point(achart, th)
        vid = registry.id_of(X)
        ends.append((vid, X, aid, th))
    (vid0, X0, aid0, th0), (vid1, X1, aid1, th1) = ends

    plane = kernel.GeodesicPlane.from_covector(w)
    chart = _face_chart(plane, cone)
    mid_cyl = e["polyline"][len(e["polyline"]) // 2]
    y_int = chart.y_of(cone.boundary_from_cylinder(mid_cyl))
    verts, edge_faces = _plane_polygon(poly, chart, y_int)
    n = len(verts)

    def on_edge(y, i):
        d = verts[(i + 1) % n] - verts[i]
        t = float(np.dot(y - verts[i], d) / np.dot(d, d))
        err = float(np.linalg.norm(verts[i] + t * d - y))
        return t, err

    # boundary cycle with the arc endpoints inserted
    cyc = []        # (y, kind, data); kind 'corner' carries the two faces
    ins = {}
    for vid, X in ((vid1, X1), (vid0, X0)):
        y = chart.y_of(X)
        best = None
        for i in range(n):
            t, err = on_edge(y, i)
            if -1e-9 <= t <= 1.0 + 1e-9 and (best is None or err < best[2]):
                best = (i, t, err)
        if best is None or best[2] > 1e-6:
            raise GenericityError("cut arc endpoint is not on the polygon")
        ins.setdefault(best[0], []).append((best[1], vid, y))
    for i in range(n):
        cyc.append((verts[i], "corner",
                    (edge_faces[(i - 1) % n], edge_faces[i])))
        for t, vid, y in sorted(ins.get(i, ())):
            cyc.append((y, "end", (vid, edge_faces[i])))
    m = len(cyc)
    i1 = next(i for i in range(m)
              if cyc[i][1] == "end" and cyc[i][2][0] == vid1)
    i0 = next(i for i in range(m)
              if cyc[i][1] == "end" and cyc[i][2][0] == vid0)

    def step_ok(ya, yb):
        mid = 0.5 * (ya + yb)
        return float(chart.q(mid)) > 0.0 and float(mid @ mid) < 1.0

    # choose the walk direction that leaves x1 outside the tube
    y1 = cyc[i1][0]
    fwd = step_ok(y1, y1 + 0.02 * (cyc[(i1 + 1) % m][0] - y1))
    path = [i1]
    i = i1
    while True:
        i = (i + 1) % m if fwd else (i - 1) % m
        path.append(i)
        if i == i0:
            break
        if i == i1 or cyc[i][1] == "end":
            raise GenericityError("cut wall boundary walk failed")
    for a, b in zip(path, path[1:]):
        if not step_ok(cyc[a][0], cyc[b][0]):
            raise GenericityError("cut wall boundary leaves the region")

    # faces and vertices along the walk
    chords, edge_ins, loop = [], [], [(vid0, ("alpha", kid))]
    pts = []
    for idx in path:
        y, kind, data = cyc[idx]
        if kind == "end":
            vid = data[0]
            X = X1 if vid == vid1 else X0
        else:
            X = chart.point(y)
            vid = registry.id_of(X)
            ekey, frac = _host_edge_of(clipped, X, face_ids=data)
            edge_ins.append((ekey, frac, vid, X))
        pts.append((vid, X, idx))
    for cid in range(len(pts) - 1):
        (va_, Xa, ia_), (vb_, Xb, ib_) = pts[cid], pts[cid + 1]
        # the cell face carrying this step of the walk
        ja, jb = (ia_, ib_) if fwd else (ib_, ia_)
        seg_faces = set()
        for idx, side in ((ja, 1), (jb, 0)):
            yk, kind, data = cyc[idx]
            if kind == "corner":
                seg_faces.add(data[side])
            else:
                seg_faces.add(data[1])
        if len(seg_faces) != 1:
            raise GenericityError(
                f"cut chord spans faces {sorted(seg_faces)}")
        fid = seg_faces.pop()
        chords.append(CutChord(kid=kid, cid=cid, face_id=fid,
                               vid_a=va_, vid_b=vb_, X_a=Xa, X_b=Xb))
        loop.append((va_, ("kchord", kid, cid)))
    kf = CutFace(kid=kid, plane_w=w, loop=loop, chords=chords,
                 x0=vid0, x1=vid1,
                 arc_ins=[(aid0, th0, vid0, X0), (aid1, th1, vid1, X1)],
                 edge_ins=edge_ins)
    return CutComplex(component=component.index, faces=[kf],
                      interior_edges=[])


def cut_clipped_cell(clipped, cone, s, registry: VertexRegistry,
                     M=None, seed: int = 0, collect_graphs=None):
    """Connecting graphs and cutting complexes for every positive-genus
    component of one clipped cell.  Returns a list of CutComplex; when
    collect_graphs is a list, (component index, graph) pairs are
    appended to it."""
    from .conegraph import build_graph
    out = []
    for comp in clipped.components:
        if comp.genus == 0:
            continue
        curve_ids = []
        for i in comp.footprint_piece_ids:
            curve_ids.extend(clipped.footprint_pieces[i].curve_ids)
        curves = [clipped.curves[ci].polyline for ci in curve_ids]

        def in_cell(tp):
            X = cone.boundary_from_cylinder(np.asarray(tp, dtype=float))
            return bool(clipped.polytope.contains_global(X, margin=-1e-9))

        graph = build_graph(cone, s, curves, seed=seed, region_test=in_cell)
        if collect_graphs is not None:
            collect_graphs.append((comp.index, graph))
        out.append(build_cut_complex(clipped, graph, s, cone, registry,
                                     curve_ids=curve_ids, component=comp,
                                     M=M))
    return out


def plan_cell_cuts(clipped_cells, complexes, M, cone,
                   registry: VertexRegistry):
    """CellCuts per cell: each cell's own cutting walls plus constraint
    chords mirrored from the partner side of every shared wall, so the
    two triangulations of a wall stay identical."""
    cuts = [CellCuts() for _ in clipped_cells]
    contrib = []
    for cl in clipped_cells:
        m = {}
        for fid, face in enumerate(cl.polytope.faces):
            if face.contributor is not None:
                m[face.contributor] = fid
        contrib.append(m)

    rid = 0
    for i, kxs in enumerate(complexes):
        for kx in kxs or ():
            for kf in kx.faces:
                cuts[i].kfaces.append(kf)
                cuts[i].arc_ins.extend(kf.arc_ins)
                cuts[i].edge_ins.extend(kf.edge_ins)
                for ch in kf.chords:
                    cuts[i].face_chords.setdefault(ch.face_id, []).append(
                        (ch.vid_a, ch.vid_b, ("kcut", kf.kid, ch.cid),
                         kf.plane_w))
                for ch in kf.chords:
                    face = clipped_cells[i].polytope.faces[ch.face_id]
                    if face.contributor is None:
                        continue
                    j, n = face.contributor
                    fid2 = contrib[j].get((i, -n))
                    if fid2 is None:
                        continue
                    T = M.deck_matrix(-n)
                    pair, ins_a, ins_e = [], [], []
                    try:
                        for X in (ch.X_a, ch.X_b):
                            Xp = T @ np.asarray(X, dtype=float)
                            vid = registry.id_of(Xp)
                            r_err = abs(float(cone.dist_to_axis(Xp))
                                        - cone.radius)
                            if r_err < 1e-6:
                                aid, th = _host_arc_of(clipped_cells[j],
                                                       cone, Xp,
                                                       face_id=fid2)
                                ins_a.append((aid, th, vid, Xp))
                            else:
                                ekey, fr = _host_edge_of(clipped_cells[j],
                                                         Xp,
                                                         face_ids=[fid2])
                                ins_e.append((ekey, fr, vid, Xp))
                            pair.append(vid)
                    except GenericityError:
                        # near the cutoff sphere the two sides of a wall
                        # are clipped differently; tolerable only where
                        # wall mismatches are already flagged
                        if clipped_cells[i].touches_cutoff or \
                                clipped_cells[j].touches_cutoff:
                            continue
                        raise
                    cuts[j].arc_ins.extend(ins_a)
                    cuts[j].edge_ins.extend(ins_e)
                    cuts[j].face_chords.setdefault(fid2, []).append(
                        (pair[0], pair[1], ("reglue", rid), None))
                    rid += 1
    return cuts


def triangulate_component(clipped, component, cut_complex, cone,
                          registry: VertexRegistry,
                          M=None) -> ComponentTriangulation:
    """Cut one component to a ball (when needed) and triangulate it."""
    cuts = None
    if cut_complex is not None and cut_complex.faces:
        cuts = plan_cell_cuts([clipped], [[cut_complex]], M, cone,
                              registry)[0]
    b = _SurfaceBuilder(clipped, cone, registry, M=M, cuts=cuts)
    return b.build_component(component)


def vertex_census(clipped, cut_complexes, constants) -> dict:
    """Counts of the five boundary-vertex classes of a cell against
    their explicit bounds."""
    kfaces = [kf for kx in (cut_complexes or ()) for kf in kx.faces]
    interior = sum(len(kx.interior_edges) for kx in (cut_complexes or ()))
    classes = {
        "cell_vertices": int(clipped.n_vertices_in_X),
        "cut_edge_corners": sum(len(kf.edge_ins) for kf in kfaces),
        "cut_interior_face": interior,
        "segment_endpoints": len(clipped.crossings),
        "cut_boundary": sum(len(kf.arc_ins) for kf in kfaces),
    }
    C1 = constants.C1
    bounds = {
        "cell_vertices": constants.C0,
        "cut_edge_corners": C1 * (2.0 * C1 - 1.0),
        "cut_interior_face": constants.C2 * (4.0 * C1 - 2.0),
        "segment_endpoints": 2.0 * C1,
        "cut_boundary": 8.0 * C1 - 4.0,
    }
    total = sum(classes.values())
    ok = all(classes[k] <= bounds[k] for k in classes) \
        and total <= constants.Cbar0
    return {"classes": classes, "bounds": bounds, "total": total,
            "total_bound": constants.Cbar0, "ok": ok}
