"""Clipping Voronoi cells against the drilled tube.

The tube (cone) meets each cell face in a convex region bounded by an
ellipse in the face's chart, so all 1-dimensional intersections are
closed-form.  Per face we classify face minus cone as empty / disks /
single annulus, chain the elliptical boundary arcs into closed curves on
the tube boundary cylinder, decompose the cell's footprint on the tube
into regions, and finally assemble the components of cell minus cone
with their genus via compactly-supported Euler characteristic counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .kernel import Cone, mdot
from .cells import ConvexPolytope

GEN_TOL = 1e-12      # transversality threshold (relative)


class GenericityError(RuntimeError):
    """Raised on a tangential (non-transverse) cone contact."""


# refs into the boundary complex: ('v', vertex_id) or ('x', crossing_id)


@dataclass
class Crossing:
    """A cell-edge / cone-boundary intersection point."""
    id: int
    edge: tuple[int, int]
    frac: float               # parameter along the Klein segment a->b
    X: np.ndarray             # global hyperboloid coordinates
    cyl: np.ndarray           # (t, phi) on the tube boundary


@dataclass
class EdgeClip:
    edge: tuple[int, int]
    crossings: list[int]                  # crossing ids, ordered along edge
    segments: list[tuple]                 # [(ref_a, ref_b), ...], <= 2
    fully_inside: bool


@dataclass
class FaceChart:
    """2D Klein chart of a face plane, with the cone's quadric on it.

    Points of the plane are X = (B0 + y1 B1 + y2 B2)/sqrt(1-|y|^2); the
    cone interior is Q(y) = y A y + 2 b.y + c < 0, a convex quadratic."""
    B: np.ndarray             # 4x3, columns B0 (timelike), B1, B2
    A: np.ndarray
    b: np.ndarray
    c: float
    center: np.ndarray | None     # ellipse center (argmin Q)
    qmin: float
    axes: np.ndarray | None       # 2x2, columns = principal directions
    radii: np.ndarray | None      # semi-axis lengths in the chart

    def point(self, y):
        y = np.asarray(y, dtype=float)
        Xh = self.B[:, 0] + y @ self.B[:, 1:].T if y.ndim > 1 else \
            self.B[:, 0] + self.B[:, 1:] @ y
        n2 = 1.0 - np.sum(np.asarray(y) ** 2, axis=-1)
        return Xh / np.sqrt(n2)[..., None] if y.ndim > 1 else Xh / math.sqrt(n2)

    def q(self, y):
        y = np.asarray(y, dtype=float)
        return np.einsum('...i,ij,...j->...', y, self.A, y) \
            + 2.0 * (y @ self.b) + self.c

    def ellipse_point(self, theta):
        th = np.asarray(theta, dtype=float)
        d = np.stack([np.cos(th), np.sin(th)], axis=-1) * self.radii
        return self.center + d @ self.axes.T

    def y_of(self, X):
        """Chart coordinates of global hyperboloid points on the plane."""
        X = np.asarray(X, dtype=float)
        den = -(X @ (kernel.MINKOWSKI_J @ self.B[:, 0]))
        y1 = X @ (kernel.MINKOWSKI_J @ self.B[:, 1])
        y2 = X @ (kernel.MINKOWSKI_J @ self.B[:, 2])
        return np.stack([y1, y2], axis=-1) / den[..., None]


@dataclass
class Arc:
    """An elliptical arc on the tube boundary, within one cell face.

    Runs counterclockwise in the face chart from theta_a to theta_b
    (theta_b > theta_a); endpoints are crossing ids, or None for a full
    ellipse."""
    id: int
    face_id: int
    x_a: int | None
    x_b: int | None
    theta_a: float
    theta_b: float

    @property
    def full(self) -> bool:
        return self.x_a is None


@dataclass
class FacePiece:
    """One component of face minus cone.  Boundary loops are lists of
    items: ('chain', [refs]) along the polygon, ('arc', arc_id, reverse)
    along the cone boundary."""
    face_id: int
    loops: list[list[tuple]]
    n_boundary_curves: int
    component: int = -1


@dataclass
class FootprintPiece:
    """One component of the cell's footprint on the tube boundary."""
    curve_ids: list[int]
    sample: np.ndarray        # (t, phi) of an interior-ish point
    component: int = -1


@dataclass
class CylCurve:
    """A closed curve on the tube boundary cylinder: polyline in (t, phi)
    with phi unwrapped along the curve, plus its arc composition."""
    id: int
    polyline: np.ndarray                  # (n, 2), closed (last != first)
    winding: int                          # net phi winding / 2 pi
    members: list[tuple[int, bool]]       # (arc_id, reversed) in cyclic order
    crossing_ids: list[int]               # between consecutive members


@dataclass
class Component:
    index: int
    face_piece_ids: list[int]
    footprint_piece_ids: list[int]
    vertex_ids: list[int]
    crossing_ids: list[int]
    n_segments: int
    genus: int
    touches_cutoff: bool


@dataclass
class ClippedCell:
    polytope: ConvexPolytope
    cone_radius: float
    vertices_in_X: np.ndarray             # bool per cell vertex
    edge_clips: dict
    crossings: list[Crossing]
    charts: dict                          # face_id -> FaceChart
    face_pieces: list[FacePiece]
    footprint_pieces: list[FootprintPiece]
    arcs: list[Arc]
    curves: list[CylCurve]
    face_classes: dict                    # face_id -> 'empty'|'disks'|'annulus'
    components: list[Component]
    touches_cutoff: bool

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def n_faces_meeting_X(self) -> int:
        return sum(1 for f in self.face_classes.values() if f != "empty")

    @property
    def n_segments(self) -> int:
        return sum(len(e.segments) for e in self.edge_clips.values())

    @property
    def n_vertices_in_X(self) -> int:
        return int(self.vertices_in_X.sum())


@dataclass
class CellBoundsReport:
    """Measured per-cell counts against the constants table.

    checks maps a bound name to (measured, bound, ok).  thin_connected
    records the convexity probe of cell intersect closed tube (None when
    the intersection is empty or the cell is not clipped)."""
    index: int
    flagged: bool
    checks: dict
    thin_connected: bool | None

    @property
    def all_ok(self) -> bool:
        return all(ok for _, _, ok in self.checks.values()) and \
            self.thin_connected is not False


def verify_cell_bounds(clipped: ClippedCell, constants,
                       n_convexity_samples: int = 120,
                       seed: int = 11) -> CellBoundsReport:
    """Check the per-cell counting bounds on a clipped cell.

    Faces meeting the kept region vs C2, edge segments vs C1, vertices
    vs C0, components vs C0, genus vs C1.  The intersection of the cell
    with the closed tube is an intersection of convex sets, so it is
    connected; the probe verifies midpoint-convexity on sampled pairs
    rather than rebuilding a facet adjacency graph."""
    poly = clipped.polytope
    genus_max = max((c.genus for c in clipped.components), default=0)
    checks = {
        "faces_meeting_X<=C2": (clipped.n_faces_meeting_X, constants.C2,
                                clipped.n_faces_meeting_X <= constants.C2),
        "segments<=C1": (clipped.n_segments, constants.C1,
                         clipped.n_segments <= constants.C1),
        "vertices_in_X<=C0": (clipped.n_vertices_in_X, constants.C0,
                              clipped.n_vertices_in_X <= constants.C0),
        "components<=C0": (clipped.n_components, constants.C0,
                           clipped.n_components <= constants.C0),
        "genus<=C1": (genus_max, constants.C1, genus_max <= constants.C1),
    }
    thin_connected = None
    if clipped.cone_radius > 0.0:
        thin_connected = _thin_convexity_probe(
            clipped, n_convexity_samples, seed)
    return CellBoundsReport(index=poly.index,
                            flagged=clipped.touches_cutoff,
                            checks=checks, thin_connected=thin_connected)


def _thin_convexity_probe(clipped: ClippedCell, n_samples, seed):
    """Sample point pairs in cell intersect closed tube and test that
    midpoints stay inside; None when too few samples land there."""
    poly = clipped.polytope
    cone = Cone(kernel.Geodesic.vertical_axis(), clipped.cone_radius)
    rng = np.random.default_rng(seed + 31 * poly.index)
    lim = float(np.abs(poly.vertices_klein).max())

    def in_both(X):
        return poly.contains_global(X, margin=1e-9) \
            & (cone.dist_to_axis(X) <= cone.radius + 1e-9)

    pts = []
    for _ in range(40):
        k = rng.uniform(-lim, lim, size=(4 * n_samples, 3))
        k = k[np.sum(k * k, axis=1) < 0.98]
        X = kernel.klein_to_hyperboloid(k) @ poly.frame.T
        X = X[in_both(X)]
        pts.extend(X)
        if len(pts) >= 2 * n_samples:
            break
    if len(pts) < 2:
        return None
    pts = np.array(pts)
    half = len(pts) // 2
    A, B = pts[:half], pts[half:2 * half]
    # hyperbolic midpoints, normalized back to the hyperboloid
    M_ = A + B
    M_ = M_ / np.sqrt(np.maximum(-mdot(M_, M_), 1e-300))[:, None]
    return bool(np.all(in_both(M_)))


def _face_chart(plane, cone: Cone) -> FaceChart:
    B0, B1, B2 = plane.basis()
    B = np.column_stack([B0, B1, B2])
    _, _, E1, E2 = cone.axis.frame()
    s2 = math.sinh(cone.radius) ** 2
    u = np.array([mdot(B0, E1), mdot(B0, E2)])
    m = np.array([[mdot(B1, E1), mdot(B2, E1)],
                  [mdot(B1, E2), mdot(B2, E2)]])
    A = m.T @ m + s2 * np.eye(2)
    b = m.T @ u
    c = float(u @ u) - s2
    center = np.linalg.solve(A, -b)
    qmin = float(center @ A @ center + 2.0 * b @ center + c)
    if qmin < 0.0:
        evals, evecs = np.linalg.eigh(A)
        radii = np.sqrt(-qmin / evals)
        chart = FaceChart(B, A, b, c, center, qmin, evecs, radii)
    else:
        chart = FaceChart(B, A, b, c, center, qmin, None, None)
    return chart


def _clip_edges(poly: ConvexPolytope, cone: Cone):
    """Intersect every cell edge with the cone boundary in global Klein
    coordinates (closed form), producing crossings and segments."""
    A3, b3, c3 = cone.klein_quadric()
    H = poly.vertices_hyperboloid()
    K = kernel.hyperboloid_to_klein(H)
    q_v = np.einsum('vi,ij,vj->v', K, A3, K) + 2.0 * (K @ b3) + c3
    scale = max(1.0, float(np.abs(q_v).max()))
    if np.any(np.abs(q_v) < GEN_TOL * scale):
        raise GenericityError("cell vertex on the cone boundary")
    inside_v = q_v < 0.0

    crossings: list[Crossing] = []
    edge_clips: dict = {}
    for (a, b) in poly.edges:
        ka, kb = K[a], K[b]
        d = kb - ka
        qa = float(q_v[a])
        qc1 = float(d @ A3 @ d)
        qc2 = float(d @ A3 @ ka + b3 @ d)
        # q(ka + t d) = qc1 t^2 + 2 qc2 t + qa
        roots = []
        if abs(qc1) > 1e-300:
            disc = qc2 * qc2 - qc1 * qa
            if disc > 0.0:
                sq = math.sqrt(disc)
                roots = sorted([(-qc2 - sq) / qc1, (-qc2 + sq) / qc1])
        roots = [t for t in roots if 0.0 < t < 1.0]
        if len(roots) == 1 and inside_v[a] == inside_v[b]:
            raise GenericityError("edge tangential to the cone boundary")
        ids = []
        for t in roots:
            kx = ka + t * d
            X = kernel.klein_to_hyperboloid(kx)
            cyl = cone.cylinder_from_hyperboloid(X)
            cr = Crossing(id=len(crossings), edge=(a, b), frac=t, X=X, cyl=cyl)
            crossings.append(cr)
            ids.append(cr.id)
        # segments = parts of the edge outside the open cone
        pts = [('v', a)] + [('x', i) for i in ids] + [('v', b)]
        params = [0.0] + roots + [1.0]
        segs = []
        for k_ in range(len(params) - 1):
            mid = 0.5 * (params[k_] + params[k_ + 1])
            km = ka + mid * d
            qm = float(km @ A3 @ km + 2.0 * b3 @ km + c3)
            if qm > 0.0:
                segs.append((pts[k_], pts[k_ + 1]))
        edge_clips[(a, b)] = EdgeClip(edge=(a, b), crossings=ids,
                                      segments=segs,
                                      fully_inside=(not segs))
        if len(segs) > 2:
            raise AssertionError("edge contributes more than 2 segments")
    return inside_v, edge_clips, crossings


def _face_pieces(face_id, face, chart: FaceChart, poly, inside_v,
                 edge_clips, crossings, arcs):
    """Decompose one face minus the cone into pieces; appends the new
    elliptical arcs to `arcs`.  Returns (pieces, classification)."""
    cyc = list(face.vertex_ids)
    H = poly.vertices_hyperboloid()
    y_v = {v: chart.y_of(H[v]) for v in cyc}
    # orientation of the polygon cycle in the chart
    area = 0.0
    for i in range(len(cyc)):
        p, q_ = y_v[cyc[i]], y_v[cyc[(i + 1) % len(cyc)]]
        area += p[0] * q_[1] - p[1] * q_[0]
    if area < 0.0:
        cyc = cyc[::-1]

    def poly_contains(y):
        # convex polygon containment via cross products (ccw cycle)
        for i in range(len(cyc)):
            p, q_ = y_v[cyc[i]], y_v[cyc[(i + 1) % len(cyc)]]
            if (q_[0] - p[0]) * (y[1] - p[1]) - (q_[1] - p[1]) * (y[0] - p[0]) < 0.0:
                return False
        return True

    if chart.qmin >= 0.0:
        # cone misses the plane entirely
        loops = [[('chain', [('v', v) for v in cyc])]]
        return [FacePiece(face_id, loops, 1)], "disks"

    # boundary refs in cyclic order with their chart positions
    refs, ys = [], []
    for i in range(len(cyc)):
        a, b = cyc[i], cyc[(i + 1) % len(cyc)]
        refs.append(('v', a))
        ys.append(y_v[a])
        key = (min(a, b), max(a, b))
        ids = list(edge_clips[key].crossings)
        if key != (a, b):
            ids = ids[::-1]
        for xid in ids:
            refs.append(('x', xid))
            ys.append(chart.y_of(crossings[xid].X))
    n = len(refs)
    if all(inside_v[v] for v in cyc) and not any(r[0] == 'x' for r in refs):
        # polygon fully inside the cone?  (vertices in, no crossings ->
        # by convexity of the cone section the whole face is inside)
        return [], "empty"

    xs_present = [r for r in refs if r[0] == 'x']
    if not xs_present:
        # no boundary crossings: either cone section inside the polygon
        # (annulus) or disjoint (full polygon)
        if poly_contains(chart.center):
            loops = [[('chain', [('v', v) for v in cyc])],
                     [('arc', _full_arc(face_id, chart, arcs), False)]]
            return [FacePiece(face_id, loops, 2)], "annulus"
        loops = [[('chain', [('v', v) for v in cyc])]]
        return [FacePiece(face_id, loops, 1)], "disks"

    # general case: walk outside-runs of the polygon boundary.  Runs are
    # delimited by crossings; a vertex is outside the cone iff not
    # inside_v, and runs alternate in/out along the boundary.
    x0 = next(i for i in range(n) if refs[i][0] == 'x')
    order = list(range(x0, n)) + list(range(x0 + 1))
    runs = []       # [ [crossing, refs..., crossing] ]
    cur = None
    for idx in order:
        if refs[idx][0] == 'x':
            if cur is not None:
                cur.append(idx)
                runs.append(cur)
            cur = [idx]
        elif cur is not None:
            cur.append(idx)
    out_runs = []
    for run in runs:
        interior = run[1:-1]
        if interior:
            flags = {bool(not inside_v[refs[i][1]]) for i in interior}
            if len(flags) != 1:
                raise GenericityError("mixed in/out run on a face boundary")
            outside = flags.pop()
        else:
            # two consecutive crossings on the same edge: midpoint test
            y_m = 0.5 * (ys[run[0] % n] + ys[run[1] % n])
            outside = chart.q(y_m) > 0.0
        if outside:
            out_runs.append(run)
    # each outside run closes with the ellipse arc between its endpoint
    # crossings whose interior stays inside the polygon
    theta_of = {}
    for i in range(n):
        if refs[i][0] == 'x':
            d = ys[i] - chart.center
            loc = np.linalg.solve(chart.axes * chart.radii, d)
            theta_of[i] = math.atan2(loc[1], loc[0]) % (2.0 * math.pi)
    two_pi = 2.0 * math.pi
    pieces = []
    for run in out_runs:
        i_start, i_end = run[0] % n, run[-1] % n
        th_s, th_e = theta_of[i_start], theta_of[i_end]
        # candidate ccw arcs: end->start or start->end
        cands = [(th_e, th_s if th_s > th_e else th_s + two_pi, False),
                 (th_s, th_e if th_e > th_s else th_e + two_pi, True)]
        good = []
        for ta, tb, rev in cands:
            mids = chart.ellipse_point(np.linspace(ta, tb, 9)[1:-1])
            if all(poly_contains(y) for y in mids):
                good.append((ta, tb, rev))
        if len(good) != 1:
            raise GenericityError("ambiguous ellipse arc on a face")
        ta, tb, rev = good[0]
        # store the arc counterclockwise; rev means the boundary loop
        # traverses it backwards (start->end is clockwise)
        if not rev:
            arc = Arc(id=len(arcs), face_id=face_id, x_a=refs[i_end][1],
                      x_b=refs[i_start][1], theta_a=ta, theta_b=tb)
        else:
            arc = Arc(id=len(arcs), face_id=face_id, x_a=refs[i_start][1],
                      x_b=refs[i_end][1], theta_a=ta, theta_b=tb)
        arcs.append(arc)
        chain = [refs[i % n] for i in run]
        pieces.append(FacePiece(face_id,
                                [[('chain', chain), ('arc', arc.id, rev)]], 1))
    return pieces, "disks"


def _full_arc(face_id, chart, arcs):
    arc = Arc(id=len(arcs), face_id=face_id, x_a=None, x_b=None,
              theta_a=0.0, theta_b=2.0 * math.pi)
    arcs.append(arc)
    return arc.id


def _arc_cyl_polyline(arc: Arc, chart: FaceChart, cone: Cone, n_min=32):
    """(t, phi) polyline of an arc, phi unwrapped continuously."""
    span = arc.theta_b - arc.theta_a
    n = max(n_min, int(span / 0.02))
    th = np.linspace(arc.theta_a, arc.theta_b, n + 1)
    X = chart.point(chart.ellipse_point(th))
    cyl = cone.cylinder_from_hyperboloid(X)
    phi = np.unwrap(cyl[:, 1])
    return np.stack([cyl[:, 0], phi], axis=-1)


def _chain_curves(arcs, crossings, charts, cone):
    """Chain elliptical arcs into closed curves on the cylinder."""
    curves = []
    # each crossing is an endpoint of exactly two arcs
    by_endpoint: dict = {}
    for arc in arcs:
        if arc.full:
            pl = _arc_cyl_polyline(arc, charts[arc.face_id], cone)[:-1]
            curves.append(CylCurve(id=-1, polyline=pl, winding=_winding(pl),
                                   members=[(arc.id, False)], crossing_ids=[]))
            continue
        by_endpoint.setdefault(arc.x_a, []).append((arc.id, 'a'))
        by_endpoint.setdefault(arc.x_b, []).append((arc.id, 'b'))
    for xid, ends in by_endpoint.items():
        if len(ends) != 2:
            raise GenericityError(
                f"crossing {xid} bounds {len(ends)} arcs (expected 2)")
    used = set()
    arc_by_id = {a.id: a for a in arcs}
    for arc in arcs:
        if arc.full or arc.id in used:
            continue
        members, xids, pls = [], [], []
        cur, rev = arc, False
        while True:
            used.add(cur.id)
            members.append((cur.id, rev))
            pl = _arc_cyl_polyline(cur, charts[cur.face_id], cone)
            if rev:
                pl = pl[::-1]
            pls.append(pl)
            tail = cur.x_a if rev else cur.x_b
            xids.append(tail)
            nxt = [e for e in by_endpoint[tail] if e[0] != cur.id]
            if not nxt:
                raise GenericityError("open arc chain on the cone boundary")
            nid, end = nxt[0]
            cur = arc_by_id[nid]
            rev = (end == 'b')
            if cur.id == arc.id:
                break
        # concatenate with phi continuity
        full = [pls[0]]
        for pl in pls[1:]:
            dphi = pl[0, 1] - full[-1][-1, 1]
            k = round(dphi / (2 * math.pi))
            full.append(pl + np.array([0.0, -k * 2 * math.pi]))
        cat = np.vstack([p[:-1] for p in full])
        curves.append(CylCurve(id=-1, polyline=cat, winding=_winding(cat),
                               members=members, crossing_ids=xids))
    for i, c in enumerate(curves):
        curves[i] = CylCurve(id=i, polyline=c.polyline, winding=c.winding,
                             members=c.members, crossing_ids=c.crossing_ids)
    return curves


def _winding(pl):
    """Net phi winding number of a closed polyline (phi unwrapped along
    the rows; the last point closes back to the first)."""
    gap = pl[0, 1] - pl[-1, 1]
    gap -= 2 * math.pi * round(gap / (2 * math.pi))
    total = (pl[-1, 1] - pl[0, 1]) + gap
    return int(round(total / (2 * math.pi)))


def _ray_parity(polyline, t0, phi0):
    """Parity of upward (increasing t) meridian-ray crossings."""
    count = 0
    pts = polyline
    n = len(pts)
    for i in range(n):
        t1, p1 = pts[i]
        t2, p2 = pts[(i + 1) % n]
        dphi = p2 - p1
        if i == n - 1:
            dphi = dphi - 2 * math.pi * round(dphi / (2 * math.pi))
        if dphi == 0.0:
            continue
        if dphi > 0.0:
            delta = (phi0 - p1) % (2 * math.pi)
            if delta < dphi:
                u = delta / dphi
                if t1 + u * (t2 - t1) > t0:
                    count += 1
        else:
            delta = (p1 - phi0) % (2 * math.pi)
            if delta < -dphi:
                u = delta / (-dphi)
                if t1 + u * (t2 - t1) > t0:
                    count += 1
    return count & 1


def _footprint_pieces(curves, poly, cone):
    """Regions of the cell footprint on the tube boundary, via side
    signatures with respect to every boundary curve."""
    if not curves:
        return []

    def signature(pt):
        return tuple(_ray_parity(c.polyline, pt[0], pt[1]) for c in curves)

    def in_cell(pt):
        X = cone.boundary_from_cylinder(np.array([pt[0], pt[1]]))
        return bool(poly.contains_global(X, margin=0.0))

    samples = []     # (curve_id, plus_point, minus_point)
    for c in curves:
        pl = c.polyline
        deltas = np.vstack([np.diff(pl, axis=0), pl[:1] - pl[-1:]])
        lens = np.linalg.norm(deltas, axis=1)
        # try segments longest-first until the two side samples disagree
        # on cell membership (the offset must beat the polyline sag)
        ok = False
        for seg in np.argsort(-lens)[:8]:
            a = pl[seg]
            d = deltas[seg]
            mid = a + 0.5 * d
            nrm = np.array([-d[1], d[0]]) / lens[seg]
            off = 0.45 * lens[seg]
            plus, minus = mid + off * nrm, mid - off * nrm
            if in_cell(plus) != in_cell(minus):
                samples.append((c.id, plus, minus))
                ok = True
                break
        if not ok:
            raise GenericityError(
                "could not place side samples for a footprint curve")

    regions: dict = {}
    for cid, plus, minus in samples:
        for pt in (plus, minus):
            sig = signature(pt)
            entry = regions.setdefault(sig, {"curves": set(), "pt": pt,
                                             "inside": in_cell(pt)})
            entry["curves"].add(cid)
    pieces = []
    for sig, entry in regions.items():
        if entry["inside"]:
            pieces.append(FootprintPiece(curve_ids=sorted(entry["curves"]),
                                         sample=np.asarray(entry["pt"])))
    covered = set()
    for p in pieces:
        covered.update(p.curve_ids)
    if covered != {c.id for c in curves}:
        raise GenericityError("footprint curve without an inside region")
    return pieces


def clip_to_X(poly: ConvexPolytope, cone: Cone | None) -> ClippedCell:
    """Remove the open tube interior from a cell and classify the result."""
    if cone is None:
        return _trivial_clip(poly)
    inside_v, edge_clips, crossings = _clip_edges(poly, cone)
    charts, face_pieces, arcs = {}, [], []
    face_classes = {}
    for fid, face in enumerate(poly.faces):
        plane = poly.face_plane_global(face)
        chart = _face_chart(plane, cone)
        charts[fid] = chart
        pieces, cls = _face_pieces(fid, face, chart, poly, inside_v,
                                   edge_clips, crossings, arcs)
        face_pieces.extend(pieces)
        face_classes[fid] = cls
    curves = _chain_curves(arcs, crossings, charts, cone)
    fp_pieces = _footprint_pieces(curves, poly, cone)
    comps, touches = _components(poly, inside_v, edge_clips, crossings,
                                 face_pieces, fp_pieces, arcs, curves)
    return ClippedCell(polytope=poly, cone_radius=cone.radius,
                       vertices_in_X=~inside_v, edge_clips=edge_clips,
                       crossings=crossings, charts=charts,
                       face_pieces=face_pieces, footprint_pieces=fp_pieces,
                       arcs=arcs, curves=curves, face_classes=face_classes,
                       components=comps, touches_cutoff=touches)


def _trivial_clip(poly: ConvexPolytope) -> ClippedCell:
    """No tube: the whole cell is one ball component."""
    face_pieces = []
    for fid, face in enumerate(poly.faces):
        loops = [[('chain', [('v', v) for v in face.vertex_ids])]]
        face_pieces.append(FacePiece(fid, loops, 1))
    edge_clips = {e: EdgeClip(edge=e, crossings=[],
                              segments=[(('v', e[0]), ('v', e[1]))],
                              fully_inside=False) for e in poly.edges}
    inside_v = np.zeros(poly.n_vertices, dtype=bool)
    comps, touches = _components(poly, inside_v, edge_clips, [],
                                 face_pieces, [], [], [])
    return ClippedCell(polytope=poly, cone_radius=0.0,
                       vertices_in_X=~inside_v, edge_clips=edge_clips,
                       crossings=[], charts={}, face_pieces=face_pieces,
                       footprint_pieces=[], arcs=[], curves=[],
                       face_classes={fid: "disks"
                                     for fid in range(len(poly.faces))},
                       components=comps, touches_cutoff=touches)


def _components(poly, inside_v, edge_clips, crossings, face_pieces,
                fp_pieces, arcs, curves):
    """Union face pieces and footprint pieces into components of cell
    minus cone, then compute per-component counts and genus."""
    import networkx as nx
    g = nx.Graph()
    for i in range(len(face_pieces)):
        g.add_node(('f', i))
    for i in range(len(fp_pieces)):
        g.add_node(('p', i))

    arc_curve = {}
    for c in curves:
        for aid, _ in c.members:
            arc_curve[aid] = c.id
    curve_fp = {}
    for i, p in enumerate(fp_pieces):
        for cid in p.curve_ids:
            curve_fp[cid] = i

    # face piece adjacency through shared segments, and face piece to
    # footprint piece through arcs
    seg_owner: dict = {}
    for i, fp in enumerate(face_pieces):
        for loop in fp.loops:
            for item in loop:
                if item[0] == 'chain':
                    chain = item[1]
                    pairs = list(zip(chain, chain[1:]))
                    if len(loop) == 1:
                        pairs.append((chain[-1], chain[0]))  # cyclic chain
                    for a, b in pairs:
                        key = frozenset((a, b))
                        seg_owner.setdefault(key, []).append(i)
                elif item[0] == 'arc':
                    aid = item[1]
                    cid = arc_curve.get(aid)
                    if cid is not None and cid in curve_fp:
                        g.add_edge(('f', i), ('p', curve_fp[cid]))
    for key, owners in seg_owner.items():
        if len(owners) != 2:
            raise AssertionError(
                f"boundary segment on {len(owners)} face pieces")
        g.add_edge(('f', owners[0]), ('f', owners[1]))

    comps = []
    touches_cell = False
    for ci, nodes in enumerate(nx.connected_components(g)):
        f_ids = sorted(i for (k, i) in nodes if k == 'f')
        p_ids = sorted(i for (k, i) in nodes if k == 'p')
        f_set = set(f_ids)
        # vertices, crossings, segments of this component
        vset, xset = set(), set()
        chi = 0
        for i in f_ids:
            fp = face_pieces[i]
            fp.component = ci
            chi += 2 - fp.n_boundary_curves
            for loop in fp.loops:
                for item in loop:
                    if item[0] == 'chain':
                        for r in item[1]:
                            (vset if r[0] == 'v' else xset).add(r[1])
        for i in p_ids:
            fp_pieces[i].component = ci
            chi += 2 - len(fp_pieces[i].curve_ids)
        # open 1-cells: cell-edge segments between face pieces here
        n_segments = sum(1 for ow in seg_owner.values() if ow[0] in f_set)
        chi -= n_segments
        # arcs of this component's curves
        comp_curves = set()
        for i in p_ids:
            comp_curves.update(fp_pieces[i].curve_ids)
        n_arc_cells = 0
        for cid in comp_curves:
            c = curves[cid]
            if c.crossing_ids:
                n_arc_cells += len(c.members)
                xset.update(c.crossing_ids)
            # a vertex-free closed curve contributes 0 to chi
        chi -= n_arc_cells
        chi += len(vset) + len(xset)
        chi_int = int(round(chi))
        if (2 - chi_int) % 2 != 0:
            raise AssertionError(f"odd Euler characteristic {chi_int}")
        genus = (2 - chi_int) // 2
        touches = any(poly.faces[face_pieces[i].face_id].is_cutoff
                      for i in f_ids)
        touches_cell = touches_cell or touches
        comps.append(Component(index=ci, face_piece_ids=f_ids,
                               footprint_piece_ids=p_ids,
                               vertex_ids=sorted(vset),
                               crossing_ids=sorted(xset),
                               n_segments=n_segments, genus=genus,
                               touches_cutoff=touches))
    return comps, touches_cell
