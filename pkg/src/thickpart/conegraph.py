"""Connecting graphs on the tube boundary.

Given disjoint simple closed curves on the boundary cylinder of a cone
and a point s inside the cone (off the axis), build a graph of arcs --
each arc cut out by a totally geodesic plane through s -- so that the
curves plus arcs form a connected trivalent graph in which every arc
edge is a bridge, using at most 2n-1 arc edges for n+1 curves.

Curves and arcs are polylines in (t, phi) cylinder coordinates with phi
unwrapped along each polyline and interpreted mod 2*pi.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import kernel
from .kernel import Cone, mdot
from .clip import GenericityError, _face_chart

TWO_PI = 2.0 * math.pi

# minimum cylinder-coordinate spacing between distinct graph vertices
VERTEX_CLEARANCE = 2e-3


# ---------------------------------------------------------------------------
# polyline utilities on the cylinder


def close_polyline(pl: np.ndarray) -> np.ndarray:
    """Append the closing point of a closed polyline, continuing the phi
    unwrap (the closing gap is reduced mod 2*pi)."""
    gap = pl[0, 1] - pl[-1, 1]
    gap -= TWO_PI * round(gap / TWO_PI)
    last = np.array([pl[0, 0], pl[-1, 1] + gap])
    return np.vstack([pl, last])


def polyline_point(ext: np.ndarray, s: float) -> np.ndarray:
    """Point at fractional parameter s (segment index + fraction)."""
    n = len(ext) - 1
    s = s % n
    i = min(int(s), n - 1)
    f = s - i
    return (1.0 - f) * ext[i] + f * ext[i + 1]


def _seg_cross(a1, a2, b1, b2):
    """Intersections of two cylinder segments; yields (u, v) params."""
    shift0 = round((0.5 * (b1[1] + b2[1]) - 0.5 * (a1[1] + a2[1])) / TWO_PI)
    d1 = a2 - a1
    out = []
    for k in (shift0 - 1, shift0, shift0 + 1):
        off = np.array([0.0, k * TWO_PI])
        c1, c2 = b1 - off, b2 - off
        d2 = c2 - c1
        den = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(den) < 1e-300:
            continue
        r = c1 - a1
        u = (r[0] * d2[1] - r[1] * d2[0]) / den
        v = (r[0] * d1[1] - r[1] * d1[0]) / den
        if -1e-12 <= u < 1.0 and -1e-12 <= v < 1.0:
            out.append((max(u, 0.0), max(v, 0.0)))
    return out


def poly_intersections(A: np.ndarray, B: np.ndarray):
    """All transverse intersections of two extended polylines, as
    (sA, sB, point) with fractional parameters along each.

    Candidate segment pairs are prefiltered by t-interval overlap and by
    wrapped angular proximity of the segment midpoints."""
    a1, a2 = A[:-1], A[1:]
    b1, b2 = B[:-1], B[1:]
    alo = np.minimum(a1[:, 0], a2[:, 0])
    ahi = np.maximum(a1[:, 0], a2[:, 0])
    blo = np.minimum(b1[:, 0], b2[:, 0])
    bhi = np.maximum(b1[:, 0], b2[:, 0])
    mask = (ahi[:, None] >= blo[None, :] - 1e-9) & \
        (alo[:, None] <= bhi[None, :] + 1e-9)
    if mask.any():
        amid = 0.5 * (a1[:, 1] + a2[:, 1])
        bmid = 0.5 * (b1[:, 1] + b2[:, 1])
        aspan = np.abs(a2[:, 1] - a1[:, 1])
        bspan = np.abs(b2[:, 1] - b1[:, 1])
        d = amid[:, None] - bmid[None, :]
        d = np.abs(d - TWO_PI * np.round(d / TWO_PI))
        mask &= d <= 0.5 * (aspan[:, None] + bspan[None, :]) + 1e-9
    hits = []
    for i, j in np.argwhere(mask):
        for u, v in _seg_cross(a1[i], a2[i], b1[j], b2[j]):
            hits.append((i + u, j + v, (1 - u) * a1[i] + u * a2[i]))
    return hits


def cyl_gap(p, q) -> float:
    """Cylinder-coordinate distance with the angle difference wrapped."""
    dt = p[0] - q[0]
    dphi = p[1] - q[1]
    dphi -= TWO_PI * round(dphi / TWO_PI)
    return math.hypot(dt, dphi)


# ---------------------------------------------------------------------------
# planar-section arcs


@dataclass
class SectionArc:
    """An arc of (totally geodesic plane through s) intersect (cone
    boundary), as a cylinder polyline from p to q."""

    polyline: np.ndarray
    plane_w: np.ndarray
    p: np.ndarray
    q: np.ndarray


def _lift(s):
    if isinstance(s, kernel.PointUHS):
        return kernel.uhs_to_hyperboloid(s)
    a = np.asarray(s, dtype=float)
    return kernel.uhs_to_hyperboloid(a) if a.shape[-1] == 3 else a


def _ellipse_theta(chart, y):
    loc = np.linalg.solve(chart.axes * chart.radii, np.asarray(y) - chart.center)
    return math.atan2(loc[1], loc[0]) % TWO_PI


def plane_section_arc(C: Cone, s, p, q, rng=None, max_perturb: float = 1e-5,
                      theta_step: float = 0.02, n_min: int = 24) -> SectionArc:
    """Arc on the cone boundary joining p and q inside a totally geodesic
    plane through s.

    When the plane through p, q, s contains the cone axis (so the
    section degenerates), p is perturbed by a seeded step of at most
    max_perturb and the construction retries.  The shorter of the two
    ellipse arcs that stays inside the model ball is returned.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    S = _lift(s)
    u1 = kernel._ideal_lift(C.axis.e1)
    u2 = kernel._ideal_lift(C.axis.e2)
    p_cur = np.array(p, dtype=float)
    q_cur = np.array(q, dtype=float)
    for attempt in range(12):
        P = C.boundary_from_cylinder(p_cur)
        Q = C.boundary_from_cylinder(q_cur)
        try:
            plane = kernel.plane_through([P, Q, S])
        except ValueError:
            p_cur = p_cur + rng.uniform(-1.0, 1.0, size=2) * max_perturb
            continue
        w = np.asarray(plane.w, dtype=float)
        if max(abs(float(mdot(u1, w))), abs(float(mdot(u2, w)))) < 1e-8:
            # plane contains the axis: section is degenerate
            p_cur = p_cur + rng.uniform(-1.0, 1.0, size=2) * max_perturb
            continue
        chart = _face_chart(plane, C)
        if chart.qmin >= 0.0:
            p_cur = p_cur + rng.uniform(-1.0, 1.0, size=2) * max_perturb
            continue
        th_p = _ellipse_theta(chart, chart.y_of(P))
        th_q = _ellipse_theta(chart, chart.y_of(Q))
        fwd = (th_q - th_p) % TWO_PI            # p -> q counterclockwise
        cands = sorted([(fwd, th_p, False), (TWO_PI - fwd, th_q, True)])
        arc = None
        for span, th0, rev in cands:
            if span < 1e-12:
                continue
            n = max(n_min, int(span / theta_step))
            th = th0 + np.linspace(0.0, span, n + 1)
            y = chart.ellipse_point(th)
            if np.any(np.sum(y * y, axis=-1) >= 1.0 - 1e-12):
                continue      # arc leaves the model ball
            X = chart.point(y)
            cyl = C.cylinder_from_hyperboloid(X)
            phi = np.unwrap(cyl[:, 1])
            pl = np.stack([cyl[:, 0], phi], axis=-1)
            if rev:
                pl = pl[::-1]
            # pin the endpoints to the requested cylinder coordinates
            pl[0] = [p_cur[0], pl[0, 1] + _wrap(p_cur[1] - pl[0, 1])]
            pl[-1] = [q_cur[0], pl[-1, 1] + _wrap(q_cur[1] - pl[-1, 1])]
            arc = SectionArc(polyline=pl, plane_w=w, p=p_cur.copy(),
                             q=q_cur.copy())
            break
        if arc is not None:
            return arc
        p_cur = p_cur + rng.uniform(-1.0, 1.0, size=2) * max_perturb
    raise GenericityError("no valid planar-section arc after perturbation")


def _wrap(a: float) -> float:
    return a - TWO_PI * round(a / TWO_PI)


# ---------------------------------------------------------------------------
# the connecting graph


@dataclass
class ConeGraph:
    """The curves, the arc edges, and the vertex set of the final graph."""

    curves: list
    arcs: dict                 # aid -> {'polyline','plane_w','va','vb'}
    vertices: dict             # vid -> {'pos', 'curve': int | None}
    curve_verts: list          # per curve: sorted [(param, vid)]

    @property
    def n(self) -> int:
        return len(self.curves) - 1

    @property
    def n_arc_edges(self) -> int:
        return len(self.arcs)

    def graph(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        for ci in range(len(self.curves)):
            cv = self.curve_verts[ci]
            if not cv:
                g.add_node(("loop", ci))
                continue
            ids = [vid for _, vid in cv]
            for a, b in zip(ids, ids[1:] + ids[:1]):
                g.add_edge(a, b, key=("c", ci, a, b))
        for aid, e in self.arcs.items():
            g.add_edge(e["va"], e["vb"], key=("a", aid))
        return g

    def is_connected(self) -> bool:
        g = self.graph()
        return g.number_of_nodes() <= 1 or nx.is_connected(g)

    def is_trivalent(self) -> bool:
        g = self.graph()
        return all(g.degree(v) == 3 for v in g.nodes if isinstance(v, int))

    def all_bridges(self) -> bool:
        g = self.graph()
        for aid, e in self.arcs.items():
            g.remove_edge(e["va"], e["vb"], key=("a", aid))
            ok = nx.is_connected(g) if g.number_of_nodes() > 1 else True
            g.add_edge(e["va"], e["vb"], key=("a", aid))
            if ok:
                return False
        return True

    def contraction_is_tree(self) -> bool:
        """Contract each curve to a point; the result must be a tree."""
        def node_of(vid):
            c = self.vertices[vid]["curve"]
            return ("curve", c) if c is not None else vid

        g = nx.MultiGraph()
        for ci in range(len(self.curves)):
            g.add_node(("curve", ci))
        for e in self.arcs.values():
            g.add_edge(node_of(e["va"]), node_of(e["vb"]))
        if g.number_of_nodes() <= 1:
            return g.number_of_edges() == 0
        return nx.is_connected(g) and \
            g.number_of_edges() == g.number_of_nodes() - 1

    def check(self) -> dict:
        return {
            "edge_bound": self.n_arc_edges <= max(2 * self.n - 1, 0),
            "connected": self.is_connected(),
            "trivalent": self.is_trivalent(),
            "all_bridges": self.all_bridges(),
            "contraction_tree": self.contraction_is_tree(),
        }


class _Builder:
    """Mutable state for the inductive construction."""

    def __init__(self, C, s, region_test=None, seed=0):
        self.C = C
        self.s = s
        self.region_test = region_test
        self.rng = np.random.default_rng(seed)
        self.curves = []       # extended (closed) polylines
        self.curve_verts = []  # per curve: [(param, vid)], kept sorted
        self.vertices = {}
        self.arcs = {}
        self._next_vid = 0
        self._next_aid = 0

    # -- bookkeeping ------------------------------------------------------

    def _new_vertex(self, pos, curve=None, param=None):
        vid = self._next_vid
        self._next_vid += 1
        self.vertices[vid] = {"pos": np.asarray(pos, dtype=float),
                              "curve": curve}
        if curve is not None:
            self.curve_verts[curve].append((param, vid))
            self.curve_verts[curve].sort()
        return vid

    def _drop_vertex(self, vid):
        c = self.vertices[vid]["curve"]
        if c is not None:
            self.curve_verts[c] = [(p, v) for p, v in self.curve_verts[c]
                                   if v != vid]
        del self.vertices[vid]

    def _new_aedge(self, polyline, plane_w, va, vb):
        aid = self._next_aid
        self._next_aid += 1
        self.arcs[aid] = {"polyline": np.asarray(polyline, dtype=float),
                          "plane_w": np.asarray(plane_w, dtype=float),
                          "va": va, "vb": vb}
        return aid

    def graph(self) -> nx.MultiGraph:
        return ConeGraph(self.curves, self.arcs, self.vertices,
                         self.curve_verts).graph()

    def _split_aedge(self, aid, params_points):
        """Split one arc edge at interior parameters; returns the new
        vertex ids in order along the arc."""
        e = self.arcs.pop(aid)
        pl = e["polyline"]
        items = sorted(params_points)
        vids = []
        pieces = []
        prev_s, prev_v = 0.0, e["va"]
        for s_, pt in items:
            vid = self._new_vertex(pt)
            vids.append(vid)
            pieces.append((prev_s, s_, prev_v, vid))
            prev_s, prev_v = s_, vid
        pieces.append((prev_s, len(pl) - 1.0, prev_v, e["vb"]))
        for s0, s1, va, vb in pieces:
            sub = self._sub_polyline(pl, s0, s1)
            self._new_aedge(sub, e["plane_w"], va, vb)
        return vids

    @staticmethod
    def _sub_polyline(pl, s0, s1):
        i0, i1 = int(math.floor(s0)), int(math.ceil(s1))
        i1 = min(i1, len(pl) - 1)
        a = polyline_point(pl, s0) if s0 > i0 else pl[i0]
        b = polyline_point(pl, min(s1, len(pl) - 1 - 1e-12)) \
            if s1 < i1 else pl[i1]
        mid = pl[int(math.floor(s0)) + 1:i1]
        rows = [a] + list(mid) + [b]
        return np.array(rows)

    # -- geometry queries -------------------------------------------------

    def _near_vertex(self, pt, clearance=VERTEX_CLEARANCE):
        return any(cyl_gap(pt, v["pos"]) < clearance
                   for v in self.vertices.values())

    def _component_nodes(self, g):
        return list(nx.connected_components(g))

    def _geometry_of_component(self, comp):
        """(curve ids, arc ids) whose geometry lies in one component."""
        curves, arcs = set(), set()
        for node in comp:
            if isinstance(node, tuple) and node[0] == "loop":
                curves.add(node[1])
            elif isinstance(node, int):
                c = self.vertices[node]["curve"]
                if c is not None:
                    curves.add(c)
        for aid, e in self.arcs.items():
            if e["va"] in comp:
                arcs.add(aid)
        return curves, arcs

    def _candidate_points(self, curves, arcs):
        """Non-vertex sample points on the given geometry."""
        pts = []
        for ci in curves:
            ext = self.curves[ci]
            for i in range(len(ext) - 1):
                pt = 0.5 * (ext[i] + ext[i + 1])
                if not self._near_vertex(pt):
                    pts.append((pt, ("c", ci, i + 0.5)))
        for aid in arcs:
            pl = self.arcs[aid]["polyline"]
            for i in range(len(pl) - 1):
                pt = 0.5 * (pl[i] + pl[i + 1])
                if not self._near_vertex(pt):
                    pts.append((pt, ("a", aid, i + 0.5)))
        return pts

    def _owner_component(self, host, comps):
        """Index of the component a host ('c', ci, s)/('a', aid, s) is in."""
        for k, comp in enumerate(comps):
            curves, arcs = self._geometry_of_component(comp)
            if host[0] == "c" and host[1] in curves:
                return k
            if host[0] == "a" and host[1] in arcs:
                return k
        raise AssertionError("host geometry not found in any component")

    # -- attaching an arc -------------------------------------------------

    def _attach_endpoint(self, host, pt):
        """Create a vertex for an arc endpoint on its host geometry."""
        kind, idx, s_ = host
        if kind == "c":
            return self._new_vertex(pt, curve=idx, param=s_)
        vids = self._split_aedge(idx, [(s_, pt)])
        return vids[0]

    def _all_geometry(self):
        curves = set(range(len(self.curves)))
        arcs = set(self.arcs.keys())
        return curves, arcs

    def _cut_arc(self, arc: SectionArc, host_p, host_q):
        """Cut a candidate arc at every intersection with the current
        geometry; returns pieces [(s0, s1, host0, host1)] where hosts
        locate the piece endpoints on the geometry (or are the original
        endpoint hosts)."""
        pl = arc.polyline
        n = len(pl) - 1
        hits = []      # (s_on_arc, host)
        curves, arcs = self._all_geometry()
        for ci in curves:
            for sA, sB, pt in poly_intersections(pl, self.curves[ci]):
                hits.append((sA, ("c", ci, sB), pt))
        for aid in arcs:
            for sA, sB, pt in poly_intersections(pl, self.arcs[aid]["polyline"]):
                hits.append((sA, ("a", aid, sB), pt))
        # drop hits at the arc's own endpoints
        hits = [h for h in hits
                if cyl_gap(h[2], arc.p) > 1e-6 and cyl_gap(h[2], arc.q) > 1e-6]
        hits.sort(key=lambda h: h[0])
        stops = [(0.0, host_p, arc.p)] + \
            [(s_, h, pt) for s_, h, pt in hits] + [(float(n), host_q, arc.q)]
        pieces = []
        for k in range(len(stops) - 1):
            s0, h0, p0 = stops[k]
            s1, h1, p1 = stops[k + 1]
            if s1 - s0 < 1e-9:
                continue
            pieces.append((s0, s1, h0, h1, p0, p1))
        return pieces

    def _connect(self, comps, idxA, idxB, prefer=None):
        """Join two components with one planar-section arc (the inductive
        connect step); intermediate crossings are cut away so the added
        edge is transverse with interior disjoint from the graph."""
        curvesA, arcsA = self._geometry_of_component(comps[idxA])
        curvesB, arcsB = self._geometry_of_component(comps[idxB])
        candA = self._candidate_points(curvesA, arcsA)
        candB = self._candidate_points(curvesB, arcsB)
        if not candA or not candB:
            raise GenericityError("component without attachable geometry")

        PA = np.array([p for p, _ in candA])
        PB = np.array([p for p, _ in candB])

        def gaps(P, Q):
            dt = P[:, 0][:, None] - Q[:, 0][None, :]
            dp = P[:, 1][:, None] - Q[:, 1][None, :]
            dp -= TWO_PI * np.round(dp / TWO_PI)
            return np.hypot(dt, dp)

        score = gaps(PA, PB)
        if prefer is not None:
            pref = np.array(prefer)
            score = score + 0.3 * (gaps(PA, pref[:1])[:, :1]
                                   + gaps(PB, pref[1:2])[:, :1].T)
        flat = np.argsort(score, axis=None)[:8]
        pairs = [(candA[k // len(candB)], candB[k % len(candB)])
                 for k in flat]
        last_err = None
        for (pa, hosta), (pb, hostb) in pairs:
            try:
                arc = plane_section_arc(self.C, self.s, pa, pb, rng=self.rng)
                pieces = self._cut_arc(arc, hosta, hostb)
                piece = self._choose_piece(pieces, comps, idxA, idxB)
                if piece is None:
                    last_err = GenericityError("no piece joins the components")
                    continue
                s0, s1, h0, h1, p0, p1 = piece
                if self.region_test is not None and \
                        not self._piece_in_region(arc.polyline, s0, s1):
                    last_err = GenericityError("arc leaves the footprint")
                    continue
                if h0[0] == "a" and h1[0] == "a" and h0[1] == h1[1]:
                    # both ends on the same arc edge: split it once
                    v0, v1 = self._split_aedge(h0[1],
                                               sorted([(h0[2], p0),
                                                       (h1[2], p1)]))
                    if h1[2] < h0[2]:
                        v0, v1 = v1, v0
                else:
                    v0 = self._attach_endpoint(h0, p0)
                    v1 = self._attach_endpoint(h1, p1)
                sub = self._sub_polyline(arc.polyline, s0, s1)
                self._new_aedge(sub, arc.plane_w, v0, v1)
                return
            except GenericityError as err:
                last_err = err
        raise last_err or GenericityError("connect step failed")

    def _piece_in_region(self, pl, s0, s1):
        ss = np.linspace(s0, s1, 9)[1:-1]
        return all(self.region_test(polyline_point(pl, s_)) for s_ in ss)

    def _choose_piece(self, pieces, comps, idxA, idxB):
        """First arc piece whose endpoints lie in the two components."""
        for piece in pieces:
            _, _, h0, h1, _, _ = piece
            c0 = self._owner_component(h0, comps)
            c1 = self._owner_component(h1, comps)
            if {c0, c1} == {idxA, idxB}:
                return piece
        return None

    # -- pruning ----------------------------------------------------------

    def _incident(self, g, vid):
        return list(g.edges(vid, keys=True))

    def _resolve_valence2(self):
        for _ in range(10000):
            g = self.graph()
            v2 = [v for v in g.nodes
                  if isinstance(v, int) and g.degree(v) == 2]
            if not v2:
                return
            vid = v2[0]
            edges = self._incident(g, vid)
            kinds = sorted(k[0] for _, _, k in edges)
            if kinds == ["c", "c"]:
                # plain curve point: no longer a vertex
                self._drop_vertex(vid)
                continue
            if kinds != ["a", "a"]:
                raise AssertionError("curve vertex lost a curve edge")
            a1 = edges[0][2][1]
            a2 = edges[1][2][1]
            if a1 == a2:
                # an arc loop hanging at vid: drop it entirely
                self.arcs.pop(a1)
                self._drop_vertex(vid)
                self._reconnect_if_split()
                continue
            e1, e2 = self.arcs[a1], self.arcs[a2]
            same_plane = np.allclose(e1["plane_w"], e2["plane_w"], atol=1e-9) \
                or np.allclose(e1["plane_w"], -e2["plane_w"], atol=1e-9)
            if same_plane:
                self._merge_aedges(a1, a2, vid)
            else:
                self.arcs.pop(a1)
                self.arcs.pop(a2)
                self._drop_vertex(vid)
                # the freed far endpoints may now be valence 2 themselves;
                # first restore connectivity, the loop then re-examines
                self._reconnect_if_split()
        raise AssertionError("valence-2 resolution did not terminate")

    def _reconnect_if_split(self):
        g = self.graph()
        comps = self._component_nodes(g)
        while len(comps) > 1:
            self._connect(comps, 0, 1)
            g = self.graph()
            comps = self._component_nodes(g)

    def _merge_aedges(self, a1, a2, vid):
        e1 = self.arcs.pop(a1)
        e2 = self.arcs.pop(a2)
        p1 = e1["polyline"] if e1["vb"] == vid else e1["polyline"][::-1]
        p2 = e2["polyline"] if e2["va"] == vid else e2["polyline"][::-1]
        va = e1["va"] if e1["vb"] == vid else e1["vb"]
        vb = e2["vb"] if e2["va"] == vid else e2["va"]
        k = round((p1[-1, 1] - p2[0, 1]) / TWO_PI)
        p2 = p2 + np.array([0.0, k * TWO_PI])
        merged = np.vstack([p1, p2[1:]])
        self._drop_vertex(vid)
        self._new_aedge(merged, e1["plane_w"], va, vb)

    def _find_removable(self):
        g = self.graph()
        for aid, e in sorted(self.arcs.items()):
            g.remove_edge(e["va"], e["vb"], key=("a", aid))
            ok = nx.is_connected(g) if g.number_of_nodes() > 1 else True
            g.add_edge(e["va"], e["vb"], key=("a", aid))
            if ok:
                return aid
        return None

    def _prune(self):
        for _ in range(10000):
            self._resolve_valence2()
            aid = self._find_removable()
            if aid is None:
                return
            e = self.arcs.pop(aid)
            # endpoints may become valence 2 (or isolated on an arc)
        raise AssertionError("pruning did not terminate")

    def _split_valence4(self):
        for _ in range(1000):
            g = self.graph()
            v4 = [v for v in g.nodes
                  if isinstance(v, int) and g.degree(v) == 4]
            if not v4:
                return
            vid = v4[0]
            pos = self.vertices[vid]["pos"].copy()
            aedges = [k[1] for _, _, k in self._incident(g, vid)
                      if k[0] == "a"]
            if not aedges:
                raise AssertionError("valence-4 vertex without arc edges")
            aid = aedges[0]
            e = self.arcs.pop(aid)
            far = e["vb"] if e["va"] == vid else e["va"]
            far_pos = self.vertices[far]["pos"].copy()
            g = self.graph()
            comps = self._component_nodes(g)
            if len(comps) != 2:
                raise AssertionError("removed arc edge was not a bridge")
            idxA = next(k for k, c in enumerate(comps) if vid in c)
            idxB = 1 - idxA
            self._connect(comps, idxA, idxB, prefer=(pos, far_pos))
            self._resolve_valence2()
        raise AssertionError("valence-4 splitting did not terminate")

    # -- curve insertion --------------------------------------------------

    def insert_curve(self, pl: np.ndarray):
        ext = close_polyline(np.asarray(pl, dtype=float))
        for other in self.curves:
            if poly_intersections(ext, other):
                raise GenericityError("input curves are not disjoint")
        ci = len(self.curves)
        self.curves.append(ext)
        self.curve_verts.append([])
        if ci == 0:
            return
        # crossings with the existing arc edges
        crossings = {}     # aid -> [(s_on_arc, s_on_curve, pt)]
        for aid, e in self.arcs.items():
            for sC, sA, pt in poly_intersections(ext, e["polyline"]):
                crossings.setdefault(aid, []).append((sA, sC, pt))
        if not crossings:
            # Case One: the new curve is disjoint from everything
            g = self.graph()
            comps = self._component_nodes(g)
            idx_new = next(k for k, c in enumerate(comps)
                           if ("loop", ci) in c)
            idx_old = next(k for k in range(len(comps)) if k != idx_new)
            self._connect(comps, idx_new, idx_old)
            return
        # Case Two: subdivide at the crossings, then prune and split
        for aid, items in crossings.items():
            vids = self._split_aedge(aid, [(sA, pt) for sA, _, pt in items])
            for (sA, sC, pt), vid in zip(sorted(items), vids):
                self.vertices[vid]["curve"] = ci
                self.curve_verts[ci].append((sC, vid))
        self.curve_verts[ci].sort()
        self._prune()
        self._split_valence4()

    def finish(self) -> ConeGraph:
        return ConeGraph(curves=self.curves, arcs=self.arcs,
                         vertices=self.vertices,
                         curve_verts=self.curve_verts)


def build_graph(C: Cone, s, curves, seed: int = 0,
                region_test=None) -> ConeGraph:
    """Connecting graph for disjoint simple closed curves on the cone
    boundary, built by inserting curves one at a time: a disjoint curve
    is joined by a single transverse arc; a curve crossing earlier arcs
    subdivides them, after which removable arc edges are pruned, freed
    valence-2 vertices resolved, and valence-4 crossings split into
    trivalent pairs.

    region_test, when given, restricts connecting arcs to a region of
    the cylinder (the cell footprint in the pipeline).
    """
    b = _Builder(C, s, region_test=region_test, seed=seed)
    for pl in curves:
        b.insert_curve(pl)
    out = b.finish()
    bad = [k for k, v in out.check().items() if not v]
    if bad:
        raise GenericityError(f"graph construction violated: {bad}")
    return out


# ---------------------------------------------------------------------------
# the tree-claim oracle


def _prufer_trees(k: int):
    """All labeled trees on k vertices, as edge lists."""
    if k == 1:
        yield []
        return
    if k == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(k), repeat=k - 2):
        degree = [1] * k
        for x in seq:
            degree[x] += 1
        edges = []
        deg = list(degree)
        leaves = [i for i in range(k) if deg[i] == 1]
        heapq.heapify(leaves)
        for x in seq:
            leaf = heapq.heappop(leaves)
            edges.append((leaf, x))
            deg[x] -= 1
            if deg[x] == 1:
                heapq.heappush(leaves, x)
        u = heapq.heappop(leaves)
        v = heapq.heappop(leaves)
        edges.append((u, v))
        yield edges


def tree_edge_bound_oracle(max_vertices: int) -> dict:
    """Check |E| <= 2k-3 over trees, where k counts vertices of valence
    1 or 2.

    Labeled trees up to 8 vertices are enumerated exhaustively via
    Pruefer sequences; for 9 and 10 vertices the enumeration switches to
    one representative per isomorphism class (the bound depends only on
    the isomorphism class).  Returns counts, violations, and whether the
    tight cases (single edge, 3-star) were seen with equality.
    """
    if max_vertices < 2:
        raise ValueError("need at least 2 vertices")
    checked = violations = 0
    tight_k2 = tight_k3 = False
    offenders = []
    for size in range(2, max_vertices + 1):
        if size <= 8:
            trees = _prufer_trees(size)
        else:
            trees = (list(t.edges) for t in nx.nonisomorphic_trees(size))
        for edges in trees:
            deg = {}
            for u, v in edges:
                deg[u] = deg.get(u, 0) + 1
                deg[v] = deg.get(v, 0) + 1
            k = sum(1 for d in deg.values() if d in (1, 2))
            if k < 2:
                continue
            checked += 1
            if len(edges) > 2 * k - 3:
                violations += 1
                offenders.append((size, edges))
            if len(edges) == 2 * k - 3:
                if k == 2 and len(edges) == 1:
                    tight_k2 = True
                if k == 3 and len(edges) == 3:
                    tight_k3 = True
    return {"checked": checked, "violations": violations,
            "offenders": offenders[:5],
            "tight_single_edge": tight_k2, "tight_three_star": tight_k3}


# ---------------------------------------------------------------------------
# synthetic curve systems (tests and oracles)


def random_curve_system(n_curves: int, seed: int, t_span: float = 3.0,
                        n_points: int = 120):
    """Disjoint simple closed curves on the cylinder: winding bands and
    small null-homotopic loops in separated t-bands, returned in a
    shuffled insertion order."""
    rng = np.random.default_rng(seed)
    centers = np.linspace(-t_span / 2.0, t_span / 2.0, n_curves)
    half_gap = 0.5 * (t_span / max(n_curves - 1, 1)) if n_curves > 1 else 0.5
    out = []
    for tc in centers:
        phi = np.linspace(0.0, TWO_PI, n_points, endpoint=False)
        if rng.random() < 0.6 or n_curves == 1:
            amp = rng.uniform(0.05, 0.35) * half_gap
            psi = rng.uniform(0.0, TWO_PI)
            t = tc + amp * np.sin(phi + psi)
            out.append(np.stack([t, phi], axis=-1))
        else:
            rt = rng.uniform(0.3, 0.8) * half_gap
            rp = rng.uniform(0.4, 1.2)
            pc = rng.uniform(-math.pi, math.pi)
            u = phi
            t = tc + rt * np.cos(u)
            p = pc + rp * np.sin(u)
            out.append(np.stack([t, p], axis=-1))
    order = rng.permutation(n_curves)
    return [out[i] for i in order]
