"""End-to-end seeded runs: net -> cells -> clip -> graphs -> cut ->
triangulate -> assemble -> verify.

The verification report lists every decomposition invariant exactly
once, with its measured value, so a run is auditable from the report
alone.  Per-cell stages fan out over a thread pool (numpy releases the
GIL in the hot paths); the report and all artifacts are produced by the
single orchestrating thread, and identical configs give identical
output.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .kernel import mdot
from .quotient import TubeQuotient, compute_thick_thin
from .net import ConstantsTable, build_net, constants, \
    min_pairwise_quotient_dist
from .cells import build_cells, cell, check_lemma_distance, \
    nearest_center_oracle, CUTOFF_FACTOR
from .clip import clip_to_X, verify_cell_bounds
from .triangulate import (VertexRegistry, assemble, cut_clipped_cell,
                          plan_cell_cuts, retraction_point,
                          triangulate_cells, vertex_census)


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the seed so
    the failure can be reproduced."""

    def __init__(self, stage, seed, cause):
        super().__init__(f"stage {stage!r} failed (seed {seed}): {cause}")
        self.stage = stage
        self.seed = seed
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    length: float = 0.1
    twist: float = 0.3
    mu: float = 0.5
    d: float = 0.3
    seed: int = 0
    sample_budget: int = 3000
    orbit_depth: int | None = None
    outer_cutoff_multiplier: float = 4.0
    cutoff_factor: float = CUTOFF_FACTOR
    distance_tolerance: float = 1e-8
    margin_band: float = 1e-7

    def __post_init__(self):
        for name in ("length", "mu", "d", "outer_cutoff_multiplier",
                     "cutoff_factor", "distance_tolerance", "margin_band"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.sample_budget <= 0:
            raise ValueError("sample_budget must be positive")

    @property
    def drilled(self) -> bool:
        # mu <= length/2 means no thin part: nothing is drilled and every
        # cell is a ball
        return self.mu > self.length / 2.0

    @staticmethod
    def from_dict(values: dict) -> "RunConfig":
        return RunConfig(**values)


@dataclass
class RunResult:
    config: RunConfig
    constants: ConstantsTable
    net: object
    cells: list
    clipped: list
    graphs: list                    # (cell index, ConeGraph)
    cut_complexes: list             # per cell: list of CutComplex
    cell_tris: list
    assembled: object
    registry: VertexRegistry
    report: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(entry.get("ok", True)
                   for section in self.report.values()
                   if isinstance(section, dict)
                   for entry in section.values()
                   if isinstance(entry, dict))


def n_threads() -> int:
    cap = os.environ.get("THICKPART_THREADS")
    avail = os.cpu_count() or 1
    if cap:
        return max(1, min(int(cap), avail))
    return avail


def _parallel(fn, items):
    """Order-preserving map over a thread pool."""
    n = n_threads()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------


def run(config: RunConfig, n_distance_cells: int = 8) -> RunResult:
    """Full pipeline for one configuration; the report carries every
    decomposition invariant with pass/fail and measured value."""
    M = TubeQuotient(length=config.length, twist=config.twist)

    try:
        xd = compute_thick_thin(M, config.mu, config.d)
        ct = constants(xd.R_empirical, config.d)
    except Exception as exc:
        raise StageError("constants", config.seed, exc) from exc

    try:
        net = build_net(M, xd, D=xd.D, sample_budget=config.sample_budget,
                        seed=config.seed,
                        outer_cutoff_multiplier=config.outer_cutoff_multiplier)
    except Exception as exc:
        raise StageError("net", config.seed, exc) from exc

    try:
        cells = _parallel(
            lambda i: cell(i, net, M, orbit_depth=config.orbit_depth,
                           cutoff_factor=config.cutoff_factor),
            list(range(net.size)))
    except Exception as exc:
        raise StageError("cells", config.seed, exc) from exc

    cone = xd.cone(M)
    try:
        clipped = _parallel(lambda poly: clip_to_X(poly, cone), cells)
    except Exception as exc:
        raise StageError("clip", config.seed, exc) from exc

    registry = VertexRegistry(M=M)
    graphs, cut_complexes = [], [None] * len(clipped)
    cuts = None
    if cone is not None and any(c.genus > 0 for cl in clipped
                                for c in cl.components):
        try:
            s = M.from_cyl(np.array([0.37 * M.length,
                                     0.45 * cone.radius, 0.8]))
            for i, cl in enumerate(clipped):
                if any(c.genus > 0 for c in cl.components):
                    cell_graphs: list = []
                    cut_complexes[i] = cut_clipped_cell(
                        cl, cone, s, registry, M=M, seed=config.seed,
                        collect_graphs=cell_graphs)
                    graphs.extend((i, g) for _, g in cell_graphs)
            cuts = plan_cell_cuts(clipped, cut_complexes, M, cone, registry)
        except Exception as exc:
            raise StageError("cut", config.seed, exc) from exc

    try:
        cell_tris, registry = triangulate_cells(
            clipped, cone, M=M, registry=registry, cuts=cuts)
    except Exception as exc:
        raise StageError("triangulate", config.seed, exc) from exc

    try:
        assembled = assemble(clipped, cell_tris, registry, constants=ct)
    except Exception as exc:
        raise StageError("assemble", config.seed, exc) from exc

    result = RunResult(config=config, constants=ct, net=net, cells=cells,
                       clipped=clipped, graphs=graphs,
                       cut_complexes=cut_complexes, cell_tris=cell_tris,
                       assembled=assembled, registry=registry)
    try:
        result.report = build_report(result, M, cone,
                                     n_distance_cells=n_distance_cells)
    except Exception as exc:
        raise StageError("verify", config.seed, exc) from exc
    return result


# ---------------------------------------------------------------------------
# verification report


def _entry(ok, **measured):
    out = {"ok": bool(ok)}
    out.update(measured)
    return out


def build_report(res: RunResult, M: TubeQuotient, cone,
                 n_distance_cells: int = 8) -> dict:
    cfg = res.config
    report = {
        "run": {
            "seed": cfg.seed,
            "drilled": cfg.drilled,
            "net_size": res.net.size,
            "n_tets": res.assembled.tri.n_tets,
            "n_wall_gluings": res.assembled.n_wall_gluings,
            "flagged_cells": sum(1 for cl in res.clipped
                                 if cl.touches_cutoff),
            "boundary": dict(res.assembled.boundary_counts),
        },
        "constants": res.constants.as_dict(),
    }

    report["voronoi"] = _voronoi_section(res, M, cone, n_distance_cells)
    report["cone_graph"] = _cone_graph_section(res, cone)
    report["triangulator"] = _triangulator_section(res, M, cone)
    return report


def _voronoi_section(res, M, cone, n_distance_cells):
    sec = {}

    # polytope validity: every vertex on the right side of every
    # half-space, and the face lattice satisfies Euler's formula
    worst = 0.0
    euler_bad = 0
    for poly in res.cells:
        worst = max(worst, float(np.max(
            poly.margin_local(poly.vertices_klein))))
        if poly.n_vertices - len(poly.edges) + len(poly.faces) != 2:
            euler_bad += 1
    sec["polytope_validity"] = _entry(
        worst <= 1e-8 and euler_bad == 0,
        max_halfspace_violation=worst, euler_failures=euler_bad)

    # nearest-center classification against polytope membership
    checked, mismatches = nearest_center_oracle(
        M, res.net, res.cells, n_samples=10_000,
        seed=res.config.seed + 17, margin=res.config.margin_band)
    sec["nearest_center_consistency"] = _entry(
        mismatches == 0, checked=checked, mismatches=mismatches)

    # per-cell counting bounds on non-flagged cells
    violations = 0
    n_checked = 0
    for cl in res.clipped:
        rep = verify_cell_bounds(cl, res.constants)
        if rep.flagged:
            continue
        n_checked += 1
        if not rep.all_ok:
            violations += 1
    sec["per_cell_paper_bounds"] = _entry(
        violations == 0, cells_checked=n_checked, violations=violations)

    # face class trichotomy
    bad = sum(1 for cl in res.clipped
              for v in cl.face_classes.values()
              if v not in ("empty", "disks", "annulus"))
    sec["face_trichotomy"] = _entry(bad == 0, unclassified=bad)

    # distance identity + projection injectivity on a cell subsample
    max_dev, idents = 0.0, 0
    stride = max(1, len(res.cells) // max(n_distance_cells, 1))
    for poly in res.cells[::stride]:
        dev, ident = check_lemma_distance(
            M, res.net, poly, n_samples=200, seed=res.config.seed + 5)
        max_dev = max(max_dev, dev)
        idents += ident
    sec["distance_identity"] = _entry(
        max_dev < res.config.distance_tolerance and idents == 0,
        max_deviation=max_dev, orbit_identifications=idents)
    return sec


def _cone_graph_section(res, cone):
    graphs = [g for _, g in res.graphs]
    sec = {}
    if not graphs:
        vac = _entry(True, graphs=0)
        for key in ("edge_bound", "connected", "trivalent",
                    "bridge_property", "contraction_to_tree",
                    "arc_plane_residual"):
            sec[key] = dict(vac)
        return sec
    checks = [g.check() for g in graphs]
    sec["edge_bound"] = _entry(all(c["edge_bound"] for c in checks),
                               graphs=len(graphs))
    sec["connected"] = _entry(all(c["connected"] for c in checks))
    sec["trivalent"] = _entry(all(c["trivalent"] for c in checks))
    sec["bridge_property"] = _entry(all(c["all_bridges"] for c in checks))
    sec["contraction_to_tree"] = _entry(
        all(c["contraction_tree"] for c in checks))
    worst = 0.0
    for g in graphs:
        for a in g.arcs.values():
            w = np.asarray(a["plane_w"], dtype=float)
            w = w / math.sqrt(max(float(mdot(w, w)), 1e-300))
            X = cone.boundary_from_cylinder(np.asarray(a["polyline"]))
            worst = max(worst, float(np.max(np.abs(mdot(X, w)))))
    sec["arc_plane_residual"] = _entry(worst < 1e-8, max_residual=worst)
    return sec


def _triangulator_section(res, M, cone):
    sec = {}

    # retraction idempotence on sampled exterior points
    if cone is not None:
        rng = np.random.default_rng(res.config.seed + 23)
        s = M.from_cyl(np.array([0.5 * M.length, 0.4 * cone.radius, 0.2]))
        worst = 0.0
        for _ in range(50):
            p = M.from_cyl(np.array([
                rng.uniform(0.0, M.length),
                rng.uniform(cone.radius + 1e-3, cone.radius + 1.0),
                rng.uniform(-math.pi, math.pi)]))
            r1 = retraction_point(kernel.uhs_to_hyperboloid(p), s, cone)
            r2 = retraction_point(r1, s, cone)
            worst = max(worst, float(np.linalg.norm(r1 - r2)))
        sec["retraction_idempotence"] = _entry(worst < 1e-9,
                                               max_displacement=worst)
    else:
        sec["retraction_idempotence"] = _entry(True, samples=0)

    # cut complex size against 2g - 1
    worst_excess = 0
    n_complexes = 0
    for i, kxs in enumerate(res.cut_complexes):
        if not kxs:
            continue
        genus = {c.index: c.genus for c in res.clipped[i].components}
        for kx in kxs:
            n_complexes += 1
            bound = 2 * genus[kx.component] - 1
            worst_excess = max(worst_excess, kx.n_faces - bound)
    sec["cut_face_count"] = _entry(worst_excess <= 0,
                                   complexes=n_complexes,
                                   worst_excess=worst_excess)

    # coning identity f = 2v - 4 per ball component
    bad = 0
    n_comp = 0
    for ctri in res.cell_tris:
        for comp in ctri.components:
            n_comp += 1
            if comp.surface.n_triangles != 2 * comp.n_surface_vertices - 4:
                bad += 1
    sec["coning_identity"] = _entry(bad == 0, components=n_comp,
                                    violations=bad)

    # global gluing validity: pseudo-manifold with orientable gluings
    try:
        res.assembled.tri.check_gluings()
        glued_ok = True
    except ValueError:
        glued_ok = False
    orientable = res.assembled.tri.is_orientable()
    sec["gluing_validity"] = _entry(glued_ok and orientable,
                                    faces_covered=glued_ok,
                                    orientable=orientable)

    # per-cell tetrahedron cap on non-flagged cells
    cap = (6.0 * res.constants.Cbar0 - 4.0) * res.constants.C0
    worst = 0
    for cl, ctri in zip(res.clipped, res.cell_tris):
        if cl.touches_cutoff:
            continue
        worst = max(worst, ctri.n_tets)
    sec["per_cell_tet_bound"] = _entry(worst <= cap, max_cell_tets=worst,
                                       bound=cap)

    # boundary-vertex census per cut cell (informational classes, each
    # bound asserted)
    census_ok = True
    total = 0
    for i, kxs in enumerate(res.cut_complexes):
        if not kxs:
            continue
        c = vertex_census(res.clipped[i], kxs, res.constants)
        census_ok = census_ok and bool(c["ok"])
        total = max(total, c["total"])
    sec["vertex_census"] = _entry(census_ok, max_total=total)
    return sec
