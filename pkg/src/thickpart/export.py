"""Structured-text artifact writers and the flat run-config format.

All writers are deterministic: floats are printed with %.17g (shortest
round-trip for doubles in practice), dictionaries are emitted in sorted
key order, and every document starts with a versioned header line so a
reader can reject unknown formats.
"""

from __future__ import annotations

import json

import numpy as np

FLOAT_FMT = "%.17g"


def fnum(x) -> str:
    return FLOAT_FMT % float(x)


def write_text(path, lines) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# run configuration: flat key-value text with a versioned header

CONFIG_HEADER = "thickpart-config 1"

CONFIG_KEYS = {
    "length": float,
    "twist": float,
    "mu": float,
    "d": float,
    "seed": int,
    "sample_budget": int,
    "orbit_depth": int,
    "outer_cutoff_multiplier": float,
    "cutoff_factor": float,
    "distance_tolerance": float,
    "margin_band": float,
}


class ConfigError(ValueError):
    pass


def parse_config_lines(lines) -> dict:
    lines = [ln.strip() for ln in lines]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != CONFIG_HEADER:
        raise ConfigError(f"missing config header {CONFIG_HEADER!r}")
    out = {}
    for ln in lines[1:]:
        parts = ln.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(f"malformed config line {ln!r}")
        key, value = parts
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"duplicate config key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return out


def parse_config(path) -> dict:
    with open(path) as fh:
        return parse_config_lines(fh.readlines())


def config_lines(values: dict) -> list:
    lines = [CONFIG_HEADER]
    for key in sorted(values):
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        v = values[key]
        lines.append(f"{key} {fnum(v) if CONFIG_KEYS[key] is float else v}")
    return lines


# ---------------------------------------------------------------------------
# constants table


def constants_lines(table) -> list:
    lines = ["thickpart-constants 1"]
    for key, value in table.as_dict().items():
        lines.append(f"{key} {fnum(value)}")
    return lines


# ---------------------------------------------------------------------------
# net


def net_lines(net) -> list:
    lines = ["thickpart-net 1",
             f"size {net.size}",
             f"D {fnum(net.D)}",
             f"seed {net.seed}",
             f"r_inner {fnum(net.r_inner)}",
             f"r_outer {fnum(net.r_outer)}"]
    for p in net.points:
        lines.append(" ".join(fnum(v) for v in p))
    return lines


# ---------------------------------------------------------------------------
# cell mesh: vertex list, face index lists, per-face contributor tags


def mesh_lines(cells) -> list:
    lines = ["thickpart-mesh 1", f"cells {len(cells)}"]
    for poly in cells:
        verts = poly.vertices_hyperboloid()
        lines.append(f"cell {poly.index} vertices {len(verts)} "
                     f"faces {len(poly.faces)}")
        for v in verts:
            lines.append("v " + " ".join(fnum(x) for x in v))
        for face in poly.faces:
            tag = "cutoff" if face.contributor is None else \
                f"{face.contributor[0]},{face.contributor[1]}"
            idx = " ".join(str(i) for i in face.vertex_ids)
            lines.append(f"f {tag} {idx}")
    return lines


def obj_lines(cells) -> list:
    """The same cells as a single Wavefront OBJ scene (Klein-model
    coordinates, one group per cell) for external viewers."""
    lines = ["# thickpart cells, Klein ball coordinates"]
    offset = 1
    for poly in cells:
        lines.append(f"g cell_{poly.index}")
        for k in poly.vertices_klein:
            lines.append("v " + " ".join(fnum(x) for x in k))
        for face in poly.faces:
            lines.append("f " + " ".join(str(offset + i)
                                         for i in face.vertex_ids))
        offset += poly.n_vertices
    return lines


# ---------------------------------------------------------------------------
# cone graphs: curves as (t, phi) polylines, arcs with plane covectors


def graph_lines(graphs) -> list:
    lines = ["thickpart-conegraph 1", f"graphs {len(graphs)}"]
    for tag, g in graphs:
        lines.append(f"graph {tag} vertices {len(g.vertices)} "
                     f"arcs {len(g.arcs)} curves {len(g.curves)}")
        for vid in sorted(g.vertices):
            v = g.vertices[vid]
            t, phi = v["pos"]
            curve = v.get("curve")
            lines.append(f"vtx {vid} {fnum(t)} {fnum(phi)} "
                         f"{-1 if curve is None else curve}")
        for cid, pl in enumerate(g.curves):
            lines.append(f"curve {cid} {len(pl)}")
            for t, phi in pl:
                lines.append(f"c {fnum(t)} {fnum(phi)}")
        for aid in sorted(g.arcs):
            a = g.arcs[aid]
            w = " ".join(fnum(x) for x in a["plane_w"])
            lines.append(f"arc {aid} {a['va']} {a['vb']} {w}")
    return lines


# ---------------------------------------------------------------------------
# triangulation: vertex table, tet table, gluing table, boundary marks


def triangulation_lines(tri, registry=None) -> list:
    lines = ["thickpart-triangulation 1",
             f"tets {tri.n_tets}",
             f"gluings {len(tri.gluings)}",
             f"boundary {len(tri.boundary)}"]
    vids = sorted({v for t in tri.tets for v in t})
    lines.append(f"vertices {len(vids)}")
    for vid in vids:
        pos = registry.position(vid) if registry is not None \
            else np.asarray(tri.vertices[vid])
        lines.append(f"vtx {vid} " + " ".join(fnum(x) for x in pos))
    for t in tri.tets:
        lines.append("tet " + " ".join(str(v) for v in t))
    for (ti, fi), (tj, fj) in sorted(tri.gluings):
        lines.append(f"glue {ti} {fi} {tj} {fj}")
    for ti, fi, label in sorted(tri.boundary, key=lambda b: (b[0], b[1])):
        name = label if isinstance(label, str) else \
            ",".join(str(x) for x in label)
        lines.append(f"bdry {ti} {fi} {name}")
    return lines


def flat_gluing_lines(tri) -> list:
    """Flat tetrahedron gluing-permutation table: one line per tet with,
    for each face 0..3, either `-` or `partner:perm` where perm sends
    this tet's vertex slots to the partner's (glued faces share vertex
    ids, so the permutation is recovered by id matching)."""
    partner = {}
    for a, b in tri.gluings:
        partner[a] = b
        partner[b] = a
    lines = [f"{tri.n_tets}"]
    for ti, t in enumerate(tri.tets):
        cells = []
        for fi in range(4):
            other = partner.get((ti, fi))
            if other is None:
                cells.append("-")
                continue
            tj, fj = other
            u = tri.tets[tj]
            perm = []
            for a in range(4):
                perm.append(fj if a == fi else u.index(t[a]))
            cells.append(f"{tj}:" + "".join(str(p) for p in perm))
        lines.append(" ".join(cells))
    return lines


# ---------------------------------------------------------------------------
# verification report


def report_text_lines(report: dict) -> list:
    lines = ["thickpart-report 1"]
    for section, entries in report.items():
        lines.append(f"[{section}]")
        if isinstance(entries, dict):
            for key in entries:
                val = entries[key]
                if isinstance(val, dict) and "ok" in val:
                    status = "PASS" if val["ok"] else "FAIL"
                    extra = " ".join(
                        f"{k}={_fmt_value(v)}" for k, v in val.items()
                        if k != "ok")
                    lines.append(f"{status} {key} {extra}".rstrip())
                else:
                    lines.append(f"{key} {_fmt_value(val)}")
        else:
            lines.append(_fmt_value(entries))
    return lines


def _fmt_value(v):
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, float) or isinstance(v, np.floating):
        return fnum(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v]
    return v


def report_json(report: dict) -> str:
    return json.dumps(_jsonable(report), indent=1, sort_keys=True)
