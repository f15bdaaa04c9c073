import os

import numpy as np
import pytest

from thickpart import cli, export
from thickpart.export import (ConfigError, config_lines, parse_config_lines,
                              report_text_lines)
from thickpart.pipeline import RunConfig, run

INVARIANT_KEYS = {
    "voronoi": ["polytope_validity", "nearest_center_consistency",
                "per_cell_paper_bounds", "face_trichotomy",
                "distance_identity"],
    "cone_graph": ["edge_bound", "connected", "trivalent",
                   "bridge_property", "contraction_to_tree",
                   "arc_plane_residual"],
    "triangulator": ["retraction_idempotence", "cut_face_count",
                     "coning_identity", "gluing_validity",
                     "per_cell_tet_bound", "vertex_census"],
}


# ---------------------------------------------------------------------------
# config format


def test_config_round_trip():
    values = {"length": 0.1, "twist": 0.3, "mu": 0.5, "seed": 3}
    parsed = parse_config_lines(config_lines(values))
    assert parsed == values


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_lines(["thickpart-config 1", "wibble 3"])


def test_config_rejects_missing_header():
    with pytest.raises(ConfigError):
        parse_config_lines(["length 0.1"])


def test_config_rejects_duplicate_key():
    with pytest.raises(ConfigError):
        parse_config_lines(["thickpart-config 1", "mu 0.5", "mu 0.6"])


def test_runconfig_validation():
    with pytest.raises(ValueError):
        RunConfig(length=-1.0)
    with pytest.raises(ValueError):
        RunConfig(sample_budget=0)
    assert RunConfig(length=0.1, mu=0.5).drilled
    assert not RunConfig(length=1.2, mu=0.5).drilled


# ---------------------------------------------------------------------------
# reports


def test_report_lists_every_invariant_once(light_run):
    rep = light_run.report
    for section, keys in INVARIANT_KEYS.items():
        assert sorted(rep[section].keys()) == sorted(keys)
    text = report_text_lines(rep)
    for keys in INVARIANT_KEYS.values():
        for key in keys:
            assert sum(1 for ln in text if f" {key} " in ln
                       or ln.rstrip().endswith(key)) == 1


def test_light_run_passes(light_run):
    assert light_run.ok
    for section in ("voronoi", "cone_graph", "triangulator"):
        for key, entry in light_run.report[section].items():
            assert entry["ok"], (section, key, entry)


def test_report_json_round_trips(light_run):
    import json
    blob = export.report_json(light_run.report)
    parsed = json.loads(blob)
    assert parsed["run"]["n_tets"] == light_run.assembled.tri.n_tets


# ---------------------------------------------------------------------------
# degenerate branch + determinism (cheap undrilled config)


@pytest.fixture(scope="module")
def undrilled_runs():
    cfg = RunConfig(length=1.2, twist=0.5, mu=0.5, d=0.35, seed=4,
                    sample_budget=400, outer_cutoff_multiplier=1.0)
    return run(cfg), run(cfg)


def test_undrilled_branch_all_balls(undrilled_runs):
    res, _ = undrilled_runs
    assert not res.config.drilled
    assert all(c.genus == 0 for cl in res.clipped for c in cl.components)
    assert res.assembled.tri.n_tets > 0
    assert res.ok


def test_identical_seed_identical_artifacts(undrilled_runs):
    a, b = undrilled_runs
    assert export.net_lines(a.net) == export.net_lines(b.net)
    assert export.mesh_lines(a.cells) == export.mesh_lines(b.cells)
    assert export.triangulation_lines(a.assembled.tri, a.registry) == \
        export.triangulation_lines(b.assembled.tri, b.registry)
    assert export.report_text_lines(a.report) == \
        export.report_text_lines(b.report)


def test_flat_gluing_table_consistent(light_run):
    tri = light_run.assembled.tri
    lines = export.flat_gluing_lines(tri)
    assert lines[0] == str(tri.n_tets)
    assert len(lines) == tri.n_tets + 1
    # spot-check the permutations against the gluing list
    partner = {}
    for x, y in tri.gluings:
        partner[x] = y
        partner[y] = x
    for ti in (0, tri.n_tets // 2, tri.n_tets - 1):
        cells = lines[1 + ti].split()
        for fi, c in enumerate(cells):
            if c == "-":
                assert (ti, fi) not in partner
                continue
            tj, perm = c.split(":")
            tj = int(tj)
            assert partner[(ti, fi)][0] == tj
            perm = [int(ch) for ch in perm]
            t, u = tri.tets[ti], tri.tets[tj]
            for a in range(4):
                if a != fi:
                    assert u[perm[a]] == t[a]


# ---------------------------------------------------------------------------
# cli


def test_cli_constants_exit_codes(capsys):
    assert cli.main(["constants", "--mu", "0.5", "--d", "0.4",
                     "--R", "0.3"]) == 0
    out = capsys.readouterr().out
    assert "K = C^2" in out and "min{R, d}" in out
    assert cli.main(["constants", "--mu", "-1", "--d", "0.4"]) == 2


def test_cli_oracle_volume(capsys):
    assert cli.main(["oracle", "volume"]) == 0


def test_cli_oracle_tree(capsys):
    assert cli.main(["oracle", "tree", "--max-vertices", "6"]) == 0
    out = capsys.readouterr().out
    assert "violations: 0" in out


def test_cli_run_writes_artifacts(tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("thickpart-config 1\nlength 1.2\ntwist 0.5\nmu 0.5\n"
                   "d 0.35\nseed 4\nsample_budget 400\n"
                   "outer_cutoff_multiplier 1.0\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfg),
                     "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    for need in ("constants.txt", "net.txt", "cells.txt",
                 "triangulation.txt", "triangulation.flat",
                 "report.txt", "report.json"):
        assert need in names
    head = (out / "triangulation.txt").read_text().splitlines()[0]
    assert head == "thickpart-triangulation 1"
