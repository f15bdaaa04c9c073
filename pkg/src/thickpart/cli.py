"""Batch front-end: constants tables, seeded end-to-end runs, and the
standalone numerical oracles."""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import export, kernel
from .net import constants
from .pipeline import RunConfig, run
from .quotient import TubeQuotient, compute_thick_thin


def cmd_constants(args) -> int:
    if args.mu <= 0.0 or args.d <= 0.0:
        print("error: mu and d must be positive", file=sys.stderr)
        return 2
    if args.R is not None:
        if args.R <= 0.0:
            print("error: R must be positive", file=sys.stderr)
            return 2
        R = args.R
    else:
        M = TubeQuotient(length=args.length, twist=args.twist)
        R = compute_thick_thin(M, args.mu, args.d).R_empirical
    t = constants(R, args.d)
    rows = [
        ("R", t.R, "injectivity lower bound over the kept region"),
        ("D", t.D, "D = min{R, d}"),
        ("C3", t.C3, "C3 = 1 / vol(B(D/2))"),
        ("C2", t.C2, "C2 = vol(B(5D/2)) / vol(B(D/2))"),
        ("C1", t.C1, "C1 = C2 (C2 - 1)"),
        ("C0", t.C0, "C0 = 2 C1"),
        ("Cbar0", t.Cbar0,
         "Cbar0 = C0 + C1(2C1-1) + C2(4C1-2) + 2C1 + (8C1-4)"),
        ("C", t.C, "C = max{C3, (6 Cbar0 - 4) C0}"),
        ("K", t.K, "K = C^2"),
    ]
    for name, value, formula in rows:
        print(f"{name:6s} {export.fnum(value):>24s}   {formula}")
    return 0


def cmd_run(args) -> int:
    values = {}
    if args.config:
        try:
            values = export.parse_config(args.config)
        except export.ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    if args.seed is not None:
        values["seed"] = args.seed
    cfg = RunConfig.from_dict(values)
    res = run(cfg)

    what = set(args.export or [])
    if args.out and not args.verify_only:
        os.makedirs(args.out, exist_ok=True)

        def path(name):
            return os.path.join(args.out, name)

        export.write_text(path("config.txt"), export.config_lines(
            {"length": cfg.length, "twist": cfg.twist, "mu": cfg.mu,
             "d": cfg.d, "seed": cfg.seed,
             "sample_budget": cfg.sample_budget}))
        export.write_text(path("constants.txt"),
                          export.constants_lines(res.constants))
        export.write_text(path("net.txt"), export.net_lines(res.net))
        if not what or "mesh" in what:
            export.write_text(path("cells.txt"),
                              export.mesh_lines(res.cells))
            export.write_text(path("cells.obj"),
                              export.obj_lines(res.cells))
            export.write_text(path("graphs.txt"),
                              export.graph_lines(res.graphs))
        if not what or "triangulation" in what:
            export.write_text(
                path("triangulation.txt"),
                export.triangulation_lines(res.assembled.tri,
                                           res.registry))
            export.write_text(path("triangulation.flat"),
                              export.flat_gluing_lines(res.assembled.tri))
        if not what or "report" in what:
            export.write_text(path("report.txt"),
                              export.report_text_lines(res.report))
            with open(path("report.json"), "w") as fh:
                fh.write(export.report_json(res.report) + "\n")

    for line in export.report_text_lines(res.report):
        print(line)
    return 0 if res.ok else 1


def cmd_oracle(args) -> int:
    if args.name == "tree":
        from .conegraph import tree_edge_bound_oracle
        rep = tree_edge_bound_oracle(args.max_vertices)
        print(f"trees checked: {rep['checked']}")
        print(f"violations: {rep['violations']}")
        print(f"tight single edge: {rep['tight_single_edge']}")
        print(f"tight three-star: {rep['tight_three_star']}")
        for v in rep["offenders"]:
            print(f"counterexample: {v}")
        return 0 if rep["violations"] == 0 else 1

    if args.name == "volume":
        from scipy.integrate import quad
        worst = 0.0
        for r in np.linspace(0.05, 3.0, 60):
            num, _ = quad(lambda t: 4.0 * math.pi * math.sinh(t) ** 2,
                          0.0, r, epsabs=1e-13, epsrel=1e-13)
            worst = max(worst, abs(num - kernel.ball_volume(r)))
        print(f"max |closed form - quadrature| = {export.fnum(worst)}")
        return 0 if worst < 1e-10 else 1

    if args.name == "inj":
        M = TubeQuotient(length=args.length, twist=args.twist)
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        for _ in range(100):
            t = rng.uniform(0.0, M.length)
            r = rng.uniform(0.05, 2.0)
            phi = rng.uniform(-math.pi, math.pi)
            p = M.from_cyl(np.array([t, r, phi]))
            X = kernel.uhs_to_hyperboloid(p)
            # brute force over a wide deck-power sweep
            brute = min(
                float(kernel.dist_hyperboloid(X, X @ M.deck_matrix(n).T))
                for n in range(1, 1001)) / 2.0
            worst = max(worst, abs(M.inj_radius(p) - brute))
        print(f"max |truncated - brute force| = {export.fnum(worst)}")
        return 0 if worst < 1e-9 else 1

    print(f"error: unknown oracle {args.name!r}", file=sys.stderr)
    return 2


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="thickpart",
        description="thick-part decomposition and triangulation runs")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="print the constants table")
    c.add_argument("--mu", type=float, required=True)
    c.add_argument("--d", type=float, required=True)
    c.add_argument("--R", type=float, default=None,
                   help="injectivity lower bound; computed from the "
                        "configured quotient when omitted")
    c.add_argument("--length", type=float, default=0.1)
    c.add_argument("--twist", type=float, default=0.3)
    c.set_defaults(func=cmd_constants)

    r = sub.add_parser("run", help="end-to-end seeded run")
    r.add_argument("--config", type=str, default=None)
    r.add_argument("--out", type=str, default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--verify-only", action="store_true")
    r.add_argument("--export", action="append",
                   choices=["mesh", "triangulation", "report"])
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="run a standalone numerical oracle")
    o.add_argument("name", choices=["tree", "volume", "inj"])
    o.add_argument("--max-vertices", type=int, default=10)
    o.add_argument("--length", type=float, default=0.1)
    o.add_argument("--twist", type=float, default=0.3)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
