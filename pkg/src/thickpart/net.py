"""Separated nets in the kept region, and the explicit constants table.

The net is a maximal D-separated point set (in the quotient metric) in a
truncated fundamental shell of the kept region: one holonomy period along
the axis, tube radii between the drilled-tube boundary and an outer
cutoff.  Maximality over the continuum is certified on a dense probe
grid rather than proven.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .quotient import ThickThinData, TubeQuotient


class CoverageError(RuntimeError):
    """Raised when the candidate budget is exhausted before the probe
    grid is covered; carries the uncovered probe points."""

    def __init__(self, message, gaps):
        super().__init__(message)
        self.gaps = gaps


@dataclass(frozen=True)
class Net:
    """A D-separated net: one canonical lift per point, with the shell
    that was sampled."""

    points: np.ndarray          # (N, 3) upper half-space lifts
    D: float
    seed: int
    r_inner: float
    r_outer: float

    @property
    def size(self) -> int:
        return len(self.points)

    def hyperboloid(self) -> np.ndarray:
        return kernel.uhs_to_hyperboloid(self.points)


@dataclass(frozen=True)
class ConstantsTable:
    """Every explicit constant of the counting argument, derived from the
    injectivity lower bound R and the neighborhood parameter d."""

    R: float
    d: float
    D: float = field(init=False)
    C3: float = field(init=False)
    C2: float = field(init=False)
    C1: float = field(init=False)
    C0: float = field(init=False)
    Cbar0: float = field(init=False)
    C: float = field(init=False)
    K: float = field(init=False)

    def __post_init__(self):
        if not (self.R > 0.0 and self.d > 0.0):
            raise ValueError("R and d must be positive")
        D = min(self.R, self.d)
        C3 = 1.0 / kernel.ball_volume(D / 2.0)
        C2 = kernel.ball_volume(2.5 * D) / kernel.ball_volume(D / 2.0)
        C1 = C2 * (C2 - 1.0)
        C0 = 2.0 * C1
        Cbar0 = C0 + C1 * (2.0 * C1 - 1.0) + C2 * (4.0 * C1 - 2.0) \
            + 2.0 * C1 + (8.0 * C1 - 4.0)
        C = max(C3, (6.0 * Cbar0 - 4.0) * C0)
        K = C * C
        for name, value in [("D", D), ("C3", C3), ("C2", C2), ("C1", C1),
                            ("C0", C0), ("Cbar0", Cbar0), ("C", C), ("K", K)]:
            object.__setattr__(self, name, value)

    def as_dict(self) -> dict:
        return {k: getattr(self, k)
                for k in ("R", "d", "D", "C3", "C2", "C1", "C0", "Cbar0", "C", "K")}


def constants(R: float, d_param: float) -> ConstantsTable:
    return ConstantsTable(R=R, d=d_param)


# ---------------------------------------------------------------------------
# shell sampling


def sample_shell_cyl(M: TubeQuotient, r_lo: float, r_hi: float, n: int, rng) -> np.ndarray:
    """n random tube-coordinate points in the fundamental shell, distributed
    by hyperbolic volume (the volume element is sinh r cosh r dr dphi dt)."""
    t = rng.uniform(0.0, M.length, size=n)
    phi = rng.uniform(-math.pi, math.pi, size=n)
    u = rng.uniform(0.0, 1.0, size=n)
    s_lo, s_hi = math.sinh(r_lo) ** 2, math.sinh(r_hi) ** 2
    r = np.arcsinh(np.sqrt(s_lo + u * (s_hi - s_lo)))
    return np.stack([t, r, phi], axis=-1)


def sample_shell(M: TubeQuotient, r_lo: float, r_hi: float, n: int, rng) -> np.ndarray:
    """Like sample_shell_cyl but returning upper half-space points."""
    return M.from_cyl(sample_shell_cyl(M, r_lo, r_hi, n, rng))


def shell_volume(M: TubeQuotient, r_lo: float, r_hi: float) -> float:
    """Exact volume of the quotient shell between two tube radii."""
    return M.length * math.pi * (math.sinh(r_hi) ** 2 - math.sinh(r_lo) ** 2)


def shell_volume_mc(M: TubeQuotient, r_lo: float, r_hi: float, n: int, rng):
    """Monte Carlo estimate (mean, sigma) of the shell volume, integrating
    the tube-coordinate jacobian over the coordinate box."""
    t = rng.uniform(0.0, M.length, size=n)
    phi = rng.uniform(-math.pi, math.pi, size=n)
    r = rng.uniform(r_lo, r_hi, size=n)
    jac = np.sinh(r) * np.cosh(r)
    box = M.length * 2.0 * math.pi * (r_hi - r_lo)
    mean = box * float(np.mean(jac))
    sigma = box * float(np.std(jac, ddof=1)) / math.sqrt(n)
    return mean, sigma


# ---------------------------------------------------------------------------
# greedy net construction


def build_net(M: TubeQuotient, xdata: ThickThinData, D: float,
              sample_budget: int = 3000, seed: int = 0,
              outer_cutoff_multiplier: float = 4.0,
              probe_factor: int = 10,
              jitter: float = 1e-6) -> Net:
    """Greedy maximal D-separated net in the truncated fundamental shell.

    Candidates stream from a seeded volume-weighted sampler; a candidate
    joins the net when its quotient distance to every current point
    exceeds D.  Probe rounds of probe_factor * sample_budget points then
    repair residual gaps (an uncovered probe is itself addable) until a
    full fresh round inserts nothing; that round is the maximality
    certificate.  Finally each point is jittered by jitter * D (rolled
    back if separation would break) so the configuration is generic.
    """
    if D <= 0.0:
        raise ValueError("D must be positive")
    rng = np.random.default_rng(seed)
    r_lo = xdata.tube_radius_X
    r_hi = r_lo + outer_cutoff_multiplier * D
    cap = 1.001 * D

    cyl: list = []

    def try_insert(c):
        if cyl:
            d = M.cyl_dist_matrix(np.array(cyl), c[None, :], cap)
            if float(d.min()) <= D:
                return False
        cyl.append(c)
        return True

    cand_cyl = sample_shell_cyl(M, r_lo, r_hi, sample_budget, rng)
    for c in cand_cyl:
        try_insert(c)

    n_probe = probe_factor * sample_budget
    certified = False
    for _ in range(80):
        probes = sample_shell_cyl(M, r_lo, r_hi, n_probe, rng)
        cover = M.cyl_dist_matrix(probes, np.array(cyl), cap).min(axis=1)
        bad = np.nonzero(cover > D)[0]
        if len(bad) == 0:
            certified = True
            break
        for i in bad:
            try_insert(probes[i])
    if not certified:
        raise CoverageError(
            "probe coverage did not stabilize within the round budget",
            M.from_cyl(probes[bad]))

    # generic jitter, rolled back if separation would break
    cyl = np.array(cyl)
    for i in range(len(cyl)):
        trial = cyl[i] + rng.normal(scale=jitter * D, size=3)
        others = np.delete(cyl, i, axis=0)
        if len(others) == 0 or \
                float(M.cyl_dist_matrix(others, trial[None, :], cap).min()) > D:
            cyl[i] = trial

    return Net(points=M.from_cyl(cyl), D=D, seed=seed,
               r_inner=r_lo, r_outer=r_hi)


def min_pairwise_quotient_dist(M: TubeQuotient, net: Net) -> float:
    if net.size < 2:
        return math.inf
    cyl = M.cyl_coords(net.points)
    d = M.cyl_dist_matrix(cyl, cyl, 4.0 * net.D)
    np.fill_diagonal(d, np.inf)
    return float(d.min())
