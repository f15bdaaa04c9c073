"""The testbed manifold: the quotient of hyperbolic 3-space by the cyclic
group generated by a loxodromic isometry.

The holonomy translates along the vertical geodesic by ``length`` and
rotates by ``twist``.  The short core geodesic of the quotient has length
``length``; the thin part, when nonempty, is a single tube around it.
Injectivity radii, tube radii and quotient distances all reduce to closed
forms plus one-dimensional root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import kernel
from .kernel import Cone, Geodesic, PointUHS


@dataclass(frozen=True)
class TubeQuotient:
    """The quotient manifold, determined by the complex translation
    length ``length + i * twist`` of its holonomy."""

    length: float
    twist: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError("translation length must be positive")
        if not -math.pi < self.twist <= math.pi:
            raise ValueError("twist must lie in (-pi, pi]")

    @property
    def axis(self) -> Geodesic:
        return Geodesic.vertical_axis()

    def holonomy(self, n: int = 1) -> kernel.Isometry:
        return kernel.loxodromic(n * self.length, n * self.twist)

    @lru_cache(maxsize=None)
    def deck_matrix(self, n: int) -> np.ndarray:
        """Lorentz matrix of the n-th power of the holonomy: a boost by
        n * length in the (X0, X3) plane and a rotation by n * twist in
        the (X1, X2) plane."""
        t, a = n * self.length, n * self.twist
        m = np.eye(4)
        m[0, 0] = m[3, 3] = math.cosh(t)
        m[0, 3] = m[3, 0] = math.sinh(t)
        m[1, 1] = m[2, 2] = math.cos(a)
        m[1, 2] = -math.sin(a)
        m[2, 1] = math.sin(a)
        return m

    # -- Fermi (tube) coordinates -----------------------------------------

    def cyl_coords(self, p) -> np.ndarray:
        """(t, r, phi) tube coordinates: axial position, distance to the
        axis, angle.  The deck action is (t, r, phi) -> (t + length, r,
        phi + twist)."""
        X = p if not isinstance(p, PointUHS) else kernel.uhs_to_hyperboloid(p)
        X = np.asarray(X, dtype=float)
        if X.shape[-1] == 3:
            X = kernel.uhs_to_hyperboloid(X)
        ct = X[..., 0]
        st = X[..., 3]
        rho = np.sqrt(np.maximum(ct * ct - st * st, 1e-300))
        t = np.arcsinh(st / rho)
        r = np.arcsinh(np.hypot(X[..., 1], X[..., 2]))
        phi = np.arctan2(X[..., 2], X[..., 1])
        return np.stack([t, r, phi], axis=-1)

    def from_cyl(self, trp) -> np.ndarray:
        """Upper half-space points from tube coordinates (t, r, phi)."""
        trp = np.asarray(trp, dtype=float)
        t, r, phi = trp[..., 0], trp[..., 1], trp[..., 2]
        scale = np.exp(t)
        th = np.tanh(r)
        out = np.empty(trp.shape[:-1] + (3,))
        out[..., 0] = scale * th * np.cos(phi)
        out[..., 1] = scale * th * np.sin(phi)
        out[..., 2] = scale / np.cosh(r)
        return out

    def canonical_period(self, t):
        """Deck power n with t - n * length in [0, length)."""
        return np.floor(np.asarray(t, dtype=float) / self.length).astype(int)

    # -- injectivity radius ------------------------------------------------

    def displacement_at_radius(self, r, n: int = 1):
        """Distance from a point at tube radius r to its image under the
        n-th power of the holonomy."""
        r = np.asarray(r, dtype=float)
        ch = np.cosh(r) ** 2
        sh = np.sinh(r) ** 2
        c = math.cosh(n * self.length) * ch - math.cos(n * self.twist) * sh
        return np.arccosh(np.maximum(c, 1.0))

    def inj_radius_at_radius(self, r) -> float:
        """Injectivity radius at tube radius r (any angle/axial position)."""
        r = float(r)
        best = self.displacement_at_radius(r, 1)
        n = 2
        while (n - 1) * self.length < best:
            best = min(best, float(self.displacement_at_radius(r, n)))
            n += 1
        return 0.5 * best

    def inj_radius(self, p) -> float:
        """Injectivity radius at (the projection of) an upper half-space
        point: half the minimal displacement over nonzero powers.  The
        search truncates once n * length exceeds the running minimum,
        since the n-th power displaces every point by at least n * length."""
        r = float(self.cyl_coords(p)[..., 1])
        return self.inj_radius_at_radius(r)

    def quotient_dist(self, p, q) -> float:
        """Distance in the quotient between the projections of two lifts."""
        P = kernel.uhs_to_hyperboloid(p) if isinstance(p, PointUHS) else np.asarray(p, dtype=float)
        Q = kernel.uhs_to_hyperboloid(q) if isinstance(q, PointUHS) else np.asarray(q, dtype=float)
        if P.shape[-1] == 3:
            P = kernel.uhs_to_hyperboloid(P)
        if Q.shape[-1] == 3:
            Q = kernel.uhs_to_hyperboloid(Q)
        best = float(kernel.dist_hyperboloid(P, Q))
        d0 = best
        n = 1
        while n * self.length - d0 < best:
            for m in (n, -n):
                c = float(kernel.dist_hyperboloid(P, Q @ self.deck_matrix(m).T))
                best = min(best, c)
            n += 1
        return best

    def cyl_dist_matrix(self, cylP, cylQ, cap: float) -> np.ndarray:
        """Quotient distances from tube coordinates, exact wherever the
        distance is at most cap (larger values may be overestimated).

        Uses cosh d(P, g^n Q) = cosh(dt - n length) cosh rP cosh rQ
        - cos(dphi - n twist) sinh rP sinh rQ, restricting n to the
        window where |dt - n length| <= cap since d >= |dt - n length|.
        """
        cylP = np.asarray(cylP, dtype=float)
        cylQ = np.asarray(cylQ, dtype=float)
        dt = cylP[:, 0][:, None] - cylQ[:, 0][None, :]
        dphi = cylP[:, 2][:, None] - cylQ[:, 2][None, :]
        cc = np.cosh(cylP[:, 1])[:, None] * np.cosh(cylQ[:, 1])[None, :]
        ss = np.sinh(cylP[:, 1])[:, None] * np.sinh(cylQ[:, 1])[None, :]
        n_lo = int(math.floor((float(dt.min()) - cap) / self.length))
        n_hi = int(math.ceil((float(dt.max()) + cap) / self.length))
        best = np.full(dt.shape, np.inf)
        for n in range(n_lo, n_hi + 1):
            c = np.cosh(dt - n * self.length) * cc \
                - np.cos(dphi - n * self.twist) * ss
            best = np.minimum(best, c)
        return np.arccosh(np.maximum(best, 1.0))

    def quotient_dist_matrix(self, P, Q, n_max: int | None = None) -> np.ndarray:
        """Vectorized quotient distances between two hyperboloid point
        arrays (len(P) x len(Q))."""
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        d = kernel.dist_hyperboloid(P[:, None, :], Q[None, :, :])
        if n_max is None:
            n_max = int(math.ceil(2.0 * float(np.max(d, initial=0.0)) / self.length)) + 1
        best = d
        for n in range(1, n_max + 1):
            for m in (n, -n):
                dm = kernel.dist_hyperboloid(P[:, None, :],
                                             (Q @ self.deck_matrix(m).T)[None, :, :])
                best = np.minimum(best, dm)
        return best


@dataclass(frozen=True)
class ThickThinData:
    """Geometry of the thick/thin decomposition and of the region kept
    after pushing the thick part outward by d and drilling the rest."""

    mu: float
    d: float
    tube_radius_mu: float
    tube_radius_X: float
    R_empirical: float

    def __post_init__(self):
        if self.tube_radius_X > self.tube_radius_mu + 1e-12:
            raise ValueError("drilled tube cannot be larger than the thin tube")

    @property
    def D(self) -> float:
        return min(self.R_empirical, self.d)

    @property
    def drilled(self) -> bool:
        return self.tube_radius_X > 0.0

    def cone(self, M: TubeQuotient) -> Cone | None:
        if not self.drilled:
            return None
        return Cone(M.axis, self.tube_radius_X)


def thick_tube_radius(M: TubeQuotient, mu: float, tol: float = 1e-10) -> float:
    """Tube radius at which the injectivity radius reaches mu; zero when
    the thin part is empty (mu <= length / 2)."""
    if mu <= M.length / 2.0:
        return 0.0
    f = lambda r: M.inj_radius_at_radius(r) - mu
    hi = 1.0
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 64.0:
            raise RuntimeError("thin tube radius search diverged")
    return float(brentq(f, 0.0, hi, xtol=tol))


def x_tube_radius(M: TubeQuotient, mu: float, d: float) -> float:
    """Radius of the drilled tube: thin-tube radius minus d, clamped at
    zero (in which case nothing is drilled)."""
    return max(thick_tube_radius(M, mu) - d, 0.0)


def compute_thick_thin(M: TubeQuotient, mu: float, d: float) -> ThickThinData:
    """Assemble the tube radii and the empirical injectivity lower bound
    over the kept region.

    The injectivity radius is monotone in the tube radius, so its infimum
    over the region is attained on the drilled-tube boundary; without
    drilling it is attained on the core."""
    if mu <= 0.0 or d <= 0.0:
        raise ValueError("mu and d must be positive")
    r_mu = thick_tube_radius(M, mu)
    r_x = max(r_mu - d, 0.0)
    if r_x > 0.0:
        r_emp = M.inj_radius_at_radius(r_x)
    else:
        r_emp = M.length / 2.0
    return ThickThinData(mu=mu, d=d, tube_radius_mu=r_mu,
                         tube_radius_X=r_x, R_empirical=r_emp)


def compute_R_empirical(M: TubeQuotient, mu: float, d: float) -> float:
    return compute_thick_thin(M, mu, d).R_empirical
