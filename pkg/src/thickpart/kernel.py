"""Numerical primitives for hyperbolic 3-space.

Three coordinate models are used side by side:

* the upper half-space (x, y, z) with z > 0, in which the tube holonomy
  acts by a diagonal Moebius transformation;
* the Klein projective ball, in which geodesics and totally geodesic
  planes are Euclidean-flat, so half-space intersection and convexity
  reduce to linear algebra;
* the Minkowski hyperboloid, in which distances and incidence reduce to
  Lorentzian dot products and therefore vectorize well.

Conventions: the upper half-space basepoint (0, 0, 1) corresponds to the
Klein origin, and the vertical geodesic 0 <-> infinity corresponds to the
Klein z-axis.  Metric predicates accept an ``eps`` tolerance; the default
is 1e-9.

All operations are pure functions on immutable values and are safe to
call concurrently.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

EPS_METRIC = 1e-9

# Minkowski signature (-, +, +, +)
MINKOWSKI_J = np.diag([-1.0, 1.0, 1.0, 1.0])

IDEAL_INFINITY = complex(float("inf"), 0.0)


def is_ideal_infinity(zeta: complex) -> bool:
    return cmath.isinf(zeta)


def mdot(x, y):
    """Minkowski inner product, broadcasting over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return -x[..., 0] * y[..., 0] + np.sum(x[..., 1:] * y[..., 1:], axis=-1)


# ---------------------------------------------------------------------------
# points and model conversions


@dataclass(frozen=True)
class PointUHS:
    """A point of the upper half-space model; z must be positive."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (self.z > 0.0 and math.isfinite(self.x) and math.isfinite(self.y)
                and math.isfinite(self.z)):
            raise ValueError(f"invalid upper half-space point {(self.x, self.y, self.z)}")

    def array(self):
        return np.array([self.x, self.y, self.z])

    @property
    def zeta(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class PointKlein:
    """A point of the Klein ball model; the Euclidean norm must be < 1."""

    u: tuple

    def __post_init__(self):
        if not np.linalg.norm(self.u) < 1.0:
            raise ValueError(f"Klein coordinates {self.u} are not inside the unit ball")

    def array(self):
        return np.asarray(self.u, dtype=float)


def uhs_to_hyperboloid(p) -> np.ndarray:
    """Lift upper half-space points to the unit hyperboloid.

    Accepts a PointUHS or an (..., 3) array; returns an (..., 4) array of
    vectors X with <X, X> = -1 and X_0 > 0.
    """
    if isinstance(p, PointUHS):
        p = p.array()
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    r2 = x * x + y * y + z * z
    out = np.empty(p.shape[:-1] + (4,))
    out[..., 0] = (r2 + 1.0) / (2.0 * z)
    out[..., 1] = x / z
    out[..., 2] = y / z
    out[..., 3] = (r2 - 1.0) / (2.0 * z)
    return out


def hyperboloid_to_uhs(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    z = 1.0 / (X[..., 0] - X[..., 3])
    out = np.empty(X.shape[:-1] + (3,))
    out[..., 0] = X[..., 1] * z
    out[..., 1] = X[..., 2] * z
    out[..., 2] = z
    return out


def hyperboloid_to_klein(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[..., 1:] / X[..., 0:1]


def klein_to_hyperboloid(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    s = np.sqrt(1.0 - np.sum(k * k, axis=-1))
    out = np.empty(k.shape[:-1] + (4,))
    out[..., 0] = 1.0 / s
    out[..., 1:] = k / s[..., None]
    return out


def to_klein(p: PointUHS) -> PointKlein:
    k = hyperboloid_to_klein(uhs_to_hyperboloid(p))
    return PointKlein(tuple(k))


def from_klein(p: PointKlein) -> PointUHS:
    u = hyperboloid_to_uhs(klein_to_hyperboloid(p.array()))
    return PointUHS(u[0], u[1], u[2])


def uhs_to_klein_array(p) -> np.ndarray:
    return hyperboloid_to_klein(uhs_to_hyperboloid(p))


def klein_to_uhs_array(k) -> np.ndarray:
    return hyperboloid_to_uhs(klein_to_hyperboloid(k))


# ---------------------------------------------------------------------------
# distances


def dist(p, q) -> float:
    """Hyperbolic distance between upper half-space points (broadcasts)."""
    if isinstance(p, PointUHS):
        p = p.array()
    if isinstance(q, PointUHS):
        q = q.array()
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d2 = np.sum((p - q) ** 2, axis=-1)
    c = 1.0 + d2 / (2.0 * p[..., 2] * q[..., 2])
    out = np.arccosh(np.maximum(c, 1.0))
    return float(out) if out.ndim == 0 else out


def dist_hyperboloid(X, Y):
    c = -mdot(X, Y)
    out = np.arccosh(np.maximum(c, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def dist_klein(k1, k2) -> float:
    """Distance computed purely from Klein coordinates."""
    return float(dist_hyperboloid(klein_to_hyperboloid(k1), klein_to_hyperboloid(k2)))


def ball_volume(r: float) -> float:
    """Volume of a hyperbolic ball of radius r: pi * (sinh(2r) - 2r)."""
    if r < 0.0:
        raise ValueError("ball radius must be nonnegative")
    return math.pi * (math.sinh(2.0 * r) - 2.0 * r)


# ---------------------------------------------------------------------------
# isometries


@dataclass(frozen=True)
class Isometry:
    """An orientation preserving isometry, as a 2x2 complex matrix of
    determinant one acting on the upper half-space by the Poincare
    extension of its Moebius action."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > 1e-12:
            raise ValueError(f"matrix determinant {det} is not 1")

    @staticmethod
    def identity() -> "Isometry":
        return Isometry(1.0, 0.0, 0.0, 1.0)

    @staticmethod
    def from_matrix(m) -> "Isometry":
        m = np.asarray(m, dtype=complex)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        s = cmath.sqrt(det)
        return Isometry(m[0, 0] / s, m[0, 1] / s, m[1, 0] / s, m[1, 1] / s)

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def compose(self, other: "Isometry") -> "Isometry":
        return Isometry.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "Isometry":
        return Isometry(self.d, -self.b, -self.c, self.a)

    def apply(self, p):
        """Apply to a PointUHS or an (..., 3) array of such points."""
        as_point = isinstance(p, PointUHS)
        if as_point:
            p = p.array()
        p = np.asarray(p, dtype=float)
        zeta = p[..., 0] + 1j * p[..., 1]
        z = p[..., 2]
        num = (self.a * zeta + self.b) * np.conj(self.c * zeta + self.d) \
            + self.a * np.conj(self.c) * z * z
        den = np.abs(self.c * zeta + self.d) ** 2 + abs(self.c) ** 2 * z * z
        out = np.empty_like(p)
        out[..., 0] = np.real(num) / den
        out[..., 1] = np.imag(num) / den
        out[..., 2] = z / den
        if as_point:
            return PointUHS(float(out[0]), float(out[1]), float(out[2]))
        return out

    def apply_ideal(self, zeta: complex) -> complex:
        if is_ideal_infinity(zeta):
            if self.c == 0:
                return IDEAL_INFINITY
            return self.a / self.c
        den = self.c * zeta + self.d
        if den == 0:
            return IDEAL_INFINITY
        return (self.a * zeta + self.b) / den

    def minkowski_matrix(self) -> np.ndarray:
        """The induced 4x4 Lorentz matrix on the hyperboloid model."""
        base = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0],
                         [0.0, 1.0, 1.0], [0.0, 0.0, 2.0]])
        P = uhs_to_hyperboloid(base)
        Q = uhs_to_hyperboloid(self.apply(base))
        # M P^T = Q^T, rows of P/Q are lifted points
        return np.linalg.solve(P, Q).T


def loxodromic(length: float, twist: float) -> Isometry:
    """Translation by `length` and rotation by `twist` along the vertical
    geodesic 0 <-> infinity."""
    lam = cmath.exp((length + 1j * twist) / 2.0)
    return Isometry(lam, 0.0, 0.0, 1.0 / lam)


# ---------------------------------------------------------------------------
# geodesics, planes, cones, horoballs


def _ideal_lift(zeta: complex) -> np.ndarray:
    """Lightlike lift of an ideal point (complex number or infinity)."""
    if is_ideal_infinity(zeta):
        return np.array([1.0, 0.0, 0.0, 1.0])
    a = abs(zeta) ** 2
    return np.array([(a + 1.0) / 2.0, zeta.real, zeta.imag, (a - 1.0) / 2.0])


@dataclass(frozen=True)
class Geodesic:
    """A complete geodesic, given by its two distinct ideal endpoints."""

    e1: complex
    e2: complex

    def __post_init__(self):
        if self.e1 == self.e2:
            raise ValueError("geodesic endpoints must be distinct")

    @staticmethod
    def vertical_axis() -> "Geodesic":
        return Geodesic(0.0 + 0.0j, IDEAL_INFINITY)

    def frame(self):
        """Orthonormal Minkowski frame (P0, T, E1, E2) adapted to the
        geodesic: P0 a point on it, T its unit tangent, E1, E2 spanning
        the orthogonal complement.

        The vertical axis gets the exact standard frame, so that Fermi
        angle coordinates line up with rotation about the z axis.
        """
        if self == Geodesic.vertical_axis():
            return (np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, 0.0, 1.0]),
                    np.array([0.0, 1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0, 0.0]))
        u1 = _ideal_lift(self.e1)
        u2 = _ideal_lift(self.e2)
        s = mdot(u1, u2)  # negative for distinct ideal points
        root = math.sqrt(-2.0 * s)
        p0 = (u1 + u2) / root
        t = (u1 - u2) / root
        # complement of span(u1, u2) under the Minkowski form
        a = np.vstack([u1 @ MINKOWSKI_J, u2 @ MINKOWSKI_J])
        _, _, vh = np.linalg.svd(a)
        v = vh[2:].T  # 4x2 basis of the null space
        gram = v.T @ MINKOWSKI_J @ v
        chol = np.linalg.cholesky(gram)
        e = v @ np.linalg.inv(chol).T
        return p0, t, e[:, 0], e[:, 1]


def dist_to_geodesic(p, geo: Geodesic) -> float:
    """Distance from a point to a complete geodesic."""
    if isinstance(p, PointUHS):
        X = uhs_to_hyperboloid(p)
    else:
        X = np.asarray(p, dtype=float)
        if X.shape[-1] == 3:
            X = uhs_to_hyperboloid(X)
    _, _, e1, e2 = geo.frame()
    s = np.hypot(mdot(X, e1), mdot(X, e2))
    out = np.arcsinh(s)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GeodesicPlane:
    """An oriented totally geodesic plane.

    Internally the plane is the zero set of a spacelike Minkowski
    covector w with <w, w> = 1; the selected half-space is <X, w> <= 0.
    In Klein coordinates this reads n . k <= c with n = w[1:], c = w[0].
    The upper half-space description (hemisphere or vertical plane) is
    derived on demand.
    """

    w: tuple

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        norm = mdot(w, w)
        if not norm > 0.0:
            raise ValueError("plane covector must be spacelike")

    @staticmethod
    def from_covector(w) -> "GeodesicPlane":
        w = np.asarray(w, dtype=float)
        w = w / math.sqrt(mdot(w, w))
        return GeodesicPlane(tuple(w))

    @property
    def klein_normal(self) -> np.ndarray:
        return np.asarray(self.w)[1:]

    @property
    def klein_offset(self) -> float:
        return float(self.w[0])

    def signed_side(self, p):
        """<X, w>: negative inside the selected half-space, zero on the
        plane.  Accepts UHS points/arrays or hyperboloid vectors."""
        if isinstance(p, PointUHS):
            X = uhs_to_hyperboloid(p)
        else:
            X = np.asarray(p, dtype=float)
            if X.shape[-1] == 3:
                X = uhs_to_hyperboloid(X)
        return mdot(X, np.asarray(self.w))

    def contains(self, p, eps: float = EPS_METRIC) -> bool:
        return abs(float(self.signed_side(p))) <= eps

    def reversed(self) -> "GeodesicPlane":
        return GeodesicPlane(tuple(-np.asarray(self.w)))

    def uhs_description(self):
        """('hemisphere', center(2,), radius) or ('vertical', normal(2,), offset)."""
        w = np.asarray(self.w)
        c, n = w[0], w[1:]
        if abs(n[2] - c) > 1e-13 * max(1.0, abs(c)):
            denom = n[2] - c
            center = np.array([-n[0] / denom, -n[1] / denom])
            rad2 = center @ center + (n[2] + c) / denom
            if rad2 <= 0.0:
                raise ValueError("degenerate hemisphere")
            return "hemisphere", center, math.sqrt(rad2)
        norm = np.hypot(n[0], n[1])
        if norm == 0.0:
            raise ValueError("degenerate vertical plane")
        return "vertical", np.array([n[0], n[1]]) / norm, (n[2] + c) / (2.0 * norm)

    def basis(self):
        """Orthonormal Minkowski basis (B0 timelike, B1, B2 spacelike) of
        the 3-space w-perp, used to sample points on the plane."""
        w = np.asarray(self.w, dtype=float)
        a = (w @ MINKOWSKI_J)[None, :]
        _, _, vh = np.linalg.svd(a)
        v = vh[1:].T  # 4x3
        gram = v.T @ MINKOWSKI_J @ v
        evals, evecs = np.linalg.eigh(gram)
        # exactly one negative direction (timelike)
        order = np.argsort(evals)
        basis = []
        for idx in order:
            vec = v @ evecs[:, idx]
            nrm = mdot(vec, vec)
            basis.append(vec / math.sqrt(abs(nrm)))
        b0 = basis[0] if basis[0][0] > 0 else -basis[0]
        return b0, basis[1], basis[2]

    def sample_points(self, n: int, rng, spread: float = 1.5) -> np.ndarray:
        """n random hyperboloid points on the plane, within hyperbolic
        distance ~spread of its closest point to the basepoint."""
        b0, b1, b2 = self.basis()
        u = rng.uniform(0.0, spread, size=n)
        v = rng.uniform(0.0, 2.0 * math.pi, size=n)
        return (np.cosh(u)[:, None] * b0[None, :]
                + np.sinh(u)[:, None] * (np.cos(v)[:, None] * b1[None, :]
                                         + np.sin(v)[:, None] * b2[None, :]))


def bisector(p, q) -> GeodesicPlane:
    """The plane of points equidistant from p and q, oriented so that the
    selected half-space is the one closer to p."""
    if isinstance(p, PointUHS):
        P = uhs_to_hyperboloid(p)
    else:
        P = uhs_to_hyperboloid(np.asarray(p, dtype=float))
    if isinstance(q, PointUHS):
        Q = uhs_to_hyperboloid(q)
    else:
        Q = uhs_to_hyperboloid(np.asarray(q, dtype=float))
    w = Q - P
    if math.sqrt(abs(mdot(w, w))) < 1e-14:
        raise ValueError("bisector of equal points is undefined")
    return GeodesicPlane.from_covector(w)


def plane_through(points) -> GeodesicPlane:
    """The totally geodesic plane through three points (hyperboloid lifts
    or PointUHS).  Raises if the points are collinear on a geodesic."""
    lifts = []
    for p in points:
        if isinstance(p, PointUHS):
            lifts.append(uhs_to_hyperboloid(p))
        else:
            a = np.asarray(p, dtype=float)
            lifts.append(uhs_to_hyperboloid(a) if a.shape[-1] == 3 else a)
    m = np.array([x @ MINKOWSKI_J for x in lifts])
    _, sv, vh = np.linalg.svd(m)
    if sv[2] < 1e-10 * sv[0]:
        raise ValueError("points do not span a unique plane")
    w = vh[3]
    if mdot(w, w) <= 0.0:
        raise ValueError("points do not lie on a common geodesic plane")
    return GeodesicPlane.from_covector(w)


@dataclass(frozen=True)
class Cone:
    """The closed r-neighborhood of a complete geodesic (a tube)."""

    axis: Geodesic
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError("cone radius must be positive")

    def dist_to_axis(self, p):
        return dist_to_geodesic(p, self.axis)

    def contains(self, p, eps: float = EPS_METRIC):
        return self.dist_to_axis(p) <= self.radius + eps

    def in_exterior(self, p, eps: float = EPS_METRIC):
        return self.dist_to_axis(p) >= self.radius - eps

    def klein_quadric(self):
        """Coefficients (A, b, c) with q(k) = k A k + 2 b.k + c, where
        q <= 0 exactly on the cone.  q is a convex quadratic."""
        _, _, e1, e2 = self.axis.frame()
        s2 = math.sinh(self.radius) ** 2
        A = np.outer(e1[1:], e1[1:]) + np.outer(e2[1:], e2[1:]) + s2 * np.eye(3)
        b = -e1[0] * e1[1:] - e2[0] * e2[1:]
        c = e1[0] ** 2 + e2[0] ** 2 - s2
        return A, b, c

    def cylinder_from_klein(self, k):
        """Fermi coordinates (t, phi) of Klein points on (or near) the
        boundary, measured in the axis frame."""
        X = klein_to_hyperboloid(np.asarray(k, dtype=float))
        return self.cylinder_from_hyperboloid(X)

    def cylinder_from_hyperboloid(self, X):
        p0, t_vec, e1, e2 = self.axis.frame()
        X = np.asarray(X, dtype=float)
        ct = -mdot(X, p0)
        st = mdot(X, t_vec)
        a1 = mdot(X, e1)
        a2 = mdot(X, e2)
        t = np.arcsinh(st / np.sqrt(np.maximum(ct * ct - st * st, 1e-300)))
        phi = np.arctan2(a2, a1)
        return np.stack([t, phi], axis=-1)

    def boundary_from_cylinder(self, tphi):
        """Hyperboloid points of the boundary at Fermi coordinates (t, phi)."""
        p0, t_vec, e1, e2 = self.axis.frame()
        tphi = np.asarray(tphi, dtype=float)
        t, phi = tphi[..., 0], tphi[..., 1]
        cr, sr = math.cosh(self.radius), math.sinh(self.radius)
        return (cr * (np.cosh(t)[..., None] * p0 + np.sinh(t)[..., None] * t_vec)
                + sr * (np.cos(phi)[..., None] * e1 + np.sin(phi)[..., None] * e2))


@dataclass(frozen=True)
class Horoball:
    """A horoball: Euclidean diameter at a finite ideal basepoint, or a
    height cutoff when based at infinity."""

    basepoint: complex
    height: float

    def __post_init__(self):
        if not self.height > 0.0:
            raise ValueError("horoball height must be positive")

    def contains(self, p: PointUHS, eps: float = EPS_METRIC) -> bool:
        if is_ideal_infinity(self.basepoint):
            return p.z >= self.height - eps
        dx = p.x - self.basepoint.real
        dy = p.y - self.basepoint.imag
        h = self.height / 2.0
        return dx * dx + dy * dy + (p.z - h) ** 2 <= h * h + eps


# ---------------------------------------------------------------------------
# geodesic segments and cone clipping


def geodesic_arc(a, b):
    """Unit-speed parametrization of the segment [a, b].

    Returns (sample, length) where sample(s) maps arclength parameters in
    [0, length] (scalar or array) to hyperboloid points.
    """
    A = uhs_to_hyperboloid(a) if isinstance(a, PointUHS) else np.asarray(a, dtype=float)
    B = uhs_to_hyperboloid(b) if isinstance(b, PointUHS) else np.asarray(b, dtype=float)
    if A.shape[-1] == 3:
        A = uhs_to_hyperboloid(A)
    if B.shape[-1] == 3:
        B = uhs_to_hyperboloid(B)
    d = dist_hyperboloid(A, B)
    if d < 1e-15:
        return (lambda s: np.broadcast_to(A, np.shape(s) + (4,)).copy()), 0.0
    sd = math.sinh(d)

    def sample(s):
        s = np.asarray(s, dtype=float)
        return (np.sinh(d - s)[..., None] * A + np.sinh(s)[..., None] * B) / sd

    return sample, d


def segment_cone_clip(a, b, cone: Cone, eps: float = EPS_METRIC):
    """The parameter interval of [a, b] lying inside the cone.

    Returns (t0, t1) with 0 <= t0 <= t1 <= 1 (fractions of the segment),
    or None when the segment misses the cone.  Convexity of the cone
    guarantees a single interval; the distance to the axis is convex
    along the segment, which the search exploits.
    """
    sample, length = geodesic_arc(a, b)
    if length == 0.0:
        inside = cone.dist_to_axis(sample(0.0)) <= cone.radius + eps
        return (0.0, 1.0) if inside else None

    def f(s):
        return float(cone.dist_to_axis(sample(np.asarray(s)))) - cone.radius

    f0, f1 = f(0.0), f(length)
    # golden-section search for the minimum of the convex function f
    lo, hi = 0.0, length
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c1 = hi - invphi * (hi - lo)
    c2 = lo + invphi * (hi - lo)
    fc1, fc2 = f(c1), f(c2)
    for _ in range(200):
        if hi - lo < 1e-13 * max(1.0, length):
            break
        if fc1 <= fc2:
            hi, c2, fc2 = c2, c1, fc1
            c1 = hi - invphi * (hi - lo)
            fc1 = f(c1)
        else:
            lo, c1, fc1 = c1, c2, fc2
            c2 = lo + invphi * (hi - lo)
            fc2 = f(c2)
    smin = 0.5 * (lo + hi)
    fmin = min(fc1, fc2, f0, f1)
    if f0 <= 0.0 and f1 <= 0.0:
        return 0.0, 1.0
    if fmin > eps:
        return None

    def bisect(slo, shi):
        # f(slo) <= 0 <= f(shi) or vice versa
        flo = f(slo)
        for _ in range(100):
            mid = 0.5 * (slo + shi)
            fm = f(mid)
            if abs(shi - slo) < 1e-14 * max(1.0, length):
                break
            if (fm <= 0.0) == (flo <= 0.0):
                slo, flo = mid, fm
            else:
                shi = mid
        return 0.5 * (slo + shi)

    if f0 <= 0.0:
        s0 = 0.0
    else:
        s0 = bisect(smin, 0.0)
    if f1 <= 0.0:
        s1 = length
    else:
        s1 = bisect(smin, length)
    if s0 > s1:
        s0, s1 = s1, s0
    return s0 / length, s1 / length
