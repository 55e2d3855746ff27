"""
Convex bodies in the hyperbolic plane and the maps attached to them.

Each body knows how to project boundary angles and interior points onto itself
(vectorised), test membership, report its ideal boundary, and transform under an
isometry.  Projections are closed forms obtained by moving the body into a normal
position: lines onto the imaginary axis, horoballs onto {Im z >= h}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import hyperbolic as hb
from .hyperbolic import (
    ANGLE_TOL,
    BoundaryPoint,
    GeometryError,
    Isometry,
    Point,
    UnitTangent,
)

MEMBER_TOL = 1e-9


class ConvexBody:
    """Base class; subclasses implement the vectorised hooks."""

    def ideal_boundary(self) -> Tuple[float, ...]:
        return ()

    def project_theta(self, theta):
        raise NotImplementedError

    def project_z(self, z):
        raise NotImplementedError

    def dist_to(self, z):
        z = np.asarray(z, dtype=complex)
        return hb.dist_z(z, self.project_z(z))

    def contains_z(self, z, tol: float = MEMBER_TOL):
        return self.dist_to(z) <= tol

    def transform(self, g: Isometry) -> "ConvexBody":
        raise NotImplementedError

    def normal_frames(self, theta):
        """Outer normal frames at the feet of the given angles."""
        return hb.frame_toward(self.project_theta(theta), theta)

    def foot_busemann(self, theta, z0):
        """beta_theta(P_C(theta), z0), the cocycle entering skinning weights.

        Read off the outer normal frame at the foot: for a unit-determinant frame
        toward [a : c] the horofunction at its base is -log(a^2 + c^2)."""
        F = normal_lift_frames(self, theta)
        return -np.log(F[..., 0] ** 2 + F[..., 2] ** 2) - hb._log_horo(theta, z0)

    def on_ideal_boundary(self, theta, tol: float = ANGLE_TOL):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape, dtype=bool)
        for e in self.ideal_boundary():
            out |= hb.angle_gap(theta, e) <= tol
        return out

    def neighbourhood(self, eps: float) -> "ConvexBody":
        if eps == 0:
            return self
        return Neighbourhood(self, eps)


@dataclass(frozen=True)
class GeodesicLine(ConvexBody):
    minus: float
    plus: float

    def __post_init__(self):
        if hb.angle_gap(self.minus, self.plus) <= ANGLE_TOL:
            raise GeometryError("geodesic line needs distinct endpoints")

    @property
    def _frame(self):
        return hb.frame_from_endpoints(self.minus, self.plus)

    def ideal_boundary(self):
        return (self.minus, self.plus)

    def project_theta(self, theta):
        # in the chart of the frame the foot is i|x|, and |x| is a ratio of
        # half-angle sines (kept in this form for atoms close to an endpoint)
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.abs(np.sin(0.5 * (theta - self.minus)) / np.sin(0.5 * (theta - self.plus)))
        return hb.mobius_z(self._frame, 1j * h)

    def project_z(self, z):
        F = self._frame
        zl = hb.mobius_z(hb.mat_inv(F), z)
        return hb.mobius_z(F, 1j * np.abs(zl))

    def _chart_real(self, theta):
        # chart of the frame: theta sits at the real point x, its foot at i|x|
        theta = np.asarray(theta, dtype=float)
        sgn = math.copysign(1.0, math.sin(0.5 * (self.plus - self.minus)))
        with np.errstate(divide="ignore", invalid="ignore"):
            return sgn * np.sin(0.5 * (theta - self.minus)) / np.sin(0.5 * (self.plus - theta))

    def normal_frames(self, theta):
        x = self._chart_real(theta)
        # horizontal at i|x|, pointing toward the sign of x
        local = hb.mat_mul(hb.translation_to(1j * np.abs(x)), hb.rotation(np.where(x > 0, -0.5, 0.5) * math.pi))
        return hb.mat_mul(self._frame, local)

    def foot_busemann(self, theta, z0):
        F = self._frame
        x = self._chart_real(theta)
        h = np.abs(x)
        z = hb.mobius_z(hb.mat_inv(F), z0)
        at_foot = np.log(2.0 * h) - np.log1p(h * h)
        at_z0 = np.log(np.abs(z - x) ** 2 / (1.0 + x * x)) - np.log(z.imag)
        return at_foot - at_z0

    def dist_to(self, z):
        zl = hb.mobius_z(hb.mat_inv(self._frame), z)
        return np.arcsinh(np.abs(zl.real) / zl.imag)

    def transform(self, g):
        m = g.matrix
        return GeodesicLine(float(hb.mobius_theta(m, self.minus)), float(hb.mobius_theta(m, self.plus)))


@dataclass(frozen=True)
class GeodesicSegment(ConvexBody):
    p: complex
    q: complex

    def __post_init__(self):
        object.__setattr__(self, "p", complex(self.p))
        object.__setattr__(self, "q", complex(self.q))

    @property
    def length(self) -> float:
        return float(hb.dist_z(self.p, self.q))

    @property
    def _frame(self):
        return hb.frame_toward_point(self.p, self.q)

    def _clamp(self, h):
        return np.clip(h, 1.0, math.exp(self.length))

    def project_theta(self, theta):
        F = self._frame
        if self.length == 0.0:
            return np.full(np.shape(theta), self.p, dtype=complex)
        u, v = hb.theta_uv(theta)
        Fi = hb.mat_inv(F)
        u2 = Fi[0] * u + Fi[1] * v
        v2 = Fi[2] * u + Fi[3] * v
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.abs(u2 / v2)
        return hb.mobius_z(F, 1j * self._clamp(h))

    def project_z(self, z):
        if self.length == 0.0:
            return np.full(np.shape(z), self.p, dtype=complex)
        F = self._frame
        zl = hb.mobius_z(hb.mat_inv(F), z)
        return hb.mobius_z(F, 1j * self._clamp(np.abs(zl)))

    def transform(self, g):
        m = g.matrix
        return GeodesicSegment(complex(hb.mobius_z(m, self.p)), complex(hb.mobius_z(m, self.q)))


@dataclass(frozen=True)
class Horoball(ConvexBody):
    """Horoball centred at a boundary angle whose boundary horocycle passes through a point."""

    center: float
    through: complex

    def __post_init__(self):
        object.__setattr__(self, "center", float(hb.wrap_angle(self.center)))
        object.__setattr__(self, "through", complex(self.through))

    @property
    def _norm(self):
        h = hb.rotation_to_infinity(self.center)
        return h, float(hb.mobius_z(h, self.through).imag)

    def ideal_boundary(self):
        return (self.center,)

    def project_theta(self, theta):
        h, height = self._norm
        # the normalising rotation shifts disc angles by -center
        x = hb.real_from_theta(np.asarray(theta, dtype=float) - self.center)
        return hb.mobius_z(hb.mat_inv(h), x + 1j * height)

    def project_z(self, z):
        h, height = self._norm
        zl = hb.mobius_z(h, z)
        zl = np.where(zl.imag >= height, zl, zl.real + 1j * height)
        return hb.mobius_z(hb.mat_inv(h), zl)

    def normal_frames(self, theta):
        h, height = self._norm
        x = hb.real_from_theta(np.asarray(theta, dtype=float) - self.center)
        # straight down at x + i height in the chart
        local = hb.mat_mul(hb.translation_to(x + 1j * height), hb.rotation(math.pi))
        return hb.mat_mul(hb.mat_inv(h), local)

    def foot_busemann(self, theta, z0):
        # chart where the centre is infinity: theta - center sits at x = u/v and
        # its foot at x + i height, so |v foot - u| = |v| height exactly
        h, height = self._norm
        t = np.asarray(theta, dtype=float) - self.center
        u, v = hb.theta_uv(t)
        z = hb.mobius_z(h, z0)
        at_foot = 2.0 * np.log(np.abs(v)) + math.log(height)
        return at_foot - hb._log_horo(t, z)

    def dist_to(self, z):
        h, height = self._norm
        zl = hb.mobius_z(h, z)
        return np.maximum(0.0, np.log(height / zl.imag))

    def transform(self, g):
        m = g.matrix
        return Horoball(float(hb.mobius_theta(m, self.center)), complex(hb.mobius_z(m, self.through)))


@dataclass(frozen=True)
class Ball(ConvexBody):
    """Closed metric ball; radius 0 is the singleton."""

    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if self.radius < 0:
            raise GeometryError("ball radius must be non-negative")

    def project_theta(self, theta):
        F = hb.frame_toward(self.center, theta)
        return hb.frame_base(hb.frame_flow(F, self.radius))

    def project_z(self, z):
        z = np.asarray(z, dtype=complex)
        d = hb.dist_z(self.center, z)
        with np.errstate(invalid="ignore", divide="ignore"):
            F = hb.frame_toward_point(self.center, np.where(d > 0, z, self.center + 1j))
        out = hb.frame_base(hb.frame_flow(F, self.radius))
        return np.where(d <= self.radius, z, out)

    def dist_to(self, z):
        return np.maximum(0.0, hb.dist_z(self.center, z) - self.radius)

    def foot_busemann(self, theta, z0):
        return hb.busemann_z(theta, self.center, z0) - self.radius

    def transform(self, g):
        return Ball(complex(hb.mobius_z(g.matrix, self.center)), self.radius)


@dataclass(frozen=True)
class Neighbourhood(ConvexBody):
    """Closed eps-neighbourhood of another convex body."""

    core: ConvexBody
    eps: float

    def ideal_boundary(self):
        return self.core.ideal_boundary()

    def normal_frames(self, theta):
        return hb.frame_flow(self.core.normal_frames(theta), self.eps)

    def project_theta(self, theta):
        return hb.frame_base(self.normal_frames(theta))

    def project_z(self, z):
        z = np.asarray(z, dtype=complex)
        p = self.core.project_z(z)
        d = hb.dist_z(p, z)
        safe = np.where(d > 0, z, p + 1j)
        out = hb.frame_base(hb.frame_flow(hb.frame_toward_point(p, safe), self.eps))
        return np.where(d <= self.eps, z, out)

    def dist_to(self, z):
        return np.maximum(0.0, self.core.dist_to(z) - self.eps)

    def transform(self, g):
        return Neighbourhood(self.core.transform(g), self.eps)


def segment_neighbourhood(p: Point, q: Point, radius: float) -> ConvexBody:
    return GeodesicSegment(p.z, q.z).neighbourhood(radius)


# ---------------------------------------------------------------------------
# public scalar API

def closest_point(C: ConvexBody, xi) -> Point:
    if isinstance(xi, BoundaryPoint):
        if C.on_ideal_boundary(xi.theta):
            raise GeometryError("boundary point lies on the ideal boundary of the body")
        return Point.from_complex(complex(C.project_theta(xi.theta)))
    if isinstance(xi, Point):
        return Point.from_complex(complex(C.project_z(xi.z)))
    raise TypeError(type(xi).__name__)


def membership(C: ConvexBody, x: Point, tol: float = MEMBER_TOL) -> bool:
    return bool(C.contains_z(x.z, tol))


def normal_lift_frames(C: ConvexBody, theta):
    """Outward normal frames at the closest points of the given angles."""
    return C.normal_frames(theta)


def normal_lift(C: ConvexBody, xi: BoundaryPoint) -> UnitTangent:
    if C.on_ideal_boundary(xi.theta):
        raise GeometryError("boundary point lies on the ideal boundary of the body")
    return UnitTangent(tuple(normal_lift_frames(C, xi.theta)))


def stable_fibration(C: ConvexBody, v: UnitTangent) -> UnitTangent:
    """Outward normal vector of C with the same forward endpoint as v."""
    xi = v.plus
    if C.on_ideal_boundary(xi.theta):
        raise GeometryError("vector is not in the domain of the fibration")
    return normal_lift(C, xi)


def thickening_hits(w_frames, v_frames, eta, R, z0=1j):
    """Vectorised membership of v in the dynamical thickening of w.

    Returns (hit, s) where s is the flow time with flow(v, -s) on the strong
    stable leaf of w.  Requires equal forward endpoints (checked)."""
    W = np.asarray(w_frames, dtype=float)
    V = np.asarray(v_frames, dtype=float)
    xi = hb.frame_plus(W)
    same = hb.angle_gap(xi, hb.frame_plus(V)) <= ANGLE_TOL
    s = hb.busemann_z(xi, hb.frame_base(W), hb.frame_base(V))
    vm = hb.frame_minus(V)
    wm = hb.frame_minus(W)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = hb.hamenstadt_theta(z0, hb.frame_base(W), xi, vm, wm)
    d = np.where(hb.angle_gap(vm, wm) <= ANGLE_TOL, 0.0, d)
    hit = same & (np.abs(s) < eta) & (d < R)
    return hit, s


def in_thickening(w: UnitTangent, eta: float, R: float, v: UnitTangent):
    """Membership of v in the flow-box neighbourhood of w; returns (bool, witness).

    The witness is (s, v') with v' = flow(v, -s) on the strong stable leaf of w."""
    hit, s = thickening_hits(w.F, v.F, eta, R)
    if not bool(hit):
        return False, None
    s = float(s)
    return True, (s, hb.flow(v, -s))
