"""
Exact-formula geometry of the hyperbolic plane.

Points live in the upper half-plane and are carried around as complex numbers
z = x + iy.  Boundary points are stored as the angle theta of their image on the
unit circle under the Cayley map z -> (z - i)/(z + i), so infinity is theta = 0
and there is no special case for it.  Internally a boundary angle is turned into
homogeneous coordinates

    (u, v) = (-cos(theta/2), sin(theta/2)),    real coordinate x = u / v,

on which a matrix acts linearly.  Unit tangent vectors are stored as PSL(2,R)
frames g = (a, b, c, d): the vector is the image under g of the upward unit
vector at i.  With this convention

    base point        g . i
    forward endpoint  [a : c]
    backward endpoint [b : d]
    geodesic flow     g -> g diag(e^{s/2}, e^{-s/2})
    flip              g -> g [[0, -1], [1, 0]]

Two layers are provided: vectorised array functions (complex arrays for points,
float arrays for angles, (..., 4) arrays for frames) used by the measure and
dynamics code, and small immutable value types wrapping them for the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-12
Y_MIN = 1e-300
GH_NODES = 64


class GeometryError(ValueError):
    """Raised for degenerate or out-of-domain geometric input."""


# ---------------------------------------------------------------------------
# angle / boundary helpers

def wrap_angle(theta):
    """Reduce angles to [0, 2pi)."""
    t = np.mod(theta, TWO_PI)
    if np.ndim(t) == 0:
        t = float(t)
        return 0.0 if t >= TWO_PI else t
    t = np.asarray(t, dtype=float)
    t[t >= TWO_PI] = 0.0
    return t


def angle_gap(t1, t2):
    """Unsigned circular distance between two angles, in [0, pi]."""
    d = np.abs(np.mod(np.asarray(t1) - np.asarray(t2) + math.pi, TWO_PI) - math.pi)
    return d


def theta_uv(theta):
    h = 0.5 * np.asarray(theta, dtype=float)
    return -np.cos(h), np.sin(h)


def uv_theta(u, v):
    return wrap_angle(2.0 * np.arctan2(v, -np.asarray(u)))


def theta_from_real(x):
    """Boundary angle of a real number; +-inf maps to 0."""
    x = np.asarray(x, dtype=float)
    out = wrap_angle(2.0 * np.arctan2(1.0, -x))
    return out


def real_from_theta(theta):
    """Half-plane coordinate of a boundary angle (inf at theta = 0)."""
    u, v = theta_uv(theta)
    with np.errstate(divide="ignore"):
        return np.where(v == 0.0, np.inf, u / np.where(v == 0.0, 1.0, v))


def radial_angle(z):
    """Disc angle of the ray from i through z (z != i)."""
    w = (np.asarray(z) - 1j) / (np.asarray(z) + 1j)
    return wrap_angle(np.angle(w))


# ---------------------------------------------------------------------------
# matrices

def mat_mul(m, n):
    """Product of (..., 4) matrices."""
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    a = m[..., 0] * n[..., 0] + m[..., 1] * n[..., 2]
    b = m[..., 0] * n[..., 1] + m[..., 1] * n[..., 3]
    c = m[..., 2] * n[..., 0] + m[..., 3] * n[..., 2]
    d = m[..., 2] * n[..., 1] + m[..., 3] * n[..., 3]
    return np.stack([a, b, c, d], axis=-1)


def mat_inv(m):
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 3], -m[..., 1], -m[..., 2], m[..., 0]], axis=-1)


def mat_renorm(m):
    m = np.asarray(m, dtype=float)
    det = m[..., 0] * m[..., 3] - m[..., 1] * m[..., 2]
    return m / np.sqrt(det)[..., None]


def mat_canonical(m):
    """Sign-normalise so the first nonzero entry is positive."""
    m = np.array(m, dtype=float)
    flat = m.reshape(-1, 4)
    nz = flat != 0.0
    first = np.argmax(nz, axis=1)
    sgn = np.sign(flat[np.arange(len(flat)), first])
    sgn[sgn == 0] = 1.0
    flat = flat * sgn[:, None]
    return flat.reshape(m.shape)


def mobius_z(m, z):
    m = np.asarray(m, dtype=float)
    z = np.asarray(z, dtype=complex)
    return (m[..., 0] * z + m[..., 1]) / (m[..., 2] * z + m[..., 3])


def mobius_theta(m, theta):
    m = np.asarray(m, dtype=float)
    u, v = theta_uv(theta)
    u2 = m[..., 0] * u + m[..., 1] * v
    v2 = m[..., 2] * u + m[..., 3] * v
    return uv_theta(u2, v2)


def rotation_to_infinity(theta):
    """Rotation about i (an SO(2) matrix) sending theta to infinity."""
    u, v = theta_uv(theta)
    return np.stack([u, v, -v, u], axis=-1)


def translation_to(z):
    """Matrix sending i to z with positive real derivative at i."""
    z = np.asarray(z, dtype=complex)
    sy = np.sqrt(z.imag)
    return np.stack([sy, z.real / sy, np.zeros_like(sy), 1.0 / sy], axis=-1)


def rotation(phi):
    """Rotation about i by angle phi."""
    h = 0.5 * np.asarray(phi, dtype=float)
    c, s = np.cos(h), np.sin(h)
    return np.stack([c, s, -s, c], axis=-1)


# ---------------------------------------------------------------------------
# distances and cocycles

def dist_z(z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return 2.0 * np.arcsinh(np.abs(z - w) / (2.0 * np.sqrt(z.imag * w.imag)))


def _log_horo(theta, z):
    u, v = theta_uv(theta)
    z = np.asarray(z, dtype=complex)
    return 2.0 * np.log(np.abs(v * z - u)) - np.log(z.imag)


def busemann_z(theta, z, w):
    """Busemann cocycle beta_theta(z, w) (positive when z is farther from theta)."""
    return _log_horo(theta, z) - _log_horo(theta, w)


def visual_theta(z0, t1, t2):
    """Visual distance of two boundary angles seen from z0."""
    # |u1 v2 - u2 v1| = |sin((t1 - t2)/2)|, evaluated on the angle difference
    num = np.abs(np.sin(0.5 * (np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float))))
    return num * visual_factor(z0, t1) * visual_factor(z0, t2)


def visual_factor(z0, theta):
    """q(theta) with d_z0(a, b) = |sin((a - b)/2)| q(a) q(b)."""
    z0 = np.asarray(z0, dtype=complex)
    u, v = theta_uv(theta)
    return np.sqrt(z0.imag) / np.abs(v * z0 - u)


# ---------------------------------------------------------------------------
# frames (unit tangent vectors)

def frame_base(F):
    return mobius_z(F, 1j)


def frame_dir(F):
    F = np.asarray(F, dtype=float)
    return wrap_angle(0.5 * math.pi - 2.0 * np.arctan2(F[..., 2], F[..., 3]))


def frame_plus(F):
    F = np.asarray(F, dtype=float)
    return uv_theta(F[..., 0], F[..., 2])


def frame_minus(F):
    F = np.asarray(F, dtype=float)
    return uv_theta(F[..., 1], F[..., 3])


def frame_flow(F, s):
    F = np.asarray(F, dtype=float)
    s = np.asarray(s, dtype=float)
    e = np.exp(0.5 * s)
    return np.stack([F[..., 0] * e, F[..., 1] / e, F[..., 2] * e, F[..., 3] / e], axis=-1)


def frame_flip(F):
    F = np.asarray(F, dtype=float)
    return np.stack([F[..., 1], -F[..., 0], F[..., 3], -F[..., 2]], axis=-1)


def frame_from_base_dir(z, phi):
    return mat_mul(translation_to(z), rotation(np.asarray(phi) - 0.5 * math.pi))


def frame_toward(z, theta):
    """Frame based at z whose forward endpoint is theta."""
    T = translation_to(z)
    local = mobius_theta(mat_inv(T), theta)
    return mat_mul(T, rotation(local))


def frame_toward_point(z, w):
    """Frame based at z pointing along the geodesic through w."""
    T = translation_to(z)
    local = radial_angle(mobius_z(mat_inv(T), w))
    return mat_mul(T, rotation(local))


def frame_from_endpoints(t_minus, t_plus):
    """Some frame on the oriented geodesic from t_minus to t_plus."""
    up, vp = theta_uv(t_plus)
    um, vm = theta_uv(t_minus)
    det = up * vm - um * vp
    sgn = np.where(det < 0, -1.0, 1.0)
    scale = 1.0 / np.sqrt(np.abs(det))
    return np.stack([up * scale, sgn * um * scale, vp * scale, sgn * vm * scale], axis=-1)


def hopf_time(F, z0):
    F = np.asarray(F, dtype=float)
    z0 = np.asarray(z0, dtype=complex)
    return np.log(np.abs(F[..., 2] * z0 - F[..., 0]) / np.abs(F[..., 3] * z0 - F[..., 1]))


def frame_from_hopf(t_minus, t_plus, t, z0):
    F = frame_from_endpoints(t_minus, t_plus)
    return frame_flow(F, np.asarray(t) - hopf_time(F, z0))


def hamenstadt_theta(z0, base_z, xi, m1, m2):
    """Hamenstadt distance on the strong stable leaf through base_z toward xi,
    between the vectors with backward endpoints m1 and m2."""
    scale = np.exp(_log_horo(xi, base_z) - _log_horo(xi, z0))
    num = visual_theta(z0, m1, m2)
    den = visual_theta(z0, m1, xi) * visual_theta(z0, m2, xi)
    return scale * num / den


@lru_cache(maxsize=8)
def gauss_hermite(n: int = GH_NODES):
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / math.sqrt(math.pi)


def t1_dist_frames(F, G, nodes: int = GH_NODES):
    """Gaussian-weighted average of d(v(t), v'(t)) by Gauss-Hermite quadrature."""
    x, w = gauss_hermite(nodes)
    F = np.asarray(F, dtype=float)[..., None, :]
    G = np.asarray(G, dtype=float)[..., None, :]
    d = dist_z(frame_base(frame_flow(F, x)), frame_base(frame_flow(G, x)))
    return np.sum(d * w, axis=-1)


# ---------------------------------------------------------------------------
# value types

def _check_y(y: float):
    if not (y > Y_MIN):
        raise GeometryError(f"point not in upper half-plane (y={y!r})")


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        _check_y(self.y)

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> "Point":
        return cls(float(z.real), float(z.imag))


I = Point(0.0, 1.0)


@dataclass(frozen=True)
class BoundaryPoint:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @classmethod
    def from_real(cls, x: float) -> "BoundaryPoint":
        return cls(float(theta_from_real(x)))

    @classmethod
    def infinity(cls) -> "BoundaryPoint":
        return cls(0.0)

    def to_real(self) -> float:
        return float(real_from_theta(self.theta))

    def same(self, other: "BoundaryPoint", tol: float = ANGLE_TOL) -> bool:
        return bool(angle_gap(self.theta, other.theta) <= tol)


@dataclass(frozen=True)
class Isometry:
    """Element of PSL(2,R), stored canonically (first nonzero entry positive)."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        m = np.array([self.a, self.b, self.c, self.d], dtype=float)
        det = m[0] * m[3] - m[1] * m[2]
        if not det > 0:
            raise GeometryError(f"matrix has non-positive determinant {det}")
        if abs(det - 1.0) > 1e-14:
            m = m / math.sqrt(det)
        m = mat_canonical(m)
        for name, val in zip("abcd", m):
            object.__setattr__(self, name, float(val))

    @classmethod
    def from_array(cls, m) -> "Isometry":
        m = np.asarray(m, dtype=float).ravel()
        return cls(*m)

    @classmethod
    def identity(cls) -> "Isometry":
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return Isometry.from_array(mat_renorm(mat_mul(self.matrix, other.matrix)))

    def inverse(self) -> "Isometry":
        return Isometry(self.d, -self.b, -self.c, self.a)

    def trace(self) -> float:
        return self.a + self.d

    def kind(self) -> str:
        t = abs(self.trace())
        if t > 2.0 + 1e-10:
            return "hyperbolic"
        if abs(t - 2.0) <= 1e-10:
            return "parabolic"
        return "elliptic"

    def translation_length(self) -> float:
        t = abs(self.trace())
        return 2.0 * math.acosh(t / 2.0) if t > 2.0 else 0.0


@dataclass(frozen=True)
class UnitTangent:
    """Unit tangent vector, stored as the frame matrix (a, b, c, d)."""

    frame: Tuple[float, float, float, float]

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=float)
        object.__setattr__(self, "frame", tuple(float(v) for v in mat_renorm(f)))

    @property
    def F(self) -> np.ndarray:
        return np.array(self.frame)

    @classmethod
    def from_base_dir(cls, base: Point, dir: float) -> "UnitTangent":
        return cls(tuple(frame_from_base_dir(base.z, dir)))

    @classmethod
    def toward(cls, base: Point, xi: BoundaryPoint) -> "UnitTangent":
        return cls(tuple(frame_toward(base.z, xi.theta)))

    @property
    def base(self) -> Point:
        return Point.from_complex(complex(frame_base(self.F)))

    @property
    def dir(self) -> float:
        return float(frame_dir(self.F))

    @property
    def plus(self) -> BoundaryPoint:
        return BoundaryPoint(float(frame_plus(self.F)))

    @property
    def minus(self) -> BoundaryPoint:
        return BoundaryPoint(float(frame_minus(self.F)))

    @property
    def endpoints(self) -> Tuple[BoundaryPoint, BoundaryPoint]:
        return self.minus, self.plus


Boundaryish = Union[Point, BoundaryPoint]


# ---------------------------------------------------------------------------
# public scalar API

def dist(x: Point, y: Point) -> float:
    return float(dist_z(x.z, y.z))


def apply(g: Isometry, x):
    if isinstance(x, Point):
        return Point.from_complex(complex(mobius_z(g.matrix, x.z)))
    if isinstance(x, BoundaryPoint):
        return BoundaryPoint(float(mobius_theta(g.matrix, x.theta)))
    if isinstance(x, UnitTangent):
        return UnitTangent(tuple(mat_mul(g.matrix, x.F)))
    raise TypeError(f"cannot apply an isometry to {type(x).__name__}")


def busemann(xi: BoundaryPoint, x: Point, y: Point) -> float:
    return float(busemann_z(xi.theta, x.z, y.z))


def visual_dist(x0: Point, xi: BoundaryPoint, eta: BoundaryPoint) -> float:
    if xi.same(eta):
        return 0.0
    return float(visual_theta(x0.z, xi.theta, eta.theta))


def flow(v: UnitTangent, s: float) -> UnitTangent:
    return UnitTangent(tuple(frame_flow(v.F, s)))


def flip(v: UnitTangent) -> UnitTangent:
    return UnitTangent(tuple(frame_flip(v.F)))


def hopf_coords(v: UnitTangent, x0: Point = I):
    return v.minus, v.plus, float(hopf_time(v.F, x0.z))


def from_hopf(xi_minus: BoundaryPoint, xi_plus: BoundaryPoint, t: float, x0: Point = I) -> UnitTangent:
    if xi_minus.same(xi_plus):
        raise GeometryError("Hopf coordinates need distinct endpoints")
    return UnitTangent(tuple(frame_from_hopf(xi_minus.theta, xi_plus.theta, t, x0.z)))


def t1_dist(v: UnitTangent, w: UnitTangent, nodes: int = GH_NODES) -> float:
    return float(t1_dist_frames(v.F, w.F, nodes))


def on_strong_stable(w: UnitTangent, v: UnitTangent, tol: float = 1e-8) -> bool:
    if angle_gap(frame_plus(w.F), frame_plus(v.F)) > tol:
        return False
    s = busemann_z(frame_plus(w.F), frame_base(w.F), frame_base(v.F))
    return bool(abs(s) <= tol)


def hamenstadt_dist(w: UnitTangent, v: UnitTangent, v2: UnitTangent, x0: Point = I) -> float:
    """Hamenstadt distance between v and v2 on the strong stable leaf of w."""
    for u in (v, v2):
        if not on_strong_stable(w, u):
            raise GeometryError("vector is not on the strong stable leaf of w")
    if angle_gap(frame_minus(v.F), frame_minus(v2.F)) <= ANGLE_TOL:
        return 0.0
    xi = frame_plus(w.F)
    return float(hamenstadt_theta(x0.z, frame_base(w.F), xi, frame_minus(v.F), frame_minus(v2.F)))
