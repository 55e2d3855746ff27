"""
Quotient-level dynamics: Dirichlet domains, folding, transport of tangent
measures under the geodesic flow, and the flow-box test functions phi_eta.

Frames follow hyperbolic.py: F = (a, b, c, d), base F.i, forward endpoint
[a : c], backward endpoint [b : d], flow = right multiplication by
diag(e^{s/2}, e^{-s/2}).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import hyperbolic as hb
from . import kernels
from .convex import ConvexBody, GeodesicLine
from .groups import DirichletWall, OrbitTable, arc_contains, dirichlet_wall
from .hyperbolic import ANGLE_TOL, Isometry, UnitTangent
from .measures import (
    AtomicMeasure,
    MeasureError,
    PattersonDensity,
    bm_density,
    bootstrap_sum_se,
    frame_busemann,
    sample_pairs,
    skinning_measure,
    ss_ball_masses,
)

log = logging.getLogger(__name__)

FOLD_MAX_STEPS = 1000
WALL_TOL = 1e-9
NEAREST_TOL = 1e-9
R0_DEFAULT = 2.0
ETA_WIDEN = 1.25


class FoldError(RuntimeError):
    def __init__(self, msg, lost=0, required_radius=None):
        super().__init__(msg)
        self.lost = lost
        self.required_radius = required_radius


# ---------------------------------------------------------------------------
# Dirichlet domain

@dataclass(frozen=True)
class DirichletDomain:
    """Intersection of the half-planes {d(z, x0) <= d(z, g x0)} over the listed g.

    cap bounds d(x0, z) for points the fold accepts; beyond it the walls of the
    table can no longer certify the representative."""

    center: complex
    elements: np.ndarray  # (m, 4)
    cap: float
    walls: List[DirichletWall] = field(repr=False, default_factory=list)

    @classmethod
    def from_table(cls, T: OrbitTable, wall_radius: float, cap: Optional[float] = None) -> "DirichletDomain":
        x0 = T.basepoint.z
        n = int(T.count_within(wall_radius))
        els = T.mats[1:n]  # skip the identity
        if len(els) == 0:
            raise FoldError(f"no group elements within wall radius {wall_radius}")
        cap = T.radius - 2.0 if cap is None else float(cap)
        walls = [dirichlet_wall(g, x0) for g in els]
        return cls(complex(x0), np.ascontiguousarray(els), cap, walls)

    def __len__(self):
        return len(self.elements)

    def orbit_points(self) -> np.ndarray:
        return hb.mobius_z(self.elements, self.center)

    def wall_margin(self, z):
        """min_g (d(z, g x0) - d(z, x0)); non-negative on the domain."""
        z = np.asarray(z, dtype=complex)
        d0 = hb.dist_z(z, self.center)
        dk = hb.dist_z(z[..., None], self.orbit_points())
        return np.min(dk, axis=-1) - d0

    def contains(self, z, tol: float = WALL_TOL):
        return self.wall_margin(z) >= -tol

    def fold_frames(self, F, max_steps: int = FOLD_MAX_STEPS):
        """Vectorised fold; returns (frames, gammas, steps, margins).

        Raises FoldError if some frame lies beyond the cap or does not settle."""
        F = np.asarray(F, dtype=float).reshape(-1, 4)
        out, gam, steps, status, margin = kernels.fold_frames(F, self.elements, self.center, self.cap, max_steps)
        bad = status != kernels.FOLD_OK
        if np.any(bad):
            far = float(np.max(hb.dist_z(self.center, hb.frame_base(F[bad]))))
            raise FoldError(
                f"{int(bad.sum())} frames could not be folded (farthest at distance {far:.3f}, cap {self.cap:.3f}); "
                f"an orbit table of radius >= {far + 2.0:.2f} is needed",
                lost=int(bad.sum()), required_radius=far + 2.0,
            )
        near = int(np.sum(margin < WALL_TOL))
        if near:
            log.info("fold: %d representatives within %.0e of a wall (tie-broken, not adjudicated)", near, WALL_TOL)
        return out, gam, steps, margin

    def fold(self, v: UnitTangent) -> Tuple[UnitTangent, Isometry]:
        out, gam, _, _ = self.fold_frames(v.F)
        return UnitTangent(tuple(out[0])), Isometry.from_array(hb.mat_renorm(gam[0]))

    # -- geodesic intervals ------------------------------------------------

    def geodesic_interval(self, xi_minus, xi_plus):
        """Hopf-time interval [t_in, t_out] of each geodesic inside the domain
        (empty intervals come back with t_out < t_in)."""
        xm = np.asarray(xi_minus, dtype=float)
        xp = np.asarray(xi_plus, dtype=float)
        lo = np.full(xm.shape, -np.inf)
        hi = np.full(xm.shape, np.inf)
        for wall in self.walls:
            a, b = _wall_cut(wall, xm, xp, self.center)
            lo = np.maximum(lo, a)
            hi = np.minimum(hi, b)
        return lo, hi


def _wall_cut(wall: DirichletWall, xm, xp, z0):
    """Allowed Hopf-time range on each geodesic for one half-plane.

    In the chart of the inward frame the wall is the unit semicircle and the
    excluded side is |z| > 1."""
    inv = hb.mat_inv(wall.inward)
    p = hb.real_from_theta(hb.mobius_theta(inv, xm))
    q = hb.real_from_theta(hb.mobius_theta(inv, xp))
    p_out = np.abs(p) > 1.0
    q_out = np.abs(q) > 1.0
    lo = np.full(xm.shape, -np.inf)
    hi = np.full(xm.shape, np.inf)
    both_out = p_out & q_out
    lo[both_out] = np.inf
    hi[both_out] = -np.inf
    cross = p_out != q_out
    if np.any(cross):
        pc, qc = p[cross], q[cross]
        with np.errstate(invalid="ignore", divide="ignore"):
            # crossing of the circle with feet p, q and the unit circle: x = (1 + pq)/(p + q)
            x = np.where(np.isinf(pc), qc, np.where(np.isinf(qc), pc, (1.0 + pc * qc) / (pc + qc)))
        z = x + 1j * np.sqrt(np.maximum(0.0, 1.0 - x * x))
        zc = hb.mobius_z(wall.inward, z)
        F = hb.frame_toward(zc, xp[cross])
        tc = hb.hopf_time(F, z0)
        # leaving through the wall (forward end outside) caps the interval above
        up = q_out[cross]
        hc, lc = hi[cross], lo[cross]
        hc[up] = tc[up]
        lc[~up] = tc[~up]
        hi[cross], lo[cross] = hc, lc
    return lo, hi


def bm_sample_domain(P: PattersonDensity, D: DirichletDomain, n: int, seed: int) -> AtomicMeasure:
    """Importance sample of m_BM restricted to the unit tangent bundle over D.

    Pairs come from sample_pairs; the Hopf time is uniform on the exact interval
    where the geodesic runs inside D, and the weight carries the interval length.
    Pairs whose geodesic misses D keep weight 0 so the estimator stays unbiased."""
    i, j, factor = sample_pairs(P, n, seed, stream=1)
    xp, xm = P.theta[i], P.theta[j]
    lo, hi = D.geodesic_interval(xm, xp)
    length = np.maximum(0.0, hi - lo)
    hit = length > 0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(424_242,))))
    u = rng.random(n)
    t = np.where(hit, lo + u * np.where(hit, length, 0.0), 0.0)
    w = factor * length * bm_density(P, xm, xp) / n
    F = hb.frame_from_hopf(xm[hit], xp[hit], t[hit], P.basepoint)
    log.info("domain sampler: %d of %d pairs cross the domain", int(hit.sum()), n)
    return AtomicMeasure(F, w[hit], "tangent", P.basepoint, i[hit], np.stack([xm, xp, t], axis=1)[hit])


# ---------------------------------------------------------------------------
# transport

def transport_measure(sigma: AtomicMeasure, t: float, D: DirichletDomain, delta: Optional[float] = None,
                      scale: bool = False) -> AtomicMeasure:
    """Flow every atom by g^t and fold it into D.

    With scale=True the weights are multiplied by e^{delta t} (the convention in
    which the total mass of sigma_{g^t Omega} grows like e^{delta t})."""
    if t < 0:
        raise MeasureError("transport needs t >= 0")
    if sigma.kind != "tangent":
        raise MeasureError("transport acts on tangent measures")
    F = hb.frame_flow(sigma.atoms, t) if t else np.asarray(sigma.atoms)
    out, _, _, _ = D.fold_frames(F)
    w = sigma.weights
    if scale:
        if delta is None:
            raise MeasureError("scaled transport needs delta")
        w = w * math.exp(delta * t)
    return AtomicMeasure(out, w, "tangent", sigma.basepoint, sigma.source)


# ---------------------------------------------------------------------------
# Omega as arcs of forward endpoints

def arc_through(ta: float, tb: float, tm: float):
    """(start, width) of the arc with endpoints ta, tb that contains tm."""
    width = float(np.mod(tb - ta, hb.TWO_PI))
    if np.mod(tm - ta, hb.TWO_PI) <= width:
        return (float(hb.wrap_angle(ta)), width)
    return (float(hb.wrap_angle(tb)), hb.TWO_PI - width)


def in_arcs(arcs: Sequence[Tuple[float, float]], theta):
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape, bool)
    for arc in arcs:
        out |= arc_contains(arc, theta)
    return out


def axis_fundamental_arcs(line: GeodesicLine, length: float, center=1j, fraction: float = 1.0):
    """Forward-endpoint arcs of the outer normals whose feet lie in the segment of
    the line of the given length centred at the projection of center.

    fraction < 1 keeps the first part of the segment only (for additivity checks)."""
    F = line._frame
    zl = complex(hb.mobius_z(hb.mat_inv(F), center))
    c = math.log(abs(zl))
    lo, hi = c - 0.5 * length, c - 0.5 * length + fraction * length
    arcs = []
    for sgn in (1.0, -1.0):
        ends = hb.mobius_theta(F, hb.theta_from_real(sgn * np.exp([lo, hi, 0.5 * (lo + hi)])))
        arcs.append(arc_through(*map(float, ends)))
    return arcs


# ---------------------------------------------------------------------------
# test functions

def _frame_log_horo(F):
    # horofunction toward [a : c] at the base of a unit-determinant frame
    F = np.asarray(F, dtype=float)
    return -np.log(F[..., 0] ** 2 + F[..., 2] ** 2)


def leaf_distance(W, v_minus, z0):
    """Hamenstadt distance, on the strong stable leaf of each w, between w and the
    leaf vector with backward endpoint v_minus.  Evaluated from angles and the
    frame of w only."""
    W = np.asarray(W, dtype=float)
    xi = hb.frame_plus(W)
    wm = hb.frame_minus(W)
    scale = np.exp(_frame_log_horo(W) - hb._log_horo(xi, z0))
    with np.errstate(divide="ignore", invalid="ignore"):
        d = scale * hb.visual_theta(z0, v_minus, wm) / (hb.visual_theta(z0, v_minus, xi) * hb.visual_theta(z0, wm, xi))
    return np.where(hb.angle_gap(v_minus, wm) <= ANGLE_TOL, 0.0, d)


@dataclass(frozen=True)
class TestFunction:
    """phi_{eta, R, Omega} for a convex body, with h cached on the skinning atoms of Omega."""

    __test__ = False  # not a pytest class

    C: ConvexBody
    arcs: tuple
    eta: float
    R: float
    P: PattersonDensity = field(repr=False)
    sigma: AtomicMeasure = field(repr=False)  # skinning measure restricted to Omega
    ball_mass: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    _order: np.ndarray = field(repr=False)
    _plus_sorted: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, C: ConvexBody, P: PattersonDensity, arcs, eta: float = 0.1, R: float = R0_DEFAULT,
              r0: float = R0_DEFAULT) -> "TestFunction":
        if eta <= 0:
            raise MeasureError("eta must be positive")
        if R < r0:
            raise MeasureError(f"R = {R} is below R0 = {r0}; h would not be finite on every atom")
        arcs = tuple(tuple(map(float, a)) for a in arcs)
        sk = skinning_measure(C, P)
        sig = sk.restrict(in_arcs(arcs, sk.plus))
        if len(sig):
            mass = ss_ball_masses(sig.atoms, R, P)
            if np.any(mass <= 0):
                raise MeasureError(f"{int(np.sum(mass <= 0))} atoms of Omega have zero ball mass at R = {R}")
        else:
            mass = np.zeros(0)
        h = 1.0 / (2.0 * eta * mass) if len(sig) else np.zeros(0)
        plus = sig.plus
        order = np.argsort(plus, kind="stable")
        return cls(C, arcs, float(eta), float(R), P, sig, mass, h, order, plus[order])

    @property
    def total(self) -> float:
        """||sigma_Omega||."""
        return self.sigma.total

    def nearest_atom(self, theta):
        """Index (into sigma) of the atom whose forward endpoint is nearest, and the gap."""
        theta = hb.wrap_angle(np.asarray(theta, dtype=float))
        ps = self._plus_sorted
        m = len(ps)
        k = np.searchsorted(ps, theta)
        lo = (k - 1) % m
        hi = k % m
        glo = hb.angle_gap(theta, ps[lo])
        ghi = hb.angle_gap(theta, ps[hi])
        pick = np.where(ghi < glo, hi, lo)
        return self._order[pick], np.minimum(glo, ghi)


def phi_eta_eval(F: TestFunction, v_frames) -> np.ndarray:
    """phi_eta at each frame: h(w) for the skinning atom w = f_C(v) of Omega when v
    lies in the flow box of w, else 0."""
    V = np.asarray(v_frames, dtype=float).reshape(-1, 4)
    out = np.zeros(len(V))
    if len(F.sigma) == 0 or len(V) == 0:
        return out
    vp = hb.frame_plus(V)
    k, gap = F.nearest_atom(vp)
    ok = (gap <= NEAREST_TOL) & in_arcs(F.arcs, vp)
    for e in F.C.ideal_boundary():
        ok &= hb.angle_gap(vp, e) > ANGLE_TOL
    if np.any((gap > ANGLE_TOL) & (gap <= NEAREST_TOL)):
        log.info("phi: %d probes matched an atom only to %.0e", int(np.sum((gap > ANGLE_TOL) & (gap <= NEAREST_TOL))), NEAREST_TOL)
    if not np.any(ok):
        return out
    idx = np.nonzero(ok)[0]
    W = F.sigma.atoms[k[idx]]
    Vi = V[idx]
    s = frame_busemann(W, Vi)  # v = g^s v' with v' on the leaf of w
    d = leaf_distance(W, hb.frame_minus(Vi), F.P.basepoint)
    hit = (np.abs(s) < F.eta) & (d < F.R)
    out[idx[hit]] = F.h[k[idx[hit]]]
    return out


def sample_near_omega(F: TestFunction, n: int, seed: int, widen: float = ETA_WIDEN):
    """Frames covering the support of phi, with importance weights for m_BM.

    The forward endpoint is drawn from mu restricted to the atoms of Omega, the
    backward one from mu off the diagonal, and the time uniformly within
    widen * eta of the skinning atom."""
    P = F.P
    mask = np.zeros(len(P), bool)
    mask[F.sigma.source] = True
    i, j, factor = sample_pairs(P, n, seed, plus_mask=mask, stream=2)
    # skinning atom of Omega carrying each forward endpoint
    pos = np.full(len(P), -1, dtype=np.int64)
    pos[F.sigma.source] = np.arange(len(F.sigma))
    W = F.sigma.atoms[pos[i]]
    eta2 = widen * F.eta
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(31_337,))))
    s = rng.uniform(-eta2, eta2, n)
    G = hb.frame_from_endpoints(P.theta[j], P.theta[i])
    # put v a horofunction step s past pi(w)
    V = hb.frame_flow(G, s - frame_busemann(W, G))
    w = factor * 2.0 * eta2 * bm_density(P, P.theta[j], P.theta[i]) / n
    return V, w


def phi_integral_check(F: TestFunction, n: int, seed: int, n_boot: int = 200):
    """(lhs, rhs, stderr): Monte-Carlo integral of phi_eta against m_BM and ||sigma_Omega||."""
    rhs = F.total
    if len(F.sigma) == 0:
        return 0.0, 0.0, 0.0
    V, w = sample_near_omega(F, n, seed)
    vals = w * phi_eta_eval(F, V)
    lhs = math.fsum(vals.tolist())
    return lhs, rhs, bootstrap_sum_se(vals, n_boot, seed)
