"""
Atomic approximations of boundary and tangent measures.

The Patterson density is approximated by the normalised Poincare sum
    mu_{x0} ~ sum_g e^{-s d(x0, g x0)} D_{xi_g} / sum_g e^{-s d(x0, g x0)}
over orbit points beyond a horizon, with xi_g the endpoint of the ray from x0
through g x0.  Everything else (Bowen-Margulis, skinning and strong-stable
conditional measures) is built from those atoms by closed-form reweighting, so
the exact identities between them hold atom by atom up to rounding.

Boundary atoms are disc angles, tangent atoms are frames (see hyperbolic.py).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import hyperbolic as hb
from . import kernels
from .convex import ConvexBody, Horoball
from .groups import OrbitTable, arc_contains
from .hyperbolic import ANGLE_TOL, GeometryError, Point, UnitTangent

log = logging.getLogger(__name__)

TV_BINS = 256
T1_BINS = (32, 32, 16)
DROP_WARN = 0.01
SAMPLE_CHUNK = 1 << 16


class MeasureError(ValueError):
    pass


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of weighted Dirac masses.

    atoms are angles (kind 'boundary', shape (n,)) or frames (kind 'tangent',
    shape (n, 4)).  source[k] is the index of the boundary atom that produced
    atom k, when there is one; coords holds optional per-atom extras such as
    Hopf coordinates."""

    atoms: np.ndarray
    weights: np.ndarray
    kind: str = "boundary"
    basepoint: complex = 1j
    source: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None
    total: float = field(init=False)

    def __post_init__(self):
        if self.kind not in ("boundary", "tangent"):
            raise MeasureError(f"unknown measure kind {self.kind!r}")
        atoms = _frozen(self.atoms)
        w = _frozen(self.weights)
        shape = (len(w),) if self.kind == "boundary" else (len(w), 4)
        if atoms.shape != shape:
            raise MeasureError(f"atoms of shape {atoms.shape}, expected {shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise MeasureError("weights must be finite and non-negative")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "basepoint", complex(self.basepoint))
        if self.source is not None:
            object.__setattr__(self, "source", _frozen(self.source, np.int64))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords))
        object.__setattr__(self, "total", math.fsum(w.tolist()))

    def __len__(self):
        return len(self.weights)

    def normalized(self) -> np.ndarray:
        if self.total <= 0:
            raise MeasureError("zero measure has no normalised view")
        return self.weights / self.total

    def restrict(self, mask) -> "AtomicMeasure":
        mask = np.asarray(mask)
        pick = lambda a: None if a is None else a[mask]
        return AtomicMeasure(self.atoms[mask], self.weights[mask], self.kind, self.basepoint,
                             pick(self.source), pick(self.coords))

    def scaled(self, factor) -> "AtomicMeasure":
        return AtomicMeasure(self.atoms, self.weights * factor, self.kind, self.basepoint, self.source, self.coords)

    def with_atoms(self, atoms, basepoint=None) -> "AtomicMeasure":
        bp = self.basepoint if basepoint is None else basepoint
        return AtomicMeasure(atoms, self.weights, self.kind, bp, self.source, self.coords)

    @property
    def plus(self) -> np.ndarray:
        """Forward endpoints (the atoms themselves for a boundary measure)."""
        return self.atoms if self.kind == "boundary" else hb.frame_plus(self.atoms)


# ---------------------------------------------------------------------------
# comparison metrics

def binned_tv(theta1, w1, theta2, w2, bins: int = TV_BINS) -> float:
    """Total variation between two normalised boundary measures on angular bins."""
    edges = np.linspace(0.0, hb.TWO_PI, bins + 1)
    h1, _ = np.histogram(hb.wrap_angle(np.asarray(theta1)), edges, weights=w1)
    h2, _ = np.histogram(hb.wrap_angle(np.asarray(theta2)), edges, weights=w2)
    return 0.5 * float(np.abs(h1 / h1.sum() - h2 / h2.sum()).sum())


def tangent_tv(m1: AtomicMeasure, m2: AtomicMeasure, t_range, bins=T1_BINS, z0=None) -> float:
    """Product-binned total variation over Hopf coordinates (minus, plus, time)."""
    z0 = m1.basepoint if z0 is None else z0

    def hist(m):
        F = m.atoms
        pts = np.stack([hb.frame_minus(F), hb.frame_plus(F), hb.hopf_time(F, z0)], axis=1)
        rng = [(0.0, hb.TWO_PI), (0.0, hb.TWO_PI), tuple(t_range)]
        h, _ = np.histogramdd(pts, bins=bins, range=rng, weights=m.weights)
        return h / h.sum()

    return 0.5 * float(np.abs(hist(m1) - hist(m2)).sum())


# ---------------------------------------------------------------------------
# Patterson density

@dataclass(frozen=True)
class PattersonDensity:
    base: AtomicMeasure
    delta: float
    s_used: float
    orbit_radius: float
    horizon: float = 0.0
    disp: Optional[np.ndarray] = None

    @property
    def theta(self) -> np.ndarray:
        return self.base.atoms

    @property
    def weights(self) -> np.ndarray:
        return self.base.weights

    @property
    def basepoint(self) -> complex:
        return self.base.basepoint

    def __len__(self):
        return len(self.base)

    def rebase(self, y) -> "PattersonDensity":
        """The same density seen from another point (weights at y)."""
        return PattersonDensity(patterson_at(self, y), self.delta, self.s_used, self.orbit_radius, self.horizon, self.disp)

    def transform(self, g) -> "PattersonDensity":
        """Push-forward by an isometry; the result is based at g x0."""
        m = g.matrix
        b = self.base
        moved = AtomicMeasure(hb.mobius_theta(m, b.atoms), b.weights, "boundary", complex(hb.mobius_z(m, b.basepoint)), b.source)
        return PattersonDensity(moved, self.delta, self.s_used, self.orbit_radius, self.horizon, self.disp)


def default_offset(stderr: float) -> float:
    return max(0.1, 2.0 * float(stderr))


def patterson_approx(T: OrbitTable, delta: float, s: Optional[float] = None, horizon: Optional[float] = None,
                     stderr: float = 0.0) -> PattersonDensity:
    """Normalised Poincare-sum measure at the basepoint, projected to the boundary."""
    s = delta + default_offset(stderr) if s is None else float(s)
    horizon = T.radius - 4.0 if horizon is None else float(horizon)
    if s < delta:
        raise MeasureError(f"s = {s} is below the critical exponent {delta}")
    if horizon >= T.radius:
        raise MeasureError(f"horizon {horizon} must be below the orbit radius {T.radius}")
    keep = T.disp >= horizon
    if not np.any(keep):
        raise MeasureError("no orbit points beyond the horizon")
    x0 = T.basepoint.z
    pts = hb.mobius_z(T.mats[keep], x0)
    theta = hb.frame_plus(hb.frame_toward_point(x0, pts))
    d = T.disp[keep]
    # shift before exponentiating; normalisation removes the constant
    w = np.exp(-s * (d - d.min()))
    w = w / math.fsum(w.tolist())
    theta, w, first = merge_close_atoms(theta, w)
    src = np.nonzero(keep)[0][first]
    base = AtomicMeasure(theta, w, "boundary", x0, src)
    return PattersonDensity(base, float(delta), s, float(T.radius), horizon, d[first])


def merge_close_atoms(theta, w, tol: float = ANGLE_TOL):
    """Merge atoms whose angles agree to tol (orbit points on a common ray).

    Returns sorted angles, summed weights and the index of the first member."""
    order = np.argsort(theta, kind="stable")
    t = theta[order]
    new = np.ones(len(t), bool)
    new[1:] = np.diff(t) > tol
    group = np.cumsum(new) - 1
    # the circle wraps: the last group joins the first if they are close
    if group[-1] > 0 and (t[0] + hb.TWO_PI - t[-1]) <= tol:
        group[group == group[-1]] = 0
    n = int(group.max()) + 1
    ww = np.bincount(group, weights=w[order], minlength=n)
    starts = np.nonzero(new)[0][:n]
    return t[starts], ww, order[starts]


def patterson_at(P: PattersonDensity, x) -> AtomicMeasure:
    """mu_x from mu_{x0}: same atoms, weights times exp(-delta beta_xi(x, x0))."""
    z = x.z if isinstance(x, Point) else complex(x)
    b = P.base
    factor = np.exp(-P.delta * hb.busemann_z(b.atoms, z, b.basepoint))
    return AtomicMeasure(b.atoms, b.weights * factor, "boundary", z, b.source)


def equivariance_residual(P: PattersonDensity, g, bins: int = TV_BINS) -> float:
    """Binned TV between g_* mu_{x0} and mu_{g x0} rebuilt from mu_{x0} by the cocycle."""
    pushed = P.transform(g)
    rebuilt = patterson_at(P, pushed.basepoint)
    return binned_tv(pushed.theta, pushed.weights, rebuilt.atoms, rebuilt.weights, bins)


# ---------------------------------------------------------------------------
# Bowen-Margulis measure

def bm_density(P: PattersonDensity, xi_minus, xi_plus, t=None):
    """Density of m_BM against mu x mu x dt (t does not enter)."""
    d = hb.visual_theta(P.basepoint, xi_minus, xi_plus)
    if np.any(d <= 0):
        raise GeometryError("Bowen-Margulis density needs distinct endpoints")
    return d ** (-2.0 * P.delta)


def _chunk_rng(seed: int, k: int) -> np.random.Generator:
    # counter-based streams: chunk k always gets the same generator
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))


def sample_pairs(P: PattersonDensity, n: int, seed: int, plus_mask=None, stream: int = 0):
    """Index pairs (i, j), j != i, with i ~ mu restricted to plus_mask and j ~ mu.

    Returns (i, j, factor) where factor * 1/d^(2 delta) is the importance weight
    of a pair for the off-diagonal product measure, before dividing by n."""
    w = P.weights
    M = P.base.total
    if len(w) < 2:
        raise MeasureError("need at least two atoms to sample pairs")
    p = w / M
    allowed = np.ones(len(p), bool) if plus_mask is None else np.asarray(plus_mask, bool)
    p_plus = np.where(allowed, p, 0.0)
    mass_plus = float(p_plus.sum())
    if mass_plus <= 0:
        raise MeasureError("no atom mass in the sampling window")
    cdf_plus = np.cumsum(p_plus) / mass_plus
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    ii, jj = [], []
    for k, start in enumerate(range(0, n, SAMPLE_CHUNK)):
        m = min(SAMPLE_CHUNK, n - start)
        rng = _chunk_rng(seed, stream * 1_000_003 + k)
        i = np.searchsorted(cdf_plus, rng.random(m), side="right")
        i = np.minimum(i, len(p) - 1)
        j = np.minimum(np.searchsorted(cdf, rng.random(m), side="right"), len(p) - 1)
        bad = j == i
        while np.any(bad):
            j[bad] = np.minimum(np.searchsorted(cdf, rng.random(int(bad.sum())), side="right"), len(p) - 1)
            bad = j == i
        ii.append(i)
        jj.append(j)
    i = np.concatenate(ii) if ii else np.zeros(0, np.int64)
    j = np.concatenate(jj) if jj else np.zeros(0, np.int64)
    factor = M * M * mass_plus * (1.0 - p[i])
    return i, j, factor


def bm_sample(P: PattersonDensity, n: int, t_window: Tuple[float, float], seed: int, plus_mask=None) -> AtomicMeasure:
    """Importance sample of m_BM over Hopf times in t_window.

    (xi_+, xi_-) ~ mu x mu off the diagonal, t uniform; weights make the sum an
    unbiased estimate of m_BM restricted to the window.  coords = (minus, plus, t)."""
    if n < 1:
        raise MeasureError("need at least one sample")
    t0, t1 = map(float, t_window)
    i, j, factor = sample_pairs(P, n, seed, plus_mask)
    rng = _chunk_rng(seed, 999_999_937)
    t = t0 + (t1 - t0) * rng.random(n)
    xp, xm = P.theta[i], P.theta[j]
    w = factor * (t1 - t0) * bm_density(P, xm, xp) / n
    F = hb.frame_from_hopf(xm, xp, t, P.basepoint)
    return AtomicMeasure(F, w, "tangent", P.basepoint, i, np.stack([xm, xp, t], axis=1))


# ---------------------------------------------------------------------------
# skinning measures

def _skinning_weights(C: ConvexBody, theta, weights, z0, delta):
    frames = C.normal_frames(theta)
    return frames, weights * np.exp(-delta * C.foot_busemann(theta, z0))


def skinning_measure(C: ConvexBody, P: PattersonDensity) -> AtomicMeasure:
    """Outer normal lifts of the Patterson atoms, reweighted by exp(-delta beta(P_C xi, x0))."""
    theta = P.theta
    on_c = C.on_ideal_boundary(theta)
    if np.all(on_c):
        raise MeasureError("every atom lies on the ideal boundary of the body")
    if np.any(on_c):
        dropped = float(P.weights[on_c].sum()) / P.base.total
        log.info("skinning: dropped %d atoms on the ideal boundary (mass fraction %.3g)", int(on_c.sum()), dropped)
        if dropped > DROP_WARN:
            warnings.warn(f"skinning dropped {dropped:.2%} of the Patterson mass on the ideal boundary")
    keep = np.nonzero(~on_c)[0]
    frames, w = _skinning_weights(C, theta[keep], P.weights[keep], P.basepoint, P.delta)
    return AtomicMeasure(frames, w, "tangent", P.basepoint, keep)


def flow_scaling_check(C: ConvexBody, P: PattersonDensity, s: float) -> float:
    """Max relative weight error of (g^s)_* sigma_C = e^{-delta s} sigma_{N_s C}, atom by atom."""
    if s < 0:
        raise MeasureError("flow time must be non-negative")
    sc = skinning_measure(C, P)
    sn = skinning_measure(C.neighbourhood(s), P)
    if not np.array_equal(sc.source, sn.source):
        raise MeasureError("the two skinning measures do not share their atoms")
    rel = np.abs(sc.weights - np.exp(-P.delta * s) * sn.weights) / sc.weights
    return float(rel.max())


def flow_scaling_geometry(C: ConvexBody, P: PattersonDensity, s: float) -> float:
    """Largest mismatch between g^s of the normal lifts of C and the normal lifts of
    N_s C: endpoint gaps plus the flow-time offset along the common geodesic."""
    sc = skinning_measure(C, P)
    sn = skinning_measure(C.neighbourhood(s), P)
    moved = hb.frame_flow(sc.atoms, s)
    ends = hb.angle_gap(hb.frame_plus(moved), hb.frame_plus(sn.atoms))
    ends = ends + hb.angle_gap(hb.frame_minus(moved), hb.frame_minus(sn.atoms))
    return float(np.max(ends + np.abs(frame_busemann(moved, sn.atoms))))


def frame_busemann(F1, F2):
    """beta_xi(pi w1, pi w2) for frames with the common forward endpoint xi.

    The horofunction at the base of a unit-determinant frame toward [a : c] is
    -log(a^2 + c^2), which avoids the cancellation in point coordinates far out
    toward xi."""
    F1 = np.asarray(F1, dtype=float)
    F2 = np.asarray(F2, dtype=float)
    return np.log(F2[..., 0] ** 2 + F2[..., 2] ** 2) - np.log(F1[..., 0] ** 2 + F1[..., 2] ** 2)


def rn_between_skinnings(C: ConvexBody, C2: ConvexBody, P: PattersonDensity) -> float:
    """Check dh_* sigma_C / d sigma_C2 (w') = exp(-delta beta_{w+}(pi w, pi w')) per atom.

    h sends the outer normal of C toward xi to the outer normal of C2 toward xi.
    Returns the max relative error between the weight ratio and the formula."""
    theta = P.theta
    ok = ~(C.on_ideal_boundary(theta) | C2.on_ideal_boundary(theta))
    if not np.any(ok):
        raise MeasureError("no shared atoms off the ideal boundaries")
    th, w = theta[ok], P.weights[ok]
    F1, w1 = _skinning_weights(C, th, w, P.basepoint, P.delta)
    F2, w2 = _skinning_weights(C2, th, w, P.basepoint, P.delta)
    predicted = np.exp(-P.delta * frame_busemann(F1, F2))
    return float(np.max(np.abs(w1 / w2 - predicted) / predicted))


# ---------------------------------------------------------------------------
# strong stable conditionals

def ss_conditional(w: UnitTangent, P: PattersonDensity) -> AtomicMeasure:
    """mu^ss_w: atoms v on the strong stable leaf of w with v_- ranging over the
    Patterson atoms (except w_+), weights mu(xi) e^{delta beta_{w+}(pi w, x0)} / d0(xi, w+)^{2 delta}."""
    wp = float(hb.frame_plus(w.F))
    base = complex(hb.frame_base(w.F))
    z0 = P.basepoint
    keep = np.nonzero(hb.angle_gap(P.theta, wp) > ANGLE_TOL)[0]
    xi = P.theta[keep]
    F = hb.frame_from_endpoints(xi, wp)
    # flow each frame onto the horocycle through pi(w); the time is
    # beta_{w+}(pi F, pi w), read off the frames to avoid far-out base points
    F = hb.frame_flow(F, frame_busemann(F, w.F))
    scale = hb.busemann_z(wp, base, z0)
    weights = P.weights[keep] * np.exp(P.delta * scale) / hb.visual_theta(z0, xi, wp) ** (2.0 * P.delta)
    return AtomicMeasure(F, weights, "tangent", z0, keep)


def ss_via_horoball(w: UnitTangent, P: PattersonDensity) -> AtomicMeasure:
    """The flip of the skinning measure of the stable horoball of w."""
    H = Horoball(float(hb.frame_plus(w.F)), complex(hb.frame_base(w.F)))
    sk = skinning_measure(H, P)
    return AtomicMeasure(hb.frame_flip(sk.atoms), sk.weights, "tangent", sk.basepoint, sk.source)


def ss_ball_masses(w_frames, R: float, P: PattersonDensity, minus_arc=None) -> np.ndarray:
    """mu^ss_w of the Hamenstadt ball of radius R about each w (R may be inf).

    minus_arc = (start, width) restricts the backward endpoints of the atoms."""
    W = np.asarray(w_frames, dtype=float).reshape(-1, 4)
    z0 = P.basepoint
    wp, wm = hb.frame_plus(W), hb.frame_minus(W)
    scale = hb.busemann_z(wp, hb.frame_base(W), z0)
    lo, width = (0.0, hb.TWO_PI) if minus_arc is None else minus_arc
    return kernels.ss_mass(
        wp, wm, scale, hb.visual_factor(z0, wp), hb.visual_factor(z0, wm), R,
        P.theta, P.weights, hb.visual_factor(z0, P.theta), P.delta, lo, width,
    )


def ball_mass_positive(w: UnitTangent, R: float, P: PattersonDensity) -> float:
    """mu^ss_w(V_{w,R}) for a single vector."""
    return float(ss_ball_masses(w.F, R, P)[0])


# ---------------------------------------------------------------------------
# disintegration over the stable fibration

@dataclass(frozen=True)
class HopfBox:
    """Product box in Hopf coordinates: arcs for the endpoints and a time window."""

    minus_arc: Tuple[float, float]
    plus_arc: Tuple[float, float]
    t_window: Tuple[float, float]

    def contains(self, minus, plus, t):
        t0, t1 = self.t_window
        return arc_contains(self.minus_arc, minus) & arc_contains(self.plus_arc, plus) & (t >= t0) & (t <= t1)


def disintegration_rhs(C: ConvexBody, P: PattersonDensity, box: HopfBox) -> float:
    """Integral over sigma_C of the stable-leaf measures of the box.

    For w in the support and v' on W^ss(w) the flow line g^s v' stays on the
    geodesic (v'_-, w_+) and crosses the box's time window in a set of length
    t1 - t0; the factor e^{delta beta} cancels the e^{-delta s} in mu^s_w."""
    for e in C.ideal_boundary():
        if arc_contains(box.plus_arc, e, tol=ANGLE_TOL):
            raise MeasureError("box meets the ideal boundary of the body")
    sk = skinning_measure(C, P)
    sel = arc_contains(box.plus_arc, sk.plus)
    if not np.any(sel):
        return 0.0
    W = sk.atoms[sel]
    inner = ss_ball_masses(W, np.inf, P, box.minus_arc)
    t0, t1 = box.t_window
    # time spent in the box along g^s v', with the density cancelling the cocycle
    hop = hb.hopf_time(W, P.basepoint)
    s_lo, s_hi = t0 - hop, t1 - hop
    length = s_hi - s_lo
    return float(np.sum(sk.weights[sel] * inner * length))


def box_mass_estimate(sample: AtomicMeasure, box: HopfBox, n_boot: int = 200, seed: int = 0):
    """Monte-Carlo box mass from a bm_sample, with bootstrap standard error and
    the number of samples inside."""
    xm, xp, t = sample.coords[:, 0], sample.coords[:, 1], sample.coords[:, 2]
    inside = box.contains(xm, xp, t)
    vals = np.where(inside, sample.weights, 0.0)
    est = float(vals.sum())
    se = bootstrap_sum_se(vals, n_boot, seed)
    return est, se, int(inside.sum())


def bootstrap_sum_se(vals, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of a sum of i.i.d. terms (multinomial resampling
    through per-resample counts, so memory stays O(n))."""
    vals = np.asarray(vals, dtype=float)
    n = len(vals)
    if n == 0:
        return 0.0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(7,))))
    sums = np.empty(n_boot)
    for b in range(n_boot):
        counts = np.bincount(rng.integers(0, n, n), minlength=n)
        sums[b] = counts @ vals
    return float(sums.std(ddof=1))
