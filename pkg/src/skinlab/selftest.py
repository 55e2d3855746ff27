"""
Quick exact checks (identity cases, inverse laws, symmetric configurations).
Each check returns (passed, detail); run_all() runs them in a few seconds.
"""

from __future__ import annotations

import math
import traceback
from typing import Callable, List, Tuple

import numpy as np

from . import hyperbolic as hb
from .convex import Ball, GeodesicLine, closest_point, membership, normal_lift, stable_fibration, in_thickening
from .groups import GroupSpec, critical_exponent, enumerate_orbit, poincare_series, regular_growth_check
from .hyperbolic import BoundaryPoint, I, Isometry, Point, UnitTangent
from .measures import (
    bm_density,
    flow_scaling_check,
    patterson_approx,
    patterson_at,
    rn_between_skinnings,
    skinning_measure,
    ss_ball_masses,
)

TOL = 1e-10
CHECKS: List[Tuple[str, Callable]] = []


def check(fn):
    CHECKS.append((fn.__name__, fn))
    return fn


def _hyp():
    return Isometry(2.0, 0.0, 0.0, 0.5)


def _schottky():
    s3 = math.sqrt(3.0)
    return GroupSpec("schottky", [Isometry(2.0, s3, s3, 2.0), Isometry(2.0 + s3, 0.0, 0.0, 2.0 - s3)], "thin")


@check
def dist_identity():
    d = hb.dist(I, I)
    return d == 0.0, d


@check
def apply_identity_and_inverse():
    x = Point(0.3, 1.7)
    g = Isometry(1.2, 0.4, -0.7, 0.6)
    y = hb.apply(Isometry.identity(), x)
    z = hb.apply(g, hb.apply(g.inverse(), x))
    err = max(abs(y.z - x.z), abs(z.z - x.z))
    return err <= TOL, err


@check
def busemann_same_point():
    b = hb.busemann(BoundaryPoint(1.0), Point(0.2, 0.9), Point(0.2, 0.9))
    return abs(b) <= TOL, b


@check
def visual_dist_cases():
    a = hb.visual_dist(I, BoundaryPoint(2.0), BoundaryPoint(2.0))
    b = hb.visual_dist(I, BoundaryPoint.from_real(0.0), BoundaryPoint.infinity())
    return a == 0.0 and abs(b - 1.0) <= TOL, (a, b)


@check
def hopf_round_trip():
    v = UnitTangent.from_base_dir(Point(-0.4, 2.1), 0.9)
    m, p, t = hb.hopf_coords(v)
    w = hb.from_hopf(m, p, t)
    err = float(np.max(np.abs(v.F - w.F)))
    v0 = UnitTangent.toward(I, BoundaryPoint(1.3))
    t0 = hb.hopf_coords(v0)[2]
    return err <= 1e-9 and abs(t0) <= TOL, (err, t0)


@check
def flow_identity_and_group_law():
    v = UnitTangent.from_base_dir(Point(0.5, 0.8), 2.0)
    e0 = float(np.max(np.abs(hb.flow(v, 0.0).F - v.F)))
    e1 = float(np.max(np.abs(hb.flow(hb.flow(v, 0.7), 1.1).F - hb.flow(v, 1.8).F)))
    return max(e0, e1) <= 1e-9, (e0, e1)


@check
def t1_dist_cases():
    v = UnitTangent.from_base_dir(Point(0.1, 1.3), 0.4)
    w = UnitTangent.from_base_dir(Point(-0.6, 0.7), 2.9)
    a = hb.t1_dist(v, v)
    b = abs(hb.t1_dist(hb.flip(v), hb.flip(w)) - hb.t1_dist(v, w))
    return a <= 1e-12 and b <= 1e-9, (a, b)


@check
def hamenstadt_self():
    w = UnitTangent.from_base_dir(Point(0.2, 1.1), 1.0)
    d = hb.hamenstadt_dist(w, w, w)
    return d == 0.0, d


@check
def closest_point_symmetric():
    C = GeodesicLine(float(hb.theta_from_real(0.0)), 0.0)
    p = closest_point(C, BoundaryPoint.from_real(1.0))
    q = closest_point(C, Point(0.0, 2.5))
    err = max(abs(p.z - 1j), abs(q.z - 2.5j))
    return err <= 1e-10 and membership(C, Point(0.0, 3.0)), err


@check
def normal_lift_round_trip():
    C = GeodesicLine(float(hb.theta_from_real(-1.0)), float(hb.theta_from_real(1.0)))
    xi = BoundaryPoint(0.4)
    v = normal_lift(C, xi)
    e1 = hb.angle_gap(v.plus.theta, xi.theta)
    e2 = abs(v.base.z - closest_point(C, xi).z)
    e3 = float(np.max(np.abs(stable_fibration(C, v).F - v.F)))
    return max(e1, e2, e3) <= 1e-9, (e1, e2, e3)


@check
def thickening_cases():
    w = UnitTangent.from_base_dir(Point(0.0, 1.0), 0.3)
    eta = 0.1
    a, _ = in_thickening(w, eta, 1.0, w)
    b, _ = in_thickening(w, eta, 1.0, hb.flow(w, eta / 2))
    c, _ = in_thickening(w, eta, 1.0, hb.flow(w, 2 * eta))
    return a and b and not c, (a, b, c)


@check
def cyclic_hyperbolic_orbit():
    g = _hyp()
    T = enumerate_orbit(GroupSpec("cyclic", [g]), I, 5 * g.translation_length())
    ok = len(T) == 11 and T.disp[0] == 0.0
    return ok, len(T)


@check
def cyclic_hyperbolic_exponent():
    g = _hyp()
    T = enumerate_orbit(GroupSpec("cyclic", [g]), I, 20.0)
    fit = critical_exponent(T)
    gc = regular_growth_check(T, 0.0)
    return abs(fit.delta) < 0.1 and gc.degenerate, (fit.delta, gc.degenerate)


@check
def poincare_series_limits():
    T = enumerate_orbit(_schottky(), I, 12.0)
    big = poincare_series(T, 60.0)
    v1, v2 = poincare_series(T, 1.0), poincare_series(T, 1.1)
    val = lambda r: r[0] if isinstance(r, tuple) else r
    return abs(val(big) - 1.0) < 1e-6 and val(v2) < val(v1), (val(big), val(v1), val(v2))


@check
def cyclic_patterson_two_points():
    g = _hyp()
    T = enumerate_orbit(GroupSpec("cyclic", [g]), I, 16.0)
    P = patterson_approx(T, 0.0, 0.1)
    ends = np.array([hb.theta_from_real(0.0), 0.0])
    near = np.min(hb.angle_gap(P.theta[:, None], ends[None, :]), axis=1)
    return float(np.max(near)) < 1e-3, float(np.max(near))


@check
def patterson_rebase_identity():
    P = patterson_approx(enumerate_orbit(_schottky(), I, 12.0), 0.52)
    Q = patterson_at(P, 1j)
    err = float(np.max(np.abs(Q.weights - P.weights)))
    return err <= 1e-15, err


@check
def bm_density_positive():
    P = patterson_approx(enumerate_orbit(_schottky(), I, 12.0), 0.52)
    d = bm_density(P, P.theta[:50], np.roll(P.theta[:50], 7))
    return bool(np.all(d > 0)), float(d.min())


@check
def skinning_ball_at_basepoint():
    P = patterson_approx(enumerate_orbit(_schottky(), I, 12.0), 0.52)
    r = 0.8
    sk = skinning_measure(Ball(1j, r), P)
    err = float(np.max(np.abs(sk.weights / P.weights[sk.source] - math.exp(P.delta * r))))
    return err <= 1e-9, err


@check
def skinning_zero_flow_and_same_body():
    P = patterson_approx(enumerate_orbit(_schottky(), I, 12.0), 0.52)
    C = GeodesicLine(float(hb.theta_from_real(-1.0)), float(hb.theta_from_real(1.0)))
    e0 = flow_scaling_check(C, P, 0.0)
    rn = rn_between_skinnings(C, C, P)
    return e0 == 0.0 and rn <= TOL, (e0, rn)


@check
def ss_masses_monotone():
    P = patterson_approx(enumerate_orbit(_schottky(), I, 12.0), 0.52)
    C = GeodesicLine(float(hb.theta_from_real(-1.0)), float(hb.theta_from_real(1.0)))
    sk = skinning_measure(C, P)
    W = sk.atoms[:3]
    m = np.array([ss_ball_masses(W, R, P) for R in (0.5, 2.0, 8.0, np.inf)])
    return bool(np.all(np.diff(m, axis=0) >= 0)) and bool(np.all(m[-1] > 0)), m[:, 0].tolist()


@check
def fit_rate_synthetic():
    from .experiments import RateFitError, fit_rate

    t = np.arange(9.0)
    k, se, r2 = fit_rate(t, np.exp(-0.3 * t))
    try:
        fit_rate(t, np.full(9, 0.01))
        refused = False
    except RateFitError:
        refused = True
    return abs(k - 0.3) <= 1e-6 and refused, (k, refused)


def run_all(verbose: bool = False):
    """[(name, passed, detail)] for every check; exceptions count as failures."""
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as e:  # report, never crash the suite
            ok, detail = False, f"{type(e).__name__}: {e}"
            if verbose:
                traceback.print_exc()
        out.append((name, bool(ok), detail))
    return out
