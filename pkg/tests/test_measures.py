import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skinlab import hyperbolic as hb
from skinlab import measures as ms
from skinlab.convex import Ball, GeodesicLine, Horoball
from skinlab.groups import GroupSpec, arc_contains, critical_exponent, enumerate_orbit
from skinlab.hyperbolic import GeometryError, I, Isometry, UnitTangent

from conftest import A_SCH, B_SCH
from oracles import busemann_limit


# --- atomic measures ---------------------------------------------------------

def test_atomic_measure_invariants():
    m = ms.AtomicMeasure([0.1, 0.2, 3.0], [1.0, 2.0, 0.5])
    assert m.total == 3.5
    assert np.allclose(m.normalized().sum(), 1.0)
    with pytest.raises(ms.MeasureError):
        ms.AtomicMeasure([0.1], [-1.0])
    with pytest.raises(ms.MeasureError):
        ms.AtomicMeasure([0.1, 0.2], [1.0, 1.0], kind="tangent")
    with pytest.raises(ValueError):
        m.weights[0] = 2.0


def test_merge_close_atoms():
    th = np.array([1.0, 2.0, 1.0 + 1e-14, hb.TWO_PI - 1e-14, 0.0])
    w = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    t, ww, first = ms.merge_close_atoms(th, w)
    assert len(t) == 3
    assert sorted(ww.tolist()) == [2.0, 4.0, 9.0]
    assert ww.sum() == w.sum()


# --- Patterson density -------------------------------------------------------

def test_patterson_support_in_schottky_arcs(schottky, schottky_patterson):
    P = schottky_patterson
    inside = np.zeros(len(P), bool)
    for wall in schottky.walls:
        inside |= arc_contains(wall.arc, P.theta)
    assert P.weights[~inside].sum() < 1e-6
    assert P.base.total == pytest.approx(1.0, abs=1e-12)
    assert np.all(P.disp >= P.horizon)


def test_patterson_cyclic_two_points():
    T = enumerate_orbit(GroupSpec("cyclic", [A_SCH]), I, 16.0)
    P = ms.patterson_approx(T, 0.0, 0.5, horizon=10.0)
    fixed = np.array([hb.theta_from_real(-1.0), hb.theta_from_real(1.0)])
    gaps = np.min(hb.angle_gap(P.theta[:, None], fixed[None, :]), axis=1)
    assert np.all(gaps < 1e-4)
    near = [P.weights[hb.angle_gap(P.theta, f) < 1e-4].sum() for f in fixed]
    assert min(near) > 0.3


def test_patterson_errors(schottky_table):
    with pytest.raises(ms.MeasureError):
        ms.patterson_approx(schottky_table, 0.5, 0.4)
    with pytest.raises(ms.MeasureError):
        ms.patterson_approx(schottky_table, 0.5, horizon=16.0)


def test_patterson_offset_refinement(schottky):
    # the two truncated measures approach each other as the radius grows
    T = enumerate_orbit(schottky, I, 20.0)
    d = critical_exponent(T).delta
    tv = []
    for r in (12.0, 16.0, 20.0):
        a = ms.patterson_approx(T.restrict(r), d, d + 0.15)
        b = ms.patterson_approx(T.restrict(r), d, d + 0.3)
        tv.append(ms.binned_tv(a.theta, a.weights, b.theta, b.weights))
    assert tv[0] > tv[1] > tv[2]


def test_equivariance_residual(schottky_patterson):
    for g in (A_SCH, B_SCH, A_SCH.inverse()):
        assert ms.equivariance_residual(schottky_patterson, g) < 0.05


def test_patterson_at(schottky_patterson):
    P = schottky_patterson
    same = ms.patterson_at(P, I)
    assert np.array_equal(same.weights, P.weights)
    y, z = 0.4 + 1.3j, -0.2 + 2.5j
    chained = ms.patterson_at(P.rebase(y), z)
    direct = ms.patterson_at(P, z)
    assert np.max(np.abs(chained.weights / direct.weights - 1)) < 1e-10
    d = hb.dist_z(1j, 2j)
    ratio = ms.patterson_at(P, 2j).total / P.base.total
    assert math.exp(-P.delta * d) <= ratio <= math.exp(P.delta * d)


# --- Bowen-Margulis ----------------------------------------------------------

def test_bm_density_laws(schottky_patterson):
    P = schottky_patterson
    # visual distance 1 between antipodal points seen from i
    assert ms.bm_density(P, 0.0, math.pi) == pytest.approx(1.0, abs=1e-12)
    a, b = 0.3, 1.1
    c = 2.0 * math.asin(0.5 * math.sin(0.5 * (b - a)))  # half the visual distance
    assert ms.bm_density(P, a, a + c) / ms.bm_density(P, a, b) == pytest.approx(2 ** (2 * P.delta), rel=1e-12)
    with pytest.raises(GeometryError):
        ms.bm_density(P, 1.0, 1.0)


def test_bm_basepoint_independence(schottky_patterson):
    P = schottky_patterson
    x = 0.7 + 1.9j
    i, j = np.arange(0, 200), np.arange(200, 400)
    m0 = P.weights[i] * P.weights[j] * ms.bm_density(P, P.theta[j], P.theta[i])
    Px = P.rebase(x)
    mx = Px.weights[i] * Px.weights[j] * ms.bm_density(Px, P.theta[j], P.theta[i])
    assert np.max(np.abs(mx / m0 - 1)) < 1e-9


def test_bm_sample_properties(schottky_patterson):
    P = schottky_patterson
    s1 = ms.bm_sample(P, 5000, (0.0, 1.0), seed=3)
    s2 = ms.bm_sample(P, 5000, (0.0, 1.0), seed=3)
    s3 = ms.bm_sample(P, 5000, (2.5, 3.5), seed=3)
    assert np.all(s1.weights > 0)
    assert np.array_equal(s1.weights, s2.weights) and np.array_equal(s1.atoms, s2.atoms)
    assert np.allclose(s3.coords[:, 2] - s1.coords[:, 2], 2.5, atol=1e-12)
    assert np.allclose(hb.hopf_time(s1.atoms, P.basepoint), s1.coords[:, 2], atol=1e-9)
    assert np.all(s1.coords[:, 0] != s1.coords[:, 1])


def test_bm_sample_plus_marginal(schottky_patterson):
    P = schottky_patterson
    s = ms.bm_sample(P, 100_000, (0.0, 1.0), seed=11)
    xp = s.coords[:, 1]
    tv = ms.binned_tv(xp, np.ones(len(xp)), P.theta, P.weights)
    assert tv < 0.05


def test_bm_sample_total_is_unbiased(schottky_patterson):
    P = schottky_patterson
    # exact off-diagonal mass over a short window from the atoms
    th, w = P.theta[::7], P.weights[::7]
    Q = ms.PattersonDensity(ms.AtomicMeasure(th, w), P.delta, P.s_used, P.orbit_radius)
    D = hb.visual_theta(1j, th[:, None], th[None, :])
    np.fill_diagonal(D, np.inf)
    exact = float(np.sum(w[:, None] * w[None, :] * D ** (-2 * P.delta)))
    s = ms.bm_sample(Q, 200_000, (0.0, 1.0), seed=5)
    se = ms.bootstrap_sum_se(s.weights, 50, seed=1)
    assert abs(s.total - exact) < 4 * se


# --- skinning measures -------------------------------------------------------

def test_skinning_ball_at_basepoint(schottky_patterson):
    P = schottky_patterson
    r = 1.7
    sk = ms.skinning_measure(Ball(1j, r), P)
    assert np.allclose(sk.weights / P.weights, math.exp(P.delta * r), rtol=1e-12)
    assert np.allclose(hb.dist_z(1j, hb.frame_base(sk.atoms)), r, atol=1e-9)


def test_skinning_singleton(schottky_patterson):
    P = schottky_patterson
    sk = ms.skinning_measure(Ball(1j, 0.0), P)
    assert np.allclose(sk.weights, P.weights, rtol=1e-14)
    assert np.allclose(hb.frame_base(sk.atoms), 1j, atol=1e-12)
    assert np.max(hb.angle_gap(hb.frame_plus(sk.atoms), P.theta)) < 1e-12


def test_skinning_horoball_against_limit_oracle(schottky_patterson):
    P = schottky_patterson
    H = Horoball(0.75, 0.3 + 2j)  # centre in a gap between the Schottky arcs
    sk = ms.skinning_measure(H, P)
    feet = hb.frame_base(sk.atoms)
    for k in range(0, len(sk), max(1, len(sk) // 25)):
        th = float(sk.plus[k])
        x = float(hb.real_from_theta(th))
        beta = busemann_limit(x, complex(feet[k]), 1j)
        expect = P.weights[sk.source[k]] * math.exp(-P.delta * beta)
        assert sk.weights[k] == pytest.approx(expect, rel=1e-6)


def test_skinning_support_and_drop(schottky, schottky_patterson, axis_a):
    P = schottky_patterson
    sk = ms.skinning_measure(axis_a, P)
    inside = np.zeros(len(sk), bool)
    for wall in schottky.walls:
        inside |= arc_contains(wall.arc, sk.plus)
    assert inside.all()
    # a measure sitting on the ideal boundary of the body is rejected
    Q = ms.PattersonDensity(ms.AtomicMeasure([axis_a.plus], [1.0]), P.delta, P.s_used, P.orbit_radius)
    with pytest.raises(ms.MeasureError):
        ms.skinning_measure(axis_a, Q)
    heavy = ms.PattersonDensity(ms.AtomicMeasure([axis_a.plus, 1.0], [1.0, 1.0]), P.delta, P.s_used, P.orbit_radius)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert len(ms.skinning_measure(axis_a, heavy)) == 1
    assert any("dropped" in str(r.message) for r in rec)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 4.0))
def test_flow_scaling_property(s):
    P = _small_patterson()
    C = GeodesicLine(float(hb.theta_from_real(-1.0)), float(hb.theta_from_real(1.0)))
    assert ms.flow_scaling_check(C, P, s) < 1e-9


_SMALL = {}


def _small_patterson():
    if "P" not in _SMALL:
        G = GroupSpec("schottky", [A_SCH, B_SCH])
        T = enumerate_orbit(G, I, 12.0)
        _SMALL["P"] = ms.patterson_approx(T, 0.52, horizon=8.0)
    return _SMALL["P"]


def test_flow_scaling(schottky_patterson, axis_a):
    P = schottky_patterson
    assert ms.flow_scaling_check(axis_a, P, 0.0) == 0.0
    assert ms.flow_scaling_check(axis_a, P, 1.0) < 1e-9
    assert ms.flow_scaling_geometry(axis_a, P, 1.0) < 1e-9
    s = 1.3
    ratio = ms.skinning_measure(axis_a.neighbourhood(s), P).total / ms.skinning_measure(axis_a, P).total
    assert ratio == pytest.approx(math.exp(P.delta * s), rel=1e-9)
    H = Horoball(0.75, 0.2 + 2j)
    assert ms.flow_scaling_check(H, P, 2.0) < 1e-9
    assert ms.flow_scaling_check(Ball(0.1 + 1.5j, 0.5), P, 2.0) < 1e-9


def test_basepoint_independence_of_skinning(schottky_patterson, axis_a):
    P = schottky_patterson
    a = ms.skinning_measure(axis_a, P)
    b = ms.skinning_measure(axis_a, P.rebase(2j))
    assert np.max(np.abs(b.weights / a.weights - 1)) < 1e-9
    assert np.array_equal(a.atoms, b.atoms)


def test_skinning_equivariance(schottky_patterson, axis_a):
    P = schottky_patterson
    sk = ms.skinning_measure(axis_a, P)
    for g in (A_SCH, B_SCH, B_SCH.inverse()):
        moved = ms.skinning_measure(axis_a.transform(g), P.transform(g))
        pushed = hb.mat_mul(g.matrix, sk.atoms)
        assert np.array_equal(moved.source, sk.source)
        assert np.max(np.abs(moved.weights / sk.weights - 1)) < 1e-9
        gap = hb.angle_gap(hb.frame_plus(pushed), hb.frame_plus(moved.atoms))
        assert np.max(gap + np.abs(ms.frame_busemann(pushed, moved.atoms))) < 1e-8


# --- Radon-Nikodym between skinning measures --------------------------------

def test_rn_between_skinnings(schottky_patterson, axis_a):
    P = schottky_patterson
    assert ms.rn_between_skinnings(axis_a, axis_a, P) == 0.0
    H = Horoball(0.75, 0.2 + 2j)
    assert ms.rn_between_skinnings(axis_a, H, P) < 1e-9
    s = 0.8
    assert ms.rn_between_skinnings(axis_a, axis_a.neighbourhood(s), P) < 1e-9
    # for C' = N_s C the derivative is e^{-delta s} for every atom
    a = ms.skinning_measure(axis_a, P)
    b = ms.skinning_measure(axis_a.neighbourhood(s), P)
    assert np.allclose(a.weights / b.weights, math.exp(-P.delta * s), rtol=1e-12)


# --- strong stable conditionals ---------------------------------------------

def test_ss_conditional_matches_horoball_skinning(schottky_patterson, axis_a):
    P = schottky_patterson
    sk = ms.skinning_measure(axis_a, P)
    for k in (0, len(sk) // 3, len(sk) - 1):
        w = UnitTangent(tuple(sk.atoms[k]))
        a = ms.ss_conditional(w, P)
        b = ms.ss_via_horoball(w, P)
        assert np.array_equal(a.source, b.source)
        assert np.max(np.abs(a.weights / b.weights - 1)) < 1e-10
        assert np.max(hb.angle_gap(hb.frame_minus(a.atoms), hb.frame_minus(b.atoms))) < 1e-10
        assert np.max(np.abs(ms.frame_busemann(a.atoms, b.atoms))) < 1e-8


def test_ss_conditional_flow_scaling(schottky_patterson, axis_a):
    P = schottky_patterson
    w = UnitTangent(tuple(ms.skinning_measure(axis_a, P).atoms[10]))
    t = 1.7
    a = ms.ss_conditional(w, P)
    b = ms.ss_conditional(hb.flow(w, -t), P)
    # (g^{-t})_* mu^ss_w = e^{-delta t} mu^ss_{g^{-t} w}
    assert np.allclose(a.weights, math.exp(-P.delta * t) * b.weights, rtol=1e-10)
    moved = hb.frame_flow(a.atoms, -t)
    assert np.max(np.abs(ms.frame_busemann(moved, b.atoms))) < 1e-8


def test_ball_masses(schottky_patterson, axis_a):
    P = schottky_patterson
    sk = ms.skinning_measure(axis_a, P)
    w = UnitTangent(tuple(sk.atoms[5]))
    full = ms.ss_conditional(w, P)
    assert ms.ball_mass_positive(w, np.inf, P) == pytest.approx(full.total, rel=1e-10)
    radii = [0.5, 1.0, 2.0, 4.0, 16.0]
    vals = [ms.ball_mass_positive(w, r, P) for r in radii]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    # direct sum over the conditional's atoms inside the Hamenstadt ball
    dH = hb.hamenstadt_theta(1j, hb.frame_base(w.F), hb.frame_plus(w.F), hb.frame_minus(full.atoms), hb.frame_minus(w.F))
    assert vals[2] == pytest.approx(full.weights[dH < 2.0].sum(), rel=1e-10)
    # positivity of the small ball masses at R = 2 on the axis of a generator
    assert len(P) >= 1000
    assert np.all(ms.ss_ball_masses(sk.atoms[::10], 2.0, P) > 0)


# --- disintegration ----------------------------------------------------------

def test_disintegration_box(schottky_patterson, axis_a):
    P = schottky_patterson
    box = ms.HopfBox((5.759586531581288, 1.05), (2.617993877991494, 1.05), (-0.5, 0.5))
    rhs = ms.disintegration_rhs(axis_a, P, box)
    sample = ms.bm_sample(P, 200_000, (-0.5, 0.5), seed=21)
    est, se, hits = ms.box_mass_estimate(sample, box, n_boot=100)
    assert hits > 100
    assert abs(est - rhs) <= 3 * se
    empty = ms.HopfBox((0.75, 0.2), (2.617993877991494, 1.05), (-0.5, 0.5))  # minus arc in a gap
    assert ms.disintegration_rhs(axis_a, P, empty) == 0.0
    with pytest.raises(ms.MeasureError):
        ms.disintegration_rhs(axis_a, P, ms.HopfBox((0.0, 1.0), (axis_a.plus - 0.1, 0.2), (0.0, 1.0)))
